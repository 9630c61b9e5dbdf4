#pragma once

#include "zvlab/config.hpp"
#include "zvlab/csv.hpp"
#include "zvlab/error.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace zvlab {

struct Assertion {
    std::string name;
    double value = 0.0;
    double bound = 0.0;
    std::string relation;  ///< "<=", ">=", "in"
    bool pass = false;
};

struct OutputFile {
    std::string name;  ///< file name inside the output directory
    CsvTable table;
};

/// Result of one experiment. outputs and assertions are deterministic given
/// the config; timings are not and are never written to CSV.
struct RunRecord {
    std::string recipe;
    std::string fingerprint;
    std::uint64_t seed = 0;
    std::vector<OutputFile> outputs;
    std::vector<Assertion> assertions;
    std::map<std::string, double> timings;  ///< seconds per phase
    double wall_seconds = 0.0;

    bool passed() const;
    const Assertion* find(const std::string& name) const;
};

/// A library error raised while running a recipe, tagged with the config.
class ExperimentError : public Error {
public:
    ExperimentError(const std::string& recipe, const std::string& fp, const std::string& what)
        : Error("experiment " + recipe + " [" + fp + "]: " + what), fingerprint_(fp) {}
    const std::string& fingerprint() const noexcept { return fingerprint_; }

private:
    std::string fingerprint_;
};

const std::vector<std::string>& recipe_names();

/// Every key a recipe accepts, with its default value.
std::map<std::string, std::string> recipe_defaults(const std::string& recipe);

/// Runs config["experiment"] with defaults filled in. Writes the CSV outputs
/// (plus checks.csv) into config["out"] when that key is non-empty.
RunRecord run_experiment(const Config& config);

void write_record(const RunRecord& rec, const std::filesystem::path& dir);

/// Human-readable multi-line summary for the terminal.
std::string record_summary(const RunRecord& rec);

}  // namespace zvlab
