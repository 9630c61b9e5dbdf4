#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace zvlab {

/// Flat key=value experiment configuration. Later assignments win, so a file
/// followed by command-line overrides behaves as expected.
class Config {
public:
    Config() = default;

    /// Lines "key = value"; '#' starts a comment. Throws IoError / UsageError.
    static Config parse_file(const std::filesystem::path& path);
    static Config parse_text(const std::string& text, const std::string& origin = "<text>");

    void set(const std::string& key, const std::string& value);
    bool has(const std::string& key) const { return entries_.count(key) != 0; }
    const std::map<std::string, std::string>& entries() const noexcept { return entries_; }

    /// Entries of this config laid over defaults; keys missing from defaults
    /// are rejected.
    Config with_defaults(const std::map<std::string, std::string>& defaults, const std::string& context) const;

    std::string text(const std::string& key) const;
    double real(const std::string& key) const;
    double positive(const std::string& key) const;
    std::size_t count(const std::string& key) const;  ///< positive integer
    std::int64_t integer(const std::string& key) const;
    std::uint64_t seed() const;
    bool flag(const std::string& key) const;
    std::vector<double> reals(const std::string& key) const;  ///< comma separated
    std::vector<std::string> words(const std::string& key) const;

    /// Sorted "key=value\n" lines, excluding output location keys.
    std::string canonical() const;
    std::string fingerprint() const;

private:
    std::map<std::string, std::string> entries_;
};

}  // namespace zvlab
