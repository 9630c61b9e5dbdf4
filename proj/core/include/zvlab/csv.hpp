#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <variant>
#include <vector>

namespace zvlab {

using CsvCell = std::variant<std::string, double, std::int64_t>;

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<CsvCell>> rows;

    void add_row(std::vector<CsvCell> row) { rows.push_back(std::move(row)); }
};

/// Renders header + rows with LF endings; doubles carry 17 significant digits.
std::string render_csv(const CsvTable& table);

/// Writes render_csv(table) to path, creating parent directories.
void emit_csv(const CsvTable& table, const std::filesystem::path& path);

/// Parsed file: header plus raw string cells.
struct CsvText {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

CsvText read_csv(const std::filesystem::path& path);

/// Locale-free parse of a decimal produced by format_double.
double parse_double(const std::string& s);

}  // namespace zvlab
