#include "zvlab/csv.hpp"

#include "zvlab/error.hpp"
#include "zvlab/stats.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace zvlab {

namespace {

std::string render_cell(const CsvCell& cell) {
    struct Visitor {
        std::string operator()(const std::string& s) const { return s; }
        std::string operator()(double v) const { return format_double(v); }
        std::string operator()(std::int64_t v) const { return std::to_string(v); }
    };
    return std::visit(Visitor{}, cell);
}

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

}  // namespace

std::string render_csv(const CsvTable& table) {
    std::string out;
    for (std::size_t i = 0; i < table.header.size(); ++i) {
        if (i) out += ',';
        out += table.header[i];
    }
    out += '\n';
    for (const auto& row : table.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) out += ',';
            out += render_cell(row[i]);
        }
        out += '\n';
    }
    return out;
}

void emit_csv(const CsvTable& table, const std::filesystem::path& path) {
    std::error_code ec;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    const std::string text = render_csv(table);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw IoError("write failed: " + path.string());
}

CsvText read_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open for reading: " + path.string());
    CsvText out;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (first) {
            out.header = split_line(line);
            first = false;
        } else {
            out.rows.push_back(split_line(line));
        }
    }
    if (first) throw IoError("empty csv file: " + path.string());
    return out;
}

double parse_double(const std::string& s) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) throw IoError("not a number: '" + s + "'");
    return v;
}

}  // namespace zvlab
