#include "zvlab/config.hpp"

#include "zvlab/error.hpp"
#include "zvlab/stats.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace zvlab {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double to_real(const std::string& key, const std::string& v) {
    double out = 0.0;
    const char* end = v.data() + v.size();
    auto [ptr, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc() || ptr != end || !std::isfinite(out)) {
        throw UsageError("config: '" + key + "' expects a number, got '" + v + "'");
    }
    return out;
}

std::vector<std::string> split(const std::string& v) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(v);
    while (std::getline(in, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

}  // namespace

Config Config::parse_text(const std::string& text, const std::string& origin) {
    Config c;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw UsageError(origin + ":" + std::to_string(lineno) + ": expected key = value");
        }
        const std::string key = trim(line.substr(0, eq));
        if (key.empty()) throw UsageError(origin + ":" + std::to_string(lineno) + ": empty key");
        c.set(key, trim(line.substr(eq + 1)));
    }
    return c;
}

Config Config::parse_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read config file " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_text(buf.str(), path.string());
}

void Config::set(const std::string& key, const std::string& value) { entries_[key] = value; }

Config Config::with_defaults(const std::map<std::string, std::string>& defaults, const std::string& context) const {
    Config out;
    out.entries_ = defaults;
    for (const auto& [k, v] : entries_) {
        if (!defaults.count(k)) {
            std::string known;
            for (const auto& [dk, dv] : defaults) known += (known.empty() ? "" : ", ") + dk;
            throw UsageError(context + ": unknown key '" + k + "' (known: " + known + ")");
        }
        out.entries_[k] = v;
    }
    return out;
}

std::string Config::text(const std::string& key) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) throw UsageError("config: missing key '" + key + "'");
    return it->second;
}

double Config::real(const std::string& key) const { return to_real(key, text(key)); }

double Config::positive(const std::string& key) const {
    const double v = real(key);
    if (!(v > 0.0)) throw UsageError("config: '" + key + "' must be positive");
    return v;
}

std::int64_t Config::integer(const std::string& key) const {
    const std::string v = text(key);
    std::int64_t out = 0;
    const char* end = v.data() + v.size();
    auto [ptr, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc() || ptr != end) {
        // Accept integral values written in floating notation, e.g. 1e5.
        const double r = to_real(key, v);
        if (r != std::floor(r) || std::abs(r) > 9.0e15) {
            throw UsageError("config: '" + key + "' expects an integer, got '" + v + "'");
        }
        return static_cast<std::int64_t>(r);
    }
    return out;
}

std::size_t Config::count(const std::string& key) const {
    const std::int64_t v = integer(key);
    if (v <= 0) throw UsageError("config: '" + key + "' must be a positive integer");
    return static_cast<std::size_t>(v);
}

std::uint64_t Config::seed() const {
    const std::string v = text("seed");
    std::uint64_t out = 0;
    const char* end = v.data() + v.size();
    auto [ptr, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc() || ptr != end) throw UsageError("config: 'seed' expects an unsigned integer");
    return out;
}

bool Config::flag(const std::string& key) const {
    const std::string v = text(key);
    if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
    if (v == "0" || v == "false" || v == "no" || v == "off") return false;
    throw UsageError("config: '" + key + "' expects a boolean");
}

std::vector<double> Config::reals(const std::string& key) const {
    std::vector<double> out;
    for (const auto& item : split(text(key))) out.push_back(to_real(key, item));
    if (out.empty()) throw UsageError("config: '" + key + "' is empty");
    return out;
}

std::vector<std::string> Config::words(const std::string& key) const { return split(text(key)); }

std::string Config::canonical() const {
    std::string out;
    for (const auto& [k, v] : entries_) {
        if (k == "out") continue;
        out += k;
        out += '=';
        out += v;
        out += '\n';
    }
    return out;
}

std::string Config::fingerprint() const { return zvlab::fingerprint(canonical()); }

}  // namespace zvlab
