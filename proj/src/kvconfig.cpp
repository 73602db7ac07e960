#include "crysflow/kvconfig.hpp"

#include <cctype>
#include <cstdint>
#include <fstream>
#include <istream>
#include <sstream>

#include <fmt/format.h>

#include "crysflow/error.hpp"

namespace crysflow {

std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

std::vector<std::string> split_list(std::string_view text) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= text.size()) {
        std::size_t comma = text.find(',', start);
        if (comma == std::string_view::npos) comma = text.size();
        std::string item = trim(text.substr(start, comma - start));
        if (!item.empty()) out.push_back(std::move(item));
        start = comma + 1;
    }
    return out;
}

KvConfig KvConfig::parse(std::istream& in) {
    KvConfig cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string body = trim(line);
        if (body.empty() || body.front() == '#') continue;
        const auto eq = body.find('=');
        if (eq == std::string::npos) throw Error(ErrorCode::BadConfig, fmt::format("line {}: expected key = value", lineno));
        std::string key = trim(std::string_view(body).substr(0, eq));
        std::string value = trim(std::string_view(body).substr(eq + 1));
        if (key.empty()) throw Error(ErrorCode::BadConfig, fmt::format("line {}: empty key", lineno));
        for (char c : key)
            if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '_' || c == '-'))
                throw Error(ErrorCode::BadConfig, fmt::format("line {}: bad key '{}'", lineno, key));
        if (!cfg.values_.emplace(key, value).second)
            throw Error(ErrorCode::BadConfig, fmt::format("line {}: duplicate key '{}'", lineno, key));
    }
    return cfg;
}

KvConfig KvConfig::parse_text(std::string_view text) {
    std::istringstream in{std::string(text)};
    return parse(in);
}

KvConfig KvConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot open config " + path);
    return parse(in);
}

std::optional<std::string> KvConfig::get(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    return it->second;
}

std::string KvConfig::get_or(const std::string& key, const std::string& fallback) const {
    return get(key).value_or(fallback);
}

double KvConfig::get_double(const std::string& key, double fallback) const {
    auto v = get(key);
    if (!v) return fallback;
    try {
        std::size_t used = 0;
        double d = std::stod(*v, &used);
        if (used == v->size()) return d;
    } catch (const std::exception&) {
    }
    throw Error(ErrorCode::BadConfig, fmt::format("{} = '{}' is not a number", key, *v));
}

long KvConfig::get_int(const std::string& key, long fallback) const {
    auto v = get(key);
    if (!v) return fallback;
    try {
        std::size_t used = 0;
        long n = std::stol(*v, &used);
        if (used == v->size()) return n;
    } catch (const std::exception&) {
    }
    throw Error(ErrorCode::BadConfig, fmt::format("{} = '{}' is not an integer", key, *v));
}

bool KvConfig::get_bool(const std::string& key, bool fallback) const {
    auto v = get(key);
    if (!v) return fallback;
    if (*v == "true" || *v == "1" || *v == "yes" || *v == "on") return true;
    if (*v == "false" || *v == "0" || *v == "no" || *v == "off") return false;
    throw Error(ErrorCode::BadConfig, fmt::format("{} = '{}' is not a boolean", key, *v));
}

std::vector<std::string> KvConfig::get_list(const std::string& key) const {
    auto v = get(key);
    if (!v) return {};
    return split_list(*v);
}

std::map<std::string, std::string> KvConfig::with_prefix(const std::string& prefix) const {
    std::map<std::string, std::string> out;
    for (auto it = values_.lower_bound(prefix); it != values_.end() && it->first.rfind(prefix, 0) == 0; ++it)
        out.emplace(it->first.substr(prefix.size()), it->second);
    return out;
}

std::string KvConfig::canonical() const {
    std::string out;
    for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
    return out;
}

std::string fnv1a_hex(std::string_view data) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return fmt::format("{:016x}", h);
}

}  // namespace crysflow
