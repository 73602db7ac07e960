#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace crysflow {

/// The single configuration format shared by screen, agent and reward:
///
///     # comment
///     key = value
///     oxidation.Fe = 2, 3
///
/// Keys are dotted identifiers; values run to end of line and are trimmed.
/// Lists are comma separated. A repeated key is an error.
class KvConfig {
public:
    static KvConfig parse(std::istream& in);
    static KvConfig parse_text(std::string_view text);
    static KvConfig load(const std::string& path);

    [[nodiscard]] bool has(const std::string& key) const { return values_.count(key) != 0; }
    [[nodiscard]] std::optional<std::string> get(const std::string& key) const;
    [[nodiscard]] std::string get_or(const std::string& key, const std::string& fallback) const;
    [[nodiscard]] double get_double(const std::string& key, double fallback) const;
    [[nodiscard]] long get_int(const std::string& key, long fallback) const;
    [[nodiscard]] bool get_bool(const std::string& key, bool fallback) const;
    [[nodiscard]] std::vector<std::string> get_list(const std::string& key) const;

    /// Keys beginning with `prefix`, with the prefix removed.
    [[nodiscard]] std::map<std::string, std::string> with_prefix(const std::string& prefix) const;

    void set(const std::string& key, const std::string& value) { values_[key] = value; }

    /// Sorted "key = value" lines; stable across runs.
    [[nodiscard]] std::string canonical() const;

    [[nodiscard]] const std::map<std::string, std::string>& values() const noexcept { return values_; }

private:
    std::map<std::string, std::string> values_;
};

/// 64-bit FNV-1a, rendered as 16 hex digits.
std::string fnv1a_hex(std::string_view data);

std::vector<std::string> split_list(std::string_view text);
std::string trim(std::string_view s);

}  // namespace crysflow
