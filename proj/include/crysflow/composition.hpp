#pragma once

#include <map>
#include <string>
#include <string_view>

namespace crysflow {

/// Element amounts plus their reduced form. Keys are kept sorted, so two
/// compositions compare deterministically.
class Composition {
public:
    Composition() = default;
    explicit Composition(std::map<std::string, double> amounts);

    /// Parses "CoV4S8", "Li2ZrCl6", "Fe0.5Co0.5V2S4", "A1B3". Counts must be
    /// positive; repeated symbols accumulate. Symbols are any capital letter
    /// followed by lowercase letters, so placeholder axes such as "A"/"B" work.
    static Composition parse(std::string_view formula);

    [[nodiscard]] const std::map<std::string, double>& amounts() const noexcept { return amounts_; }
    [[nodiscard]] const std::map<std::string, double>& reduced() const noexcept { return reduced_; }

    [[nodiscard]] double amount(const std::string& element) const;
    [[nodiscard]] double total() const noexcept;
    [[nodiscard]] double fraction(const std::string& element) const;

    /// Compact formula of the reduced form, elements in alphabetical order.
    [[nodiscard]] std::string reduced_formula() const;
    [[nodiscard]] std::string formula() const;

    /// Reduced forms equal within `tol` per element.
    [[nodiscard]] bool same_reduced(const Composition& other, double tol = 1e-6) const;

    /// Stable key for bucketing by reduced composition.
    [[nodiscard]] std::string reduced_key() const { return reduced_formula(); }

private:
    std::map<std::string, double> amounts_;
    std::map<std::string, double> reduced_;
};

}  // namespace crysflow
