#include "crysflow/elements.hpp"

#include <algorithm>
#include <array>
#include <cctype>

namespace crysflow {

namespace {

constexpr std::array<std::string_view, 118> kSymbols = {
    "H",  "He", "Li", "Be", "B",  "C",  "N",  "O",  "F",  "Ne", "Na", "Mg", "Al", "Si", "P",
    "S",  "Cl", "Ar", "K",  "Ca", "Sc", "Ti", "V",  "Cr", "Mn", "Fe", "Co", "Ni", "Cu", "Zn",
    "Ga", "Ge", "As", "Se", "Br", "Kr", "Rb", "Sr", "Y",  "Zr", "Nb", "Mo", "Tc", "Ru", "Rh",
    "Pd", "Ag", "Cd", "In", "Sn", "Sb", "Te", "I",  "Xe", "Cs", "Ba", "La", "Ce", "Pr", "Nd",
    "Pm", "Sm", "Eu", "Gd", "Tb", "Dy", "Ho", "Er", "Tm", "Yb", "Lu", "Hf", "Ta", "W",  "Re",
    "Os", "Ir", "Pt", "Au", "Hg", "Tl", "Pb", "Bi", "Po", "At", "Rn", "Fr", "Ra", "Ac", "Th",
    "Pa", "U",  "Np", "Pu", "Am", "Cm", "Bk", "Cf", "Es", "Fm", "Md", "No", "Lr", "Rf", "Db",
    "Sg", "Bh", "Hs", "Mt", "Ds", "Rg", "Cn", "Nh", "Fl", "Mc", "Lv", "Ts", "Og"};

}  // namespace

bool is_element(std::string_view symbol) noexcept {
    return atomic_number(symbol).has_value();
}

std::optional<int> atomic_number(std::string_view symbol) noexcept {
    auto it = std::find(kSymbols.begin(), kSymbols.end(), symbol);
    if (it == kSymbols.end()) return std::nullopt;
    return static_cast<int>(it - kSymbols.begin()) + 1;
}

std::optional<std::string> element_from_label(std::string_view text) {
    std::size_t n = 0;
    while (n < text.size() && n < 2 && std::isalpha(static_cast<unsigned char>(text[n]))) ++n;
    if (n == 0) return std::nullopt;
    // Prefer the two-letter reading ("Co1" is cobalt, not carbon).
    for (std::size_t len = n; len >= 1; --len) {
        std::string candidate(text.substr(0, len));
        candidate[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(candidate[0])));
        for (std::size_t k = 1; k < candidate.size(); ++k)
            candidate[k] = static_cast<char>(std::tolower(static_cast<unsigned char>(candidate[k])));
        if (is_element(candidate)) return candidate;
    }
    return std::nullopt;
}

}  // namespace crysflow
