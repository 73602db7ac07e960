#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace crysflow {

/// True when `symbol` is one of the 118 IUPAC element symbols (case-sensitive).
bool is_element(std::string_view symbol) noexcept;

/// Atomic number for a valid symbol.
std::optional<int> atomic_number(std::string_view symbol) noexcept;

/// Pulls an element symbol out of a CIF type symbol or site label
/// ("Fe2+", "O2-", "CL1", "Co3a"). Returns nullopt when no element prefix fits.
std::optional<std::string> element_from_label(std::string_view text);

}  // namespace crysflow
