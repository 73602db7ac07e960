#pragma once

#include <string>
#include <string_view>

#include "crysflow/crystal.hpp"

namespace crysflow {

/// Reads the first data block of a CIF: cell parameters, an optional
/// space-group label (kept as text, never expanded) and the atom-site loop.
/// Unrecognised single-valued tags survive in `extra_tags`.
///
/// Errors: MissingBlock, BadNumber, BadElement, InvalidStructure.
CrystalStructure parse_cif(std::string_view text);

/// Inverse of parse_cif up to coordinate wrapping and printed precision.
/// The occupancy column appears only when some site is partially occupied.
std::string write_cif(const CrystalStructure& s);

/// CIF numeric field: strips a trailing "(n)" uncertainty. Throws BadNumber.
double parse_cif_number(std::string_view field, std::string_view tag);

}  // namespace crysflow
