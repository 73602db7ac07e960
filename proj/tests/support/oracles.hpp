#pragma once

// Independent reference computations used to check the library. None of
// these call the code they check.

#include <map>
#include <string>
#include <vector>

#include "crysflow/composition.hpp"
#include "crysflow/funnel.hpp"
#include "crysflow/hull.hpp"

namespace crysflow::testing {

/// Lowest mixed energy per atom at `target` over every subset of at most
/// (d + 1) entries that reproduces its atom fractions with nonnegative
/// weights, solved as a small dense least-squares system per subset.
double brute_force_hull_energy(const std::vector<HullEntry>& entries, const Composition& target);

inline double brute_force_ehull(const std::vector<HullEntry>& entries, const HullEntry& query) {
    return query.energy_per_atom - brute_force_hull_energy(entries, query.composition);
}

/// Enumerates every multiset of oxidation states per element (how many atoms
/// take each state) and reports whether any sums to zero.
bool valence_exhaustive(const std::map<std::string, long>& counts, const screen::OxidationTable& table);

}  // namespace crysflow::testing
