#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "crysflow/composition.hpp"

namespace crysflow {

struct HullEntry {
    std::string id;
    Composition composition;
    double energy_per_atom = 0.0;  // eV/atom
};

inline constexpr double kHullTol = 1e-8;

/// Composition–energy diagram. Energy above hull is a small LP per query
/// (minimise the mixed energy of diagram phases that reproduce the query's
/// atom fractions), so no facets are ever built. Immutable after construction
/// and safe to query concurrently.
class PhaseDiagram {
public:
    /// build_diagram. Throws MissingReference when an element has no
    /// single-element entry.
    explicit PhaseDiagram(std::vector<HullEntry> entries);

    [[nodiscard]] const std::vector<std::string>& elements() const noexcept { return elements_; }
    [[nodiscard]] const std::vector<HullEntry>& entries() const noexcept { return entries_; }
    [[nodiscard]] const std::vector<std::string>& stable_ids() const noexcept { return stable_ids_; }
    [[nodiscard]] bool is_stable(const std::string& id) const;

    /// eV/atom above the lower hull; negative for external queries below it.
    [[nodiscard]] double energy_above_hull(const HullEntry& e) const;

    /// Hull phases (entry index, atom fraction) whose mixture is the hull
    /// energy at e's composition. Fractions are strictly positive.
    [[nodiscard]] std::vector<std::pair<std::size_t, double>> decomposition(const HullEntry& e) const;

private:
    struct Solved {
        double hull_energy;
        std::vector<std::pair<std::size_t, double>> phases;
    };
    [[nodiscard]] Solved solve(const HullEntry& e) const;

    std::vector<std::string> elements_;
    std::vector<HullEntry> entries_;
    std::vector<std::size_t> participants_;      // lowest-energy entry per composition
    std::vector<std::vector<double>> fractions_;  // [element][participant]
    std::vector<std::string> stable_ids_;
};

/// Batch energy-above-hull kernels (OpenMP and serial reference).
std::vector<double> energies_above_hull(const PhaseDiagram& pd, std::span<const HullEntry> queries);
std::vector<double> energies_above_hull_serial(const PhaseDiagram& pd, std::span<const HullEntry> queries);

/// Looks `target` up by id, then by reduced formula (lowest energy wins,
/// first on ties). With `energy` set, returns a new query point at the
/// target's composition instead. Throws BadFormula when nothing matches.
HullEntry resolve_target(std::span<const HullEntry> entries, const std::string& target,
                         std::optional<double> energy = std::nullopt);

/// Entry list: one "id formula energy_per_atom" record per line; '#' starts a
/// comment. Throws BadFormula / BadNumber with the line number.
std::vector<HullEntry> read_entries(std::istream& in);
std::vector<HullEntry> read_entries_file(const std::string& path);
void write_entries(std::ostream& out, std::span<const HullEntry> entries);

}  // namespace crysflow
