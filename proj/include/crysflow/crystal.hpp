#pragma once

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "crysflow/composition.hpp"
#include "crysflow/lattice.hpp"

namespace crysflow {

/// Tolerance for coordinate and occupancy equality.
inline constexpr double kCoordTol = 1e-6;

struct Site {
    std::string species;
    Vec3 frac{0.0, 0.0, 0.0};  // wrapped into [0, 1)
    double occupancy = 1.0;
};

class CrystalStructure {
public:
    CrystalStructure() = default;

    /// Wraps coordinates and checks every invariant; throws InvalidStructure
    /// or BadElement.
    CrystalStructure(Lattice lattice, std::vector<Site> sites, std::optional<std::string> label = std::nullopt);

    [[nodiscard]] const Lattice& lattice() const noexcept { return lattice_; }
    [[nodiscard]] const std::vector<Site>& sites() const noexcept { return sites_; }
    [[nodiscard]] std::size_t size() const noexcept { return sites_.size(); }
    [[nodiscard]] const std::optional<std::string>& label() const noexcept { return label_; }

    // Opaque CIF passthrough; not interpreted.
    std::optional<std::string> space_group;
    std::vector<std::pair<std::string, std::string>> extra_tags;

    [[nodiscard]] Vec3 cartesian(std::size_t i) const;

private:
    Lattice lattice_;
    std::vector<Site> sites_;
    std::optional<std::string> label_;
};

/// Occupancy-weighted element counts.
Composition composition_of(const CrystalStructure& s);

/// Minimum Cartesian distance from site i to any periodic image of site j.
/// i == j measures the distance to the nearest nonzero image.
double min_image_distance(const CrystalStructure& s, std::size_t i, std::size_t j);

struct SitePair {
    std::size_t i = 0;
    std::size_t j = 0;
    double distance = 0.0;
};

struct GeometryReport {
    bool valid = true;
    std::vector<SitePair> offending;
};

inline constexpr double kDefaultMinDist = 0.5;

/// Flags every site pair (and self-image) closer than min_dist. Sites sharing a
/// position within kCoordTol are partial-occupancy partners and are exempt.
GeometryReport validate_geometry(const CrystalStructure& s, double min_dist = kDefaultMinDist);

/// Fraction-weighted arithmetic mean of each lattice parameter.
Lattice vegard_lattice(std::span<const std::pair<Lattice, double>> end_members);

/// Exact n×1×1 supercell along a.
CrystalStructure make_supercell(const CrystalStructure& s, int na, int nb = 1, int nc = 1);

}  // namespace crysflow
