#pragma once

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "crysflow/crystal.hpp"

namespace crysflow {

struct MatchTolerances {
    double site_tol = 0.3;     // fraction of (V/n)^(1/3)
    double lattice_tol = 0.2;  // fractional length difference
    double angle_tol = 5.0;    // degrees

    void validate() const;
};

inline constexpr double kOccupancyMatchTol = 0.05;

/// A structure reduced to its primitive, Niggli-reduced cell. Building one is
/// the expensive part of matching, so dedupe prepares each input once.
struct PreparedStructure {
    struct PrimSite {
        std::string species;
        Vec3 frac;
        double occupancy;
        std::size_t source;  // index into the original structure's sites
    };

    Composition composition;
    Mat3 basis;  // columns
    std::vector<PrimSite> sites;
    double volume = 0.0;
    std::string order_key;  // canonical text used to orient the comparison
};

PreparedStructure prepare_structure(const CrystalStructure& s, const MatchTolerances& t);

struct MatchResult {
    bool matched = false;
    /// (site of x, site of y) pairs over the primitive representatives, in
    /// original site indices.
    std::vector<std::pair<std::size_t, std::size_t>> mapping;
};

MatchResult match_prepared(const PreparedStructure& x, const PreparedStructure& y, const MatchTolerances& t);

MatchResult structures_match(const CrystalStructure& x, const CrystalStructure& y, const MatchTolerances& t = {});

struct DedupeResult {
    std::vector<std::vector<std::size_t>> groups;  // groups[g][0] is the representative
    std::vector<std::size_t> representatives;
};

/// Greedy leader clustering in input order. The OpenMP version parallelises
/// preparation and the representative probes but returns exactly what the
/// serial reference returns.
DedupeResult dedupe(std::span<const CrystalStructure> pool, const MatchTolerances& t = {});
DedupeResult dedupe_serial(std::span<const CrystalStructure> pool, const MatchTolerances& t = {});

/// True when `candidate` matches any structure in `references` (parallel probe).
bool matches_any(const PreparedStructure& candidate, std::span<const PreparedStructure> references,
                 const MatchTolerances& t);

}  // namespace crysflow
