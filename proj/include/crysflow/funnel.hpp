#pragma once

#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "crysflow/crystal.hpp"
#include "crysflow/hull.hpp"
#include "crysflow/kvconfig.hpp"
#include "crysflow/match.hpp"
#include "crysflow/trajectory.hpp"

namespace crysflow::screen {

using OxidationTable = std::map<std::string, std::vector<int>>;

/// Fe/Co/Ni {+2,+3}, V {+2..+5}, S {-2}.
OxidationTable default_oxidation_table();

struct FunnelConfig {
    std::set<std::string> required_elements{"V", "S"};
    std::set<std::string> choice_elements{"Fe", "Co", "Ni"};
    OxidationTable oxidation = default_oxidation_table();
    MatchTolerances match;
    double min_dist = 0.5;
    double ehull_threshold = 0.025;
    double bandgap_max = 2.0;
    double bandgap_min = 1e-6;
    std::vector<CrystalStructure> reference_db;

    void validate() const;

    /// Keys: screen.required, screen.choice, screen.min_dist,
    /// screen.ehull_threshold, screen.bandgap_min, screen.bandgap_max,
    /// screen.reference_db (directory, relative to `base_dir`),
    /// match.site_tol, match.lattice_tol, match.angle_tol and one
    /// oxidation.<Element> list per element (replaces that element's entry).
    static FunnelConfig from_config(const KvConfig& cfg, const std::string& base_dir = ".");
};

struct Candidate {
    std::string id;
    CrystalStructure structure;
    std::optional<double> energy_per_atom;
    std::optional<double> bandgap;
};

struct Verdict {
    bool pass = true;
    std::string reason;  // empty on pass

    static Verdict ok() { return {}; }
    static Verdict reject(std::string why) { return {false, std::move(why)}; }
};

Verdict stage1_composition(const Candidate& c, const FunnelConfig& cfg);

/// Smallest integer multiple (<= max_multiplier) of the occupancy-weighted
/// amounts that is integral within `tol`, divided by the gcd. Throws
/// NonIntegerComposition.
std::map<std::string, long> integer_counts(const Composition& comp, double tol = 1e-3, int max_multiplier = 100);

/// True when one allowed state per atom can sum to zero charge. Dynamic
/// programming over reachable charge sums.
bool valence_feasible(const std::map<std::string, long>& counts, const OxidationTable& table);

Verdict stage2_valence(const Candidate& c, const FunnelConfig& cfg);
Verdict stage4_geometry(const Candidate& c, const FunnelConfig& cfg);
/// Inclusive threshold; `kHullTol` absorbs LP round-off at the boundary.
Verdict stage5_stability(const Candidate& c, const PhaseDiagram& refs, const FunnelConfig& cfg);
Verdict stage6_bandgap(const Candidate& c, const FunnelConfig& cfg);

struct StageRecord {
    int stage = 0;
    std::string name;
    std::size_t in = 0;
    std::size_t out = 0;
    std::map<std::string, std::size_t> reasons;
};

struct FunnelReport {
    std::vector<StageRecord> stages;
    std::vector<std::string> survivors;
    /// id -> "stage:reason" for every rejected candidate.
    std::map<std::string, std::string> rejections;
};

/// Stages 1..7 in fixed order. The hull for stage 5 is built from
/// `references` alone; candidates never compete with each other there.
FunnelReport run_funnel(std::span<const Candidate> corpus, std::span<const HullEntry> references,
                        const FunnelConfig& cfg);
FunnelReport run_funnel_serial(std::span<const Candidate> corpus, std::span<const HullEntry> references,
                               const FunnelConfig& cfg);

json to_json(const FunnelReport& r);

/// Every *.cif in `dir` (sorted by name). A sidecar `<stem>.meta` in the
/// key-value config format may set id, energy_per_atom and bandgap.
std::vector<Candidate> load_corpus(const std::string& dir);
std::vector<CrystalStructure> load_structures(const std::string& dir);

}  // namespace crysflow::screen
