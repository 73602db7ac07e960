#include "crysflow/funnel.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include <fmt/format.h>

#include "crysflow/cif.hpp"
#include "crysflow/elements.hpp"
#include "crysflow/error.hpp"

namespace crysflow::screen {

namespace fs = std::filesystem;

OxidationTable default_oxidation_table() {
    return {{"Fe", {2, 3}}, {"Co", {2, 3}}, {"Ni", {2, 3}}, {"V", {2, 3, 4, 5}}, {"S", {-2}}};
}

void FunnelConfig::validate() const {
    match.validate();
    if (!(min_dist > 0.0)) throw Error(ErrorCode::BadConfig, "screen.min_dist must be positive");
    if (!(ehull_threshold > 0.0)) throw Error(ErrorCode::BadConfig, "screen.ehull_threshold must be positive");
    if (!(bandgap_min > 0.0 && bandgap_max > bandgap_min))
        throw Error(ErrorCode::BadConfig, "screen.bandgap_min must be positive and below screen.bandgap_max");
    for (const auto& el : choice_elements)
        if (required_elements.count(el))
            throw Error(ErrorCode::BadConfig, fmt::format("{} is both required and a choice element", el));
}

namespace {

std::set<std::string> element_set(const std::vector<std::string>& items) {
    std::set<std::string> out;
    for (const auto& s : items) {
        if (!is_element(s)) throw Error(ErrorCode::BadElement, "unknown element in config: " + s);
        out.insert(s);
    }
    return out;
}

}  // namespace

FunnelConfig FunnelConfig::from_config(const KvConfig& cfg, const std::string& base_dir) {
    FunnelConfig c;
    if (cfg.has("screen.required")) c.required_elements = element_set(cfg.get_list("screen.required"));
    if (cfg.has("screen.choice")) c.choice_elements = element_set(cfg.get_list("screen.choice"));
    c.min_dist = cfg.get_double("screen.min_dist", c.min_dist);
    c.ehull_threshold = cfg.get_double("screen.ehull_threshold", c.ehull_threshold);
    c.bandgap_min = cfg.get_double("screen.bandgap_min", c.bandgap_min);
    c.bandgap_max = cfg.get_double("screen.bandgap_max", c.bandgap_max);
    c.match.site_tol = cfg.get_double("match.site_tol", c.match.site_tol);
    c.match.lattice_tol = cfg.get_double("match.lattice_tol", c.match.lattice_tol);
    c.match.angle_tol = cfg.get_double("match.angle_tol", c.match.angle_tol);
    for (const auto& [el, value] : cfg.with_prefix("oxidation.")) {
        if (!is_element(el)) throw Error(ErrorCode::BadElement, "unknown element in oxidation table: " + el);
        std::vector<int> states;
        for (const auto& item : split_list(value)) {
            try {
                std::size_t used = 0;
                const int v = std::stoi(item, &used);
                if (used != item.size()) throw std::invalid_argument(item);
                states.push_back(v);
            } catch (const std::exception&) {
                throw Error(ErrorCode::BadConfig, fmt::format("oxidation.{}: bad state '{}'", el, item));
            }
        }
        c.oxidation[el] = std::move(states);
    }
    if (auto db = cfg.get("screen.reference_db")) {
        fs::path p(*db);
        if (p.is_relative()) p = fs::path(base_dir) / p;
        c.reference_db = load_structures(p.string());
    }
    c.validate();
    return c;
}

Verdict stage1_composition(const Candidate& c, const FunnelConfig& cfg) {
    const auto comp = composition_of(c.structure);
    std::set<std::string> present;
    for (const auto& [el, amt] : comp.amounts()) present.insert(el);
    for (const auto& el : cfg.required_elements)
        if (!present.count(el)) return Verdict::reject("missing-required");
    std::size_t choices = 0;
    for (const auto& el : present) {
        if (cfg.choice_elements.count(el))
            ++choices;
        else if (!cfg.required_elements.count(el))
            return Verdict::reject("extra-element");
    }
    if (choices == 0) return Verdict::reject("missing-choice");
    if (choices > 1) return Verdict::reject("extra-element");
    return Verdict::ok();
}

std::map<std::string, long> integer_counts(const Composition& comp, double tol, int max_multiplier) {
    for (int m = 1; m <= max_multiplier; ++m) {
        std::map<std::string, long> counts;
        bool integral = true;
        for (const auto& [el, amt] : comp.amounts()) {
            const double scaled = amt * m;
            const double r = std::round(scaled);
            if (std::abs(scaled - r) > tol || r < 1.0) {
                integral = false;
                break;
            }
            counts[el] = static_cast<long>(r);
        }
        if (!integral) continue;
        long g = 0;
        for (const auto& [el, n] : counts) g = std::gcd(g, n);
        if (g > 1)
            for (auto& [el, n] : counts) n /= g;
        return counts;
    }
    throw Error(ErrorCode::NonIntegerComposition,
                fmt::format("{} has no integer multiple up to {}", comp.formula(), max_multiplier));
}

bool valence_feasible(const std::map<std::string, long>& counts, const OxidationTable& table) {
    long total_lo = 0;
    long total_hi = 0;
    long lo = 0;  // bounds every partial sum
    long hi = 0;
    for (const auto& [el, n] : counts) {
        const auto it = table.find(el);
        if (it == table.end() || it->second.empty() || n < 0) return false;
        const auto [mn, mx] = std::minmax_element(it->second.begin(), it->second.end());
        total_lo += n * *mn;
        total_hi += n * *mx;
        lo += n * std::min(*mn, 0);
        hi += n * std::max(*mx, 0);
    }
    if (total_lo > 0 || total_hi < 0) return false;
    // reachable[q - lo] marks charge q as attainable by the atoms seen so far.
    const auto width = static_cast<std::size_t>(hi - lo + 1);
    std::vector<char> reachable(width, 0);
    std::vector<char> next(width, 0);
    long cur_lo = 0;
    long cur_hi = 0;
    reachable[static_cast<std::size_t>(-lo)] = 1;
    for (const auto& [el, n] : counts) {
        const auto& states = table.at(el);
        for (long atom = 0; atom < n; ++atom) {
            std::fill(next.begin(), next.end(), 0);
            long new_lo = cur_hi;
            long new_hi = cur_lo;
            for (long q = cur_lo; q <= cur_hi; ++q) {
                if (!reachable[static_cast<std::size_t>(q - lo)]) continue;
                for (int s : states) {
                    next[static_cast<std::size_t>(q + s - lo)] = 1;
                    new_lo = std::min(new_lo, q + s);
                    new_hi = std::max(new_hi, q + s);
                }
            }
            reachable.swap(next);
            cur_lo = new_lo;
            cur_hi = new_hi;
        }
    }
    return reachable[static_cast<std::size_t>(-lo)] != 0;
}

Verdict stage2_valence(const Candidate& c, const FunnelConfig& cfg) {
    std::map<std::string, long> counts;
    try {
        counts = integer_counts(composition_of(c.structure));
    } catch (const Error& e) {
        if (e.code() == ErrorCode::NonIntegerComposition) return Verdict::reject("indeterminate");
        throw;
    }
    for (const auto& [el, n] : counts)
        if (!cfg.oxidation.count(el)) return Verdict::reject("indeterminate");
    return valence_feasible(counts, cfg.oxidation) ? Verdict::ok() : Verdict::reject("charge-imbalance");
}

Verdict stage4_geometry(const Candidate& c, const FunnelConfig& cfg) {
    return validate_geometry(c.structure, cfg.min_dist).valid ? Verdict::ok() : Verdict::reject("overlap");
}

Verdict stage5_stability(const Candidate& c, const PhaseDiagram& refs, const FunnelConfig& cfg) {
    if (!c.energy_per_atom) return Verdict::reject("missing-energy");
    HullEntry e{c.id, composition_of(c.structure), *c.energy_per_atom};
    double ehull = 0.0;
    try {
        ehull = refs.energy_above_hull(e);
    } catch (const Error& err) {
        if (err.code() == ErrorCode::MissingReference || err.code() == ErrorCode::Infeasible)
            return Verdict::reject("missing-reference");
        throw;
    }
    return ehull <= cfg.ehull_threshold + kHullTol ? Verdict::ok() : Verdict::reject("above-hull");
}

Verdict stage6_bandgap(const Candidate& c, const FunnelConfig& cfg) {
    if (!c.bandgap) return Verdict::reject("missing-bandgap");
    const double g = *c.bandgap;
    return (g > cfg.bandgap_min && g < cfg.bandgap_max) ? Verdict::ok() : Verdict::reject("out-of-window");
}

namespace {

constexpr std::array<const char*, 7> kStageNames = {"composition", "valence",   "dedupe",  "geometry",
                                                    "stability",   "bandgap",   "novelty"};

class Runner {
public:
    Runner(std::span<const Candidate> corpus, const FunnelConfig& cfg, bool parallel)
        : corpus_(corpus), cfg_(cfg), parallel_(parallel) {
        alive_.resize(corpus.size());
        std::iota(alive_.begin(), alive_.end(), std::size_t{0});
    }

    template <class Fn>
    void filter(int stage, Fn&& fn) {
        std::vector<Verdict> verdicts(alive_.size());
        const auto n = static_cast<std::ptrdiff_t>(alive_.size());
        if (parallel_) {
#pragma omp parallel for schedule(dynamic, 4)
            for (std::ptrdiff_t i = 0; i < n; ++i)
                verdicts[static_cast<std::size_t>(i)] = guarded(fn, corpus_[alive_[static_cast<std::size_t>(i)]]);
        } else {
            for (std::ptrdiff_t i = 0; i < n; ++i)
                verdicts[static_cast<std::size_t>(i)] = guarded(fn, corpus_[alive_[static_cast<std::size_t>(i)]]);
        }
        apply(stage, verdicts);
    }

    void apply(int stage, const std::vector<Verdict>& verdicts) {
        StageRecord rec;
        rec.stage = stage;
        rec.name = kStageNames[static_cast<std::size_t>(stage - 1)];
        rec.in = alive_.size();
        std::vector<std::size_t> kept;
        for (std::size_t i = 0; i < alive_.size(); ++i) {
            if (verdicts[i].pass) {
                kept.push_back(alive_[i]);
            } else {
                ++rec.reasons[verdicts[i].reason];
                report_.rejections[corpus_[alive_[i]].id] = fmt::format("{}:{}", stage, verdicts[i].reason);
            }
        }
        alive_ = std::move(kept);
        rec.out = alive_.size();
        report_.stages.push_back(std::move(rec));
    }

    [[nodiscard]] const std::vector<std::size_t>& alive() const { return alive_; }
    [[nodiscard]] bool parallel() const { return parallel_; }

    FunnelReport finish() {
        for (auto i : alive_) report_.survivors.push_back(corpus_[i].id);
        return std::move(report_);
    }

private:
    // Exceptions cannot leave an OpenMP region; any stray domain error becomes
    // a rejection carrying its code.
    template <class Fn>
    static Verdict guarded(Fn& fn, const Candidate& c) {
        try {
            return fn(c);
        } catch (const Error& e) {
            return Verdict::reject(fmt::format("error-{}", to_string(e.code())));
        }
    }

    std::span<const Candidate> corpus_;
    const FunnelConfig& cfg_;
    bool parallel_;
    std::vector<std::size_t> alive_;
    FunnelReport report_;
};

FunnelReport run(std::span<const Candidate> corpus, std::span<const HullEntry> references, const FunnelConfig& cfg,
                 bool parallel) {
    if (corpus.empty()) throw Error(ErrorCode::EmptyInput, "screening corpus is empty");
    cfg.validate();
    {
        std::set<std::string> ids;
        for (const auto& c : corpus)
            if (!ids.insert(c.id).second) throw Error(ErrorCode::DuplicateName, "duplicate candidate id " + c.id);
    }
    Runner r(corpus, cfg, parallel);

    r.filter(1, [&](const Candidate& c) { return stage1_composition(c, cfg); });
    r.filter(2, [&](const Candidate& c) { return stage2_valence(c, cfg); });

    {
        std::vector<CrystalStructure> pool;
        for (auto i : r.alive()) pool.push_back(corpus[i].structure);
        std::vector<Verdict> verdicts(pool.size(), Verdict::reject("duplicate"));
        if (!pool.empty()) {
            const auto d = parallel ? dedupe(pool, cfg.match) : dedupe_serial(pool, cfg.match);
            for (auto rep : d.representatives) verdicts[rep] = Verdict::ok();
        }
        r.apply(3, verdicts);
    }

    r.filter(4, [&](const Candidate& c) { return stage4_geometry(c, cfg); });

    {
        std::optional<PhaseDiagram> pd;
        if (!r.alive().empty()) pd.emplace(std::vector<HullEntry>(references.begin(), references.end()));
        r.filter(5, [&](const Candidate& c) { return stage5_stability(c, *pd, cfg); });
    }

    r.filter(6, [&](const Candidate& c) { return stage6_bandgap(c, cfg); });

    {
        std::vector<PreparedStructure> refs(cfg.reference_db.size());
        if (!r.alive().empty()) {
            const auto n = static_cast<std::ptrdiff_t>(refs.size());
#pragma omp parallel for schedule(dynamic) if (parallel)
            for (std::ptrdiff_t i = 0; i < n; ++i)
                refs[static_cast<std::size_t>(i)] = prepare_structure(cfg.reference_db[static_cast<std::size_t>(i)], cfg.match);
        }
        r.filter(7, [&](const Candidate& c) {
            if (refs.empty()) return Verdict::ok();
            const auto p = prepare_structure(c.structure, cfg.match);
            bool known = false;
            if (parallel) {
                known = matches_any(p, refs, cfg.match);
            } else {
                for (const auto& ref : refs)
                    if (match_prepared(p, ref, cfg.match).matched) {
                        known = true;
                        break;
                    }
            }
            return known ? Verdict::reject("known") : Verdict::ok();
        });
    }
    return r.finish();
}

}  // namespace

FunnelReport run_funnel(std::span<const Candidate> corpus, std::span<const HullEntry> references,
                        const FunnelConfig& cfg) {
    return run(corpus, references, cfg, true);
}

FunnelReport run_funnel_serial(std::span<const Candidate> corpus, std::span<const HullEntry> references,
                               const FunnelConfig& cfg) {
    return run(corpus, references, cfg, false);
}

json to_json(const FunnelReport& r) {
    json j;
    json stages = json::array();
    for (const auto& s : r.stages) {
        json reasons = json::object();
        for (const auto& [why, n] : s.reasons) reasons[why] = n;
        stages.push_back({{"stage", s.stage}, {"name", s.name}, {"in", s.in}, {"out", s.out}, {"reasons", reasons}});
    }
    j["stages"] = stages;
    j["survivors"] = r.survivors;
    json rej = json::object();
    for (const auto& [id, why] : r.rejections) rej[id] = why;
    j["rejections"] = rej;
    return j;
}

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<fs::path> cif_files(const std::string& dir) {
    std::error_code ec;
    if (!fs::is_directory(dir, ec)) throw Error(ErrorCode::Io, dir + " is not a directory");
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().extension() == ".cif") files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    return files;
}

CrystalStructure parse_file(const fs::path& p) {
    try {
        return parse_cif(slurp(p));
    } catch (const Error& e) {
        throw Error(e.code(), p.filename().string() + ": " + e.what());
    }
}

}  // namespace

std::vector<Candidate> load_corpus(const std::string& dir) {
    std::vector<Candidate> out;
    for (const auto& path : cif_files(dir)) {
        Candidate c{path.stem().string(), parse_file(path), std::nullopt, std::nullopt};
        auto meta_path = path;
        meta_path.replace_extension(".meta");
        if (fs::exists(meta_path)) {
            const auto meta = KvConfig::load(meta_path.string());
            c.id = meta.get_or("id", c.id);
            if (meta.has("energy_per_atom")) c.energy_per_atom = meta.get_double("energy_per_atom", 0.0);
            if (meta.has("bandgap")) c.bandgap = meta.get_double("bandgap", 0.0);
        }
        out.push_back(std::move(c));
    }
    return out;
}

std::vector<CrystalStructure> load_structures(const std::string& dir) {
    std::vector<CrystalStructure> out;
    for (const auto& path : cif_files(dir)) out.push_back(parse_file(path));
    return out;
}

}  // namespace crysflow::screen
