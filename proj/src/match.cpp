#include "crysflow/match.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>

#include <Eigen/LU>
#include <fmt/format.h>

#include "crysflow/cif.hpp"
#include "crysflow/error.hpp"
#include "crysflow/niggli.hpp"

namespace crysflow {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kPrimitiveOccTol = 1e-3;

double min_image(const Mat3& basis, Vec3 delta) {
    for (int k = 0; k < 3; ++k) delta[k] = periodic_delta(delta[k]);
    double best = std::numeric_limits<double>::infinity();
    for (int x = -1; x <= 1; ++x)
        for (int y = -1; y <= 1; ++y)
            for (int z = -1; z <= 1; ++z) best = std::min(best, (basis * (delta + Vec3(x, y, z))).norm());
    return best;
}

std::array<double, 6> cell_params(const Mat3& m) {
    const Lattice l = Lattice::from_matrix(m);
    return l.params();
}

// Kuhn's augmenting-path bipartite matching; adjacency is small.
bool perfect_matching(const std::vector<std::vector<std::size_t>>& adj, std::size_t right_size,
                      std::vector<std::size_t>& match_left) {
    constexpr auto kNone = std::numeric_limits<std::size_t>::max();
    std::vector<std::size_t> match_right(right_size, kNone);
    std::vector<char> visited;
    auto augment = [&](auto&& self, std::size_t u) -> bool {
        for (std::size_t v : adj[u]) {
            if (visited[v]) continue;
            visited[v] = 1;
            if (match_right[v] == kNone || self(self, match_right[v])) {
                match_right[v] = u;
                return true;
            }
        }
        return false;
    };
    for (std::size_t u = 0; u < adj.size(); ++u) {
        visited.assign(right_size, 0);
        if (!augment(augment, u)) return false;
    }
    match_left.assign(adj.size(), kNone);
    for (std::size_t v = 0; v < right_size; ++v)
        if (match_right[v] != kNone) match_left[match_right[v]] = v;
    return true;
}

bool same_kind(const std::string& sa, double oa, const std::string& sb, double ob, double occ_tol) {
    return sa == sb && std::abs(oa - ob) <= occ_tol;
}

// Lattice translations (fractional, excluding zero) that map the structure onto itself.
std::vector<Vec3> self_translations(const CrystalStructure& s, double tol) {
    const auto& sites = s.sites();
    const Mat3 m = s.lattice().matrix();
    std::map<std::pair<std::string, long>, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < sites.size(); ++i)
        groups[{sites[i].species, std::lround(sites[i].occupancy * 1000.0)}].push_back(i);
    const auto rarest = std::min_element(groups.begin(), groups.end(),
                                         [](const auto& l, const auto& r) { return l.second.size() < r.second.size(); });
    const std::size_t anchor = rarest->second.front();
    std::vector<Vec3> out;
    for (std::size_t k : rarest->second) {
        if (k == anchor) continue;
        Vec3 t = sites[k].frac - sites[anchor].frac;
        bool ok = true;
        for (std::size_t i = 0; i < sites.size() && ok; ++i) {
            const Vec3 moved = sites[i].frac + t;
            bool hit = false;
            for (std::size_t j = 0; j < sites.size() && !hit; ++j) {
                if (!same_kind(sites[i].species, sites[i].occupancy, sites[j].species, sites[j].occupancy,
                               kPrimitiveOccTol))
                    continue;
                hit = min_image(m, sites[j].frac - moved) <= tol;
            }
            ok = hit;
        }
        if (ok) {
            for (int c = 0; c < 3; ++c) t[c] = periodic_delta(t[c]);
            out.push_back(t);
        }
    }
    return out;
}

// Basis of the lattice generated by the cell vectors plus the translations.
std::optional<Mat3> primitive_basis(const Mat3& cell, const std::vector<Vec3>& translations) {
    const double target = std::abs(cell.determinant()) / static_cast<double>(translations.size() + 1);
    std::vector<Vec3> candidates;
    auto add = [&](const Vec3& frac) {
        const Vec3 v = cell * frac;
        if (v.norm() < 1e-8) return;
        for (const auto& c : candidates)
            if ((c - v).norm() < 1e-6 || (c + v).norm() < 1e-6) return;
        candidates.push_back(v);
    };
    for (int k = 0; k < 3; ++k) add(Vec3::Unit(k));
    for (const auto& t : translations)
        for (int x = -1; x <= 1; ++x)
            for (int y = -1; y <= 1; ++y)
                for (int z = -1; z <= 1; ++z) add(t + Vec3(x, y, z));
    std::sort(candidates.begin(), candidates.end(), [](const Vec3& l, const Vec3& r) { return l.norm() < r.norm(); });
    if (candidates.size() > 40) candidates.resize(40);
    for (std::size_t i = 0; i < candidates.size(); ++i)
        for (std::size_t j = i + 1; j < candidates.size(); ++j)
            for (std::size_t k = j + 1; k < candidates.size(); ++k) {
                Mat3 b;
                b.col(0) = candidates[i];
                b.col(1) = candidates[j];
                b.col(2) = candidates[k];
                const double det = b.determinant();
                if (std::abs(std::abs(det) - target) <= 1e-6 * target) {
                    if (det < 0) b.col(2) = -b.col(2);
                    return b;
                }
            }
    return std::nullopt;
}

std::vector<IMat3> signed_permutations() {
    std::vector<IMat3> out;
    std::array<int, 3> perm{0, 1, 2};
    do {
        for (int signs = 0; signs < 8; ++signs) {
            IMat3 m = IMat3::Zero();
            for (int c = 0; c < 3; ++c) m(perm[c], c) = (signs >> c) & 1 ? -1 : 1;
            out.push_back(m);
        }
    } while (std::next_permutation(perm.begin(), perm.end()));
    return out;
}

const std::vector<IMat3>& all_signed_permutations() {
    static const std::vector<IMat3> perms = signed_permutations();
    return perms;
}

MatchResult match_oriented(const PreparedStructure& x, const PreparedStructure& y, const MatchTolerances& t) {
    MatchResult none;
    if (!x.composition.same_reduced(y.composition)) return none;
    const std::size_t n = x.sites.size();
    if (n != y.sites.size()) return none;

    const double vpa_x = x.volume / static_cast<double>(n);
    const double vpa_y = y.volume / static_cast<double>(n);
    const double scale = std::cbrt(vpa_x / vpa_y);
    const Mat3 ybasis = y.basis * scale;
    const auto px = cell_params(x.basis);
    const double site_cut = t.site_tol * std::cbrt(vpa_x);

    // Anchor on the rarest species of x.
    std::map<std::string, std::size_t> counts;
    for (const auto& s : x.sites) ++counts[s.species];
    std::size_t anchor = 0;
    for (std::size_t i = 1; i < n; ++i)
        if (counts[x.sites[i].species] < counts[x.sites[anchor].species]) anchor = i;

    for (const IMat3& perm : all_signed_permutations()) {
        const Mat3 pm = perm.cast<double>();
        const auto py = cell_params(ybasis * pm);
        bool lattice_ok = true;
        for (int k = 0; k < 3 && lattice_ok; ++k)
            lattice_ok = std::abs(px[k] - py[k]) <= t.lattice_tol * px[k];
        for (int k = 3; k < 6 && lattice_ok; ++k) lattice_ok = std::abs(px[k] - py[k]) <= t.angle_tol;
        if (!lattice_ok) continue;

        // Fractional coordinates of y in the relabelled basis.
        std::vector<Vec3> yf(n);
        const Mat3 inv = pm.transpose();
        for (std::size_t j = 0; j < n; ++j) yf[j] = inv * y.sites[j].frac;

        const auto& xa = x.sites[anchor];
        for (std::size_t j0 = 0; j0 < n; ++j0) {
            if (!same_kind(xa.species, xa.occupancy, y.sites[j0].species, y.sites[j0].occupancy, kOccupancyMatchTol))
                continue;
            const Vec3 shift = yf[j0] - xa.frac;
            std::vector<std::vector<std::size_t>> adj(n);
            bool feasible = true;
            for (std::size_t i = 0; i < n && feasible; ++i) {
                const Vec3 moved = x.sites[i].frac + shift;
                for (std::size_t j = 0; j < n; ++j) {
                    if (!same_kind(x.sites[i].species, x.sites[i].occupancy, y.sites[j].species, y.sites[j].occupancy,
                                   kOccupancyMatchTol))
                        continue;
                    if (min_image(x.basis, yf[j] - moved) <= site_cut) adj[i].push_back(j);
                }
                feasible = !adj[i].empty();
            }
            if (!feasible) continue;
            std::vector<std::size_t> assignment;
            if (!perfect_matching(adj, n, assignment)) continue;
            MatchResult out;
            out.matched = true;
            for (std::size_t i = 0; i < n; ++i) out.mapping.emplace_back(x.sites[i].source, y.sites[assignment[i]].source);
            return out;
        }
    }
    return none;
}

}  // namespace

void MatchTolerances::validate() const {
    if (!(site_tol > 0.0 && lattice_tol > 0.0 && angle_tol > 0.0 && angle_tol < 90.0))
        throw Error(ErrorCode::BadConfig,
                    fmt::format("match tolerances must be positive with angle_tol < 90 (got {}, {}, {})", site_tol,
                                lattice_tol, angle_tol));
}

PreparedStructure prepare_structure(const CrystalStructure& s, const MatchTolerances& t) {
    t.validate();
    PreparedStructure out;
    out.composition = composition_of(s);
    out.order_key = write_cif(s);

    const Mat3 cell = s.lattice().matrix();
    const double volume = std::abs(cell.determinant());
    const double prim_tol = 0.5 * t.site_tol * std::cbrt(volume / static_cast<double>(s.size()));
    const auto translations = self_translations(s, prim_tol);

    Mat3 prim = cell;
    if (!translations.empty() && s.size() % (translations.size() + 1) == 0) {
        if (auto b = primitive_basis(cell, translations)) prim = *b;
    }
    const ReducedBasis reduced = niggli_reduce_basis(prim);
    const Mat3 to_frac = reduced.basis.inverse();

    for (std::size_t i = 0; i < s.size(); ++i) {
        const auto& site = s.sites()[i];
        Vec3 f = to_frac * (cell * site.frac);
        for (int k = 0; k < 3; ++k) f[k] = wrap_unit(f[k]);
        bool duplicate = false;
        for (const auto& kept : out.sites) {
            if (same_kind(kept.species, kept.occupancy, site.species, site.occupancy, kPrimitiveOccTol) &&
                min_image(reduced.basis, kept.frac - f) <= prim_tol) {
                duplicate = true;
                break;
            }
        }
        if (!duplicate) out.sites.push_back({site.species, f, site.occupancy, i});
    }
    out.basis = reduced.basis;
    out.volume = std::abs(reduced.basis.determinant());

    // Inconsistent folding (tolerance edge cases): keep the conventional cell.
    if (out.sites.size() * (translations.size() + 1) != s.size()) {
        const ReducedBasis full = niggli_reduce_basis(cell);
        const Mat3 inv = full.basis.inverse();
        out.sites.clear();
        for (std::size_t i = 0; i < s.size(); ++i) {
            Vec3 f = inv * (cell * s.sites()[i].frac);
            for (int k = 0; k < 3; ++k) f[k] = wrap_unit(f[k]);
            out.sites.push_back({s.sites()[i].species, f, s.sites()[i].occupancy, i});
        }
        out.basis = full.basis;
        out.volume = std::abs(full.basis.determinant());
    }
    return out;
}

MatchResult match_prepared(const PreparedStructure& x, const PreparedStructure& y, const MatchTolerances& t) {
    // Always compare in a canonical orientation so the verdict is symmetric.
    if (y.order_key < x.order_key) {
        MatchResult r = match_oriented(y, x, t);
        for (auto& [a, b] : r.mapping) std::swap(a, b);
        std::sort(r.mapping.begin(), r.mapping.end());
        return r;
    }
    return match_oriented(x, y, t);
}

MatchResult structures_match(const CrystalStructure& x, const CrystalStructure& y, const MatchTolerances& t) {
    return match_prepared(prepare_structure(x, t), prepare_structure(y, t), t);
}

namespace {

std::vector<PreparedStructure> prepare_all(std::span<const CrystalStructure> pool, const MatchTolerances& t,
                                           bool parallel) {
    std::vector<PreparedStructure> out(pool.size());
    const auto count = static_cast<long>(pool.size());
    if (parallel) {
#pragma omp parallel for schedule(dynamic)
        for (long i = 0; i < count; ++i) out[static_cast<std::size_t>(i)] = prepare_structure(pool[static_cast<std::size_t>(i)], t);
    } else {
        for (long i = 0; i < count; ++i) out[static_cast<std::size_t>(i)] = prepare_structure(pool[static_cast<std::size_t>(i)], t);
    }
    return out;
}

DedupeResult leader_cluster(const std::vector<PreparedStructure>& prepared, const MatchTolerances& t, bool parallel) {
    DedupeResult result;
    std::map<std::string, std::vector<std::size_t>> buckets;  // reduced key -> group ids
    for (std::size_t i = 0; i < prepared.size(); ++i) {
        auto& bucket = buckets[prepared[i].composition.reduced_key()];
        constexpr auto kNone = std::numeric_limits<std::size_t>::max();
        std::size_t found = kNone;
        const auto width = static_cast<long>(bucket.size());
        if (parallel) {
#pragma omp parallel for reduction(min : found) schedule(dynamic)
            for (long k = 0; k < width; ++k) {
                const auto& rep = prepared[result.representatives[bucket[static_cast<std::size_t>(k)]]];
                if (match_prepared(prepared[i], rep, t).matched) found = std::min(found, static_cast<std::size_t>(k));
            }
        } else {
            for (long k = 0; k < width; ++k) {
                const auto& rep = prepared[result.representatives[bucket[static_cast<std::size_t>(k)]]];
                if (match_prepared(prepared[i], rep, t).matched) {
                    found = static_cast<std::size_t>(k);
                    break;
                }
            }
        }
        if (found == kNone) {
            bucket.push_back(result.groups.size());
            result.representatives.push_back(i);
            result.groups.push_back({i});
        } else {
            result.groups[bucket[found]].push_back(i);
        }
    }
    return result;
}

}  // namespace

DedupeResult dedupe(std::span<const CrystalStructure> pool, const MatchTolerances& t) {
    return leader_cluster(prepare_all(pool, t, true), t, true);
}

DedupeResult dedupe_serial(std::span<const CrystalStructure> pool, const MatchTolerances& t) {
    return leader_cluster(prepare_all(pool, t, false), t, false);
}

bool matches_any(const PreparedStructure& candidate, std::span<const PreparedStructure> references,
                 const MatchTolerances& t) {
    int hit = 0;
    const auto count = static_cast<long>(references.size());
#pragma omp parallel for reduction(max : hit) schedule(dynamic)
    for (long k = 0; k < count; ++k)
        if (match_prepared(candidate, references[static_cast<std::size_t>(k)], t).matched) hit = 1;
    return hit != 0;
}

}  // namespace crysflow
