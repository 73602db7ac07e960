#include "crysflow/crystal.hpp"

#include <cmath>
#include <map>

#include <fmt/format.h>

#include "crysflow/elements.hpp"
#include "crysflow/error.hpp"

namespace crysflow {

namespace {

bool colocated(const Vec3& x, const Vec3& y) {
    for (int k = 0; k < 3; ++k)
        if (std::abs(periodic_delta(x[k] - y[k])) > kCoordTol) return false;
    return true;
}

}  // namespace

CrystalStructure::CrystalStructure(Lattice lattice, std::vector<Site> sites, std::optional<std::string> label)
    : lattice_(lattice), sites_(std::move(sites)), label_(std::move(label)) {
    lattice_.validate();
    if (sites_.empty()) throw Error(ErrorCode::InvalidStructure, "structure has no sites");
    for (auto& site : sites_) {
        if (!is_element(site.species)) throw Error(ErrorCode::BadElement, "unknown element '" + site.species + "'");
        if (!(site.occupancy > 0.0 && site.occupancy <= 1.0 + kCoordTol))
            throw Error(ErrorCode::InvalidStructure,
                        fmt::format("occupancy {} of {} outside (0, 1]", site.occupancy, site.species));
        for (int k = 0; k < 3; ++k) {
            if (!std::isfinite(site.frac[k])) throw Error(ErrorCode::InvalidStructure, "non-finite coordinate");
            site.frac[k] = wrap_unit(site.frac[k]);
        }
    }
    std::vector<bool> seen(sites_.size(), false);
    for (std::size_t i = 0; i < sites_.size(); ++i) {
        if (seen[i]) continue;
        double total = sites_[i].occupancy;
        for (std::size_t j = i + 1; j < sites_.size(); ++j) {
            if (!seen[j] && colocated(sites_[i].frac, sites_[j].frac)) {
                seen[j] = true;
                total += sites_[j].occupancy;
            }
        }
        if (total > 1.0 + kCoordTol)
            throw Error(ErrorCode::InvalidStructure,
                        fmt::format("co-located occupancies sum to {} at site {}", total, i));
    }
}

Vec3 CrystalStructure::cartesian(std::size_t i) const {
    return lattice_.matrix() * sites_.at(i).frac;
}

Composition composition_of(const CrystalStructure& s) {
    std::map<std::string, double> amounts;
    for (const auto& site : s.sites()) amounts[site.species] += site.occupancy;
    return Composition(std::move(amounts));
}

namespace {

double min_over_images(const Mat3& m, const Vec3& delta, int range, bool skip_zero) {
    double best = std::numeric_limits<double>::infinity();
    for (int x = -range; x <= range; ++x)
        for (int y = -range; y <= range; ++y)
            for (int z = -range; z <= range; ++z) {
                if (skip_zero && x == 0 && y == 0 && z == 0) continue;
                const Vec3 d = m * (delta + Vec3(x, y, z));
                best = std::min(best, d.norm());
            }
    return best;
}

double min_image_impl(const Mat3& m, const Vec3& fi, const Vec3& fj, bool self) {
    Vec3 delta = fj - fi;
    for (int k = 0; k < 3; ++k) delta[k] = periodic_delta(delta[k]);
    // Grow the image shell until one more layer no longer improves the minimum.
    double best = min_over_images(m, delta, 1, self);
    for (int range = 2; range <= 8; ++range) {
        const double next = min_over_images(m, delta, range, self);
        if (next >= best - 1e-12) break;
        best = next;
    }
    return best;
}

}  // namespace

double min_image_distance(const CrystalStructure& s, std::size_t i, std::size_t j) {
    if (i >= s.size() || j >= s.size())
        throw Error(ErrorCode::IndexOutOfRange, fmt::format("site index ({}, {}) with {} sites", i, j, s.size()));
    return min_image_impl(s.lattice().matrix(), s.sites()[i].frac, s.sites()[j].frac, i == j);
}

GeometryReport validate_geometry(const CrystalStructure& s, double min_dist) {
    GeometryReport report;
    const Mat3 m = s.lattice().matrix();
    const auto& sites = s.sites();
    const double self = min_image_impl(m, Vec3::Zero(), Vec3::Zero(), true);
    for (std::size_t i = 0; i < sites.size(); ++i) {
        if (self < min_dist) report.offending.push_back({i, i, self});
        for (std::size_t j = i + 1; j < sites.size(); ++j) {
            if (colocated(sites[i].frac, sites[j].frac)) continue;
            const double d = min_image_impl(m, sites[i].frac, sites[j].frac, false);
            if (d < min_dist) report.offending.push_back({i, j, d});
        }
    }
    report.valid = report.offending.empty();
    return report;
}

Lattice vegard_lattice(std::span<const std::pair<Lattice, double>> end_members) {
    if (end_members.empty()) throw Error(ErrorCode::BadWeights, "no end members");
    double sum = 0.0;
    for (const auto& [lat, w] : end_members) {
        if (!(w >= 0.0)) throw Error(ErrorCode::BadWeights, fmt::format("negative fraction {}", w));
        sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw Error(ErrorCode::BadWeights, fmt::format("fractions sum to {}", sum));
    std::array<double, 6> acc{};
    for (const auto& [lat, w] : end_members) {
        const auto p = lat.params();
        for (std::size_t k = 0; k < 6; ++k) acc[k] += w * p[k];
    }
    Lattice out{acc[0], acc[1], acc[2], acc[3], acc[4], acc[5]};
    out.validate();
    return out;
}

CrystalStructure make_supercell(const CrystalStructure& s, int na, int nb, int nc) {
    const auto& l = s.lattice();
    Lattice big{l.a * na, l.b * nb, l.c * nc, l.alpha, l.beta, l.gamma};
    std::vector<Site> sites;
    sites.reserve(s.size() * static_cast<std::size_t>(na * nb * nc));
    for (int x = 0; x < na; ++x)
        for (int y = 0; y < nb; ++y)
            for (int z = 0; z < nc; ++z)
                for (const auto& site : s.sites()) {
                    Site copy = site;
                    copy.frac = Vec3((site.frac[0] + x) / na, (site.frac[1] + y) / nb, (site.frac[2] + z) / nc);
                    sites.push_back(copy);
                }
    CrystalStructure out(big, std::move(sites), s.label());
    out.space_group = s.space_group;
    return out;
}

}  // namespace crysflow
