#include "oracles.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <set>

namespace crysflow::testing {

double brute_force_hull_energy(const std::vector<HullEntry>& entries, const Composition& target) {
    std::set<std::string> target_elements;
    for (const auto& [el, amt] : target.amounts()) target_elements.insert(el);
    // Entries carrying any other element cannot appear in a nonnegative mix.
    std::vector<const HullEntry*> usable;
    for (const auto& e : entries) {
        bool inside = true;
        for (const auto& [el, amt] : e.composition.amounts()) inside = inside && target_elements.count(el) > 0;
        if (inside) usable.push_back(&e);
    }
    const std::vector<std::string> axis(target_elements.begin(), target_elements.end());
    const int d = static_cast<int>(axis.size());
    Eigen::VectorXd x(d);
    for (int r = 0; r < d; ++r) x[r] = target.fraction(axis[static_cast<std::size_t>(r)]);

    double best = std::numeric_limits<double>::infinity();
    std::vector<std::size_t> pick;
    std::function<void(std::size_t)> recurse = [&](std::size_t start) {
        if (!pick.empty()) {
            const int m = static_cast<int>(pick.size());
            Eigen::MatrixXd a(d, m);
            for (int c = 0; c < m; ++c)
                for (int r = 0; r < d; ++r) a(r, c) = usable[pick[static_cast<std::size_t>(c)]]->composition.fraction(axis[static_cast<std::size_t>(r)]);
            const Eigen::VectorXd w = a.completeOrthogonalDecomposition().solve(x);
            const double residual = (a * w - x).norm();
            if (residual < 1e-9 && w.minCoeff() > -1e-12) {
                double e = 0.0;
                for (int c = 0; c < m; ++c) e += w[c] * usable[pick[static_cast<std::size_t>(c)]]->energy_per_atom;
                best = std::min(best, e);
            }
        }
        if (static_cast<int>(pick.size()) == d + 1) return;
        for (std::size_t i = start; i < usable.size(); ++i) {
            pick.push_back(i);
            recurse(i + 1);
            pick.pop_back();
        }
    };
    recurse(0);
    return best;
}

bool valence_exhaustive(const std::map<std::string, long>& counts, const screen::OxidationTable& table) {
    // Charges reachable by each element alone, from every split of its atoms
    // over its allowed states.
    std::vector<std::vector<long>> per_element;
    for (const auto& [el, n] : counts) {
        const auto it = table.find(el);
        if (it == table.end() || it->second.empty()) return false;
        const auto& states = it->second;
        std::vector<long> sums;
        std::function<void(std::size_t, long, long)> split = [&](std::size_t k, long left, long acc) {
            if (k + 1 == states.size()) {
                sums.push_back(acc + left * states[k]);
                return;
            }
            for (long take = 0; take <= left; ++take) split(k + 1, left - take, acc + take * states[k]);
        };
        split(0, n, 0);
        std::sort(sums.begin(), sums.end());
        sums.erase(std::unique(sums.begin(), sums.end()), sums.end());
        per_element.push_back(std::move(sums));
    }
    std::function<bool(std::size_t, long)> search = [&](std::size_t k, long acc) {
        if (k == per_element.size()) return acc == 0;
        for (long s : per_element[k])
            if (search(k + 1, acc + s)) return true;
        return false;
    };
    return search(0, 0);
}

}  // namespace crysflow::testing
