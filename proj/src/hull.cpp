#include "crysflow/hull.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "crysflow/error.hpp"
#include "crysflow/simplex.hpp"

namespace crysflow {

PhaseDiagram::PhaseDiagram(std::vector<HullEntry> entries) : entries_(std::move(entries)) {
    if (entries_.empty()) throw Error(ErrorCode::MissingReference, "phase diagram needs at least one entry");
    std::set<std::string> elems;
    for (const auto& e : entries_) {
        if (!std::isfinite(e.energy_per_atom))
            throw Error(ErrorCode::BadNumber, "entry " + e.id + " has a non-finite energy");
        for (const auto& [el, amt] : e.composition.amounts()) elems.insert(el);
    }
    elements_.assign(elems.begin(), elems.end());
    for (const auto& el : elements_) {
        const bool has_ref = std::any_of(entries_.begin(), entries_.end(), [&](const HullEntry& e) {
            return e.composition.amounts().size() == 1 && e.composition.amounts().begin()->first == el;
        });
        if (!has_ref) throw Error(ErrorCode::MissingReference, "no elemental entry for " + el);
    }

    // One participant per reduced composition: lowest energy, lowest index on ties.
    std::map<std::string, std::size_t> best;
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        const auto key = entries_[i].composition.reduced_key();
        auto it = best.find(key);
        if (it == best.end() || entries_[i].energy_per_atom < entries_[it->second].energy_per_atom) best[key] = i;
    }
    for (const auto& [key, idx] : best) participants_.push_back(idx);
    std::sort(participants_.begin(), participants_.end());

    fractions_.assign(elements_.size(), std::vector<double>(participants_.size(), 0.0));
    for (std::size_t p = 0; p < participants_.size(); ++p) {
        const auto& comp = entries_[participants_[p]].composition;
        for (std::size_t k = 0; k < elements_.size(); ++k) fractions_[k][p] = comp.fraction(elements_[k]);
    }

    for (const auto& e : entries_)
        if (std::abs(energy_above_hull(e)) <= kHullTol) stable_ids_.push_back(e.id);
}

bool PhaseDiagram::is_stable(const std::string& id) const {
    return std::find(stable_ids_.begin(), stable_ids_.end(), id) != stable_ids_.end();
}

PhaseDiagram::Solved PhaseDiagram::solve(const HullEntry& e) const {
    for (const auto& [el, amt] : e.composition.amounts())
        if (!std::binary_search(elements_.begin(), elements_.end(), el))
            throw Error(ErrorCode::MissingReference, fmt::format("{} is not an axis of this diagram", el));
    std::vector<double> target(elements_.size());
    for (std::size_t k = 0; k < elements_.size(); ++k) target[k] = e.composition.fraction(elements_[k]);
    std::vector<double> cost(participants_.size());
    for (std::size_t p = 0; p < participants_.size(); ++p) cost[p] = entries_[participants_[p]].energy_per_atom;

    const LpSolution lp = solve_lp(fractions_, target, cost);
    if (!lp.feasible) throw Error(ErrorCode::Infeasible, "composition of " + e.id + " is not representable");
    Solved out{lp.objective, {}};
    for (std::size_t p = 0; p < participants_.size(); ++p)
        if (lp.x[p] > 1e-12) out.phases.emplace_back(participants_[p], lp.x[p]);
    return out;
}

double PhaseDiagram::energy_above_hull(const HullEntry& e) const {
    return e.energy_per_atom - solve(e).hull_energy;
}

std::vector<std::pair<std::size_t, double>> PhaseDiagram::decomposition(const HullEntry& e) const {
    return solve(e).phases;
}

std::vector<double> energies_above_hull(const PhaseDiagram& pd, std::span<const HullEntry> queries) {
    std::vector<double> out(queries.size());
    std::vector<std::exception_ptr> failures(queries.size());
    const auto n = static_cast<long>(queries.size());
#pragma omp parallel for schedule(dynamic)
    for (long i = 0; i < n; ++i) {
        const auto k = static_cast<std::size_t>(i);
        try {
            out[k] = pd.energy_above_hull(queries[k]);
        } catch (...) {
            failures[k] = std::current_exception();
        }
    }
    for (const auto& f : failures)
        if (f) std::rethrow_exception(f);
    return out;
}

std::vector<double> energies_above_hull_serial(const PhaseDiagram& pd, std::span<const HullEntry> queries) {
    std::vector<double> out;
    out.reserve(queries.size());
    for (const auto& q : queries) out.push_back(pd.energy_above_hull(q));
    return out;
}

std::vector<HullEntry> read_entries(std::istream& in) {
    std::vector<HullEntry> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        std::istringstream fields(line);
        std::string id, formula, energy;
        if (!(fields >> id)) continue;
        if (!(fields >> formula >> energy))
            throw Error(ErrorCode::BadFormula, fmt::format("line {}: expected 'id formula energy'", lineno));
        std::string extra;
        if (fields >> extra) throw Error(ErrorCode::BadFormula, fmt::format("line {}: trailing field '{}'", lineno, extra));
        double value = 0.0;
        try {
            std::size_t used = 0;
            value = std::stod(energy, &used);
            if (used != energy.size()) throw std::invalid_argument(energy);
        } catch (const std::exception&) {
            throw Error(ErrorCode::BadNumber, fmt::format("line {}: bad energy '{}'", lineno, energy));
        }
        try {
            out.push_back({id, Composition::parse(formula), value});
        } catch (const Error& err) {
            throw Error(ErrorCode::BadFormula, fmt::format("line {}: {}", lineno, err.what()));
        }
    }
    return out;
}

std::vector<HullEntry> read_entries_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
    return read_entries(in);
}

void write_entries(std::ostream& out, std::span<const HullEntry> entries) {
    for (const auto& e : entries) out << fmt::format("{} {} {:.10g}\n", e.id, e.composition.formula(), e.energy_per_atom);
}

HullEntry resolve_target(std::span<const HullEntry> entries, const std::string& target, std::optional<double> energy) {
    const HullEntry* hit = nullptr;
    for (const auto& e : entries)
        if (e.id == target) {
            hit = &e;
            break;
        }
    if (!hit) {
        std::optional<std::string> key;
        try {
            key = Composition::parse(target).reduced_key();
        } catch (const Error&) {
        }
        if (key)
            for (const auto& e : entries)
                if (e.composition.reduced_key() == *key && (!hit || e.energy_per_atom < hit->energy_per_atom)) hit = &e;
    }
    if (energy) {
        Composition comp = hit ? hit->composition : Composition::parse(target);
        return HullEntry{target, std::move(comp), *energy};
    }
    if (!hit) throw Error(ErrorCode::BadFormula, "no entry matches target " + target);
    return *hit;
}

}  // namespace crysflow
