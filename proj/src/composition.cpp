#include "crysflow/composition.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <numeric>
#include <vector>

#include <fmt/format.h>

#include "crysflow/error.hpp"

namespace crysflow {

namespace {

// Continued-fraction approximation with bounded denominator.
std::pair<long long, long long> as_rational(double x, long long max_den, double tol) {
    long long h0 = 0, h1 = 1, k0 = 1, k1 = 0;
    double value = x;
    for (int iter = 0; iter < 64; ++iter) {
        const double fl = std::floor(value);
        const long long ai = static_cast<long long>(fl);
        const long long h2 = ai * h1 + h0;
        const long long k2 = ai * k1 + k0;
        if (k2 > max_den) break;
        h0 = h1; h1 = h2; k0 = k1; k1 = k2;
        if (std::abs(static_cast<double>(h1) / static_cast<double>(k1) - x) <= tol) break;
        const double frac = value - fl;
        if (frac < 1e-15) break;
        value = 1.0 / frac;
    }
    return {h1, k1};
}

std::map<std::string, double> reduce(const std::map<std::string, double>& amounts) {
    // Common denominator, then integer gcd.
    constexpr long long kMaxDen = 10000;
    constexpr double kTol = 1e-6;
    long long lcm = 1;
    bool rational = true;
    for (const auto& [el, amt] : amounts) {
        auto [num, den] = as_rational(amt, kMaxDen, kTol);
        if (den <= 0 || std::abs(static_cast<double>(num) / static_cast<double>(den) - amt) > kTol) {
            rational = false;
            break;
        }
        lcm = std::lcm(lcm, den);
        if (lcm > 1'000'000'000LL) {
            rational = false;
            break;
        }
    }
    std::map<std::string, double> out;
    if (rational) {
        long long g = 0;
        std::vector<long long> ints;
        for (const auto& [el, amt] : amounts) {
            const long long v = std::llround(amt * static_cast<double>(lcm));
            ints.push_back(v);
            g = std::gcd(g, v);
        }
        if (g > 0) {
            std::size_t i = 0;
            for (const auto& [el, amt] : amounts) out[el] = static_cast<double>(ints[i++] / g);
            return out;
        }
    }
    double smallest = 0.0;
    for (const auto& [el, amt] : amounts)
        if (smallest == 0.0 || amt < smallest) smallest = amt;
    for (const auto& [el, amt] : amounts) out[el] = amt / smallest;
    return out;
}

std::string render(const std::map<std::string, double>& amounts) {
    std::string out;
    for (const auto& [el, amt] : amounts) {
        out += el;
        if (std::abs(amt - 1.0) < 1e-9) continue;
        if (std::abs(amt - std::round(amt)) < 1e-9)
            out += fmt::format("{}", std::llround(amt));
        else
            out += fmt::format("{:g}", amt);
    }
    return out;
}

}  // namespace

Composition::Composition(std::map<std::string, double> amounts) {
    for (auto& [el, amt] : amounts) {
        if (!(amt >= 0.0) || !std::isfinite(amt))
            throw Error(ErrorCode::BadFormula, "negative or non-finite amount for " + el);
        if (amt > 0.0) amounts_[el] = amt;
    }
    if (amounts_.empty()) throw Error(ErrorCode::BadFormula, "composition has no positive amount");
    reduced_ = reduce(amounts_);
}

Composition Composition::parse(std::string_view formula) {
    std::map<std::string, double> amounts;
    std::size_t i = 0;
    while (i < formula.size()) {
        const char ch = formula[i];
        if (std::isspace(static_cast<unsigned char>(ch))) {
            ++i;
            continue;
        }
        if (!std::isupper(static_cast<unsigned char>(ch)))
            throw Error(ErrorCode::BadFormula, fmt::format("unexpected '{}' in formula '{}'", ch, formula));
        std::size_t j = i + 1;
        while (j < formula.size() && std::islower(static_cast<unsigned char>(formula[j]))) ++j;
        std::string symbol(formula.substr(i, j - i));
        std::size_t k = j;
        while (k < formula.size() && (std::isdigit(static_cast<unsigned char>(formula[k])) || formula[k] == '.')) ++k;
        double count = 1.0;
        if (k > j) {
            auto [ptr, ec] = std::from_chars(formula.data() + j, formula.data() + k, count);
            if (ec != std::errc() || ptr != formula.data() + k || !(count > 0.0))
                throw Error(ErrorCode::BadFormula, fmt::format("bad count after {} in '{}'", symbol, formula));
        }
        amounts[symbol] += count;
        i = k;
    }
    if (amounts.empty()) throw Error(ErrorCode::BadFormula, "empty formula");
    return Composition(std::move(amounts));
}

double Composition::amount(const std::string& element) const {
    auto it = amounts_.find(element);
    return it == amounts_.end() ? 0.0 : it->second;
}

double Composition::total() const noexcept {
    double sum = 0.0;
    for (const auto& [el, amt] : amounts_) sum += amt;
    return sum;
}

double Composition::fraction(const std::string& element) const {
    return amount(element) / total();
}

std::string Composition::reduced_formula() const { return render(reduced_); }
std::string Composition::formula() const { return render(amounts_); }

bool Composition::same_reduced(const Composition& other, double tol) const {
    if (reduced_.size() != other.reduced_.size()) return false;
    auto it = other.reduced_.begin();
    for (const auto& [el, amt] : reduced_) {
        if (el != it->first || std::abs(amt - it->second) > tol) return false;
        ++it;
    }
    return true;
}

}  // namespace crysflow
