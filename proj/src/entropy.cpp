#include "crysflow/entropy.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <istream>
#include <numbers>
#include <numeric>
#include <sstream>

#include <fmt/format.h>

#include "crysflow/error.hpp"

namespace crysflow::entropy {

void TokenStep::validate() const {
    if (alternatives.empty() && !tail_mass) throw Error(ErrorCode::EmptyDistribution, "token step has no outcomes");
    double sum = 0.0;
    for (const auto& [tok, p] : alternatives) {
        if (!(p > 0.0 && p <= 1.0)) throw Error(ErrorCode::BadNumber, fmt::format("probability {} outside (0,1]", p));
        sum += p;
    }
    if (tail_mass) {
        if (!(*tail_mass >= 0.0 && *tail_mass <= 1.0))
            throw Error(ErrorCode::BadNumber, fmt::format("tail mass {} outside [0,1]", *tail_mass));
        sum += *tail_mass;
    }
    if (sum > 1.0 + 1e-6) throw Error(ErrorCode::BadNumber, fmt::format("probabilities sum to {}", sum));
    if (!(sum > 0.0)) throw Error(ErrorCode::EmptyDistribution, "token step has zero total mass");
}

double shannon_entropy(std::span<const double> probabilities) {
    double total = 0.0;
    for (double p : probabilities) total += p;
    if (probabilities.empty() || !(total > 0.0)) throw Error(ErrorCode::EmptyDistribution, "no probability mass");
    double h = 0.0;
    for (double p : probabilities) {
        if (p <= 0.0) continue;
        const double q = p / total;
        h -= q * std::log2(q);
    }
    return h > 0.0 ? h : 0.0;
}

double shannon_entropy(const TokenStep& step) {
    step.validate();
    std::vector<double> p;
    p.reserve(step.alternatives.size() + 1);
    for (const auto& alt : step.alternatives) p.push_back(alt.second);
    if (step.tail_mass && *step.tail_mass > 0.0) p.push_back(*step.tail_mass);
    return shannon_entropy(std::span<const double>(p));
}

std::vector<double> entropies_serial(std::span<const TokenStep> steps) {
    std::vector<double> out(steps.size());
    for (std::size_t i = 0; i < steps.size(); ++i) out[i] = shannon_entropy(steps[i]);
    return out;
}

std::vector<double> entropies(std::span<const TokenStep> steps) {
    std::vector<double> out(steps.size());
    const auto n = static_cast<std::ptrdiff_t>(steps.size());
    // Lowest failing index, so the error matches the serial version.
    std::atomic<std::ptrdiff_t> first_bad{n};
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        try {
            out[static_cast<std::size_t>(i)] = shannon_entropy(steps[static_cast<std::size_t>(i)]);
        } catch (...) {
            auto cur = first_bad.load();
            while (i < cur && !first_bad.compare_exchange_weak(cur, i)) {
            }
        }
    }
    if (first_bad < n) (void)shannon_entropy(steps[static_cast<std::size_t>(first_bad.load())]);
    return out;
}

EntropyTrace trace(std::span<const TokenStep> steps, std::span<const SegmentSpan> segments) {
    EntropyTrace tr;
    for (const auto& seg : segments)
        if (seg.begin > seg.end || seg.end > steps.size())
            throw Error(ErrorCode::SpanOutOfRange,
                        fmt::format("segment [{}, {}) outside {} tokens", seg.begin, seg.end, steps.size()));
    tr.entropies = entropies(steps);
    tr.segments.assign(segments.begin(), segments.end());
    if (!tr.entropies.empty())
        tr.mean = std::accumulate(tr.entropies.begin(), tr.entropies.end(), 0.0) / static_cast<double>(tr.entropies.size());

    std::vector<char> covered(steps.size(), 0);
    std::map<SegmentKind, double> sums;
    for (const auto& seg : segments) {
        for (std::size_t i = seg.begin; i < seg.end; ++i) {
            sums[seg.kind] += tr.entropies[i];
            covered[i] = 1;
        }
        tr.segment_tokens[seg.kind] += seg.end - seg.begin;
    }
    for (const auto& [kind, sum] : sums)
        if (tr.segment_tokens[kind] > 0) tr.segment_means[kind] = sum / static_cast<double>(tr.segment_tokens[kind]);
    double untagged = 0.0;
    for (std::size_t i = 0; i < covered.size(); ++i)
        if (!covered[i]) {
            untagged += tr.entropies[i];
            ++tr.untagged_tokens;
        }
    if (tr.untagged_tokens) tr.untagged_mean = untagged / static_cast<double>(tr.untagged_tokens);
    return tr;
}

double silverman_bandwidth(std::span<const double> values) {
    if (values.empty()) throw Error(ErrorCode::EmptyInput, "bandwidth of empty sample");
    const double n = static_cast<double>(values.size());
    double sd = 0.0;
    if (values.size() > 1) {
        const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
        double ss = 0.0;
        for (double v : values) ss += (v - mean) * (v - mean);
        sd = std::sqrt(ss / (n - 1.0));
    }
    return std::max(1.06 * sd * std::pow(n, -0.2), 1e-3);
}

namespace {

// Grid with at least the requested points and spacing no coarser than h/4,
// so the trapezoid rule resolves every kernel.
KdeCurve make_grid(std::span<const double> values, const KdeOptions& opt) {
    if (values.empty()) throw Error(ErrorCode::EmptyInput, "kde of empty sample");
    if (opt.bandwidth && !(*opt.bandwidth > 0.0)) throw Error(ErrorCode::BadNumber, "bandwidth must be positive");
    if (opt.grid_points < 2) throw Error(ErrorCode::BadNumber, "kde grid needs at least two points");
    KdeCurve c;
    c.bandwidth = opt.bandwidth ? *opt.bandwidth : silverman_bandwidth(values);
    const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
    const double lo = *lo_it - opt.margin * c.bandwidth;
    const double hi = *hi_it + opt.margin * c.bandwidth;
    const double needed = std::ceil((hi - lo) / (c.bandwidth / 4.0)) + 1.0;
    const std::size_t points = std::max(opt.grid_points, static_cast<std::size_t>(std::min(needed, 1.0e6)));
    c.x.resize(points);
    c.density.assign(points, 0.0);
    const double step = (hi - lo) / static_cast<double>(points - 1);
    for (std::size_t i = 0; i < points; ++i) c.x[i] = lo + step * static_cast<double>(i);
    c.x.back() = hi;
    return c;
}

double density_at(double x, std::span<const double> values, double h) {
    const double norm = 1.0 / (static_cast<double>(values.size()) * h * std::sqrt(2.0 * std::numbers::pi));
    double s = 0.0;
    for (double v : values) {
        const double z = (x - v) / h;
        s += std::exp(-0.5 * z * z);
    }
    return s * norm;
}

}  // namespace

KdeCurve kde_serial(std::span<const double> values, const KdeOptions& opt) {
    KdeCurve c = make_grid(values, opt);
    for (std::size_t i = 0; i < c.x.size(); ++i) c.density[i] = density_at(c.x[i], values, c.bandwidth);
    return c;
}

KdeCurve kde(std::span<const double> values, const KdeOptions& opt) {
    KdeCurve c = make_grid(values, opt);
    const auto n = static_cast<std::ptrdiff_t>(c.x.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        const auto k = static_cast<std::size_t>(i);
        c.density[k] = density_at(c.x[k], values, c.bandwidth);
    }
    return c;
}

double trapezoid(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw Error(ErrorCode::BadNumber, "trapezoid: length mismatch");
    double area = 0.0;
    for (std::size_t i = 1; i < x.size(); ++i) area += 0.5 * (x[i] - x[i - 1]) * (y[i] + y[i - 1]);
    return area;
}

std::vector<TokenStep> read_token_stream(std::istream& in) {
    std::vector<TokenStep> steps;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            const auto j = json::parse(line);
            TokenStep s;
            s.token = j.value("token", std::string{});
            for (const auto& alt : j.at("alternatives")) s.alternatives.emplace_back(alt.at(0).get<std::string>(), alt.at(1).get<double>());
            if (j.contains("tail_mass") && !j["tail_mass"].is_null()) s.tail_mass = j["tail_mass"].get<double>();
            s.validate();
            steps.push_back(std::move(s));
        } catch (const json::exception& e) {
            throw Error(ErrorCode::BadNumber, fmt::format("token record on line {}: {}", lineno, e.what()));
        }
    }
    return steps;
}

TrajectoryTokens tokens_from_trajectory(const Trajectory& t) {
    TrajectoryTokens out;
    for (const auto& turn : t.turns) {
        if (turn.role == Role::Observation || turn.tokens.empty()) continue;
        const std::size_t base = out.steps.size();
        // Byte offset of each token within the raw text, when the tokens
        // concatenate back to it.
        std::vector<std::size_t> offsets;
        std::size_t off = 0;
        bool aligned = true;
        for (const auto& tok : turn.tokens) {
            offsets.push_back(off);
            if (turn.raw.compare(off, tok.token.size(), tok.token) != 0) aligned = false;
            off += tok.token.size();
        }
        for (const auto& tok : turn.tokens) {
            TokenStep s;
            s.token = tok.token;
            double sum = 0.0;
            for (const auto& [alt, lp] : tok.top) {
                const double p = std::min(1.0, std::exp(lp));
                if (p <= 0.0) continue;
                s.alternatives.emplace_back(alt, p);
                sum += p;
            }
            if (s.alternatives.empty() && tok.logprob) {
                const double p = std::min(1.0, std::exp(*tok.logprob));
                s.alternatives.emplace_back(tok.token, p);
                sum = p;
            }
            if (sum > 1.0) {
                for (auto& alt : s.alternatives) alt.second /= sum;
            } else if (1.0 - sum > 1e-9) {
                s.tail_mass = 1.0 - sum;
            }
            if (s.alternatives.empty()) s.alternatives.emplace_back(tok.token, 1.0), s.tail_mass.reset();
            out.steps.push_back(std::move(s));
        }
        if (!aligned) continue;
        for (const auto& seg : turn.segments) {
            SegmentSpan span;
            span.kind = seg.kind;
            span.begin = base + static_cast<std::size_t>(std::lower_bound(offsets.begin(), offsets.end(), seg.begin) - offsets.begin());
            span.end = base + static_cast<std::size_t>(std::lower_bound(offsets.begin(), offsets.end(), seg.end) - offsets.begin());
            if (span.end > span.begin) out.segments.push_back(span);
        }
    }
    return out;
}

json to_json(const EntropyTrace& tr, std::string_view truncation) {
    json j;
    j["tokens"] = tr.entropies.size();
    j["mean"] = tr.mean;
    json means = json::object();
    for (const auto& [kind, m] : tr.segment_means)
        means[std::string(to_string(kind))] = {{"mean", m}, {"tokens", tr.segment_tokens.at(kind)}};
    j["segment_means"] = means;
    j["untagged"] = {{"mean", tr.untagged_mean}, {"tokens", tr.untagged_tokens}};
    j["unit"] = "bits";
    j["truncation"] = std::string(truncation);
    j["entropies"] = tr.entropies;
    return j;
}

std::string kde_table(const KdeCurve& c) {
    std::string out;
    for (std::size_t i = 0; i < c.x.size(); ++i) out += fmt::format("{:.10g}\t{:.10g}\n", c.x[i], c.density[i]);
    return out;
}

}  // namespace crysflow::entropy
