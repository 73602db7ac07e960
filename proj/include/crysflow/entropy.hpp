#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "crysflow/trajectory.hpp"

namespace crysflow::entropy {

/// One next-token distribution. When `tail_mass` is set it is treated as a
/// single extra outcome (a lower bound on the true entropy); otherwise the
/// alternatives are rescaled to sum to one.
struct TokenStep {
    std::string token;
    std::vector<std::pair<std::string, double>> alternatives;
    std::optional<double> tail_mass;

    void validate() const;
};

/// Entropy in bits.
double shannon_entropy(const TokenStep& step);
double shannon_entropy(std::span<const double> probabilities);

struct SegmentSpan {
    SegmentKind kind = SegmentKind::Prose;
    std::size_t begin = 0;  // token index, inclusive
    std::size_t end = 0;    // exclusive
};

struct EntropyTrace {
    std::vector<double> entropies;
    std::vector<SegmentSpan> segments;
    double mean = 0.0;
    std::map<SegmentKind, double> segment_means;
    std::map<SegmentKind, std::size_t> segment_tokens;
    std::size_t untagged_tokens = 0;
    double untagged_mean = 0.0;
};

EntropyTrace trace(std::span<const TokenStep> steps, std::span<const SegmentSpan> segments);

/// Same values as mapping shannon_entropy; the OpenMP build splits the loop.
std::vector<double> entropies(std::span<const TokenStep> steps);
std::vector<double> entropies_serial(std::span<const TokenStep> steps);

struct KdeOptions {
    std::optional<double> bandwidth;
    std::size_t grid_points = 512;
    double margin = 4.0;  // grid spans [min - margin*h, max + margin*h]
};

struct KdeCurve {
    std::vector<double> x;
    std::vector<double> density;
    double bandwidth = 0.0;
};

double silverman_bandwidth(std::span<const double> values);
KdeCurve kde(std::span<const double> values, const KdeOptions& opt = {});
KdeCurve kde_serial(std::span<const double> values, const KdeOptions& opt = {});
double trapezoid(std::span<const double> x, std::span<const double> y);

/// One JSON record per line: {"token": str, "alternatives": [[tok, p], ...],
/// "tail_mass": p?}. Blank lines are skipped.
std::vector<TokenStep> read_token_stream(std::istream& in);

/// Token distributions and their segment spans gathered from a trajectory's
/// model turns. Probabilities come from exp(logprob) of the captured top list;
/// the mass outside it is kept as a tail bucket.
struct TrajectoryTokens {
    std::vector<TokenStep> steps;
    std::vector<SegmentSpan> segments;
};
TrajectoryTokens tokens_from_trajectory(const Trajectory& t);

json to_json(const EntropyTrace& tr, std::string_view truncation);
std::string kde_table(const KdeCurve& c);

}  // namespace crysflow::entropy
