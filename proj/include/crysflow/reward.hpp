#pragma once

#include <array>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "crysflow/kvconfig.hpp"
#include "crysflow/trajectory.hpp"

namespace crysflow::reward {

struct RewardConfig {
    std::array<double, 4> weights{0.1, 0.3, 0.25, 0.35};  // turns, think, format, syntax
    int k = 4;
    double lambda = 500.0;
    double alpha = 0.4;
    double beta = 0.6;

    void validate() const;
    /// Reads reward.w_turns, reward.w_think, reward.w_format, reward.w_syntax,
    /// reward.k, reward.lambda, reward.alpha, reward.beta.
    static RewardConfig from_config(const KvConfig& cfg);
    [[nodiscard]] std::string digest() const;
};

/// Tiered turn reward: 0 at n = 0, 0.5 from ceil(k/4), 0.7 from ceil(k/2),
/// 1.0 from k. Between tiers the last reached tier holds.
double r_turns(int n, int k);

double r_think(double mean_len_tokens, double lambda);

/// Kind sequence of one model turn, in emission order.
using TurnShape = std::vector<SegmentKind>;

/// alpha * (share of intermediate tool-bearing turns with think strictly
/// before the first tool call) + beta * [final turn has think before answer].
/// With no intermediate tool turns the first term is alpha only when the final
/// turn carries an answer.
double r_format(std::span<const TurnShape> turns, double alpha, double beta);

/// Mean validity; 0 when there are no calls.
double r_syntax(std::span<const bool> validity);

/// Whitespace-delimited token count. Unicode space separators count as
/// whitespace as well as ASCII.
std::size_t count_tokens(std::string_view text);

struct RewardBreakdown {
    double r_turns = 0.0;
    double r_think = 0.0;
    double r_format = 0.0;
    double r_syntax = 0.0;
    double total = 0.0;
    int n = 0;                 // tool-bearing turns
    double mean_think_len = 0.0;
    int k_intermediate = 0;    // K
    int m_calls = 0;           // M
    std::vector<bool> call_validity;
};

/// Scores executor and reasoner turns; observation turns are context only.
RewardBreakdown score(const Trajectory& t, const RewardConfig& cfg = {});

json to_json(const RewardBreakdown& b, const RewardConfig& cfg);

}  // namespace crysflow::reward
