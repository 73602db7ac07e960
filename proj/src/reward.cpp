#include "crysflow/reward.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include <fmt/format.h>

#include "crysflow/error.hpp"

namespace crysflow::reward {

void RewardConfig::validate() const {
    for (double w : weights)
        if (!(w >= 0.0)) throw Error(ErrorCode::BadConfig, "reward weights must be nonnegative");
    if (k < 1) throw Error(ErrorCode::BadConfig, "reward.k must be >= 1");
    if (!(lambda > 0.0)) throw Error(ErrorCode::BadConfig, "reward.lambda must be positive");
    if (!(alpha >= 0.0 && beta >= 0.0) || alpha + beta > 1.0 + 1e-9)
        throw Error(ErrorCode::BadConfig, "reward.alpha and reward.beta must be nonnegative with sum <= 1");
}

RewardConfig RewardConfig::from_config(const KvConfig& cfg) {
    RewardConfig r;
    r.weights[0] = cfg.get_double("reward.w_turns", r.weights[0]);
    r.weights[1] = cfg.get_double("reward.w_think", r.weights[1]);
    r.weights[2] = cfg.get_double("reward.w_format", r.weights[2]);
    r.weights[3] = cfg.get_double("reward.w_syntax", r.weights[3]);
    r.k = static_cast<int>(cfg.get_int("reward.k", r.k));
    r.lambda = cfg.get_double("reward.lambda", r.lambda);
    r.alpha = cfg.get_double("reward.alpha", r.alpha);
    r.beta = cfg.get_double("reward.beta", r.beta);
    r.validate();
    return r;
}

std::string RewardConfig::digest() const {
    return fnv1a_hex(fmt::format("w={:.17g},{:.17g},{:.17g},{:.17g};k={};lambda={:.17g};alpha={:.17g};beta={:.17g}",
                                 weights[0], weights[1], weights[2], weights[3], k, lambda, alpha, beta));
}

double r_turns(int n, int k) {
    if (n <= 0) return 0.0;
    if (n >= k) return 1.0;
    if (n >= (k + 1) / 2) return 0.7;
    if (n >= (k + 3) / 4) return 0.5;
    return 0.0;
}

double r_think(double mean_len_tokens, double lambda) { return std::tanh(mean_len_tokens / lambda); }

namespace {

std::ptrdiff_t first_of(const TurnShape& t, SegmentKind k) {
    auto it = std::find(t.begin(), t.end(), k);
    return it == t.end() ? -1 : it - t.begin();
}

bool contains(const TurnShape& t, SegmentKind k) { return first_of(t, k) >= 0; }

bool think_before(const TurnShape& t, SegmentKind k) {
    const auto think = first_of(t, SegmentKind::Think);
    const auto other = first_of(t, k);
    return think >= 0 && other >= 0 && think < other;
}

}  // namespace

double r_format(std::span<const TurnShape> turns, double alpha, double beta) {
    if (turns.empty()) return 0.0;
    const TurnShape& final_turn = turns.back();
    int K = 0;
    int good = 0;
    for (std::size_t i = 0; i + 1 < turns.size(); ++i) {
        if (!contains(turns[i], SegmentKind::ToolCall)) continue;
        ++K;
        if (think_before(turns[i], SegmentKind::ToolCall)) ++good;
    }
    const bool has_answer = contains(final_turn, SegmentKind::Answer);
    double intermediate = 0.0;
    if (K > 0)
        intermediate = static_cast<double>(good) / K;
    else if (has_answer)
        intermediate = 1.0;
    const double terminal = think_before(final_turn, SegmentKind::Answer) ? 1.0 : 0.0;
    return alpha * intermediate + beta * terminal;
}

double r_syntax(std::span<const bool> validity) {
    if (validity.empty()) return 0.0;
    const auto ok = std::count(validity.begin(), validity.end(), true);
    return static_cast<double>(ok) / static_cast<double>(validity.size());
}

namespace {

// Decodes one UTF-8 code point; malformed bytes decode as themselves.
char32_t next_code_point(std::string_view s, std::size_t& i) {
    const auto b0 = static_cast<unsigned char>(s[i]);
    auto cont = [&](std::size_t k) -> unsigned { return i + k < s.size() ? static_cast<unsigned char>(s[i + k]) & 0x3Fu : 0u; };
    if (b0 < 0x80) {
        i += 1;
        return b0;
    }
    if ((b0 >> 5) == 0x6 && i + 1 < s.size()) {
        char32_t cp = ((b0 & 0x1Fu) << 6) | cont(1);
        i += 2;
        return cp;
    }
    if ((b0 >> 4) == 0xE && i + 2 < s.size()) {
        char32_t cp = ((b0 & 0x0Fu) << 12) | (cont(1) << 6) | cont(2);
        i += 3;
        return cp;
    }
    if ((b0 >> 3) == 0x1E && i + 3 < s.size()) {
        char32_t cp = ((b0 & 0x07u) << 18) | (cont(1) << 12) | (cont(2) << 6) | cont(3);
        i += 4;
        return cp;
    }
    i += 1;
    return b0;
}

bool is_unicode_space(char32_t c) {
    switch (c) {
        case 0x09: case 0x0A: case 0x0B: case 0x0C: case 0x0D: case 0x20:
        case 0x85: case 0xA0: case 0x1680: case 0x2028: case 0x2029:
        case 0x202F: case 0x205F: case 0x3000:
            return true;
        default:
            return c >= 0x2000 && c <= 0x200A;
    }
}

}  // namespace

std::size_t count_tokens(std::string_view text) {
    std::size_t count = 0;
    bool in_token = false;
    std::size_t i = 0;
    while (i < text.size()) {
        const bool space = is_unicode_space(next_code_point(text, i));
        if (!space && !in_token) ++count;
        in_token = !space;
    }
    return count;
}

RewardBreakdown score(const Trajectory& t, const RewardConfig& cfg) {
    cfg.validate();
    RewardBreakdown out;
    std::vector<TurnShape> shapes;
    std::size_t think_spans = 0;
    std::size_t think_tokens = 0;
    for (const auto& turn : t.turns) {
        if (turn.role == Role::Observation) continue;
        TurnShape shape;
        for (const auto& seg : turn.segments) {
            shape.push_back(seg.kind);
            if (seg.kind == SegmentKind::Think) {
                ++think_spans;
                think_tokens += count_tokens(seg.text);
            }
        }
        if (std::find(shape.begin(), shape.end(), SegmentKind::ToolCall) != shape.end()) ++out.n;
        for (const auto& call : turn.calls) out.call_validity.push_back(call.valid());
        shapes.push_back(std::move(shape));
    }
    for (std::size_t i = 0; i + 1 < shapes.size(); ++i)
        if (std::find(shapes[i].begin(), shapes[i].end(), SegmentKind::ToolCall) != shapes[i].end()) ++out.k_intermediate;
    out.m_calls = static_cast<int>(out.call_validity.size());
    out.mean_think_len = think_spans ? static_cast<double>(think_tokens) / static_cast<double>(think_spans) : 0.0;

    out.r_turns = r_turns(out.n, cfg.k);
    out.r_think = r_think(out.mean_think_len, cfg.lambda);
    out.r_format = r_format(shapes, cfg.alpha, cfg.beta);
    {
        // std::vector<bool> has no contiguous storage for a span.
        const std::unique_ptr<bool[]> v(new bool[out.call_validity.size() + 1]);
        std::copy(out.call_validity.begin(), out.call_validity.end(), v.get());
        out.r_syntax = r_syntax(std::span<const bool>(v.get(), out.call_validity.size()));
    }
    out.total = cfg.weights[0] * out.r_turns + cfg.weights[1] * out.r_think + cfg.weights[2] * out.r_format +
                cfg.weights[3] * out.r_syntax;
    return out;
}

json to_json(const RewardBreakdown& b, const RewardConfig& cfg) {
    json j;
    j["r_turns"] = b.r_turns;
    j["r_think"] = b.r_think;
    j["r_format"] = b.r_format;
    j["r_syntax"] = b.r_syntax;
    j["total"] = b.total;
    j["n"] = b.n;
    j["mean_think_len"] = b.mean_think_len;
    j["K"] = b.k_intermediate;
    j["M"] = b.m_calls;
    j["call_validity"] = b.call_validity;
    j["config"] = {{"weights", cfg.weights}, {"k", cfg.k}, {"lambda", cfg.lambda}, {"alpha", cfg.alpha}, {"beta", cfg.beta}};
    j["config_digest"] = cfg.digest();
    return j;
}

}  // namespace crysflow::reward
