#include <doctest.h>

#include <cmath>
#include <sstream>

#include "crysflow/entropy.hpp"
#include "crysflow/error.hpp"
#include "generators.hpp"

using namespace crysflow;
using entropy::TokenStep;

namespace {

double binary_entropy(double p) { return -(p * std::log2(p) + (1 - p) * std::log2(1 - p)); }

// Two-outcome step whose entropy is `h` bits (bisection on p in (0, 1/2]).
TokenStep step_with_entropy(double h) {
    double lo = 1e-15, hi = 0.5;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (binary_entropy(mid) < h ? lo : hi) = mid;
    }
    const double p = 0.5 * (lo + hi);
    return {"t", {{"a", 1 - p}, {"b", p}}, std::nullopt};
}

TokenStep uniform(int n) {
    TokenStep s{"t", {}, std::nullopt};
    for (int i = 0; i < n; ++i) s.alternatives.emplace_back("o" + std::to_string(i), 1.0 / n);
    return s;
}

}  // namespace

TEST_SUITE("entropy") {
    TEST_CASE("analytic anchors") {
        CHECK(entropy::shannon_entropy(TokenStep{"a", {{"a", 1.0}}, std::nullopt}) == 0.0);
        CHECK(entropy::shannon_entropy(uniform(2)) == doctest::Approx(1.0).epsilon(1e-15));
        CHECK(entropy::shannon_entropy(uniform(10)) == doctest::Approx(std::log2(10.0)).epsilon(1e-14));
        CHECK(std::abs(entropy::shannon_entropy(uniform(10)) - 3.321928) < 1e-6);
    }

    TEST_CASE("tail mass counts as one outcome") {
        const TokenStep s{"a", {{"a", 0.5}}, 0.5};
        CHECK(entropy::shannon_entropy(s) == doctest::Approx(1.0));
        const TokenStep bad{"a", {{"a", 0.7}}, 0.5};
        CHECK_THROWS_AS(bad.validate(), Error);
    }

    TEST_CASE("unnormalised alternatives are rescaled") {
        const TokenStep s{"a", {{"a", 0.2}, {"b", 0.2}}, std::nullopt};
        CHECK(entropy::shannon_entropy(s) == doctest::Approx(1.0));
    }

    TEST_CASE("segment means") {
        std::vector<TokenStep> steps{TokenStep{"a", {{"a", 1.0}}, std::nullopt},
                                     TokenStep{"b", {{"b", 1.0}}, std::nullopt}};
        std::vector<entropy::SegmentSpan> none;
        const auto zero = entropy::trace(steps, none);
        CHECK(zero.mean == 0.0);

        std::vector<TokenStep> mixed{step_with_entropy(1.0), step_with_entropy(0.05), step_with_entropy(0.05)};
        CHECK(entropy::shannon_entropy(mixed[1]) == doctest::Approx(0.05).epsilon(1e-12));
        const std::vector<entropy::SegmentSpan> spans{{SegmentKind::Think, 0, 1}, {SegmentKind::Answer, 1, 3}};
        const auto tr = entropy::trace(mixed, spans);
        CHECK(tr.segment_means.at(SegmentKind::Answer) == doctest::Approx(0.05).epsilon(1e-12));
        CHECK(tr.segment_means.at(SegmentKind::Think) == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(tr.mean == doctest::Approx(0.366667).epsilon(1e-6));
        CHECK(tr.untagged_tokens == 0);

        const std::vector<entropy::SegmentSpan> out_of_range{{SegmentKind::Think, 2, 5}};
        CHECK_THROWS_AS((void)entropy::trace(mixed, out_of_range), Error);
    }

    TEST_CASE("parallel and serial entropies agree") {
        testing::Rng rng(8);
        std::uniform_real_distribution<double> u(0.01, 1.0);
        std::vector<TokenStep> steps;
        for (int i = 0; i < 3000; ++i) {
            TokenStep s{"t", {}, std::nullopt};
            double sum = 0;
            for (int k = 0; k < 5; ++k) sum += s.alternatives.emplace_back("x", u(rng)).second;
            for (auto& a : s.alternatives) a.second /= sum;
            steps.push_back(std::move(s));
        }
        CHECK(entropy::entropies(steps) == entropy::entropies_serial(steps));
    }

    TEST_CASE("kde single value") {
        const std::vector<double> one{0.7};
        const auto c = entropy::kde(one);
        std::size_t peak = 0, nearest = 0;
        for (std::size_t i = 0; i < c.x.size(); ++i) {
            if (c.density[i] > c.density[peak]) peak = i;
            if (std::abs(c.x[i] - 0.7) < std::abs(c.x[nearest] - 0.7)) nearest = i;
        }
        CHECK(peak == nearest);
        CHECK(entropy::trapezoid(c.x, c.density) == doctest::Approx(1.0).epsilon(1e-3));
    }

    TEST_CASE("kde of mirrored data is symmetric") {
        testing::Rng rng(4);
        std::normal_distribution<double> g(1.0, 0.7);
        std::vector<double> v;
        for (int i = 0; i < 200; ++i) {
            const double x = g(rng);
            v.push_back(x);
            v.push_back(-x);
        }
        const auto c = entropy::kde(v);
        const std::size_t n = c.x.size();
        for (std::size_t i = 0; i < n; ++i) {
            CHECK(std::abs(c.x[i] + c.x[n - 1 - i]) < 1e-9);
            CHECK(std::abs(c.density[i] - c.density[n - 1 - i]) < 1e-9);
        }
    }

    TEST_CASE("kde area and kernel agreement") {
        testing::Rng rng(12);
        std::vector<std::vector<double>> sets;
        std::uniform_real_distribution<double> u(0.0, 3.5);
        std::vector<double> unif, bimodal, tight;
        for (int i = 0; i < 500; ++i) unif.push_back(u(rng));
        for (int i = 0; i < 300; ++i) bimodal.push_back(i % 2 ? 0.05 + 0.01 * u(rng) : 3.3 + 0.01 * u(rng));
        for (int i = 0; i < 50; ++i) tight.push_back(1.0);
        for (const auto& v : {unif, bimodal, tight}) {
            const auto c = entropy::kde(v);
            CHECK(entropy::trapezoid(c.x, c.density) == doctest::Approx(1.0).epsilon(1e-3));
            const auto s = entropy::kde_serial(v);
            CHECK(s.density == c.density);
            entropy::KdeOptions opt;
            opt.bandwidth = 0.2;
            const auto fixed = entropy::kde(v, opt);
            CHECK(fixed.bandwidth == 0.2);
            CHECK(entropy::trapezoid(fixed.x, fixed.density) == doctest::Approx(1.0).epsilon(1e-3));
        }
        CHECK_THROWS_AS((void)entropy::kde(std::vector<double>{}), Error);
    }

    TEST_CASE("token stream parsing") {
        std::istringstream in(R"({"token": "a", "alternatives": [["a", 0.5], ["b", 0.5]]}

{"token": "b", "alternatives": [["b", 0.9]], "tail_mass": 0.1}
)");
        const auto steps = entropy::read_token_stream(in);
        REQUIRE(steps.size() == 2);
        CHECK(entropy::shannon_entropy(steps[0]) == doctest::Approx(1.0));
        CHECK(steps[1].tail_mass);
        std::istringstream bad("{not json}\n");
        CHECK_THROWS_AS((void)entropy::read_token_stream(bad), Error);
    }
}
