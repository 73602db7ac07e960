// Serial reference versus OpenMP kernels on the synthetic data sets.

#include <benchmark/benchmark.h>

#include "crysflow/entropy.hpp"
#include "crysflow/funnel.hpp"
#include "crysflow/hull.hpp"
#include "crysflow/match.hpp"
#include "generators.hpp"

using namespace crysflow;

namespace {

const testing::DedupePool& pool() {
    static const auto p = testing::dedupe_pool(1, 40, 5);
    return p;
}

const testing::FunnelCorpus& corpus() {
    static const auto c = testing::funnel_corpus(7);
    return c;
}

struct HullCase {
    PhaseDiagram pd;
    std::vector<HullEntry> queries;
};

const HullCase& hull_case() {
    static const HullCase h = [] {
        testing::Rng rng(3);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        const std::vector<std::string> els{"A", "B", "C", "D"};
        std::vector<HullEntry> es;
        for (const auto& el : els) es.push_back({el, Composition({{el, 1.0}}), 0.0});
        while (es.size() < 60) {
            std::map<std::string, double> m;
            for (const auto& el : els)
                if (u(rng) < 0.6) m[el] = 1 + static_cast<int>(4 * u(rng));
            if (m.size() < 2) continue;
            es.push_back({"e" + std::to_string(es.size()), Composition(m), -u(rng)});
        }
        std::vector<HullEntry> qs;
        for (int i = 0; i < 2000; ++i) {
            std::map<std::string, double> m;
            for (const auto& el : els) m[el] = 0.1 + u(rng);
            qs.push_back({"q", Composition(m), -0.5 * u(rng)});
        }
        return HullCase{PhaseDiagram(es), qs};
    }();
    return h;
}

const std::vector<entropy::TokenStep>& token_steps() {
    static const auto steps = [] {
        testing::Rng rng(5);
        std::uniform_real_distribution<double> u(0.01, 1.0);
        std::vector<entropy::TokenStep> out(200000);
        for (auto& s : out) {
            double sum = 0;
            for (int k = 0; k < 20; ++k) sum += s.alternatives.emplace_back("t", u(rng)).second;
            for (auto& a : s.alternatives) a.second /= sum;
        }
        return out;
    }();
    return steps;
}

const std::vector<double>& kde_sample() {
    static const auto sample = [] {
        testing::Rng rng(6);
        std::normal_distribution<double> g(1.0, 0.6);
        std::vector<double> out(50000);
        for (auto& x : out) x = g(rng);
        return out;
    }();
    return sample;
}

void BM_dedupe_serial(benchmark::State& st) {
    for (auto _ : st) benchmark::DoNotOptimize(dedupe_serial(pool().structures));
}
void BM_dedupe_omp(benchmark::State& st) {
    for (auto _ : st) benchmark::DoNotOptimize(dedupe(pool().structures));
}

void BM_funnel_serial(benchmark::State& st) {
    screen::FunnelConfig cfg;
    cfg.reference_db = corpus().known;
    for (auto _ : st) benchmark::DoNotOptimize(screen::run_funnel_serial(corpus().candidates, corpus().references, cfg));
}
void BM_funnel_omp(benchmark::State& st) {
    screen::FunnelConfig cfg;
    cfg.reference_db = corpus().known;
    for (auto _ : st) benchmark::DoNotOptimize(screen::run_funnel(corpus().candidates, corpus().references, cfg));
}

void BM_ehull_serial(benchmark::State& st) {
    for (auto _ : st) benchmark::DoNotOptimize(energies_above_hull_serial(hull_case().pd, hull_case().queries));
}
void BM_ehull_omp(benchmark::State& st) {
    for (auto _ : st) benchmark::DoNotOptimize(energies_above_hull(hull_case().pd, hull_case().queries));
}

void BM_entropy_serial(benchmark::State& st) {
    const auto& steps = token_steps();
    for (auto _ : st) benchmark::DoNotOptimize(entropy::entropies_serial(steps));
}
void BM_entropy_omp(benchmark::State& st) {
    const auto& steps = token_steps();
    for (auto _ : st) benchmark::DoNotOptimize(entropy::entropies(steps));
}

void BM_kde_serial(benchmark::State& st) {
    const auto& v = kde_sample();
    for (auto _ : st) benchmark::DoNotOptimize(entropy::kde_serial(v));
}
void BM_kde_omp(benchmark::State& st) {
    const auto& v = kde_sample();
    for (auto _ : st) benchmark::DoNotOptimize(entropy::kde(v));
}

}  // namespace

BENCHMARK(BM_dedupe_serial)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_dedupe_omp)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_funnel_serial)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_funnel_omp)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_ehull_serial)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_ehull_omp)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_entropy_serial)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_entropy_omp)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_kde_serial)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_kde_omp)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
