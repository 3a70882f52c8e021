#include <benchmark/benchmark.h>

#include <memory>
#include <vector>

#include "certsmooth/certifier.hpp"
#include "certsmooth/classifier.hpp"
#include "certsmooth/stats.hpp"

using namespace certsmooth;

static void BM_InvStdNormalCdf(benchmark::State& state)
{
    double p = 1e-6;
    for (auto _ : state) {
        benchmark::DoNotOptimize(inv_std_normal_cdf(p));
        p = p < 0.5 ? p * 1.7 : 1e-6;
    }
}
BENCHMARK(BM_InvStdNormalCdf);

static void BM_ClopperPearsonLower(benchmark::State& state)
{
    const auto n = static_cast<std::uint64_t>(state.range(0));
    std::uint64_t k = n / 2;
    for (auto _ : state) {
        benchmark::DoNotOptimize(clopper_pearson_lower(k, n, SignificanceLevel(0.001)));
        k = k + 1 < n ? k + 1 : n / 2;
    }
}
BENCHMARK(BM_ClopperPearsonLower)->Arg(1000)->Arg(100000);

static void BM_SampleUnderNoise(benchmark::State& state)
{
    const RegionClassifier1D band({0.3, 0.7}, {{0, true}, {1, false}, {1, true}});
    const std::vector<double> x{0.0};
    const auto n = static_cast<std::uint64_t>(state.range(0));
    std::uint64_t seed = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(
            sample_under_noise(band, x, 0.25, n, seed++, Stage::Estimation, LabelSpace::Extended));
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) * state.range(0));
}
BENCHMARK(BM_SampleUnderNoise)->Arg(10000);

static void BM_CertifyLinear(benchmark::State& state)
{
    const LinearModel m{{3.0, 4.0}, -1.0};
    const UncertaintyEquippedClassifier f(std::make_shared<LinearClassifier>(m), UncertaintyConfig::disabled());
    const std::vector<double> x{0.4, 0.3};
    SamplingConfig cfg;
    cfg.n0 = 100;
    cfg.n = 10000;
    for (auto _ : state) {
        benchmark::DoNotOptimize(certify(f, x, cfg, CertificationMode::Standard));
        ++cfg.seed;
    }
}
BENCHMARK(BM_CertifyLinear);
BENCHMARK_MAIN();
