// Hot-path timings: canonicalization, the variation pipeline, the sieved
// recursion, and pointwise jet evaluation.

#include <benchmark/benchmark.h>

#include "confinv/canon.hpp"
#include "confinv/conformal.hpp"
#include "confinv/expr.hpp"
#include "confinv/ibp.hpp"
#include "confinv/oracle.hpp"
#include "confinv/parse.hpp"

namespace {

using namespace confinv;

const char* kGb4 =
    "contr(Rm[a b c d] * Rm[a b c d]) - 4*contr(Ric[a b] * Ric[a b])"
    " + contr(Sc * Sc)";

LinComb gb4_iz(int z) {
  LinComb p = rewrite_dimension(parse(kGb4), 4);
  return collect(pin_coefficients(
      rewrite_dimension(polarize(conformal_variation(p, XiMode::General), z),
                        4)));
}

void BM_collect_variation(benchmark::State& state) {
  LinComb v = conformal_variation(rewrite_dimension(parse(kGb4), 4),
                                  XiMode::General);
  for (auto _ : state) benchmark::DoNotOptimize(collect(v));
}
BENCHMARK(BM_collect_variation);

void BM_variation_gb4(benchmark::State& state) {
  LinComb p = rewrite_dimension(parse(kGb4), 4);
  for (auto _ : state)
    benchmark::DoNotOptimize(conformal_variation(p, XiMode::General));
}
BENCHMARK(BM_variation_gb4);

void BM_descend_gb4(benchmark::State& state) {
  LinComb iz = gb4_iz(1);
  for (auto _ : state) benchmark::DoNotOptimize(collect(descend(iz)));
}
BENCHMARK(BM_descend_gb4);

void BM_superdiv_sc2(benchmark::State& state) {
  LinComb p = rewrite_dimension(parse("contr(Sc)"), 2);
  LinComb iz = collect(pin_coefficients(rewrite_dimension(
      polarize(conformal_variation(p, XiMode::General), 1), 2)));
  for (auto _ : state) benchmark::DoNotOptimize(super_divergence(iz));
}
BENCHMARK(BM_superdiv_sc2);

void BM_superdiv_gb4(benchmark::State& state) {
  LinComb iz = gb4_iz(1);
  for (auto _ : state) benchmark::DoNotOptimize(super_divergence(iz));
}
BENCHMARK(BM_superdiv_gb4);

void BM_metric_tables(benchmark::State& state) {
  num::MetricJet j = num::random_metric(4, 6, 7);
  for (auto _ : state) {
    num::Tables tb(j, 7);
    benchmark::DoNotOptimize(tb.riemann(2));
  }
}
BENCHMARK(BM_metric_tables);

void BM_eval_gb4(benchmark::State& state) {
  LinComb p = rewrite_dimension(parse(kGb4), 4);
  num::MetricJet j = num::random_metric(4, 6, 7);
  num::Tables tb(j, 7);
  for (auto _ : state) benchmark::DoNotOptimize(num::eval(p, tb));
}
BENCHMARK(BM_eval_gb4);

}  // namespace

BENCHMARK_MAIN();
