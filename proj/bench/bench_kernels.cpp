// Serial reference kernels against their OpenMP versions on one synthetic bundle.
// The Arg is the worker count for the parallel kernels (0 = OpenMP default).

#include "icfenc/encoding.hpp"
#include "icfenc/evaluation.hpp"
#include "icfenc/features.hpp"
#include "icfenc/synth.hpp"

#include <benchmark/benchmark.h>

using namespace icfenc;

namespace {

const SynthBundle& bundle() {
  static const SynthBundle b = [] {
    SynthConfig c;
    c.seed = 1;
    c.n_train = 400;
    c.voxels = 96;
    return make_synthetic(c);
  }();
  return b;
}

EncodingConfig config() {
  EncodingConfig c;
  c.solver = SolverConfig::with_sparsity(8);
  return c;
}

const EncodingModelSet& models() {
  static const EncodingModelSet m = train_voxelwise(bundle().train_icf, bundle().train_responses, config());
  return m;
}

void BM_pool_serial(benchmark::State& st) {
  for (auto _ : st) benchmark::DoNotOptimize(reference::build_feature_matrix(bundle().train_states));
}

void BM_pool_omp(benchmark::State& st) {
  const int w = static_cast<int>(st.range(0));
  for (auto _ : st) benchmark::DoNotOptimize(build_feature_matrix(bundle().train_states, {}, w));
}

void BM_train_serial(benchmark::State& st) {
  for (auto _ : st)
    benchmark::DoNotOptimize(reference::train_voxelwise(bundle().train_icf, bundle().train_responses, config()));
}

void BM_train_omp(benchmark::State& st) {
  const int w = static_cast<int>(st.range(0));
  for (auto _ : st)
    benchmark::DoNotOptimize(train_voxelwise(bundle().train_icf, bundle().train_responses, config(), w));
}

void BM_evaluate_serial(benchmark::State& st) {
  for (auto _ : st) {
    const Matrix p = reference::predict(models(), bundle().test_icf);
    benchmark::DoNotOptimize(reference::evaluate_predictions(p, bundle().test_responses, FeatureSource::icf()));
  }
}

void BM_evaluate_omp(benchmark::State& st) {
  const int w = static_cast<int>(st.range(0));
  for (auto _ : st) {
    const Matrix p = predict(models(), bundle().test_icf, w);
    benchmark::DoNotOptimize(evaluate_predictions(p, bundle().test_responses, FeatureSource::icf(), w));
  }
}

}  // namespace

BENCHMARK(BM_pool_serial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_pool_omp)->Arg(1)->Arg(2)->Arg(4)->Arg(0)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_train_serial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_train_omp)->Arg(1)->Arg(2)->Arg(4)->Arg(0)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_evaluate_serial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_evaluate_omp)->Arg(1)->Arg(2)->Arg(4)->Arg(0)->Unit(benchmark::kMillisecond);

int main(int argc, char** argv) {
  // Build the fixtures outside the timed loops.
  models();
  benchmark::Initialize(&argc, argv);
  if (benchmark::ReportUnrecognizedArguments(argc, argv)) return 1;
  benchmark::RunSpecifiedBenchmarks();
  benchmark::Shutdown();
  return 0;
}
