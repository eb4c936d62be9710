#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "cmdtriage/kernels.hpp"

namespace {

using cmdtriage::kernels::PointSet;

struct Points {
  std::vector<double> data;
  PointSet set;
};

Points make_points(std::size_t n, std::size_t dim) {
  Points p;
  std::mt19937_64 rng(1234);
  std::normal_distribution<double> g;
  p.data.resize(n * dim);
  for (auto& x : p.data) x = g(rng);
  p.set = PointSet{n, dim, p.data, {}, 0.0};
  return p;
}

template <double (*Fn)(const PointSet&)>
void run(benchmark::State& state) {
  const auto p = make_points(static_cast<std::size_t>(state.range(0)), static_cast<std::size_t>(state.range(1)));
  for (auto _ : state) benchmark::DoNotOptimize(Fn(p.set));
  state.counters["pairs"] = cmdtriage::kernels::pair_count(p.set.count);
}

void args(benchmark::internal::Benchmark* b) {
  for (int n : {5, 20, 64, 256, 1024})
    for (int d : {8, 300}) b->Args({n, d});
}

}  // namespace

BENCHMARK(run<cmdtriage::kernels::pair_distance_sum_serial>)->Name("distance/serial")->Apply(args);
BENCHMARK(run<cmdtriage::kernels::pair_distance_sum_parallel>)->Name("distance/parallel")->Apply(args);
BENCHMARK(run<cmdtriage::kernels::pair_cosine_sum_serial>)->Name("cosine/serial")->Apply(args);
BENCHMARK(run<cmdtriage::kernels::pair_cosine_sum_parallel>)->Name("cosine/parallel")->Apply(args);

BENCHMARK_MAIN();
