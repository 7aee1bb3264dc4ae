#include <benchmark/benchmark.h>

#include "ofm/driver.hpp"
#include "ofm/eig_oracle.hpp"
#include "ofm/graph.hpp"
#include "ofm/kernels.hpp"
#include "ofm/parallel.hpp"

using namespace ofm;

namespace {

SparseSym sbm_operator(std::size_t n) {
  SbmParams p{n, 8, 40.0 / static_cast<double>(n), 2.0 / static_cast<double>(n), 1.0, 11};
  return build_shifted_operator(generate_sbm(p).first);
}

void BM_SpmmSerial(benchmark::State& state) {
  const SparseSym a = sbm_operator(static_cast<std::size_t>(state.range(0)));
  const FeatureMatrix x = random_start(a.n, state.range(1), 1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(spmm_serial(a, x));
  }
  state.SetItemsProcessed(state.iterations() * a.nnz() * state.range(1));
}
BENCHMARK(BM_SpmmSerial)->Args({2000, 8})->Args({20000, 8})->Args({20000, 32});

void BM_Spmm1p5d(benchmark::State& state) {
  const SparseSym a = sbm_operator(20000);
  const FeatureMatrix x = random_start(a.n, 8, 1);
  PartitionedProblem part = partition_1p5d(a, x, static_cast<int>(state.range(0)));
  for (auto _ : state) {
    CommLedger ledger;
    benchmark::DoNotOptimize(spmm_1p5d(part.grid, part.x, ledger));
  }
}
BENCHMARK(BM_Spmm1p5d)->Arg(1)->Arg(4)->Arg(16)->Arg(64);

void BM_OfmIteration(benchmark::State& state) {
  const SparseSym a = sbm_operator(20000);
  const auto method = static_cast<Method>(state.range(0));
  OFMOptions o;
  o.k = 8;
  o.max_iters = 1 << 30;
  o.grad_tol = 0.0;
  o.abs_tol = 0.0;
  SerialBackend backend(a);
  OFMSolver solver(method, a, o, backend);
  solver.start(random_start(a.n, o.k, 3));
  for (auto _ : state) {
    benchmark::DoNotOptimize(solver.step());
  }
  state.SetLabel(std::string(method_name(method)));
}
BENCHMARK(BM_OfmIteration)->DenseRange(0, 3);

void BM_Jacobi(benchmark::State& state) {
  const Index n = state.range(0);
  Eigen::MatrixXd m = Eigen::MatrixXd::Random(n, n);
  m = (m + m.transpose()).eval();
  for (auto _ : state) {
    benchmark::DoNotOptimize(jacobi_eig(m));
  }
}
BENCHMARK(BM_Jacobi)->Arg(8)->Arg(32)->Arg(64);

}  // namespace

BENCHMARK_MAIN();
