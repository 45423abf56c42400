#include <benchmark/benchmark.h>

#include "vrkf/bench.hpp"
#include "vrkf/filters.hpp"
#include "vrkf/statespace.hpp"

namespace {

using namespace vrkf;

struct Fixture {
  Experiment exp;
  Trajectory traj;
  Fixture(const std::string& id, int case_id, long N)
      : exp(build_experiment(id, case_id)),
        traj(simulate(exp.model, exp.w_spec, exp.v_spec, {},
                      VectorXd::Zero(exp.model.n()), N, 1)) {}
};

void BM_KfStep(benchmark::State& state) {
  static Fixture fx("example1", 1, 2000);
  FilterState st = default_initial_state(fx.exp.model);
  long k = 1;
  for (auto _ : state) {
    st = kf_step(fx.exp.model, st, std::nullopt, fx.traj.y(k)).state;
    if (++k > fx.traj.steps()) k = 1;
    benchmark::DoNotOptimize(st.x);
  }
}
BENCHMARK(BM_KfStep);

void BM_StkfStep(benchmark::State& state) {
  static Fixture fx("example1", 1, 2000);
  ChannelLosses losses;
  for (int i = 0; i < 2; ++i)
    losses.push_back(RobustLoss::checked(LossKind::StudentLog, kGaussianNu, 1.0));
  losses.push_back(RobustLoss::checked(LossKind::StudentLog, 4.0, 1.0));
  FilterState st = default_initial_state(fx.exp.model);
  long k = 1;
  for (auto _ : state) {
    st = stkf_step(fx.exp.model, st, std::nullopt, fx.traj.y(k), losses, 0.01, 4).state;
    if (++k > fx.traj.steps()) k = 1;
    benchmark::DoNotOptimize(st.x);
  }
}
BENCHMARK(BM_StkfStep);

void BM_Ar1StepAugmented(benchmark::State& state) {
  static Fixture fx("example3", 2, 2000);
  FilterState st = default_initial_state(fx.exp.model);
  ChannelHyper hyper;
  hyper.nu = VectorXd::Constant(7, 3.0);
  hyper.nu.tail(2).setConstant(100.0);
  hyper.tau2 = VectorXd::Ones(7);
  hyper.rho = VectorXd::Ones(7);
  hyper.rho.tail(2).setConstant(0.98);
  long k = 1;
  for (auto _ : state) {
    const auto r = ar1_step(fx.exp.model, st, hyper, std::nullopt, fx.traj.y(k),
                            LossKind::StudentLog, 0.01, 4);
    st = r.state;
    hyper = r.hyper;
    if (++k > fx.traj.steps()) {
      k = 1;
      st = default_initial_state(fx.exp.model);
    }
    benchmark::DoNotOptimize(st.x);
  }
}
BENCHMARK(BM_Ar1StepAugmented);

void BM_SimulateTrajectory(benchmark::State& state) {
  const Experiment exp = build_experiment("example1", 1);
  std::uint64_t seed = 1;
  for (auto _ : state) {
    const Trajectory traj = simulate(exp.model, exp.w_spec, exp.v_spec, {},
                                     VectorXd::Zero(2), 6000, seed++);
    benchmark::DoNotOptimize(traj.measurements.back());
  }
}
BENCHMARK(BM_SimulateTrajectory)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
