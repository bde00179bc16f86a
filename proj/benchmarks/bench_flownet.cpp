#include <flownet/neuralode.hpp>
#include <flownet/variational.hpp>

#include <benchmark/benchmark.h>

#include "support.hpp"

using namespace flownet;
using namespace flownet::testing;

static void BM_SimulateTwoTank(benchmark::State& state) {
  const auto eq = two_tank_equations();
  SimulationOptions opts;
  opts.t_end = 40.0;
  opts.method = static_cast<Method>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(simulate(eq, Vector::Zero(2), opts));
}
BENCHMARK(BM_SimulateTwoTank)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

static void BM_SolveSteadyRandom(benchmark::State& state) {
  const auto r = random_linear_network(7, static_cast<int>(state.range(0)));
  const NetworkEquations eq(ProcessNetwork::build(r.definition()), r.bc());
  for (auto _ : state) benchmark::DoNotOptimize(solve_steady(eq));
}
BENCHMARK(BM_SolveSteadyRandom)->Arg(6)->Arg(40);

static void BM_SolveSteadyNonlinear(benchmark::State& state) {
  auto def = two_tank();
  def.branches[0].law = ResistiveLaw::tanh(2.0, 0.5);
  def.branches[2].law = ResistiveLaw::tanh(6.0, 0.3);
  const NetworkEquations eq(ProcessNetwork::build(def), two_tank_bc());
  for (auto _ : state) benchmark::DoNotOptimize(solve_steady(eq));
}
BENCHMARK(BM_SolveSteadyNonlinear);

static void BM_Gradient(benchmark::State& state) {
  const auto eq = two_tank_equations();
  const auto data = generate_data(eq, Vector::Zero(2), 0.02, 60, 0.05, 1);
  const auto m = build_model(eq.network(), Activation::relu, Activation::relu, 0.02, 1);
  const std::vector<Vector> obs(data.observed.begin(), data.observed.begin() + 50);
  const Vector w0 = full_state(m, obs.front(), data.boundary_potentials);
  const bool adjoint = state.range(0) == 1;
  for (auto _ : state) benchmark::DoNotOptimize(adjoint ? grad_adjoint(m, w0, obs) : grad_bptt(m, w0, obs));
}
BENCHMARK(BM_Gradient)->Arg(0)->Arg(1);

static void BM_TrainIterations(benchmark::State& state) {
  const auto eq = two_tank_equations();
  const auto data = generate_data(eq, Vector::Zero(2), 0.02, 150, 0.05, 0);
  TrainingConfig config;
  config.iterations = 50;
  for (auto _ : state) {
    auto m = build_model(eq.network(), Activation::identity, Activation::identity, 0.02, 0);
    benchmark::DoNotOptimize(train(m, data, config));
  }
}
BENCHMARK(BM_TrainIterations)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
