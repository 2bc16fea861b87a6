#include <memory>
#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "windbess/env.hpp"
#include "windbess/market_data.hpp"
#include "windbess/nn.hpp"
#include "windbess/po.hpp"

using namespace windbess;

namespace {

void BM_MlpForward(benchmark::State& state) {
  const int hidden = static_cast<int>(state.range(0));
  const int batch = static_cast<int>(state.range(1));
  std::mt19937_64 rng(1);
  const nn::Mlp net({10, hidden, hidden, 1}, nn::Activation::Identity, rng);
  const Eigen::MatrixXd x = Eigen::MatrixXd::Random(10, batch);
  for (auto _ : state) benchmark::DoNotOptimize(net.forward(x));
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_MlpForward)->Args({64, 64})->Args({256, 256});

void BM_MlpBackward(benchmark::State& state) {
  const int hidden = static_cast<int>(state.range(0));
  const int batch = static_cast<int>(state.range(1));
  std::mt19937_64 rng(1);
  const nn::Mlp net({10, hidden, hidden, 1}, nn::Activation::Identity, rng);
  const Eigen::MatrixXd x = Eigen::MatrixXd::Random(10, batch);
  const Eigen::MatrixXd up = Eigen::MatrixXd::Ones(1, batch);
  nn::Mlp::Tape tape;
  for (auto _ : state) {
    net.forward(x, tape);
    benchmark::DoNotOptimize(net.backward(tape, up));
  }
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_MlpBackward)->Args({64, 64})->Args({256, 256});

void BM_DpOptimize(benchmark::State& state) {
  po::DpGrid grid;
  grid.horizon = static_cast<size_t>(state.range(0));
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> spot(-30, 150), fcas(0, 40), wind(0, 67);
  po::Forecast fc;
  for (size_t i = 0; i < grid.horizon; ++i) fc.steps.push_back({spot(rng), fcas(rng), fcas(rng), wind(rng)});
  const model::SystemConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(po::dp_optimize(fc, {5.0}, {env::Market::Joint, true}, grid, cfg));
}
BENCHMARK(BM_DpOptimize)->Arg(6)->Arg(12)->Unit(benchmark::kMillisecond);

void BM_EnvStep(benchmark::State& state) {
  const model::SystemConfig cfg;
  const size_t n = 4096;
  const auto prices = market::gen_synthetic_prices(market::MeanRevertingProfile{}, n, 1);
  const auto wind = market::gen_synthetic_wind(n, cfg.p_wind_max, 2);
  const auto ticks = std::make_shared<const std::vector<market::MarketTick>>(market::make_ticks(prices, wind, 3, cfg));
  env::EnvOptions opts;
  opts.episode_len = 0;
  env::Environment e(cfg, {env::Market::Joint, true}, ticks, opts);
  e.reset(0);
  const std::vector<double> w{0.1, 0.2}, b{-0.5, 0.1, -0.3, 0.2};
  for (auto _ : state) {
    if (e.done()) e.reset(0);
    benchmark::DoNotOptimize(e.step(w, b));
  }
}
BENCHMARK(BM_EnvStep);

}  // namespace

BENCHMARK_MAIN();
