// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero when any selected criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "windbess/env.hpp"
#include "windbess/experiment.hpp"
#include "windbess/market_data.hpp"
#include "windbess/model.hpp"
#include "windbess/nn.hpp"
#include "windbess/po.hpp"
#include "windbess/td3.hpp"

using namespace windbess;
namespace fs = std::filesystem;

namespace {

const model::SystemConfig kCfg{};

const env::Scenario kScenarios[] = {{env::Market::SpotOnly, false}, {env::Market::SpotOnly, true},
                                    {env::Market::RegOnly, false},  {env::Market::RegOnly, true},
                                    {env::Market::Joint, false},    {env::Market::Joint, true}};

struct Outcome {
  bool pass = true;
  std::string detail;
};

// Collects named numeric checks and remembers the first failure.
class Checks {
 public:
  void near(const std::string& what, double got, double want, double rel = 1e-6) {
    ++count_;
    const double scale = std::max(std::abs(want), 1e-12);
    if (!(std::abs(got - want) <= rel * scale)) fail(what + ": got " + fmt(got) + ", want " + fmt(want));
  }
  void that(const std::string& what, bool ok) {
    ++count_;
    if (!ok) fail(what);
  }
  Outcome outcome(std::string detail) const {
    if (!first_.empty()) return {false, first_};
    return {true, std::to_string(count_) + " checks; " + detail};
  }

  static std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
  }

 private:
  void fail(const std::string& msg) {
    if (first_.empty()) first_ = msg;
  }
  int count_ = 0;
  std::string first_;
};

model::BessBid bess(model::BessMode mode, double spot, double reg, double wc) { return {mode, spot, reg, wc}; }

// 1. Hand-evaluated equation examples.
Outcome equations() {
  using model::BessMode;
  Checks c;
  const double dt = kCfg.dt_hours;

  const auto d1 = model::wind_dispatch_outcome(50, 60);
  c.near("dispatch p_dis", d1.p_dis, 50);
  c.near("dispatch curtailed", d1.p_wc_available, 10);

  const auto cd = model::settle_curtailment(BessMode::Charge, 8, 10, 50);
  c.near("curtailment drawn", cd.p_wc_drawn, 8);
  c.near("updated availability", cd.p_w_updated, 58);

  const auto de_spot = model::energy_delta(bess(BessMode::Charge, 10, 0, 0), model::AgcTrace::zeros(75), 0, kCfg);
  c.near("spot energy", de_spot.spot, 10.0 / 12.0);
  const model::AgcTrace raise(std::vector<double>(75, 1.0));
  const auto de_reg = model::energy_delta(bess(BessMode::Discharge, 0, 10, 0), raise, 0, kCfg);
  c.near("regulation energy", de_reg.reg, -(4.0 / 3600.0) * 75 * 10);

  c.near("wind revenue, no deviation", model::wind_revenue_interval({50, 1.0}, 50, 100, 0, kCfg), 100 * 50 * dt);
  c.near("wind revenue, split and deviation", model::wind_revenue_interval({40, 0.5}, 30, 80, 40, kCfg),
         60 * (30 - 15) * dt);

  c.near("discharge spot revenue", model::bess_revenue_interval(bess(BessMode::Discharge, 10, 0, 0), 100, 0, 0, kCfg),
         100 * 0.95 * 10 * dt);
  c.near("charge spot cost", model::bess_revenue_interval(bess(BessMode::Charge, 10, 0, 0), 100, 0, 0, kCfg),
         -100 * (10 / 0.95) * dt);
  c.near("regulation lower reward", model::bess_revenue_interval(bess(BessMode::Charge, 0, 10, 0), 0, 0, 20, kCfg),
         20 * (10 / 0.95) * dt);

  c.near("degradation", model::degradation_cost_interval(bess(BessMode::Discharge, 6, 4, 0), kCfg), 10 * dt);

  const auto step = model::step_battery({5.0}, 10.0 / 12.0, kCfg);
  c.that("step accepted", step.accepted);
  c.near("step energy", step.state.energy, 5.0 + 10.0 / 12.0);

  market::EmaTracker ema(0.9);
  ema.update(50);
  c.near("ema", ema.update(100), 55);

  market::CurtailmentWindow window(10);
  double f = 0.0;
  for (int i = 0; i < 10; ++i) f = window.push(i < 3);
  c.near("curtailment frequency", f, 0.3);

  market::MarketTick prev;
  prev.p_wind_act = 33.5;
  prev.agc = model::AgcTrace::zeros(75);
  c.near("wind state", env::build_wind_state(&prev, kCfg, {})[0], 0.5);
  c.near("battery state", env::build_bess_state(&prev, {4.75}, 0.0, kCfg, {})[0], 0.5);

  const model::WindBid wb = env::decode_wind_action(std::vector<double>{0, 0}, env::Market::Joint, kCfg);
  c.near("decoded availability", wb.availability, 33.5);
  c.near("decoded split", wb.spot_share, 0.5);

  const model::BessBid dis = env::decode_bess_action(std::vector<double>{0.5, 0, -1, -1}, {env::Market::Joint, true}, kCfg);
  c.that("decoded discharge", dis.mode == BessMode::Discharge && dis.p_reg == 0 && dis.p_wc == 0);
  c.near("decoded discharge spot", dis.p_spot, 5);
  const model::BessBid ch = env::decode_bess_action(std::vector<double>{-0.5, 0, 0, 0}, {env::Market::Joint, true}, kCfg);
  c.that("decoded charge", ch.mode == BessMode::Charge);
  for (double p : {ch.p_spot, ch.p_reg, ch.p_wc}) c.near("rescaled charge power", p, 10.0 / 3.0);

  c.near("wind reward", env::wind_reward({0.5 * 67, 1.0}, 0.5, 100, 0, kCfg), 50);
  c.near("wind reward with deviation", env::wind_reward({0.6 * 67, 1.0}, 0.4, 100, 0, kCfg), 10);

  c.near("spot reward", env::bess_reward(bess(BessMode::Discharge, 5, 0, 0), 100, 80, 0, 0, 0, 0, 1, kCfg).spot, 9.5);
  c.near("regulation reward", env::bess_reward(bess(BessMode::Charge, 0, 5, 0), 50, 50, 0, 20, 0, 0, 1, kCfg).reg,
         0.5 * 20 / 0.95);
  c.near("curtailment reward", env::bess_reward(bess(BessMode::Charge, 0, 0, 5), 100, 100, 0, 0, 0.3, 10, 1, kCfg).wc,
         1.5 * 100 * 0.5 * 0.3 / 0.95);

  c.near("capacity penalty", env::bess_capacity_penalty(std::vector<double>{-1, -0.2, -0.2, -0.2},
                                                        {env::Market::Joint, true}).value,
         1.2);

  // Critic target: r = 1, gamma = 0.99, target critics 2 and 3.
  {
    td3::Td3Config tc;
    tc.hidden = {4};
    tc.batch_size = 2;
    tc.buffer_capacity = 8;
    tc.target_smoothing = false;
    td3::Td3Agent agent(2, 1, tc, 1);
    auto constant = [](nn::Mlp& net, double v) {
      for (double& p : net.parameters()) p = 0.0;
      net.bias(net.layer_count() - 1)(0) = v;
    };
    constant(agent.target_critic1(), 2.0);
    constant(agent.target_critic2(), 3.0);
    td3::Batch b{Eigen::MatrixXd::Zero(2, 1), Eigen::MatrixXd::Zero(1, 1), Eigen::RowVectorXd::Ones(1),
                 Eigen::MatrixXd::Zero(2, 1)};
    c.near("critic target", agent.critic_target(b)(0), 2.98);

    nn::Mlp critic = nn::Mlp::zeros({3, 4, 1}, nn::Activation::Identity);
    constant(critic, 3.0);
    Eigen::RowVectorXd y(1);
    y << 2.98;
    c.near("critic loss", td3::critic_loss(critic, b.states, b.actions, y).loss, 2e-4);
  }

  {
    nn::Mlp main = nn::Mlp::zeros({1, 1}, nn::Activation::Identity);
    nn::Mlp target = main;
    for (double& p : main.parameters()) p = 1.0;
    nn::soft_update(target, main, 0.01);
    c.near("soft update", target.parameters()[0], 0.01);
  }

  {
    nn::Adam adam(3, {}, "probe");
    std::vector<double> params{1.0, 1.0, 1.0};
    const std::vector<double> g{0.5, -2.0, 0.05};
    adam.step(params, g);
    c.near("adam first step +", params[0], 1.0 - 3e-4, 1e-9);
    c.near("adam first step -", params[1], 1.0 + 3e-4, 1e-9);
    c.near("adam first step small", params[2], 1.0 - 3e-4, 1e-9);
  }

  {
    std::mt19937_64 rng(5);
    double sum = 0.0;
    const int n = 1'000'000 / 75 * 75;
    for (int i = 0; i < n / 75; ++i)
      for (double s : market::gen_agc_trace(rng, 75).signals()) sum += s;
    c.that("agc mean near zero", std::abs(sum / n) <= 0.01);
  }

  {
    // Two-step plan from empty: charge fully at 20, discharge what was stored at 100.
    po::Forecast fc;
    fc.steps = {{20, 0, 0, 0}, {100, 0, 0, 0}};
    po::DpGrid g;
    g.horizon = 2;
    const po::Plan plan = po::dp_optimize(fc, {kCfg.e_min}, {env::Market::SpotOnly, false}, g, kCfg);
    const double want = -20 * 10 / 0.95 * dt + 100 * 0.95 * 7.5 * dt - 7.5 * dt;
    c.near("two-step plan revenue", plan.revenue, want);
    c.near("two-step plan revenue (oracle)",
           po::brute_force_oracle(fc, {kCfg.e_min}, {env::Market::SpotOnly, false}, {5, 5, 2}, kCfg).revenue,
           po::dp_optimize(fc, {kCfg.e_min}, {env::Market::SpotOnly, false}, {5, 5, 2}, kCfg).revenue);

    po::Forecast flat;
    flat.steps = {{0, 0, 0, 0}, {0, 0, 0, 0}, {0, 0, 0, 0}};
    const po::Plan idle = po::dp_optimize(flat, {5.0}, {env::Market::Joint, true}, {5, 3, 3}, kCfg);
    bool all_idle = true;
    for (const auto& s : idle.steps) all_idle = all_idle && s.bess.mode == model::BessMode::Idle;
    c.that("flat prices plan idles", all_idle);
  }

  return c.outcome("all hand-evaluated examples within 1e-6 relative");
}

std::shared_ptr<const std::vector<market::MarketTick>> synthetic_stream(size_t n, std::uint64_t seed) {
  const auto prices = market::gen_synthetic_prices(market::MeanRevertingProfile{}, n, seed);
  const auto wind = market::gen_synthetic_wind(n, kCfg.p_wind_max, seed + 1);
  return std::make_shared<const std::vector<market::MarketTick>>(market::make_ticks(prices, wind, seed + 2, kCfg));
}

std::vector<double> uniform_raw(std::mt19937_64& rng, size_t n) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  return v;
}

// 2. Random steps keep the battery in bounds and conserve energy.
Outcome conservation() {
  Checks c;
  const size_t steps = 100'000;
  std::mt19937_64 rng(11);
  env::EnvOptions opts;
  opts.episode_len = 0;
  double worst = 0.0;
  for (size_t k = 0; k < 2; ++k) {
    const env::Scenario sc = kScenarios[4 + k];
    env::Environment e(kCfg, sc, synthetic_stream(steps / 2, 100 + k), opts);
    e.reset(0);
    const double initial = e.battery().energy;
    double accepted = 0.0;
    bool in_bounds = true;
    while (!e.done()) {
      const auto r = e.step(uniform_raw(rng, env::kWindActionDim), uniform_raw(rng, env::kBessActionDim));
      if (!r.settlement.bess_rejected) accepted += r.settlement.delta_e.total;
      const double soc = e.battery().energy;
      in_bounds = in_bounds && soc >= kCfg.e_min && soc <= kCfg.e_max;
    }
    c.that("state of charge within limits", in_bounds);
    const double expected = initial + accepted;
    const double err = std::abs(e.battery().energy - expected) / std::abs(expected);
    worst = std::max(worst, err);
    c.that("energy conserved to 1e-9", err <= 1e-9);
  }
  return c.outcome(std::to_string(steps) + " steps, worst relative drift " + Checks::fmt(worst));
}

// 3. Decoded bids always satisfy the bid constraints.
Outcome constraints() {
  Checks c;
  std::mt19937_64 rng(13);
  size_t discharges = 0;
  bool decode_ok = true;
  for (int i = 0; i < 100'000; ++i) {
    const env::Scenario sc = kScenarios[i % 6];
    const model::BessBid b = env::decode_bess_action(uniform_raw(rng, env::kBessActionDim), sc, kCfg);
    const model::WindBid w = env::decode_wind_action(uniform_raw(rng, env::kWindActionDim), sc.market, kCfg);
    bool ok = model::validate_bess_bid(b, kCfg).empty() && model::wind_bid_valid(w, kCfg);
    if (sc.market == env::Market::SpotOnly) ok = ok && b.p_reg == 0.0 && w.spot_share == 1.0;
    if (sc.market == env::Market::RegOnly) ok = ok && b.p_spot == 0.0 && w.spot_share == 0.0;
    if (!sc.coupled) ok = ok && b.p_wc == 0.0;
    if (b.mode == model::BessMode::Idle) ok = ok && b.total_power() == 0.0;
    decode_ok = decode_ok && ok;
  }
  c.that("every decoded bid feasible", decode_ok);

  bool settle_ok = true;
  env::EnvOptions opts;
  opts.episode_len = 0;
  env::Environment e(kCfg, {env::Market::Joint, true}, synthetic_stream(20'000, 7), opts);
  e.reset(0);
  while (!e.done()) {
    const auto r = e.step(uniform_raw(rng, env::kWindActionDim), uniform_raw(rng, env::kBessActionDim));
    if (r.settlement.bess_bid.mode == model::BessMode::Discharge) {
      ++discharges;
      settle_ok = settle_ok && r.settlement.p_wc_drawn == 0.0 && r.settlement.delta_e.wc == 0.0;
    }
  }
  c.that("no curtailment drawn while discharging", settle_ok && discharges > 0);
  return c.outcome("100000 decodes, " + std::to_string(discharges) + " discharging settlements");
}

// 4. Loss gradients against central differences. Draws that straddle a
// ReLU or penalty kink have no finite-difference reference; they are
// redrawn and counted.
Outcome gradients() {
  Checks c;
  std::mt19937_64 rng(19);
  double worst = 0.0;
  size_t max_params = 0;
  int smooth = 0, kinked = 0;
  for (int i = 0; smooth < 100 && i < 1000; ++i) {
    const auto r = td3::check_loss_gradients(rng, {12, 12}, 8, kScenarios[i % 6], kCfg.beta_l);
    if (!r.smooth()) {
      ++kinked;
      continue;
    }
    ++smooth;
    worst = std::max({worst, r.actor_error, r.critic_error});
    max_params = std::max({max_params, r.actor_params, r.critic_params});
  }
  c.that("100 smooth instances", smooth == 100);
  c.that("networks within 1000 parameters", max_params <= 1000);
  c.that("relative error " + Checks::fmt(worst) + " not below 1e-4", worst < 1e-4);
  return c.outcome("100 instances (" + std::to_string(kinked) + " kinked draws replaced), " +
                   std::to_string(max_params) + " params max, worst " + Checks::fmt(worst));
}

po::Forecast random_forecast(std::mt19937_64& rng, size_t h) {
  std::uniform_real_distribution<double> spot(-30, 150), fcas(0, 40), wind(0, 67);
  po::Forecast f;
  for (size_t i = 0; i < h; ++i) f.steps.push_back({spot(rng), fcas(rng), fcas(rng), wind(rng)});
  return f;
}

// 5. Dynamic programming equals exhaustive search.
Outcome oracle() {
  Checks c;
  std::mt19937_64 rng(29);
  std::uniform_int_distribution<int> h(1, 3), ne(2, 5), na(2, 3);
  std::uniform_real_distribution<double> e0(kCfg.e_min, kCfg.e_max);
  int mismatches = 0;
  for (int i = 0; i < 200; ++i) {
    po::DpGrid g;
    g.horizon = static_cast<size_t>(h(rng));
    g.n_energy = ne(rng);
    g.n_action = na(rng);
    const po::Forecast f = random_forecast(rng, g.horizon);
    const model::BatteryState b{e0(rng)};
    const auto& sc = kScenarios[i % 6];
    if (po::dp_optimize(f, b, sc, g, kCfg).revenue != po::brute_force_oracle(f, b, sc, g, kCfg).revenue) ++mismatches;
  }
  c.that(std::to_string(mismatches) + " mismatching instances", mismatches == 0);
  return c.outcome("200 instances exact");
}

// 6. Joint market and coupling never lose revenue under perfect foresight.
Outcome dominance() {
  Checks c;
  po::DpGrid g;
  g.horizon = 6;
  g.n_energy = 19;
  g.n_action = 3;
  double min_joint_gain = 1e300, min_coupling_gain = 1e300;
  for (std::uint64_t i = 0; i < 50; ++i) {
    const auto stream = synthetic_stream(g.horizon, 1000 + i);
    const po::Forecast f = po::perfect_forecast(*stream, g.horizon);
    const model::BatteryState b{5.0};
    auto rev = [&](env::Market m, bool coupled) { return po::dp_optimize(f, b, {m, coupled}, g, kCfg).revenue; };
    const double joint = rev(env::Market::Joint, true);
    const double spot = rev(env::Market::SpotOnly, true), reg = rev(env::Market::RegOnly, true);
    const double uncoupled = rev(env::Market::Joint, false);
    c.that("joint >= max(spot, reg) in scenario " + std::to_string(i), joint >= std::max(spot, reg));
    c.that("coupled >= uncoupled in scenario " + std::to_string(i), joint >= uncoupled);
    min_joint_gain = std::min(min_joint_gain, joint - std::max(spot, reg));
    min_coupling_gain = std::min(min_coupling_gain, joint - uncoupled);
  }
  return c.outcome("50 scenarios, smallest joint margin " + Checks::fmt(min_joint_gain) + ", smallest coupling margin " +
                   Checks::fmt(min_coupling_gain));
}

exp::ExperimentSpec learning_spec() {
  exp::ExperimentSpec s;
  s.agent = exp::AgentKind::Td3;
  s.data_length = 3456;
  s.hidden = {64, 64};
  s.batch_size = 64;
  s.seeds = {1, 2, 3, 4, 5};
  return s;
}

// 7. TD3 learns square-wave arbitrage.
Outcome toy_arbitrage() {
  Checks c;
  exp::ExperimentSpec s = learning_spec();
  s.name = "toy-arbitrage";
  s.profile = "square-wave";
  s.synthetic_wind = false;
  s.market = env::Market::SpotOnly;
  s.coupled = false;
  s.train_steps = 10'000;
  const double td3 = exp::run_experiment(s).median_total_revenue;

  s.agent = exp::AgentKind::Po;
  s.forecast = po::ForecastMethod::Perfect;
  s.seeds = {1};
  const double dp = exp::run_experiment(s).median_total_revenue;
  c.that("dp revenue positive", dp > 0.0);
  c.that("median TD3 revenue " + Checks::fmt(td3) + " below 80% of " + Checks::fmt(dp), td3 >= 0.8 * dp);
  return c.outcome("median TD3 " + Checks::fmt(td3) + " vs perfect-foresight DP " + Checks::fmt(dp) + " (" +
                   Checks::fmt(100.0 * td3 / dp) + "%)");
}

// 8. Coupling lets the battery absorb curtailment without losing revenue.
Outcome curtailment_absorption() {
  Checks c;
  exp::ExperimentSpec s = learning_spec();
  s.name = "curtailment";
  s.market = env::Market::Joint;
  s.train_steps = 30'000;
  s.reward_scale = 0.1;

  s.coupled = true;
  const exp::ExperimentResult coupled = exp::run_experiment(s);
  s.coupled = false;
  const exp::ExperimentResult uncoupled = exp::run_experiment(s);

  double absorbed = 0.0;
  std::int64_t curtailed = 0, intervals = 0;
  for (const auto& r : coupled.runs) {
    absorbed += r.metrics.curtailment_absorbed_mwh;
    curtailed += r.metrics.curtailed_intervals;
    intervals += r.metrics.intervals;
  }
  const double share = static_cast<double>(curtailed) / static_cast<double>(intervals);
  c.that("curtailment in " + Checks::fmt(100 * share) + "% of intervals, need 30%", share >= 0.3);
  c.that("coupled agents absorbed no curtailment", absorbed > 0.0);
  const double ratio = coupled.median_total_revenue / uncoupled.median_total_revenue;
  c.that("coupled median " + Checks::fmt(coupled.median_total_revenue) + " more than 2% below uncoupled " +
             Checks::fmt(uncoupled.median_total_revenue),
         ratio >= 0.98);
  return c.outcome("curtailed share " + Checks::fmt(share) + ", absorbed " + Checks::fmt(absorbed) +
                   " MWh over 5 seeds, median total coupled " + Checks::fmt(coupled.median_total_revenue) +
                   " vs uncoupled " + Checks::fmt(uncoupled.median_total_revenue));
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// 9. Identical seeds give byte-identical reports.
Outcome determinism() {
  Checks c;
  exp::ExperimentSpec s = learning_spec();
  s.name = "determinism";
  s.data_length = 288 * 4;
  s.train_steps = 1500;
  s.hidden = {16, 16};
  s.batch_size = 32;
  s.warmup_steps = 200;
  s.seeds = {1, 2};
  const fs::path root = fs::temp_directory_path() / "windbess_acceptance_determinism";
  fs::remove_all(root);
  exp::run_experiment(s, root / "a");
  exp::run_experiment(s, root / "b");
  const std::string a = slurp(root / "a" / "report.json"), b = slurp(root / "b" / "report.json");
  c.that("report written", !a.empty());
  c.that("reports identical", a == b);
  for (const char* f : {"settlements_seed_1.csv", "settlements_seed_2.csv", "manifest.json"})
    c.that(std::string(f) + " identical", slurp(root / "a" / f) == slurp(root / "b" / f));
  fs::remove_all(root);
  return c.outcome("report.json " + std::to_string(a.size()) + " bytes identical across runs");
}

struct Criterion {
  int id;
  const char* name;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"windbess acceptance checks"};
  std::vector<int> only;
  app.add_option("--only", only, "Run only these criteria (1-9)")->check(CLI::Range(1, 9));
  CLI11_PARSE(app, argc, argv);

  const std::vector<Criterion> all{
      {1, "equation examples", equations},
      {2, "energy conservation and bounds", conservation},
      {3, "bid constraints", constraints},
      {4, "gradient correctness", gradients},
      {5, "dp equals brute force", oracle},
      {6, "dominance under perfect foresight", dominance},
      {7, "toy arbitrage learning", toy_arbitrage},
      {8, "curtailment absorption learning", curtailment_absorption},
      {9, "determinism", determinism},
  };

  int failures = 0;
  for (const Criterion& k : all) {
    if (!only.empty() && std::find(only.begin(), only.end(), k.id) == only.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = k.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!o.pass) ++failures;
    std::printf("%s criterion %d (%s): %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", k.id, k.name, o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
