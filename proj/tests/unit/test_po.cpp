#include <gtest/gtest.h>

#include <algorithm>
#include <memory>
#include <random>
#include <sstream>

#include "windbess/po.hpp"

using namespace windbess;
using namespace windbess::po;

namespace {

const model::SystemConfig kCfg{};

Forecast flat(std::initializer_list<double> spot, double rr = 0.0, double rl = 0.0, double wind = 0.0) {
  Forecast f;
  for (double s : spot) f.steps.push_back({s, rr, rl, wind});
  return f;
}

Forecast random_forecast(std::mt19937_64& rng, size_t h) {
  std::uniform_real_distribution<double> spot(-30, 150), fcas(0, 40), wind(0, 67);
  Forecast f;
  for (size_t i = 0; i < h; ++i) f.steps.push_back({spot(rng), fcas(rng), fcas(rng), wind(rng)});
  return f;
}

market::MarketTick tick(double rho_s, double rr, double rl, double wind) {
  market::MarketTick t;
  t.rho_s = rho_s;
  t.rho_rr = rr;
  t.rho_rl = rl;
  t.p_wind_act = wind;
  t.agc = model::AgcTrace::zeros(75);
  return t;
}

const env::Scenario kScenarios[] = {{env::Market::SpotOnly, false}, {env::Market::SpotOnly, true},
                                    {env::Market::RegOnly, false},  {env::Market::RegOnly, true},
                                    {env::Market::Joint, false},    {env::Market::Joint, true}};

void expect_plan_feasible(const Plan& plan, double start) {
  double e = start;
  for (const PlanStep& s : plan.steps) {
    EXPECT_TRUE(model::validate_bess_bid(s.bess, kCfg).empty());
    EXPECT_TRUE(model::wind_bid_valid(s.wind, kCfg));
    EXPECT_EQ(s.energy_before, e);
    EXPECT_GE(s.energy_after, kCfg.e_min);
    EXPECT_LE(s.energy_after, kCfg.e_max);
    e = s.energy_after;
  }
}

}  // namespace

TEST(Forecast, Persistence) {
  std::vector<market::MarketTick> h{tick(10, 1, 2, 3), tick(80, 20, 5, 30)};
  const Forecast f = forecast(ForecastMethod::Persistence, h, 3);
  ASSERT_EQ(f.horizon(), 3u);
  for (const auto& s : f.steps) {
    EXPECT_EQ(s.rho_s, 80);
    EXPECT_EQ(s.rho_rr, 20);
    EXPECT_EQ(s.wind, 30);
  }
}

TEST(Forecast, EmaFixedPointAndEdgeCases) {
  std::vector<market::MarketTick> h(6, tick(42.5, 7, 3, 12));
  const Forecast f = forecast(ForecastMethod::Ema, h, 4);
  for (const auto& s : f.steps) {
    EXPECT_DOUBLE_EQ(s.rho_s, 42.5);
    EXPECT_DOUBLE_EQ(s.wind, 12);
  }
  EXPECT_EQ(forecast(ForecastMethod::Persistence, h, 0).horizon(), 0u);
  EXPECT_THROW(forecast(ForecastMethod::Persistence, {}, 2), std::invalid_argument);
  EXPECT_THROW(forecast(ForecastMethod::Perfect, h, 2), std::invalid_argument);
  EXPECT_EQ(perfect_forecast(h, 10).horizon(), 6u);
  EXPECT_EQ(parse_forecast_method("ema"), ForecastMethod::Ema);
  EXPECT_THROW(parse_forecast_method("arima"), std::invalid_argument);
}

TEST(Grid, LevelsAndSnapping) {
  const DpGrid g;
  const auto levels = energy_levels(g, kCfg);
  ASSERT_EQ(levels.size(), 37u);
  EXPECT_EQ(levels.front(), 0.5);
  EXPECT_EQ(levels.back(), 9.5);
  EXPECT_DOUBLE_EQ(levels[1] - levels[0], 0.25);
  for (size_t i = 0; i < levels.size(); ++i) EXPECT_EQ(level_below(levels[i], g, kCfg), i);
  EXPECT_EQ(level_below(1.3333, g, kCfg), 3u);
  EXPECT_EQ(level_below(1.2499999999999, g, kCfg), 3u);
  DpGrid bad;
  bad.n_energy = 1;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
}

TEST(Candidates, OrderAndCount) {
  DpGrid g;
  g.n_action = 3;
  const auto c = candidate_bess_bids({env::Market::Joint, true}, g, kCfg);
  // Discharge: 5 nonzero (spot, reg) splits of at most two units; charge adds
  // the curtailment channel: 9 splits. Idle leads.
  ASSERT_EQ(c.size(), 15u);
  EXPECT_EQ(c.front().mode, model::BessMode::Idle);
  for (size_t i = 1; i < c.size(); ++i) {
    EXPECT_LE(c[i - 1].total_power(), c[i].total_power());
    EXPECT_TRUE(model::validate_bess_bid(c[i], kCfg).empty());
  }
  for (const auto& b : candidate_bess_bids({env::Market::SpotOnly, false}, g, kCfg)) {
    EXPECT_EQ(b.p_reg, 0.0);
    EXPECT_EQ(b.p_wc, 0.0);
  }
}

TEST(Dp, ChargeThenDischargeHandValue) {
  const Forecast f = flat({20, 100});
  const Plan p = dp_optimize(f, {kCfg.e_min}, {env::Market::SpotOnly, false}, {}, kCfg);
  ASSERT_EQ(p.steps.size(), 2u);
  EXPECT_EQ(p.steps[0].bess.mode, model::BessMode::Charge);
  EXPECT_EQ(p.steps[0].bess.p_spot, 10.0);
  // 0.5 + 10/12 MWh sits between levels 1.25 and 1.5; from 1.25 at most
  // 0.75 MWh can leave, so 7.5 MW is the largest feasible grid discharge.
  EXPECT_EQ(p.steps[1].bess.mode, model::BessMode::Discharge);
  EXPECT_EQ(p.steps[1].bess.p_spot, 7.5);
  const double dt = 1.0 / 12.0;
  const double expect = -20.0 * 10.0 / 0.95 * dt + 100.0 * 0.95 * 7.5 * dt - 1.0 * 7.5 * dt;
  EXPECT_NEAR(p.revenue, expect, 1e-9);
  EXPECT_EQ(brute_force_oracle(f, {kCfg.e_min}, {env::Market::SpotOnly, false}, {}, kCfg).revenue, p.revenue);
}

TEST(Dp, IdleWinsTies) {
  // Free energy is worth nothing without a later sale, so charging ties idle.
  const Forecast f = flat({0, 0, 0});
  DpGrid g;
  g.n_energy = 5;
  g.n_action = 3;
  const Plan p = dp_optimize(f, {kCfg.e_min}, {env::Market::Joint, true}, g, kCfg);
  EXPECT_EQ(p.revenue, 0.0);
  for (const auto& s : p.steps) EXPECT_EQ(s.bess.mode, model::BessMode::Idle);
  const Plan o = brute_force_oracle(f, {kCfg.e_min}, {env::Market::Joint, true}, g, kCfg);
  EXPECT_EQ(o.revenue, 0.0);
  for (const auto& s : o.steps) EXPECT_EQ(s.bess.mode, model::BessMode::Idle);
}

TEST(Dp, NoDischargeFromEmpty) {
  const Forecast f = flat({300}, 50, 50);
  for (const auto& sc : kScenarios) {
    const Plan p = dp_optimize(f, {kCfg.e_min}, sc, {}, kCfg);
    EXPECT_NE(p.steps[0].bess.mode, model::BessMode::Discharge);
  }
}

TEST(Dp, MatchesOracle) {
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<int> h(1, 3), ne(2, 5), na(2, 3);
  std::uniform_real_distribution<double> e0(kCfg.e_min, kCfg.e_max);
  for (int i = 0; i < 60; ++i) {
    DpGrid g;
    g.horizon = static_cast<size_t>(h(rng));
    g.n_energy = ne(rng);
    g.n_action = na(rng);
    const auto& sc = kScenarios[i % 6];
    const Forecast f = random_forecast(rng, g.horizon);
    const model::BatteryState b{e0(rng)};
    const Plan dp = dp_optimize(f, b, sc, g, kCfg);
    const Plan bf = brute_force_oracle(f, b, sc, g, kCfg);
    EXPECT_EQ(dp.revenue, bf.revenue) << "instance " << i;
    expect_plan_feasible(dp, b.energy);
    double sum = 0.0;
    for (const auto& s : dp.steps) sum += s.revenue;
    EXPECT_NEAR(sum, dp.revenue, 1e-9 * std::max(1.0, std::abs(sum)));
  }
}

TEST(Dp, Dominance) {
  std::mt19937_64 rng(23);
  for (int i = 0; i < 20; ++i) {
    DpGrid g;
    g.horizon = 4;
    g.n_energy = 9;
    g.n_action = 3;
    const Forecast f = random_forecast(rng, g.horizon);
    const model::BatteryState b{5.0};
    auto rev = [&](env::Market m, bool c, const DpGrid& grid) { return dp_optimize(f, b, {m, c}, grid, kCfg).revenue; };
    const double joint = rev(env::Market::Joint, true, g);
    EXPECT_GE(joint, rev(env::Market::SpotOnly, true, g));
    EXPECT_GE(joint, rev(env::Market::RegOnly, true, g));
    EXPECT_GE(rev(env::Market::Joint, true, g), rev(env::Market::Joint, false, g));
    DpGrid finer = g;
    finer.n_action = 5;  // levels 0, 5, 10 are a subset of 0, 2.5, ..., 10
    EXPECT_GE(rev(env::Market::Joint, true, finer), joint);
  }
}

TEST(Oracle, SingleStepIsDirectEvaluation) {
  const Forecast f = flat({90}, 15, 25, 40);
  DpGrid g;
  g.n_action = 3;
  const env::Scenario sc{env::Market::Joint, true};
  const Plan o = brute_force_oracle(f, {5.0}, sc, g, kCfg);
  // Direct search: settle every candidate battery bid with every wind target
  // against the forecast, using the planner's energy proxy.
  double best = -1e300;
  for (const auto& b : candidate_bess_bids(sc, g, kCfg)) {
    for (double pw : {40.0, 40.0 - b.p_wc, 0.0}) {
      if (pw < 0) continue;
      const auto d = model::wind_dispatch_outcome(pw, 40.0);
      const auto draw = model::settle_curtailment(b.mode, b.p_wc, d.p_wc_available, pw);
      const double dis = std::min(40.0, draw.p_w_updated);
      const double wind = std::max(model::wind_revenue_interval({draw.p_w_updated, 1.0}, dis, 90, 15, kCfg),
                                   model::wind_revenue_interval({draw.p_w_updated, 0.0}, dis, 90, 15, kCfg));
      best = std::max(best, wind + model::bess_revenue_interval(b, 90, 15, 25, kCfg) -
                                model::degradation_cost_interval(b, kCfg));
    }
  }
  EXPECT_NEAR(o.revenue, best, 1e-9);
}

TEST(Oracle, RejectsDegenerateInput) {
  EXPECT_THROW(brute_force_oracle({}, {5.0}, {}, {}, kCfg), std::invalid_argument);
  EXPECT_THROW(dp_optimize({}, {5.0}, {}, {}, kCfg), std::invalid_argument);
  std::mt19937_64 rng(1);
  EXPECT_THROW(brute_force_oracle(random_forecast(rng, 8), {5.0}, {}, {}, kCfg), std::invalid_argument);
}

TEST(PoBidder, PerfectForesightRealizesPrediction) {
  // Square wave with a grid whose level spacing equals one 2 MW action over
  // an interval, so planned and realized energy coincide.
  std::vector<market::MarketTick> ticks;
  for (int i = 0; i < 12; ++i) ticks.push_back(tick(i % 2 ? 100 : 20, 0, 0, 0));
  auto stream = std::make_shared<const std::vector<market::MarketTick>>(ticks);
  env::EnvOptions opt;
  opt.episode_len = 0;
  opt.initial_energy = kCfg.e_min;
  env::Environment e(kCfg, {env::Market::SpotOnly, false}, stream, opt);
  DpGrid g;
  g.n_energy = 55;
  g.n_action = 6;
  g.horizon = 12;
  PoPolicy policy(ForecastMethod::Perfect, g);
  const auto results = policy::evaluate_policy(policy, e);
  ASSERT_EQ(results.size(), 12u);
  EXPECT_GT(policy.predicted_revenues().front(), 0.0);
  EXPECT_NEAR(model::joint_objective(results), policy.predicted_revenues().front(), 1e-6);
}

TEST(PoBidder, PersistenceMatchesPerfectOnConstantData) {
  std::vector<market::MarketTick> ticks(30, tick(55, 12, 8, 30));
  auto stream = std::make_shared<const std::vector<market::MarketTick>>(ticks);
  env::EnvOptions opt;
  opt.episode_len = 10;
  DpGrid g;
  g.n_energy = 10;
  g.n_action = 3;
  g.horizon = 4;
  env::Environment e(kCfg, {}, stream, opt);
  PoPolicy persistence(ForecastMethod::Persistence, g), perfect(ForecastMethod::Perfect, g);
  e.reset(0);
  for (int i = 0; i < 30; ++i) {
    if (e.done()) e.reset(e.position());
    const policy::Bids a = persistence.act(e);
    const policy::Bids b = perfect.act(e);
    // Interval 0 has no history to persist.
    if (i > 0) {
      EXPECT_EQ(a.bess.mode, b.bess.mode) << i;
      EXPECT_EQ(a.bess.p_spot, b.bess.p_spot) << i;
      EXPECT_EQ(a.bess.p_reg, b.bess.p_reg) << i;
      EXPECT_EQ(a.wind.availability, b.wind.availability) << i;
    }
    e.step_bids(a.wind, a.bess);
  }
  EXPECT_EQ(persistence.predicted_revenues().size(), 29u);
}

TEST(PoBidder, PlanCsv) {
  const Plan p = dp_optimize(flat({20, 100}), {kCfg.e_min}, {env::Market::SpotOnly, false}, {}, kCfg);
  std::ostringstream out;
  write_plan_csv(out, p, 7);
  const std::string s = out.str();
  EXPECT_EQ(s.rfind("interval,mode,p_spot,p_reg,p_wc,wind_avail,v_w\n7,charge,10,", 0), 0u);
  EXPECT_NE(s.find("\n8,discharge,7.5,"), std::string::npos);
}
