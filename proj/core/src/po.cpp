#include "windbess/po.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>

#include "windbess/csv.hpp"

namespace windbess::po {

std::string_view to_string(ForecastMethod method) {
  switch (method) {
    case ForecastMethod::Persistence: return "persistence";
    case ForecastMethod::Ema: return "ema";
    case ForecastMethod::Perfect: return "perfect";
  }
  return "unknown";
}

ForecastMethod parse_forecast_method(std::string_view name) {
  if (name == "persistence") return ForecastMethod::Persistence;
  if (name == "ema") return ForecastMethod::Ema;
  if (name == "perfect") return ForecastMethod::Perfect;
  throw std::invalid_argument("unknown forecast method '" + std::string(name) +
                              "' (expected persistence, ema or perfect)");
}

Forecast forecast(ForecastMethod method, std::span<const market::MarketTick> history, size_t horizon, double tau) {
  Forecast fc;
  if (horizon == 0) return fc;
  if (method == ForecastMethod::Perfect) {
    throw std::invalid_argument("forecast: perfect foresight needs future data, use perfect_forecast");
  }
  if (history.empty()) throw std::invalid_argument("forecast: history is empty");

  ForecastStep level;
  if (method == ForecastMethod::Persistence) {
    const market::MarketTick& last = history.back();
    level = {last.rho_s, last.rho_rr, last.rho_rl, last.p_wind_act};
  } else {
    if (!(tau >= 0.0 && tau < 1.0)) throw std::invalid_argument("forecast: EMA smoothing must lie in [0, 1)");
    const market::MarketTick& first = history.front();
    level = {first.rho_s, first.rho_rr, first.rho_rl, first.p_wind_act};
    for (size_t i = 1; i < history.size(); ++i) {
      const market::MarketTick& t = history[i];
      level.rho_s = tau * level.rho_s + (1.0 - tau) * t.rho_s;
      level.rho_rr = tau * level.rho_rr + (1.0 - tau) * t.rho_rr;
      level.rho_rl = tau * level.rho_rl + (1.0 - tau) * t.rho_rl;
      level.wind = tau * level.wind + (1.0 - tau) * t.p_wind_act;
    }
  }
  fc.steps.assign(horizon, level);
  return fc;
}

Forecast perfect_forecast(std::span<const market::MarketTick> future, size_t horizon) {
  Forecast fc;
  const size_t n = std::min(horizon, future.size());
  fc.steps.reserve(n);
  for (size_t i = 0; i < n; ++i) {
    fc.steps.push_back({future[i].rho_s, future[i].rho_rr, future[i].rho_rl, future[i].p_wind_act});
  }
  return fc;
}

void DpGrid::validate() const {
  if (n_energy < 2) throw std::invalid_argument("DpGrid: n_energy must be at least 2");
  if (n_action < 2) throw std::invalid_argument("DpGrid: n_action must be at least 2");
}

std::vector<double> energy_levels(const DpGrid& grid, const model::SystemConfig& cfg) {
  grid.validate();
  const double step = (cfg.e_max - cfg.e_min) / (grid.n_energy - 1);
  std::vector<double> levels(static_cast<size_t>(grid.n_energy));
  for (int i = 0; i < grid.n_energy; ++i) levels[static_cast<size_t>(i)] = cfg.e_min + step * i;
  levels.back() = cfg.e_max;
  return levels;
}

size_t level_below(double energy, const DpGrid& grid, const model::SystemConfig& cfg) {
  grid.validate();
  const double step = (cfg.e_max - cfg.e_min) / (grid.n_energy - 1);
  // The slack keeps an exact level from flooring to its neighbour below.
  const double idx = std::floor((energy - cfg.e_min) / step + 1e-9);
  return static_cast<size_t>(std::clamp(idx, 0.0, static_cast<double>(grid.n_energy - 1)));
}

std::vector<model::BessBid> candidate_bess_bids(const env::Scenario& scenario, const DpGrid& grid,
                                                const model::SystemConfig& cfg) {
  grid.validate();
  const int top = grid.n_action - 1;
  const double unit = cfg.p_bess_max / top;
  const bool spot_ok = scenario.market != env::Market::RegOnly;
  const bool reg_ok = scenario.market != env::Market::SpotOnly;
  const bool wc_ok = scenario.coupled;

  struct Cand {
    int units;
    model::BessBid bid;
  };
  std::vector<Cand> cands;
  for (model::BessMode mode : {model::BessMode::Discharge, model::BessMode::Charge}) {
    for (int s = 0; s <= (spot_ok ? top : 0); ++s) {
      for (int r = 0; r <= (reg_ok ? top - s : 0); ++r) {
        const int wc_top = (mode == model::BessMode::Charge && wc_ok) ? top - s - r : 0;
        for (int w = 0; w <= wc_top; ++w) {
          if (s + r + w == 0) continue;
          model::BessBid b;
          b.mode = mode;
          b.p_spot = s * unit;
          b.p_reg = r * unit;
          b.p_wc = w * unit;
          cands.push_back({s + r + w, b});
        }
      }
    }
  }
  std::stable_sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) { return a.units < b.units; });

  std::vector<model::BessBid> out;
  out.reserve(cands.size() + 1);
  out.push_back(model::BessBid::idle());
  for (const Cand& c : cands) {
    if (validate_bess_bid(c.bid, cfg).empty()) out.push_back(c.bid);
  }
  return out;
}

namespace {

struct StepAction {
  model::WindBid wind;
  model::BessBid bess;
  double revenue = 0.0;
  double de = 0.0;
};

std::vector<double> allowed_shares(env::Market market) {
  switch (market) {
    case env::Market::SpotOnly: return {1.0};
    case env::Market::RegOnly: return {0.0};
    case env::Market::Joint: return {1.0, 0.0};
  }
  return {1.0};
}

// Every (battery, wind) pair the planner considers at one forecast step, with
// the forecast revenue net of degradation and the expected energy change.
std::vector<StepAction> step_actions(const ForecastStep& f, const std::vector<model::BessBid>& bess_cands,
                                     const env::Scenario& scenario, const model::SystemConfig& cfg,
                                     const PlannerOptions& options) {
  const double wind_fc = std::clamp(f.wind, 0.0, cfg.p_wind_max);
  const std::vector<double> shares = allowed_shares(scenario.market);
  std::vector<StepAction> out;
  for (const model::BessBid& b : bess_cands) {
    std::vector<double> winds{wind_fc};
    if (b.p_wc > 0.0) winds.push_back(std::max(0.0, wind_fc - b.p_wc));
    winds.push_back(0.0);
    std::sort(winds.begin(), winds.end(), std::greater<>());
    winds.erase(std::unique(winds.begin(), winds.end()), winds.end());

    const double bess_rev =
        model::bess_revenue_interval(b, f.rho_s, f.rho_rr, f.rho_rl, cfg) - model::degradation_cost_interval(b, cfg);
    double de_reg = 0.0;
    const double reg_energy = cfg.ds_hours * cfg.agc_len * options.agc_enablement * b.p_reg;
    if (b.mode == model::BessMode::Charge) de_reg = reg_energy;
    if (b.mode == model::BessMode::Discharge) de_reg = -reg_energy;
    const double de_spot = cfg.dt_hours * (b.v_ch() - b.v_dch()) * b.p_spot;

    for (double p_w : winds) {
      const model::DispatchOutcome d = model::wind_dispatch_outcome(p_w, wind_fc);
      const model::CurtailmentDraw draw = model::settle_curtailment(b.mode, b.p_wc, d.p_wc_available, p_w);
      const double p_dis = std::min(wind_fc, draw.p_w_updated);
      StepAction a;
      a.bess = b;
      double best = -std::numeric_limits<double>::infinity();
      for (double v : shares) {
        const model::WindBid bid{p_w, v};
        const double rev = model::wind_revenue_interval({draw.p_w_updated, v}, p_dis, f.rho_s, f.rho_rr, cfg);
        if (rev > best) {
          best = rev;
          a.wind = bid;
        }
      }
      a.revenue = best + bess_rev;
      a.de = de_spot + de_reg + draw.p_wc_drawn * cfg.dt_hours;
      out.push_back(a);
    }
  }
  return out;
}

bool feasible(double energy, double de, const model::SystemConfig& cfg) {
  return model::step_battery({energy}, de, cfg).accepted;
}

struct Problem {
  std::vector<std::vector<StepAction>> actions;  // per step
  std::vector<double> levels;
};

Problem build_problem(const Forecast& fc, const env::Scenario& scenario, const DpGrid& grid,
                      const model::SystemConfig& cfg, const PlannerOptions& options) {
  if (fc.steps.empty()) throw std::invalid_argument("planner: forecast is empty");
  grid.validate();
  cfg.validate();
  const std::vector<model::BessBid> cands = candidate_bess_bids(scenario, grid, cfg);
  Problem p;
  p.levels = energy_levels(grid, cfg);
  for (const ForecastStep& f : fc.steps) p.actions.push_back(step_actions(f, cands, scenario, cfg, options));
  return p;
}

PlanStep make_step(const StepAction& a, double before, double after) {
  return {a.wind, a.bess, before, after, a.revenue};
}

}  // namespace

Plan dp_optimize(const Forecast& fc, const model::BatteryState& battery, const env::Scenario& scenario,
                 const DpGrid& grid, const model::SystemConfig& cfg, const PlannerOptions& options) {
  const Problem p = build_problem(fc, scenario, grid, cfg, options);
  const size_t horizon = p.actions.size();
  const size_t n = p.levels.size();

  // value[t][k]: best revenue from step t on, starting at level k (t >= 1).
  std::vector<std::vector<double>> value(horizon + 1, std::vector<double>(n, 0.0));
  std::vector<std::vector<size_t>> choice(horizon, std::vector<size_t>(n, 0));
  for (size_t t = horizon; t-- > 1;) {
    for (size_t k = 0; k < n; ++k) {
      double best = -std::numeric_limits<double>::infinity();
      for (size_t j = 0; j < p.actions[t].size(); ++j) {
        const StepAction& a = p.actions[t][j];
        if (!feasible(p.levels[k], a.de, cfg)) continue;
        const double v = a.revenue + value[t + 1][level_below(p.levels[k] + a.de, grid, cfg)];
        if (v > best) {
          best = v;
          choice[t][k] = j;
        }
      }
      value[t][k] = best;
    }
  }

  Plan plan;
  // The first step starts from the exact state of charge.
  double best = -std::numeric_limits<double>::infinity();
  size_t first = 0;
  for (size_t j = 0; j < p.actions[0].size(); ++j) {
    const StepAction& a = p.actions[0][j];
    if (!feasible(battery.energy, a.de, cfg)) continue;
    const double v = a.revenue + value[1][level_below(battery.energy + a.de, grid, cfg)];
    if (v > best) {
      best = v;
      first = j;
    }
  }
  if (!std::isfinite(best)) throw std::invalid_argument("dp_optimize: no feasible action from the current state");
  plan.revenue = best;

  const StepAction& a0 = p.actions[0][first];
  size_t k = level_below(battery.energy + a0.de, grid, cfg);
  plan.steps.push_back(make_step(a0, battery.energy, p.levels[k]));
  for (size_t t = 1; t < horizon; ++t) {
    const StepAction& a = p.actions[t][choice[t][k]];
    const size_t next = level_below(p.levels[k] + a.de, grid, cfg);
    plan.steps.push_back(make_step(a, p.levels[k], p.levels[next]));
    k = next;
  }
  return plan;
}

namespace {

struct Search {
  const Problem& p;
  const DpGrid& grid;
  const model::SystemConfig& cfg;

  // Best suffix revenue from step t at `energy`, with the action sequence.
  double best(size_t t, double energy, std::vector<size_t>& seq) const {
    if (t == p.actions.size()) return 0.0;
    double top = -std::numeric_limits<double>::infinity();
    std::vector<size_t> top_seq;
    for (size_t j = 0; j < p.actions[t].size(); ++j) {
      const StepAction& a = p.actions[t][j];
      if (!feasible(energy, a.de, cfg)) continue;
      std::vector<size_t> rest;
      const double next_energy = p.levels[level_below(energy + a.de, grid, cfg)];
      const double v = a.revenue + best(t + 1, next_energy, rest);
      if (v > top) {
        top = v;
        top_seq.assign(1, j);
        top_seq.insert(top_seq.end(), rest.begin(), rest.end());
      }
    }
    seq = std::move(top_seq);
    return top;
  }
};

}  // namespace

Plan brute_force_oracle(const Forecast& fc, const model::BatteryState& battery, const env::Scenario& scenario,
                        const DpGrid& grid, const model::SystemConfig& cfg, const PlannerOptions& options) {
  const Problem p = build_problem(fc, scenario, grid, cfg, options);
  double plans = 1.0;
  for (const auto& acts : p.actions) plans *= static_cast<double>(acts.size());
  if (plans > kOracleMaxPlans) {
    throw std::invalid_argument("brute_force_oracle: " + std::to_string(plans) + " plans exceed the enumeration cap");
  }

  std::vector<size_t> seq;
  const Search search{p, grid, cfg};
  Plan plan;
  plan.revenue = search.best(0, battery.energy, seq);
  if (seq.size() != p.actions.size()) throw std::invalid_argument("brute_force_oracle: no feasible plan");

  double energy = battery.energy;
  for (size_t t = 0; t < seq.size(); ++t) {
    const StepAction& a = p.actions[t][seq[t]];
    const double next = p.levels[level_below(energy + a.de, grid, cfg)];
    plan.steps.push_back(make_step(a, energy, next));
    energy = next;
  }
  return plan;
}

PoPolicy::PoPolicy(ForecastMethod method, DpGrid grid, PlannerOptions options, double ema_tau)
    : method_(method), grid_(grid), options_(options), ema_tau_(ema_tau) {
  grid_.validate();
  if (grid_.horizon == 0) throw std::invalid_argument("PoPolicy: horizon must be positive");
}

policy::Bids PoPolicy::act(const env::Environment& env) {
  const size_t h = std::min(grid_.horizon, env.remaining());
  Forecast fc;
  if (method_ == ForecastMethod::Perfect) {
    const auto& stream = env.stream();
    fc = perfect_forecast(std::span<const market::MarketTick>(stream).subspan(env.position()), h);
  } else if (!env.history().empty()) {
    fc = forecast(method_, env.history(), h, ema_tau_);
  } else {
    // Nothing observed yet: no basis for a forecast.
    return {policy::persistence_wind_bid(env), model::BessBid::idle()};
  }
  const Plan plan = dp_optimize(fc, env.battery(), env.scenario(), grid_, env.config(), options_);
  predicted_.push_back(plan.revenue);
  return {plan.steps.front().wind, plan.steps.front().bess};
}

std::vector<model::SettlementResult> run_po_bidder(env::Environment& env, ForecastMethod method, const DpGrid& grid,
                                                   const PlannerOptions& options) {
  PoPolicy policy(method, grid, options);
  return policy::evaluate_policy(policy, env);
}

void write_plan_csv(std::ostream& out, const Plan& plan, std::int64_t first_interval) {
  out << "interval,mode,p_spot,p_reg,p_wc,wind_avail,v_w\n";
  std::int64_t i = first_interval;
  for (const PlanStep& s : plan.steps) {
    out << i++ << ',' << model::to_string(s.bess.mode) << ',' << market::format_double(s.bess.p_spot) << ','
        << market::format_double(s.bess.p_reg) << ',' << market::format_double(s.bess.p_wc) << ','
        << market::format_double(s.wind.availability) << ',' << market::format_double(s.wind.spot_share) << '\n';
  }
}

}  // namespace windbess::po
