#include "windbess/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace windbess::model {

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(std::string("SystemConfig: ") + what);
}

}  // namespace

void SystemConfig::validate() const {
  require(dt_hours > 0 && ds_hours > 0, "durations must be positive");
  require(agc_len > 0, "agc_len must be positive");
  require(std::abs(dt_hours - agc_len * ds_hours) <= 1e-9 * dt_hours, "dt_hours must equal agc_len * ds_hours");
  require(lambda >= 0, "lambda must be non-negative");
  require(eta_ch > 0 && eta_ch <= 1 && eta_dch > 0 && eta_dch <= 1, "efficiencies must lie in (0, 1]");
  require(c_deg >= 0, "c_deg must be non-negative");
  require(p_wind_max > 0 && p_bess_max > 0, "rated powers must be positive");
  require(e_min > 0 && e_min < e_max, "energy limits must satisfy 0 < e_min < e_max");
  require(m_window > 0, "m_window must be positive");
  require(tau_s > 0 && tau_s < 1, "tau_s must lie in (0, 1)");
  require(gamma > 0 && gamma < 1, "gamma must lie in (0, 1)");
  require(beta_l >= 0, "beta_l must be non-negative");
}

AgcTrace::AgcTrace(std::vector<double> signals) : signals_(std::move(signals)) {
  for (size_t i = 0; i < signals_.size(); ++i) {
    const double s = signals_[i];
    if (!(s >= -1.0 && s <= 1.0)) {
      throw std::invalid_argument("AgcTrace: signal " + std::to_string(i) + " outside [-1, 1]");
    }
  }
}

double AgcTrace::lower_sum() const {
  double sum = 0.0;
  for (double s : signals_) {
    if (s < 0) sum += -s;
  }
  return sum;
}

double AgcTrace::raise_sum() const {
  double sum = 0.0;
  for (double s : signals_) {
    if (s >= 0) sum += s;
  }
  return sum;
}

std::string_view to_string(BessMode mode) {
  switch (mode) {
    case BessMode::Discharge: return "discharge";
    case BessMode::Charge: return "charge";
    case BessMode::Idle: return "idle";
  }
  return "idle";
}

BessMode parse_mode(std::string_view name) {
  if (name == "discharge") return BessMode::Discharge;
  if (name == "charge") return BessMode::Charge;
  if (name == "idle") return BessMode::Idle;
  throw std::invalid_argument("unknown battery mode '" + std::string(name) + "'");
}

std::string_view to_string(BidViolation v) {
  switch (v) {
    case BidViolation::NonFinite: return "non-finite-power";
    case BidViolation::SpotOutOfRange: return "spot-power-out-of-range";
    case BidViolation::RegOutOfRange: return "reg-power-out-of-range";
    case BidViolation::WcOutOfRange: return "wc-power-out-of-range";
    case BidViolation::SumExceedsRatedPower: return "sum-exceeds-rated-power";
    case BidViolation::DischargePrecludesWcDraw: return "discharge-precludes-wc-draw";
  }
  return "unknown";
}

std::vector<BidViolation> validate_bess_bid(const BessBid& bid, const SystemConfig& cfg) {
  std::vector<BidViolation> out;
  if (!std::isfinite(bid.p_spot) || !std::isfinite(bid.p_reg) || !std::isfinite(bid.p_wc)) {
    out.push_back(BidViolation::NonFinite);
    return out;
  }
  auto in_range = [&](double p) { return p >= 0.0 && p <= cfg.p_bess_max; };
  if (!in_range(bid.p_spot)) out.push_back(BidViolation::SpotOutOfRange);
  if (!in_range(bid.p_reg)) out.push_back(BidViolation::RegOutOfRange);
  if (!in_range(bid.p_wc)) out.push_back(BidViolation::WcOutOfRange);
  if (bid.total_power() > cfg.p_bess_max) out.push_back(BidViolation::SumExceedsRatedPower);
  if (bid.mode == BessMode::Discharge && bid.p_wc != 0.0) out.push_back(BidViolation::DischargePrecludesWcDraw);
  return out;
}

bool wind_bid_valid(const WindBid& bid, const SystemConfig& cfg) {
  return bid.availability >= 0.0 && bid.availability <= cfg.p_wind_max && bid.spot_share >= 0.0 &&
         bid.spot_share <= 1.0;
}

DispatchOutcome wind_dispatch_outcome(double p_w, double p_act) {
  if (!(p_w >= 0.0) || !(p_act >= 0.0)) {
    throw std::invalid_argument("wind_dispatch_outcome: powers must be non-negative");
  }
  return {std::min(p_act, p_w), p_act > p_w ? p_act - p_w : 0.0};
}

CurtailmentDraw settle_curtailment(BessMode mode, double bid_p_wc, double p_wc_available, double p_w) {
  if (!(bid_p_wc >= 0.0) || !(p_wc_available >= 0.0) || !(p_w >= 0.0)) {
    throw std::invalid_argument("settle_curtailment: powers must be non-negative");
  }
  if (mode == BessMode::Discharge && bid_p_wc > 0.0) {
    throw std::logic_error("settle_curtailment: a discharging battery cannot draw curtailed wind");
  }
  const double drawn = std::min(bid_p_wc, p_wc_available);
  return {drawn, p_w + drawn};
}

EnergyDelta energy_delta(const BessBid& bid, const AgcTrace& agc, double p_wc_drawn, const SystemConfig& cfg) {
  if (agc.size() != static_cast<size_t>(cfg.agc_len)) {
    throw std::invalid_argument("energy_delta: AGC trace has " + std::to_string(agc.size()) + " signals, expected " +
                                std::to_string(cfg.agc_len));
  }
  EnergyDelta d;
  d.spot = cfg.dt_hours * (bid.v_ch() - bid.v_dch()) * bid.p_spot;
  if (bid.mode == BessMode::Charge) {
    d.reg = cfg.ds_hours * agc.lower_sum() * bid.p_reg;
  } else if (bid.mode == BessMode::Discharge) {
    d.reg = -cfg.ds_hours * agc.raise_sum() * bid.p_reg;
  }
  d.wc = p_wc_drawn * cfg.dt_hours;
  d.total = d.spot + d.reg + d.wc;
  return d;
}

double wind_revenue_interval(const WindBid& bid, double p_dis, double rho_s, double rho_rr, const SystemConfig& cfg) {
  const double v = bid.spot_share;
  const double price = v * rho_s + (1.0 - v) * rho_rr;
  return cfg.dt_hours * price * (p_dis - cfg.lambda * std::abs(p_dis - bid.availability));
}

double bess_revenue_interval(const BessBid& bid, double rho_s, double rho_rr, double rho_rl, const SystemConfig& cfg) {
  const double v_dch = bid.v_dch();
  const double v_ch = bid.v_ch();
  const double spot = rho_s * (v_dch * cfg.eta_dch * bid.p_spot - v_ch * bid.p_spot / cfg.eta_ch);
  const double reg = rho_rr * v_dch * cfg.eta_dch * bid.p_reg + rho_rl * v_ch * bid.p_reg / cfg.eta_ch;
  return cfg.dt_hours * (spot + reg);
}

double degradation_cost_interval(const BessBid& bid, const SystemConfig& cfg) {
  return cfg.c_deg * cfg.dt_hours * bid.v_dch() * (bid.p_spot + bid.p_reg);
}

BatteryStep step_battery(const BatteryState& state, double de_total, const SystemConfig& cfg) {
  const double next = state.energy + de_total;
  if (next >= cfg.e_min && next <= cfg.e_max) return {{next}, true};
  return {state, false};
}

double joint_objective(std::span<const SettlementResult> results) {
  double wind = 0.0, bess = 0.0, deg = 0.0;
  for (const auto& r : results) {
    wind += r.wind_revenue;
    bess += r.bess_revenue;
    deg += r.degradation_cost;
  }
  return wind + bess - deg;
}

SettlementResult settle_interval(const WindBid& wind, const BessBid& bess, const BatteryState& battery,
                                 const IntervalPrices& prices, double p_wind_act, const AgcTrace& agc,
                                 const SystemConfig& cfg) {
  if (!validate_bess_bid(bess, cfg).empty()) {
    throw std::invalid_argument("settle_interval: battery bid violates its power constraints");
  }
  if (!wind_bid_valid(wind, cfg)) {
    throw std::invalid_argument("settle_interval: wind bid outside installed capacity or split range");
  }

  const DispatchOutcome dispatch = wind_dispatch_outcome(wind.availability, p_wind_act);

  auto settle_with = [&](const BessBid& b) {
    SettlementResult r;
    r.wind_bid = wind;
    r.bess_bid = b;
    r.p_wind_act = p_wind_act;
    r.p_wc_available = dispatch.p_wc_available;
    const CurtailmentDraw draw = settle_curtailment(b.mode, b.p_wc, dispatch.p_wc_available, wind.availability);
    r.p_wc_drawn = draw.p_wc_drawn;
    const WindBid effective{draw.p_w_updated, wind.spot_share};
    r.p_dis = std::min(p_wind_act, effective.availability);
    r.wind_revenue = wind_revenue_interval(effective, r.p_dis, prices.rho_s, prices.rho_rr, cfg);
    r.bess_revenue = bess_revenue_interval(b, prices.rho_s, prices.rho_rr, prices.rho_rl, cfg);
    r.degradation_cost = degradation_cost_interval(b, cfg);
    r.delta_e = energy_delta(b, agc, r.p_wc_drawn, cfg);
    return r;
  };

  SettlementResult result = settle_with(bess);
  const BatteryStep step = step_battery(battery, result.delta_e.total, cfg);
  if (step.accepted) {
    result.energy_after = step.state.energy;
    return result;
  }
  result = settle_with(BessBid::idle());
  result.bess_rejected = true;
  result.energy_after = battery.energy;
  return result;
}

}  // namespace windbess::model
