#include "windbess/env.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace windbess::env {

namespace {

double sgn(double x) { return static_cast<double>((x > 0.0) - (x < 0.0)); }

void check_raw(std::span<const double> raw, size_t dim, const char* who) {
  if (raw.size() != dim) {
    throw std::invalid_argument(std::string(who) + ": expected " + std::to_string(dim) + " components, got " +
                                std::to_string(raw.size()));
  }
  for (double a : raw) {
    if (!(a >= -1.0 && a <= 1.0)) throw std::invalid_argument(std::string(who) + ": component outside [-1, 1]");
  }
}

double unit(double raw) { return 0.5 * (raw + 1.0); }

model::BessMode decode_mode(double head) {
  if (head >= kModeDeadZone) return model::BessMode::Discharge;
  if (head <= -kModeDeadZone) return model::BessMode::Charge;
  return model::BessMode::Idle;
}

}  // namespace

std::string_view to_string(Market market) {
  switch (market) {
    case Market::SpotOnly: return "spot";
    case Market::RegOnly: return "reg";
    case Market::Joint: return "joint";
  }
  return "joint";
}

Market parse_market(std::string_view name) {
  if (name == "spot") return Market::SpotOnly;
  if (name == "reg") return Market::RegOnly;
  if (name == "joint") return Market::Joint;
  throw std::invalid_argument("unknown market scenario '" + std::string(name) + "' (expected spot, reg or joint)");
}

WindState build_wind_state(const market::MarketTick* prev, const model::SystemConfig& cfg, const Normalizers& norm) {
  if (!prev) return {};
  return {prev->p_wind_act / cfg.p_wind_max, prev->rho_s / norm.spot_divisor, prev->rho_rr / norm.fcas_divisor};
}

BessState build_bess_state(const market::MarketTick* prev, const model::BatteryState& battery, double f_wc,
                           const model::SystemConfig& cfg, const Normalizers& norm) {
  BessState s{};
  s[0] = battery.energy / cfg.e_max;
  s[1] = f_wc;
  if (prev) {
    s[2] = prev->p_wind_act / cfg.p_wind_max;
    s[3] = prev->rho_s / norm.spot_divisor;
    s[4] = prev->rho_rr / norm.fcas_divisor;
    s[5] = prev->rho_rl / norm.fcas_divisor;
  }
  return s;
}

model::WindBid decode_wind_action(std::span<const double> raw, Market market, const model::SystemConfig& cfg) {
  check_raw(raw, kWindActionDim, "decode_wind_action");
  model::WindBid bid;
  bid.availability = unit(raw[0]) * cfg.p_wind_max;
  switch (market) {
    case Market::SpotOnly: bid.spot_share = 1.0; break;
    case Market::RegOnly: bid.spot_share = 0.0; break;
    case Market::Joint: bid.spot_share = unit(raw[1]); break;
  }
  return bid;
}

BessMagnitudes bess_action_magnitudes(std::span<const double> raw, const Scenario& scenario) {
  check_raw(raw, kBessActionDim, "decode_bess_action");
  BessMagnitudes m;
  m.mode = decode_mode(raw[0]);
  if (m.mode != model::BessMode::Idle) {
    m.mask = {1.0, 1.0, 1.0};
    if (m.mode == model::BessMode::Discharge || !scenario.coupled) m.mask[2] = 0.0;
    if (scenario.market == Market::SpotOnly) m.mask[1] = 0.0;
    if (scenario.market == Market::RegOnly) m.mask[0] = 0.0;
  }
  m.spot = m.mask[0] * unit(raw[1]);
  m.reg = m.mask[1] * unit(raw[2]);
  m.wc = m.mask[2] * unit(raw[3]);
  return m;
}

model::BessBid decode_bess_action(std::span<const double> raw, const Scenario& scenario,
                                  const model::SystemConfig& cfg) {
  const BessMagnitudes m = bess_action_magnitudes(raw, scenario);
  model::BessBid bid;
  bid.mode = m.mode;
  bid.p_spot = m.spot * cfg.p_bess_max;
  bid.p_reg = m.reg * cfg.p_bess_max;
  bid.p_wc = m.wc * cfg.p_bess_max;
  const double total = bid.total_power();
  if (total > cfg.p_bess_max) {
    const double scale = cfg.p_bess_max / total;
    bid.p_spot *= scale;
    bid.p_reg *= scale;
    bid.p_wc *= scale;
    // Absorb any rounding excess in the largest component. One pass can
    // leave the re-summed total an ulp high, hence the loop.
    double* largest = &bid.p_spot;
    if (bid.p_reg > *largest) largest = &bid.p_reg;
    if (bid.p_wc > *largest) largest = &bid.p_wc;
    while (bid.total_power() > cfg.p_bess_max && *largest > 0.0) {
      const double excess = bid.total_power() - cfg.p_bess_max;
      *largest = std::max(0.0, std::nextafter(*largest - excess, 0.0));
    }
  }
  return bid;
}

PenaltyEval bess_capacity_penalty(std::span<const double> raw, const Scenario& scenario) {
  const BessMagnitudes m = bess_action_magnitudes(raw, scenario);
  PenaltyEval out;
  const double sum = m.sum();
  if (sum > 1.0) {
    out.value = sum;
    for (size_t i = 0; i < 3; ++i) out.grad[i + 1] = 0.5 * m.mask[i];
  }
  return out;
}

double wind_reward(const model::WindBid& bid, double a_act, double rho_s, double rho_rr,
                   const model::SystemConfig& cfg) {
  const double a_w = bid.availability / cfg.p_wind_max;
  const double price = bid.spot_share * rho_s + (1.0 - bid.spot_share) * rho_rr;
  return price * (std::min(a_w, a_act) - cfg.lambda * std::abs(a_w - a_act));
}

BessReward bess_reward(const model::BessBid& bid, double rho_s, double ema, double rho_rr, double rho_rl, double f_wc,
                       double p_wc_available, double spot_share, const model::SystemConfig& cfg) {
  const double i_ch = sgn(ema - rho_s);
  const double i_dch = sgn(rho_s - ema);
  const double a_s = bid.p_spot / cfg.p_bess_max;
  const double a_reg = bid.p_reg / cfg.p_bess_max;
  const double a_wc = std::min(bid.p_wc, p_wc_available) / cfg.p_bess_max;

  BessReward r;
  r.spot = a_s * std::abs(rho_s - ema) * (i_ch * bid.v_ch() / cfg.eta_ch + i_dch * bid.v_dch() * cfg.eta_dch);
  r.reg = a_reg * (bid.v_ch() * rho_rl / cfg.eta_ch + bid.v_dch() * cfg.eta_dch * rho_rr);
  r.wc = cfg.lambda * (spot_share * rho_s + (1.0 - spot_share) * rho_rr) * a_wc * f_wc / cfg.eta_ch;
  r.total = r.spot + r.reg + r.wc;
  return r;
}

Environment::Environment(model::SystemConfig cfg, Scenario scenario,
                         std::shared_ptr<const std::vector<market::MarketTick>> ticks, EnvOptions options)
    : cfg_(cfg),
      scenario_(scenario),
      ticks_(std::move(ticks)),
      options_(options),
      initial_energy_(std::isnan(options.initial_energy) ? 0.5 * (cfg.e_min + cfg.e_max) : options.initial_energy),
      ema_(cfg.tau_s),
      window_(cfg.m_window) {
  cfg_.validate();
  if (!ticks_) throw std::invalid_argument("Environment: null tick stream");
  if (initial_energy_ < cfg_.e_min || initial_energy_ > cfg_.e_max) {
    throw std::invalid_argument("Environment: initial energy outside the battery limits");
  }
  reset(0);
}

Observation Environment::reset(size_t start) {
  if (start > ticks_->size()) throw std::out_of_range("Environment::reset: start beyond the end of the stream");
  pos_ = start;
  steps_ = 0;
  battery_ = {initial_energy_};
  ema_ = market::EmaTracker(cfg_.tau_s);
  window_ = market::CurtailmentWindow(cfg_.m_window);
  obs_ = build_observation();
  return obs_;
}

bool Environment::done() const { return remaining() == 0; }

size_t Environment::remaining() const {
  const size_t left_in_stream = ticks_->size() - pos_;
  if (options_.episode_len == 0) return left_in_stream;
  return std::min(left_in_stream, options_.episode_len - std::min(steps_, options_.episode_len));
}

std::span<const market::MarketTick> Environment::history() const {
  return std::span<const market::MarketTick>(ticks_->data(), pos_);
}

Observation Environment::build_observation() const {
  const market::MarketTick* prev = pos_ > 0 ? &(*ticks_)[pos_ - 1] : nullptr;
  return {build_wind_state(prev, cfg_, options_.norm),
          build_bess_state(prev, battery_, window_.frequency(), cfg_, options_.norm)};
}

StepResult Environment::step(std::span<const double> wind_raw, std::span<const double> bess_raw) {
  const model::WindBid wind = decode_wind_action(wind_raw, scenario_.market, cfg_);
  const model::BessBid bess = decode_bess_action(bess_raw, scenario_, cfg_);
  return step_bids(wind, bess);
}

StepResult Environment::step_bids(const model::WindBid& wind, const model::BessBid& bess) {
  if (done()) throw std::logic_error("Environment::step called after the episode ended");
  const market::MarketTick& tick = (*ticks_)[pos_];

  StepResult out;
  out.settlement = model::settle_interval(wind, bess, battery_, tick.prices(), tick.p_wind_act, tick.agc, cfg_);
  out.bess_zeroed = out.settlement.bess_rejected;
  battery_.energy = out.settlement.energy_after;

  out.ema = ema_.update(tick.rho_s);
  out.f_wc = window_.push(out.settlement.p_wc_available > 0.0);

  out.wind_reward = wind_reward(wind, tick.p_wind_act / cfg_.p_wind_max, tick.rho_s, tick.rho_rr, cfg_);
  out.bess_reward = bess_reward(out.settlement.bess_bid, tick.rho_s, out.ema, tick.rho_rr, tick.rho_rl, out.f_wc,
                                out.settlement.p_wc_available, wind.spot_share, cfg_);

  ++pos_;
  ++steps_;
  obs_ = build_observation();
  out.next = obs_;
  out.done = done();
  return out;
}

}  // namespace windbess::env
