// The two coupled bidding MDPs: one for the wind farm, one for the battery.
//
// Both agents act on the same market stream each interval. States are built
// strictly from the previous interval; actions are squashed vectors in
// [-1, 1] that decode into physical bids.

#pragma once

#include <array>
#include <limits>
#include <memory>
#include <span>
#include <string_view>
#include <vector>

#include "windbess/market_data.hpp"
#include "windbess/model.hpp"

namespace windbess::env {

enum class Market { SpotOnly, RegOnly, Joint };

std::string_view to_string(Market market);
/// Accepts "spot", "reg" or "joint".
Market parse_market(std::string_view name);

struct Scenario {
  Market market = Market::Joint;
  bool coupled = true;  // battery may charge from curtailed wind
};

struct Normalizers {
  double spot_divisor = 100.0;
  double fcas_divisor = 50.0;
};

inline constexpr size_t kWindStateDim = 3;
inline constexpr size_t kBessStateDim = 6;
inline constexpr size_t kWindActionDim = 2;
inline constexpr size_t kBessActionDim = 4;

/// [wind_act / P_w, rho_s, rho_rr] of the previous interval.
using WindState = std::array<double, kWindStateDim>;
/// [e / E_max, f_wc, wind_act / P_w, rho_s, rho_rr, rho_rl] of the previous interval.
using BessState = std::array<double, kBessStateDim>;

/// `prev` is null at the very first interval of a stream.
WindState build_wind_state(const market::MarketTick* prev, const model::SystemConfig& cfg, const Normalizers& norm);
BessState build_bess_state(const market::MarketTick* prev, const model::BatteryState& battery, double f_wc,
                           const model::SystemConfig& cfg, const Normalizers& norm);

/// Mode head dead zone: |m| < kModeDeadZone decodes to Idle.
inline constexpr double kModeDeadZone = 0.1;

/// Throws std::invalid_argument for wrong length or components outside [-1, 1].
model::WindBid decode_wind_action(std::span<const double> raw, Market market, const model::SystemConfig& cfg);

/// Per-head magnitudes in [0, 1] after mode and scenario masks but before
/// the over-capacity rescale.
struct BessMagnitudes {
  model::BessMode mode = model::BessMode::Idle;
  double spot = 0.0;
  double reg = 0.0;
  double wc = 0.0;
  std::array<double, 3> mask{};  // 1 where the head passes through

  double sum() const { return spot + reg + wc; }
};

BessMagnitudes bess_action_magnitudes(std::span<const double> raw, const Scenario& scenario);

/// Decodes and, when the three powers exceed the rating, rescales them
/// proportionally so they sum to exactly p_bess_max.
model::BessBid decode_bess_action(std::span<const double> raw, const Scenario& scenario,
                                  const model::SystemConfig& cfg);

/// Capacity penalty a_sum * 1(a_sum > 1) on pre-rescale magnitudes, with its
/// gradient with respect to the raw action.
struct PenaltyEval {
  double value = 0.0;
  std::array<double, kBessActionDim> grad{};
};

PenaltyEval bess_capacity_penalty(std::span<const double> raw, const Scenario& scenario);

/// `a_act` is actual wind over installed capacity.
double wind_reward(const model::WindBid& bid, double a_act, double rho_s, double rho_rr, const model::SystemConfig& cfg);

struct BessReward {
  double spot = 0.0;
  double reg = 0.0;
  double wc = 0.0;
  double total = 0.0;
};

/// `bid` is the executed bid in MW; `p_wc_available` is curtailed wind in MW.
/// The curtailment term rewards min(bid p_wc, available) normalized by the
/// battery rating.
BessReward bess_reward(const model::BessBid& bid, double rho_s, double ema, double rho_rr, double rho_rl, double f_wc,
                       double p_wc_available, double spot_share, const model::SystemConfig& cfg);

struct EnvOptions {
  size_t episode_len = 288;  // 0 runs to the end of the stream
  Normalizers norm;
  double initial_energy = std::numeric_limits<double>::quiet_NaN();  // NaN selects the midpoint
};

struct Observation {
  WindState wind{};
  BessState bess{};
};

struct StepResult {
  Observation next;
  double wind_reward = 0.0;
  BessReward bess_reward;
  model::SettlementResult settlement;
  bool bess_zeroed = false;  // energy limits forced an idle battery
  double ema = 0.0;
  double f_wc = 0.0;
  bool done = false;
};

/// Shared market/asset world. Single owner, stepped sequentially; copies are
/// independent apart from the immutable tick stream.
class Environment {
 public:
  Environment(model::SystemConfig cfg, Scenario scenario, std::shared_ptr<const std::vector<market::MarketTick>> ticks,
              EnvOptions options = {});

  /// Starts an episode at stream position `start`. Trackers are cleared and
  /// the battery returns to its initial energy.
  Observation reset(size_t start = 0);

  /// Decodes both raw actions then settles the interval.
  StepResult step(std::span<const double> wind_raw, std::span<const double> bess_raw);

  /// Settles the interval for already-decoded bids.
  StepResult step_bids(const model::WindBid& wind, const model::BessBid& bess);

  bool done() const;
  size_t position() const { return pos_; }
  size_t episode_steps() const { return steps_; }
  /// Intervals left before the episode ends.
  size_t remaining() const;

  const Observation& observation() const { return obs_; }
  const model::BatteryState& battery() const { return battery_; }
  double f_wc() const { return window_.frequency(); }
  double ema() const { return ema_.value(); }

  const model::SystemConfig& config() const { return cfg_; }
  const Scenario& scenario() const { return scenario_; }
  const EnvOptions& options() const { return options_; }
  const std::vector<market::MarketTick>& stream() const { return *ticks_; }
  /// Ticks strictly before the current interval.
  std::span<const market::MarketTick> history() const;

 private:
  Observation build_observation() const;

  model::SystemConfig cfg_;
  Scenario scenario_;
  std::shared_ptr<const std::vector<market::MarketTick>> ticks_;
  EnvOptions options_;
  double initial_energy_;

  size_t pos_ = 0;
  size_t steps_ = 0;
  model::BatteryState battery_;
  market::EmaTracker ema_;
  market::CurtailmentWindow window_;
  Observation obs_;
};

}  // namespace windbess::env
