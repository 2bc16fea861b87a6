// Physical and economic model of a co-located wind farm and battery
// bidding into the spot and regulation FCAS markets.
//
// Every function here is pure: value types in, value types out.

#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace windbess::model {

/// Plant, market and learning constants shared by every module.
///
/// Defaults reproduce the reference plant: 67 MW wind farm, 10 MW / 10 MWh
/// battery operated between 5% and 95% state of charge, 5-minute dispatch
/// intervals with 75 AGC signals of 4 s each.
struct SystemConfig {
  double dt_hours = 5.0 / 60.0;    // dispatch interval
  double ds_hours = 4.0 / 3600.0;  // AGC signal duration
  int agc_len = 75;
  double lambda = 1.5;             // dispatch deviation penalty
  double eta_ch = 0.95;
  double eta_dch = 0.95;
  double c_deg = 1.0;              // currency per MWh discharged
  double p_wind_max = 67.0;        // MW
  double p_bess_max = 10.0;        // MW
  double e_min = 0.5;              // MWh
  double e_max = 9.5;              // MWh
  int m_window = 10;               // curtailment frequency window
  double tau_s = 0.9;              // spot price EMA smoothing
  double gamma = 0.99;
  double beta_l = 10.0;            // capacity penalty weight

  /// Throws std::invalid_argument naming the first broken invariant.
  void validate() const;
};

class AgcTrace {
 public:
  AgcTrace() = default;
  /// Throws std::invalid_argument if any signal lies outside [-1, 1].
  explicit AgcTrace(std::vector<double> signals);

  static AgcTrace zeros(int len) { return AgcTrace(std::vector<double>(static_cast<size_t>(len), 0.0)); }

  std::span<const double> signals() const { return signals_; }
  size_t size() const { return signals_.size(); }

  /// Sum of |s| over frequency-lower signals (s < 0).
  double lower_sum() const;
  /// Sum of s over frequency-raise signals (s >= 0).
  double raise_sum() const;

  bool operator==(const AgcTrace&) const = default;

 private:
  std::vector<double> signals_;
};

struct BatteryState {
  double energy = 0.0;  // MWh
};

struct WindBid {
  double availability = 0.0;  // MW, dispatch target offered
  double spot_share = 1.0;    // fraction of availability bid to spot
};

enum class BessMode { Discharge, Charge, Idle };

std::string_view to_string(BessMode mode);
/// Throws std::invalid_argument for unknown names.
BessMode parse_mode(std::string_view name);

struct BessBid {
  BessMode mode = BessMode::Idle;
  double p_spot = 0.0;  // MW
  double p_reg = 0.0;   // MW
  double p_wc = 0.0;    // MW planned draw from curtailed wind

  double v_dch() const { return mode == BessMode::Discharge ? 1.0 : 0.0; }
  double v_ch() const { return mode == BessMode::Charge ? 1.0 : 0.0; }
  double total_power() const { return p_spot + p_reg + p_wc; }

  static BessBid idle() { return {}; }
};

enum class BidViolation {
  NonFinite,
  SpotOutOfRange,
  RegOutOfRange,
  WcOutOfRange,
  SumExceedsRatedPower,
  DischargePrecludesWcDraw,
};

std::string_view to_string(BidViolation v);

/// Checks the per-interval bid constraints. Empty result means feasible.
std::vector<BidViolation> validate_bess_bid(const BessBid& bid, const SystemConfig& cfg);

/// Checks availability within installed capacity and the split within [0, 1].
bool wind_bid_valid(const WindBid& bid, const SystemConfig& cfg);

struct DispatchOutcome {
  double p_dis = 0.0;           // MW dispatched
  double p_wc_available = 0.0;  // MW curtailed
};

/// Throws std::invalid_argument on negative inputs.
DispatchOutcome wind_dispatch_outcome(double p_w, double p_act);

struct CurtailmentDraw {
  double p_wc_drawn = 0.0;
  double p_w_updated = 0.0;
};

/// Throws std::logic_error when a discharging battery asks for curtailed
/// power, std::invalid_argument on negative inputs.
CurtailmentDraw settle_curtailment(BessMode mode, double bid_p_wc, double p_wc_available, double p_w);

struct EnergyDelta {
  double spot = 0.0;
  double reg = 0.0;
  double wc = 0.0;
  double total = 0.0;
};

/// Stored-energy change over one interval. Efficiencies do not enter here.
/// Throws std::invalid_argument when the trace length differs from agc_len.
EnergyDelta energy_delta(const BessBid& bid, const AgcTrace& agc, double p_wc_drawn, const SystemConfig& cfg);

/// Wind farm revenue for one interval; negative when the deviation penalty
/// outweighs the dispatched energy.
double wind_revenue_interval(const WindBid& bid, double p_dis, double rho_s, double rho_rr, const SystemConfig& cfg);

double bess_revenue_interval(const BessBid& bid, double rho_s, double rho_rr, double rho_rl, const SystemConfig& cfg);

/// Only discharge wears the battery.
double degradation_cost_interval(const BessBid& bid, const SystemConfig& cfg);

struct BatteryStep {
  BatteryState state;
  bool accepted = false;
};

/// Applies the delta only when the result stays inside [e_min, e_max].
BatteryStep step_battery(const BatteryState& state, double de_total, const SystemConfig& cfg);

struct SettlementResult {
  WindBid wind_bid;               // as submitted
  BessBid bess_bid;               // as executed (idle when rejected)
  bool bess_rejected = false;
  double p_wind_act = 0.0;
  double p_dis = 0.0;
  double p_wc_available = 0.0;
  double p_wc_drawn = 0.0;
  double wind_revenue = 0.0;
  double bess_revenue = 0.0;
  double degradation_cost = 0.0;
  EnergyDelta delta_e;
  double energy_after = 0.0;      // MWh
};

/// Sum of wind and battery revenue less degradation.
double joint_objective(std::span<const SettlementResult> results);

struct IntervalPrices {
  double rho_s = 0.0;
  double rho_rr = 0.0;
  double rho_rl = 0.0;
};

/// Settles one interval end to end: wind dispatch, curtailment draw, energy
/// change against the realized AGC trace and the energy-limit check. A
/// battery bid that would leave the energy limits is replaced by idle and
/// the interval is re-settled.
///
/// Curtailment drawn by the battery raises the wind farm's effective
/// availability, so wind revenue is computed on the updated target.
SettlementResult settle_interval(const WindBid& wind, const BessBid& bess, const BatteryState& battery,
                                 const IntervalPrices& prices, double p_wind_act, const AgcTrace& agc,
                                 const SystemConfig& cfg);

}  // namespace windbess::model
