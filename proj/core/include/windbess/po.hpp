// Predict-and-optimize benchmark: forecast the next H intervals, solve the
// dispatch problem exactly over a discretized state of charge, execute the
// first bid and roll forward.

#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "windbess/env.hpp"
#include "windbess/market_data.hpp"
#include "windbess/model.hpp"
#include "windbess/policy.hpp"

namespace windbess::po {

struct ForecastStep {
  double rho_s = 0.0;
  double rho_rr = 0.0;
  double rho_rl = 0.0;
  double wind = 0.0;  // MW
};

struct Forecast {
  std::vector<ForecastStep> steps;
  size_t horizon() const { return steps.size(); }
};

/// `perfect` reads realized future data and exists as an upper-bound oracle.
enum class ForecastMethod { Persistence, Ema, Perfect };

std::string_view to_string(ForecastMethod method);
ForecastMethod parse_forecast_method(std::string_view name);  // throws std::invalid_argument

/// Persistence repeats the last observation; EMA repeats exponential moving
/// averages (smoothing `tau`) of every series. Throws std::invalid_argument
/// on empty history when H > 0, or when asked for the perfect method.
Forecast forecast(ForecastMethod method, std::span<const market::MarketTick> history, size_t horizon,
                  double tau = 0.9);

/// The next `horizon` realized ticks (fewer at the end of the data).
Forecast perfect_forecast(std::span<const market::MarketTick> future, size_t horizon);

struct DpGrid {
  int n_energy = 37;  // SoC levels spanning [e_min, e_max]
  int n_action = 5;   // power levels per battery channel spanning [0, p_bess_max]
  size_t horizon = 12;

  /// Throws std::invalid_argument unless both level counts are at least 2.
  void validate() const;
};

struct PlannerOptions {
  /// Expected per-signal regulation energy share used while planning. Under
  /// U(-1, 1) signals, E[|s| 1(s < 0)] = E[s 1(s >= 0)] = 0.25.
  double agc_enablement = 0.25;
};

struct PlanStep {
  model::WindBid wind;
  model::BessBid bess;
  double energy_before = 0.0;  // grid level, MWh
  double energy_after = 0.0;
  double revenue = 0.0;        // forecast joint-objective contribution
};

struct Plan {
  std::vector<PlanStep> steps;
  double revenue = 0.0;
};

/// Energy-level grid with exact endpoints.
std::vector<double> energy_levels(const DpGrid& grid, const model::SystemConfig& cfg);
/// Highest level not above `energy`. Planning never credits energy the bids
/// did not deliver, so discharges along a planned path stay feasible.
size_t level_below(double energy, const DpGrid& grid, const model::SystemConfig& cfg);

/// Candidate battery bids in tie-break order: idle first, then ascending
/// total power. Every candidate passes validate_bess_bid.
std::vector<model::BessBid> candidate_bess_bids(const env::Scenario& scenario, const DpGrid& grid,
                                                const model::SystemConfig& cfg);

/// Backward induction over (step, SoC level) maximizing forecast revenue
/// under all per-interval constraints and the energy limits; forward argmax
/// extraction with ties toward the earliest candidate.
/// Throws std::invalid_argument on an empty forecast.
Plan dp_optimize(const Forecast& fc, const model::BatteryState& battery, const env::Scenario& scenario,
                 const DpGrid& grid, const model::SystemConfig& cfg, const PlannerOptions& options = {});

inline constexpr double kOracleMaxPlans = 1e6;

/// Exhaustive enumeration of every action sequence over the same discretized
/// space. Throws std::invalid_argument on an empty forecast or when the plan
/// count exceeds kOracleMaxPlans.
Plan brute_force_oracle(const Forecast& fc, const model::BatteryState& battery, const env::Scenario& scenario,
                        const DpGrid& grid, const model::SystemConfig& cfg, const PlannerOptions& options = {});

/// Receding-horizon bidder: forecast, optimize, execute the first bid.
/// The horizon never extends past the end of the current episode.
class PoPolicy final : public policy::BiddingPolicy {
 public:
  PoPolicy(ForecastMethod method, DpGrid grid, PlannerOptions options = {}, double ema_tau = 0.9);

  std::string name() const override { return "po"; }
  policy::Bids act(const env::Environment& env) override;

  /// Predicted revenue of every plan solved so far.
  const std::vector<double>& predicted_revenues() const { return predicted_; }

 private:
  ForecastMethod method_;
  DpGrid grid_;
  PlannerOptions options_;
  double ema_tau_;
  std::vector<double> predicted_;
};

/// Runs the receding-horizon bidder over `env`'s stream.
std::vector<model::SettlementResult> run_po_bidder(env::Environment& env, ForecastMethod method, const DpGrid& grid,
                                                   const PlannerOptions& options = {});

/// CSV: interval,mode,p_spot,p_reg,p_wc,wind_avail,v_w
void write_plan_csv(std::ostream& out, const Plan& plan, std::int64_t first_interval = 0);

}  // namespace windbess::po
