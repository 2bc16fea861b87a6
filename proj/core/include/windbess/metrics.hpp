// Evaluation metrics over a run's settlements and scenario comparisons.

#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "windbess/market_data.hpp"
#include "windbess/model.hpp"

namespace windbess::metrics {

/// Charging activity inside one quartile bucket of the eval set.
struct QuartileBucket {
  double upper = 0.0;  // inclusive upper boundary (last bucket: max value)
  std::int64_t intervals = 0;
  double charge_mwh = 0.0;     // all charging energy
  double wc_mwh = 0.0;         // of which from curtailed wind
  double discharge_mwh = 0.0;  // energy leaving the battery
};

struct MetricsReport {
  std::int64_t intervals = 0;
  double wind_revenue = 0.0;
  double bess_revenue = 0.0;
  double degradation_cost = 0.0;
  double total_revenue = 0.0;  // wind + BESS - degradation

  double curtailment_available_mwh = 0.0;
  double curtailment_absorbed_mwh = 0.0;
  std::int64_t curtailed_intervals = 0;

  // Shares of charged energy by source; all zero when nothing was charged.
  double charge_from_spot = 0.0;
  double charge_from_reg = 0.0;
  double charge_from_wc = 0.0;
  double charged_mwh = 0.0;

  double dispatch_mae = 0.0;  // mean |availability bid - actual wind|, MW
  std::int64_t rejected_bids = 0;

  std::array<QuartileBucket, 4> spot_quartiles{};
  std::array<QuartileBucket, 4> fwc_quartiles{};

  double train_seconds = 0.0;  // wall clock, excluded from determinism
  double eval_seconds = 0.0;

  /// "absorbed/available" with both rounded to whole MWh.
  std::string curtailment_ratio() const;
};

/// Type-7 sample quantile (linear interpolation). Throws on empty input.
double quantile(std::vector<double> values, double q);

/// Rolling curtailment frequency each interval's bidder observed: the share
/// of the previous `window` intervals (fewer at the start) with curtailment.
std::vector<double> observed_fwc(std::span<const model::SettlementResult> settlements, size_t window);

/// Aggregates a run. `ticks` must be aligned one-to-one with `settlements`;
/// throws std::invalid_argument otherwise.
MetricsReport report_metrics(std::span<const model::SettlementResult> settlements,
                             std::span<const market::MarketTick> ticks, const model::SystemConfig& cfg);

/// Fractional change (a - b) / b rounded to a whole percent, e.g. "23%".
/// "n/a" when b is zero.
std::string format_boost(double a, double b);
double boost(double a, double b);

struct RunSummary {
  std::string name;
  std::int64_t eval_start = 0;  // first eval timestamp, minutes
  std::int64_t eval_end = 0;    // last eval timestamp, minutes
  double wind_revenue = 0.0;
  double bess_revenue = 0.0;
  double degradation_cost = 0.0;
  double total_revenue = 0.0;
};

struct ComparisonRow {
  std::string name;
  double wind_revenue = 0.0;
  double bess_revenue = 0.0;
  double total_revenue = 0.0;
  std::string boost_vs_baseline;  // total revenue against the first run
};

/// Side-by-side table against the first run. Throws std::invalid_argument
/// with fewer than two runs or when eval windows differ.
std::vector<ComparisonRow> compare_scenarios(std::span<const RunSummary> runs);

/// Renders the comparison as aligned text.
std::string format_comparison(std::span<const ComparisonRow> rows);

}  // namespace windbess::metrics
