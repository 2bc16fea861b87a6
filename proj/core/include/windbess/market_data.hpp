// Exogenous market series: ticks, seeded synthetic generators and the
// running statistics the bidding environments observe.

#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "windbess/model.hpp"

namespace windbess::market {

/// One 5-minute dispatch interval of exogenous data.
struct MarketTick {
  std::int64_t index = 0;
  std::int64_t timestamp_min = 0;  // minutes since 1970-01-01T00:00 UTC
  double rho_s = 0.0;
  double rho_rr = 0.0;
  double rho_rl = 0.0;
  double p_wind_act = 0.0;  // MW
  model::AgcTrace agc;

  model::IntervalPrices prices() const { return {rho_s, rho_rr, rho_rl}; }
};

/// L i.i.d. draws from U(-1, 1).
model::AgcTrace gen_agc_trace(std::mt19937_64& rng, int len);

/// Trace for one interval derived from a per-run seed, independent of the
/// order in which intervals are requested.
model::AgcTrace agc_trace_for(std::uint64_t run_seed, std::int64_t interval, int len);

struct ConstantProfile {
  double spot = 50.0;
  double rr = 50.0;
  double rl = 50.0;
};

/// Spot alternates `low` for the first half of each period and `high` for
/// the second half. FCAS prices stay constant.
struct SquareWaveProfile {
  double low = 20.0;
  double high = 100.0;
  int period = 2;
  double rr = 10.0;
  double rl = 5.0;
};

/// AR(1) spot price around a diurnal mean with occasional spikes; FCAS
/// prices follow their own AR(1) processes.
struct MeanRevertingProfile {
  double spot_mean = 60.0;
  double daily_amplitude = 25.0;
  double reversion = 0.15;
  double spot_vol = 6.0;
  double spike_prob = 0.01;
  double spike_scale = 250.0;
  double rr_mean = 20.0;
  double rl_mean = 10.0;
  double fcas_vol = 2.0;
};

using PriceProfile = std::variant<ConstantProfile, SquareWaveProfile, MeanRevertingProfile>;

/// Profile names: "constant", "square-wave", "mean-reverting".
/// Throws std::invalid_argument on anything else.
PriceProfile price_profile_by_name(std::string_view name);
std::string_view profile_name(const PriceProfile& profile);

std::vector<model::IntervalPrices> gen_synthetic_prices(const PriceProfile& profile, size_t n, std::uint64_t seed);

struct WindProfile {
  double mean_fraction = 0.45;  // long-run mean as a share of capacity
  double reversion = 0.05;
  double vol_fraction = 0.05;   // innovation std as a share of capacity
};

/// Bounded AR(1) wind trace clipped to [0, p_wind_max].
std::vector<double> gen_synthetic_wind(size_t n, double p_wind_max, std::uint64_t seed, const WindProfile& profile = {});

inline constexpr std::int64_t kDefaultStartMinutes = 25246080;  // 2018-01-01T00:00

/// Zips prices and wind into ticks at 5-minute cadence from `start_timestamp_min`,
/// attaching AGC traces derived from `agc_seed`.
std::vector<MarketTick> make_ticks(std::span<const model::IntervalPrices> prices, std::span<const double> wind,
                                   std::uint64_t agc_seed, const model::SystemConfig& cfg,
                                   std::int64_t start_timestamp_min = kDefaultStartMinutes);

/// Chronological split; the training prefix holds floor(n * ratio) ticks.
/// Throws std::invalid_argument on empty input or ratio outside (0, 1).
template <typename T>
std::pair<std::vector<T>, std::vector<T>> split_train_eval(const std::vector<T>& items, double ratio);

size_t train_prefix_length(size_t n, double ratio);

template <typename T>
std::pair<std::vector<T>, std::vector<T>> split_train_eval(const std::vector<T>& items, double ratio) {
  const size_t n_train = train_prefix_length(items.size(), ratio);
  return {std::vector<T>(items.begin(), items.begin() + static_cast<std::ptrdiff_t>(n_train)),
          std::vector<T>(items.begin() + static_cast<std::ptrdiff_t>(n_train), items.end())};
}

/// Exponential moving average of the spot price. The first observation
/// initializes the average.
class EmaTracker {
 public:
  explicit EmaTracker(double tau_s) : tau_s_(tau_s) {}

  double update(double rho_s);
  double value() const { return value_.value_or(0.0); }
  bool initialized() const { return value_.has_value(); }
  double tau() const { return tau_s_; }

 private:
  double tau_s_;
  std::optional<double> value_;
};

/// Fraction of the latest M intervals in which wind was curtailed. Before
/// M flags have been seen the denominator is the current length.
class CurtailmentWindow {
 public:
  explicit CurtailmentWindow(int m) : m_(static_cast<size_t>(m)) {}

  double push(bool occurred);
  double frequency() const;
  size_t size() const { return flags_.size(); }
  size_t capacity() const { return m_; }

 private:
  size_t m_;
  size_t count_ = 0;
  std::deque<bool> flags_;
};

}  // namespace windbess::market
