#include "windbess/market_data.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace windbess::market {

model::AgcTrace gen_agc_trace(std::mt19937_64& rng, int len) {
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  std::vector<double> signals(static_cast<size_t>(len));
  for (double& s : signals) s = dist(rng);
  return model::AgcTrace(std::move(signals));
}

model::AgcTrace agc_trace_for(std::uint64_t run_seed, std::int64_t interval, int len) {
  const auto idx = static_cast<std::uint64_t>(interval);
  std::seed_seq seq{static_cast<std::uint32_t>(run_seed), static_cast<std::uint32_t>(run_seed >> 32),
                    static_cast<std::uint32_t>(idx), static_cast<std::uint32_t>(idx >> 32), 0x41474321u};
  std::mt19937_64 rng(seq);
  return gen_agc_trace(rng, len);
}

PriceProfile price_profile_by_name(std::string_view name) {
  if (name == "constant") return ConstantProfile{};
  if (name == "square-wave") return SquareWaveProfile{};
  if (name == "mean-reverting") return MeanRevertingProfile{};
  throw std::invalid_argument("unknown price profile '" + std::string(name) +
                              "' (expected constant, square-wave or mean-reverting)");
}

std::string_view profile_name(const PriceProfile& profile) {
  struct Visitor {
    std::string_view operator()(const ConstantProfile&) const { return "constant"; }
    std::string_view operator()(const SquareWaveProfile&) const { return "square-wave"; }
    std::string_view operator()(const MeanRevertingProfile&) const { return "mean-reverting"; }
  };
  return std::visit(Visitor{}, profile);
}

namespace {

std::vector<model::IntervalPrices> generate(const ConstantProfile& p, size_t n, std::uint64_t) {
  return std::vector<model::IntervalPrices>(n, {p.spot, p.rr, p.rl});
}

std::vector<model::IntervalPrices> generate(const SquareWaveProfile& p, size_t n, std::uint64_t) {
  if (p.period < 2) throw std::invalid_argument("square-wave period must be at least 2");
  const size_t half = static_cast<size_t>(p.period) / 2;
  std::vector<model::IntervalPrices> out(n);
  for (size_t i = 0; i < n; ++i) {
    const bool low = (i % static_cast<size_t>(p.period)) < half;
    out[i] = {low ? p.low : p.high, p.rr, p.rl};
  }
  return out;
}

std::vector<model::IntervalPrices> generate(const MeanRevertingProfile& p, size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::exponential_distribution<double> spike(1.0);

  constexpr double kIntervalsPerDay = 288.0;
  auto diurnal_mean = [&](size_t i) {
    const double phase = 2.0 * std::numbers::pi * static_cast<double>(i % 288) / kIntervalsPerDay;
    return p.spot_mean - p.daily_amplitude * std::cos(phase);
  };

  double spot = diurnal_mean(0);
  double rr = p.rr_mean;
  double rl = p.rl_mean;
  std::vector<model::IntervalPrices> out(n);
  for (size_t i = 0; i < n; ++i) {
    double observed = spot;
    if (unit(rng) < p.spike_prob) observed += p.spike_scale * spike(rng);
    out[i] = {observed, rr, rl};

    spot += p.reversion * (diurnal_mean(i + 1) - spot) + p.spot_vol * normal(rng);
    rr = std::max(0.0, rr + p.reversion * (p.rr_mean - rr) + p.fcas_vol * normal(rng));
    rl = std::max(0.0, rl + p.reversion * (p.rl_mean - rl) + p.fcas_vol * normal(rng));
  }
  return out;
}

}  // namespace

std::vector<model::IntervalPrices> gen_synthetic_prices(const PriceProfile& profile, size_t n, std::uint64_t seed) {
  return std::visit([&](const auto& p) { return generate(p, n, seed); }, profile);
}

std::vector<double> gen_synthetic_wind(size_t n, double p_wind_max, std::uint64_t seed, const WindProfile& profile) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double mean = profile.mean_fraction * p_wind_max;
  const double vol = profile.vol_fraction * p_wind_max;
  double level = mean;
  std::vector<double> out(n);
  for (size_t i = 0; i < n; ++i) {
    out[i] = level;
    level = std::clamp(level + profile.reversion * (mean - level) + vol * normal(rng), 0.0, p_wind_max);
  }
  return out;
}

std::vector<MarketTick> make_ticks(std::span<const model::IntervalPrices> prices, std::span<const double> wind,
                                   std::uint64_t agc_seed, const model::SystemConfig& cfg,
                                   std::int64_t start_timestamp_min) {
  if (prices.size() != wind.size()) {
    throw std::invalid_argument("make_ticks: price and wind series differ in length");
  }
  std::vector<MarketTick> ticks(prices.size());
  for (size_t i = 0; i < ticks.size(); ++i) {
    auto& t = ticks[i];
    t.index = static_cast<std::int64_t>(i);
    t.timestamp_min = start_timestamp_min + 5 * static_cast<std::int64_t>(i);
    t.rho_s = prices[i].rho_s;
    t.rho_rr = prices[i].rho_rr;
    t.rho_rl = prices[i].rho_rl;
    t.p_wind_act = wind[i];
    t.agc = agc_trace_for(agc_seed, t.index, cfg.agc_len);
  }
  return ticks;
}

size_t train_prefix_length(size_t n, double ratio) {
  if (n == 0) throw std::invalid_argument("split_train_eval: empty input");
  if (!(ratio > 0.0 && ratio < 1.0)) throw std::invalid_argument("split_train_eval: ratio must lie in (0, 1)");
  // The slack keeps ratios such as 11/12 from landing one short after rounding.
  return std::min(n, static_cast<size_t>(std::floor(static_cast<double>(n) * ratio + 1e-9)));
}

double EmaTracker::update(double rho_s) {
  value_ = value_ ? tau_s_ * *value_ + (1.0 - tau_s_) * rho_s : rho_s;
  return *value_;
}

double CurtailmentWindow::push(bool occurred) {
  flags_.push_back(occurred);
  if (occurred) ++count_;
  if (flags_.size() > m_) {
    if (flags_.front()) --count_;
    flags_.pop_front();
  }
  return frequency();
}

double CurtailmentWindow::frequency() const {
  if (flags_.empty()) return 0.0;
  return static_cast<double>(count_) / static_cast<double>(flags_.size());
}

}  // namespace windbess::market
