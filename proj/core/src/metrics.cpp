#include "windbess/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <sstream>
#include <stdexcept>

namespace windbess::metrics {

std::string MetricsReport::curtailment_ratio() const {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.0f/%.0f", std::round(curtailment_absorbed_mwh),
                std::round(curtailment_available_mwh));
  return buf;
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("quantile: no values");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * q;
  const size_t lo = static_cast<size_t>(std::floor(h));
  const size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

std::vector<double> observed_fwc(std::span<const model::SettlementResult> settlements, size_t window) {
  std::vector<double> out;
  out.reserve(settlements.size());
  std::deque<bool> flags;
  size_t count = 0;
  for (const model::SettlementResult& s : settlements) {
    out.push_back(flags.empty() ? 0.0 : static_cast<double>(count) / static_cast<double>(flags.size()));
    const bool curtailed = s.p_wc_available > 0.0;
    flags.push_back(curtailed);
    if (curtailed) ++count;
    if (flags.size() > window) {
      if (flags.front()) --count;
      flags.pop_front();
    }
  }
  return out;
}

namespace {

std::array<QuartileBucket, 4> bucketize(const std::vector<double>& key, std::span<const model::SettlementResult> s,
                                        const model::SystemConfig& cfg) {
  std::array<QuartileBucket, 4> buckets{};
  if (key.empty()) return buckets;
  const double q1 = quantile(key, 0.25), q2 = quantile(key, 0.5), q3 = quantile(key, 0.75);
  buckets[0].upper = q1;
  buckets[1].upper = q2;
  buckets[2].upper = q3;
  buckets[3].upper = *std::max_element(key.begin(), key.end());
  for (size_t i = 0; i < key.size(); ++i) {
    const size_t b = key[i] <= q1 ? 0 : key[i] <= q2 ? 1 : key[i] <= q3 ? 2 : 3;
    QuartileBucket& bucket = buckets[b];
    ++bucket.intervals;
    const model::EnergyDelta& de = s[i].delta_e;
    if (s[i].bess_bid.mode == model::BessMode::Charge) bucket.charge_mwh += de.total;
    if (s[i].bess_bid.mode == model::BessMode::Discharge) bucket.discharge_mwh -= de.total;
    bucket.wc_mwh += s[i].p_wc_drawn * cfg.dt_hours;
  }
  return buckets;
}

}  // namespace

MetricsReport report_metrics(std::span<const model::SettlementResult> settlements,
                             std::span<const market::MarketTick> ticks, const model::SystemConfig& cfg) {
  if (settlements.size() != ticks.size()) {
    throw std::invalid_argument("report_metrics: " + std::to_string(settlements.size()) + " settlements but " +
                                std::to_string(ticks.size()) + " ticks");
  }
  MetricsReport r;
  r.intervals = static_cast<std::int64_t>(settlements.size());
  double spot_in = 0.0, reg_in = 0.0, wc_in = 0.0, abs_dev = 0.0;
  for (const model::SettlementResult& s : settlements) {
    r.wind_revenue += s.wind_revenue;
    r.bess_revenue += s.bess_revenue;
    r.degradation_cost += s.degradation_cost;
    r.curtailment_available_mwh += s.p_wc_available * cfg.dt_hours;
    r.curtailment_absorbed_mwh += s.p_wc_drawn * cfg.dt_hours;
    if (s.p_wc_available > 0.0) ++r.curtailed_intervals;
    if (s.bess_rejected) ++r.rejected_bids;
    if (s.bess_bid.mode == model::BessMode::Charge) {
      spot_in += s.delta_e.spot;
      reg_in += s.delta_e.reg;
    }
    wc_in += s.delta_e.wc;
    abs_dev += std::abs(s.wind_bid.availability - s.p_wind_act);
  }
  r.total_revenue = r.wind_revenue + r.bess_revenue - r.degradation_cost;
  r.charged_mwh = spot_in + reg_in + wc_in;
  if (r.charged_mwh > 0.0) {
    r.charge_from_spot = spot_in / r.charged_mwh;
    r.charge_from_reg = reg_in / r.charged_mwh;
    r.charge_from_wc = wc_in / r.charged_mwh;
  }
  if (!settlements.empty()) r.dispatch_mae = abs_dev / static_cast<double>(settlements.size());

  std::vector<double> spot(ticks.size());
  std::transform(ticks.begin(), ticks.end(), spot.begin(), [](const market::MarketTick& t) { return t.rho_s; });
  r.spot_quartiles = bucketize(spot, settlements, cfg);
  r.fwc_quartiles = bucketize(observed_fwc(settlements, static_cast<size_t>(cfg.m_window)), settlements, cfg);
  return r;
}

double boost(double a, double b) { return (a - b) / b; }

std::string format_boost(double a, double b) {
  if (b == 0.0) return "n/a";
  const double pct = std::round(boost(a, b) * 100.0);
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.0f%%", pct == 0.0 ? 0.0 : pct);
  return buf;
}

std::vector<ComparisonRow> compare_scenarios(std::span<const RunSummary> runs) {
  if (runs.size() < 2) throw std::invalid_argument("compare_scenarios: need at least two runs");
  const RunSummary& base = runs.front();
  std::vector<ComparisonRow> rows;
  for (const RunSummary& r : runs) {
    if (r.eval_start != base.eval_start || r.eval_end != base.eval_end) {
      throw std::invalid_argument("compare_scenarios: run '" + r.name + "' was evaluated on a different window than '" +
                                  base.name + "'");
    }
    rows.push_back({r.name, r.wind_revenue, r.bess_revenue, r.total_revenue, format_boost(r.total_revenue,
                                                                                          base.total_revenue)});
  }
  return rows;
}

std::string format_comparison(std::span<const ComparisonRow> rows) {
  std::ostringstream out;
  char line[256];
  std::snprintf(line, sizeof line, "%-24s %14s %14s %14s %8s\n", "run", "wind", "bess", "total", "boost");
  out << line;
  for (const ComparisonRow& r : rows) {
    std::snprintf(line, sizeof line, "%-24s %14.2f %14.2f %14.2f %8s\n", r.name.c_str(), r.wind_revenue,
                  r.bess_revenue, r.total_revenue, r.boost_vs_baseline.c_str());
    out << line;
  }
  return out.str();
}

}  // namespace windbess::metrics
