#include "windbess/csv.hpp"

#include <array>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>

namespace windbess::market {

namespace {

constexpr std::array<std::string_view, 5> kMarketColumns = {"timestamp", "spot_price", "rr_price", "rl_price",
                                                            "wind_mw"};

std::string describe(DataError::Kind kind) {
  switch (kind) {
    case DataError::Kind::Io: return "io error";
    case DataError::Kind::Schema: return "schema error";
    case DataError::Kind::Order: return "order error";
    case DataError::Kind::Value: return "value error";
    case DataError::Kind::Range: return "range error";
  }
  return "error";
}

int parse_int(std::string_view s, size_t pos, size_t len) {
  int v = 0;
  auto [ptr, ec] = std::from_chars(s.data() + pos, s.data() + pos + len, v);
  if (ec != std::errc{} || ptr != s.data() + pos + len) throw std::invalid_argument("bad timestamp");
  return v;
}

}  // namespace

DataError::DataError(Kind kind, size_t row, std::string column, const std::string& message)
    : std::runtime_error(describe(kind) + (row ? " at row " + std::to_string(row) : std::string()) +
                         (column.empty() ? std::string() : " column \"" + column + "\"") + ": " + message),
      kind_(kind),
      row_(row),
      column_(std::move(column)) {}

std::vector<std::vector<std::string>> read_csv_records(std::istream& in) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;
  char c;
  auto end_record = [&] {
    record.push_back(std::move(field));
    field.clear();
    records.push_back(std::move(record));
    record.clear();
    field_started = false;
  };
  while (in.get(c)) {
    if (in_quotes) {
      if (c == '"') {
        if (in.peek() == '"') {
          in.get(c);
          field.push_back('"');
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        in_quotes = true;
        field_started = true;
        break;
      case ',':
        record.push_back(std::move(field));
        field.clear();
        field_started = true;
        break;
      case '\r':
        if (in.peek() == '\n') in.get(c);
        end_record();
        break;
      case '\n':
        end_record();
        break;
      default:
        field.push_back(c);
        field_started = true;
    }
  }
  if (field_started || !field.empty() || !record.empty()) end_record();
  return records;
}

std::string csv_escape(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

std::string format_double(double v) {
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ptr);
}

double parse_double(std::string_view text, size_t row, std::string_view column) {
  while (!text.empty() && text.front() == ' ') text.remove_prefix(1);
  while (!text.empty() && text.back() == ' ') text.remove_suffix(1);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || ec != std::errc{} || ptr != text.data() + text.size()) {
    throw DataError(DataError::Kind::Value, row, std::string(column), "not a number: '" + std::string(text) + "'");
  }
  if (!std::isfinite(v)) {
    throw DataError(DataError::Kind::Value, row, std::string(column), "non-finite value");
  }
  return v;
}

std::int64_t parse_timestamp(std::string_view s) {
  // YYYY-MM-DDTHH:MM or YYYY-MM-DDTHH:MM:SS
  if ((s.size() != 16 && s.size() != 19) || s[4] != '-' || s[7] != '-' || (s[10] != 'T' && s[10] != ' ') ||
      s[13] != ':' || (s.size() == 19 && s[16] != ':')) {
    throw std::invalid_argument("timestamp must look like YYYY-MM-DDTHH:MM[:SS]");
  }
  using namespace std::chrono;
  const year_month_day ymd{year{parse_int(s, 0, 4)}, month{static_cast<unsigned>(parse_int(s, 5, 2))},
                           day{static_cast<unsigned>(parse_int(s, 8, 2))}};
  if (!ymd.ok()) throw std::invalid_argument("invalid calendar date");
  const int hh = parse_int(s, 11, 2);
  const int mm = parse_int(s, 14, 2);
  const int ss = s.size() == 19 ? parse_int(s, 17, 2) : 0;
  if (hh > 23 || mm > 59 || ss > 59) throw std::invalid_argument("invalid time of day");
  const auto days = sys_days{ymd}.time_since_epoch().count();
  return static_cast<std::int64_t>(days) * 1440 + hh * 60 + mm;
}

std::string format_timestamp(std::int64_t minutes) {
  using namespace std::chrono;
  std::int64_t days = minutes / 1440;
  std::int64_t rem = minutes % 1440;
  if (rem < 0) {
    rem += 1440;
    --days;
  }
  const year_month_day ymd{sys_days{std::chrono::days{days}}};
  std::array<char, 32> buf{};
  std::snprintf(buf.data(), buf.size(), "%04d-%02u-%02uT%02d:%02d:00", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()), static_cast<int>(rem / 60),
                static_cast<int>(rem % 60));
  return buf.data();
}

std::vector<MarketTick> read_market_csv(std::istream& in, const model::SystemConfig& cfg, std::uint64_t agc_seed) {
  const auto records = read_csv_records(in);
  if (records.empty()) throw DataError(DataError::Kind::Schema, 0, "", "missing header");

  const auto& header = records.front();
  std::map<std::string, size_t, std::less<>> position;
  for (size_t i = 0; i < header.size(); ++i) position[header[i]] = i;
  std::array<size_t, kMarketColumns.size()> col{};
  for (size_t k = 0; k < kMarketColumns.size(); ++k) {
    auto it = position.find(kMarketColumns[k]);
    if (it == position.end()) {
      throw DataError(DataError::Kind::Schema, 0, std::string(kMarketColumns[k]), "missing column");
    }
    col[k] = it->second;
  }

  std::vector<MarketTick> ticks;
  ticks.reserve(records.size() - 1);
  for (size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    if (rec.size() == 1 && rec[0].empty()) continue;  // blank line
    if (rec.size() != header.size()) {
      throw DataError(DataError::Kind::Schema, r, "",
                      "expected " + std::to_string(header.size()) + " fields, found " + std::to_string(rec.size()));
    }
    MarketTick t;
    t.index = static_cast<std::int64_t>(ticks.size());
    try {
      t.timestamp_min = parse_timestamp(rec[col[0]]);
    } catch (const std::invalid_argument& e) {
      throw DataError(DataError::Kind::Value, r, "timestamp", e.what());
    }
    if (!ticks.empty() && t.timestamp_min <= ticks.back().timestamp_min) {
      throw DataError(DataError::Kind::Order, r, "timestamp", "timestamps must be strictly increasing");
    }
    t.rho_s = parse_double(rec[col[1]], r, kMarketColumns[1]);
    t.rho_rr = parse_double(rec[col[2]], r, kMarketColumns[2]);
    t.rho_rl = parse_double(rec[col[3]], r, kMarketColumns[3]);
    t.p_wind_act = parse_double(rec[col[4]], r, kMarketColumns[4]);
    if (t.p_wind_act < 0.0 || t.p_wind_act > cfg.p_wind_max) {
      throw DataError(DataError::Kind::Range, r, "wind_mw",
                      "wind " + format_double(t.p_wind_act) + " MW outside [0, " + format_double(cfg.p_wind_max) + "]");
    }
    t.agc = agc_trace_for(agc_seed, t.index, cfg.agc_len);
    ticks.push_back(std::move(t));
  }
  return ticks;
}

std::vector<MarketTick> load_market_csv(const std::filesystem::path& path, const model::SystemConfig& cfg,
                                        std::uint64_t agc_seed, const std::optional<std::filesystem::path>& agc_path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(DataError::Kind::Io, 0, "", "cannot open " + path.string());
  auto ticks = read_market_csv(in, cfg, agc_seed);
  if (agc_path) {
    std::ifstream agc(*agc_path, std::ios::binary);
    if (!agc) throw DataError(DataError::Kind::Io, 0, "", "cannot open " + agc_path->string());
    apply_agc_csv(agc, ticks, cfg);
  }
  return ticks;
}

void write_market_csv(std::ostream& out, std::span<const MarketTick> ticks) {
  out << "timestamp,spot_price,rr_price,rl_price,wind_mw\n";
  for (const auto& t : ticks) {
    out << format_timestamp(t.timestamp_min) << ',' << format_double(t.rho_s) << ',' << format_double(t.rho_rr)
        << ',' << format_double(t.rho_rl) << ',' << format_double(t.p_wind_act) << '\n';
  }
}

void write_market_csv(const std::filesystem::path& path, std::span<const MarketTick> ticks) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(DataError::Kind::Io, 0, "", "cannot write " + path.string());
  write_market_csv(out, ticks);
}

void write_agc_csv(std::ostream& out, std::span<const MarketTick> ticks) {
  const size_t len = ticks.empty() ? 0 : ticks.front().agc.size();
  out << "interval_index";
  for (size_t l = 0; l < len; ++l) out << ",signal_" << l;
  out << '\n';
  for (const auto& t : ticks) {
    out << t.index;
    for (double s : t.agc.signals()) out << ',' << format_double(s);
    out << '\n';
  }
}

void apply_agc_csv(std::istream& in, std::vector<MarketTick>& ticks, const model::SystemConfig& cfg) {
  const auto records = read_csv_records(in);
  if (records.empty()) throw DataError(DataError::Kind::Schema, 0, "", "AGC file missing header");
  const auto& header = records.front();
  const size_t width = static_cast<size_t>(cfg.agc_len) + 1;
  if (header.size() != width || header[0] != "interval_index") {
    throw DataError(DataError::Kind::Schema, 0, header.empty() ? "" : header[0],
                    "AGC header must be interval_index,signal_0..signal_" + std::to_string(cfg.agc_len - 1));
  }
  for (size_t l = 0; l + 1 < width; ++l) {
    if (header[l + 1] != "signal_" + std::to_string(l)) {
      throw DataError(DataError::Kind::Schema, 0, header[l + 1], "unexpected AGC column");
    }
  }
  std::map<std::int64_t, model::AgcTrace> traces;
  for (size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    if (rec.size() == 1 && rec[0].empty()) continue;
    if (rec.size() != width) throw DataError(DataError::Kind::Schema, r, "", "wrong number of AGC fields");
    const double idx = parse_double(rec[0], r, "interval_index");
    std::vector<double> signals(width - 1);
    for (size_t l = 0; l + 1 < width; ++l) {
      signals[l] = parse_double(rec[l + 1], r, header[l + 1]);
      if (signals[l] < -1.0 || signals[l] > 1.0) {
        throw DataError(DataError::Kind::Range, r, header[l + 1], "AGC signal outside [-1, 1]");
      }
    }
    traces[static_cast<std::int64_t>(idx)] = model::AgcTrace(std::move(signals));
  }
  for (auto& t : ticks) {
    if (auto it = traces.find(t.index); it != traces.end()) t.agc = it->second;
  }
}

}  // namespace windbess::market
