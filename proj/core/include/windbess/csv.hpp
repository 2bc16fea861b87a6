// CSV ingestion and emission for market data.
//
// Market file header (exact): timestamp,spot_price,rr_price,rl_price,wind_mw
// AGC file header (exact):    interval_index,signal_0,...,signal_{L-1}
//
// Timestamps are ISO-8601 local civil times "YYYY-MM-DDTHH:MM[:SS]" (a space
// separator is also accepted). Fields follow RFC 4180 quoting.

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "windbess/market_data.hpp"

namespace windbess::market {

class DataError : public std::runtime_error {
 public:
  enum class Kind { Io, Schema, Order, Value, Range };

  DataError(Kind kind, size_t row, std::string column, const std::string& message);

  Kind kind() const { return kind_; }
  /// 1-based data row (0 for header or file-level errors).
  size_t row() const { return row_; }
  const std::string& column() const { return column_; }

 private:
  Kind kind_;
  size_t row_;
  std::string column_;
};

/// RFC 4180 record reader. Handles quoted fields, doubled quotes and CRLF.
std::vector<std::vector<std::string>> read_csv_records(std::istream& in);

/// Quotes a field only when it contains a delimiter, quote or newline.
std::string csv_escape(std::string_view field);

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

/// Throws DataError(Value) naming row/column when the text is not a finite number.
double parse_double(std::string_view text, size_t row, std::string_view column);

std::int64_t parse_timestamp(std::string_view text);  // throws std::invalid_argument
std::string format_timestamp(std::int64_t minutes_since_epoch);

/// Loads ticks; AGC traces come from `agc_path` when given, otherwise they are
/// regenerated from `agc_seed`.
std::vector<MarketTick> load_market_csv(const std::filesystem::path& path, const model::SystemConfig& cfg,
                                        std::uint64_t agc_seed,
                                        const std::optional<std::filesystem::path>& agc_path = std::nullopt);

std::vector<MarketTick> read_market_csv(std::istream& in, const model::SystemConfig& cfg, std::uint64_t agc_seed);

void write_market_csv(std::ostream& out, std::span<const MarketTick> ticks);
void write_market_csv(const std::filesystem::path& path, std::span<const MarketTick> ticks);

void write_agc_csv(std::ostream& out, std::span<const MarketTick> ticks);
/// Replaces each tick's trace with the row whose interval_index matches.
void apply_agc_csv(std::istream& in, std::vector<MarketTick>& ticks, const model::SystemConfig& cfg);

}  // namespace windbess::market
