// Experiment driver: resolve data, train or load agents, evaluate on the
// held-out split and write reports.

#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "windbess/env.hpp"
#include "windbess/market_data.hpp"
#include "windbess/metrics.hpp"
#include "windbess/model.hpp"
#include "windbess/po.hpp"
#include "windbess/td3.hpp"

namespace windbess::exp {

enum class AgentKind { Td3, Po, Random, Idle };

std::string_view to_string(AgentKind kind);
AgentKind parse_agent(std::string_view name);  // "td3", "po", "random", "idle"

struct ExperimentSpec {
  std::string name = "run";

  // Data: a CSV file, or a synthetic profile generated from data_seed.
  std::string data_csv;
  std::string agc_csv;
  std::string profile = "mean-reverting";
  int square_period = 2;
  bool synthetic_wind = true;
  size_t data_length = 288 * 28;
  std::uint64_t data_seed = 1;
  double train_ratio = 11.0 / 12.0;
  size_t eval_length = 0;  // 0 evaluates the whole held-out split

  env::Market market = env::Market::Joint;
  bool coupled = true;
  AgentKind agent = AgentKind::Td3;
  std::int64_t train_steps = 10000;
  size_t episode_len = 288;
  std::vector<std::uint64_t> seeds = {1};

  // TD3 agents; both share these settings.
  std::vector<int> hidden = {256, 256};
  size_t batch_size = 256;
  size_t warmup_steps = 1000;
  size_t buffer_capacity = 1'000'000;
  double explore_noise = 0.1;
  double actor_lr = 3e-4;
  double critic_lr = 3e-4;
  double reward_scale = 1.0;
  td3::RejectedAction rejected_action = td3::RejectedAction::Submitted;
  std::string checkpoint_dir;  // load trained agents from here instead of training

  // Predict-and-optimize bidder.
  po::ForecastMethod forecast = po::ForecastMethod::Persistence;
  size_t horizon = 12;
  int n_energy = 37;
  int n_action = 5;

  model::SystemConfig system;

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
  td3::Td3Config td3_config() const;
  env::Scenario scenario() const { return {market, coupled}; }
};

/// JSON round trip. Unknown keys are rejected.
std::string spec_to_json(const ExperimentSpec& spec);
ExperimentSpec spec_from_json(const std::string& text);
/// Accepts a bare spec or a run's manifest.json.
ExperimentSpec load_spec(const std::filesystem::path& path);

/// FNV-1a of the canonical JSON form.
std::uint64_t spec_hash(const ExperimentSpec& spec);

/// Resolves the data source into the full tick stream.
std::vector<market::MarketTick> load_ticks(const ExperimentSpec& spec);

struct SeedRun {
  std::uint64_t seed = 0;
  metrics::MetricsReport metrics;
  std::vector<model::SettlementResult> settlements;
  std::vector<td3::EpisodeLog> training;
};

struct ExperimentResult {
  ExperimentSpec spec;
  std::vector<market::MarketTick> eval_ticks;
  std::vector<SeedRun> runs;
  double median_total_revenue = 0.0;
  double median_bess_net = 0.0;  // BESS revenue less degradation

  metrics::RunSummary summary() const;
};

/// Trains (TD3, unless checkpoints are given) and evaluates every seed. When
/// `out_dir` is non-empty, writes report.json, timing.json, manifest.json,
/// per-seed settlement and training CSVs and TD3 checkpoints there.
ExperimentResult run_experiment(const ExperimentSpec& spec, const std::filesystem::path& out_dir = {});

/// Deterministic report text (no wall-clock fields).
std::string report_json(const ExperimentResult& result);
/// Reads back the summary fields of a written report.json.
metrics::RunSummary read_report_summary(const std::filesystem::path& path);

/// Per-interval settlement CSV:
/// interval,mode,p_spot,p_reg,p_wc_drawn,wind_avail,v_w,rho_s,rho_rr,rho_rl,wind_rev,bess_rev,deg_cost,soc
void write_settlement_csv(std::ostream& out, std::span<const model::SettlementResult> settlements,
                          std::span<const market::MarketTick> ticks);

/// Output root: WINDBESS_OUTPUT_ROOT when set, else "runs".
std::filesystem::path output_root();

double median(std::vector<double> values);

}  // namespace windbess::exp
