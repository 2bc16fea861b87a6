// windbess command line: train, evaluate, compare, generate-data, grad-check.

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "windbess/csv.hpp"
#include "windbess/experiment.hpp"
#include "windbess/market_data.hpp"
#include "windbess/metrics.hpp"
#include "windbess/td3.hpp"

namespace fs = std::filesystem;
using namespace windbess;

namespace {

// Flags that mirror ExperimentSpec. Enum-valued fields go through strings so
// the spec parsers produce the error messages.
struct SpecFlags {
  exp::ExperimentSpec spec;
  std::string market, agent, forecast, rejected, out;
};

void add_spec_options(CLI::App* cmd, SpecFlags& f) {
  exp::ExperimentSpec& s = f.spec;
  cmd->add_option("--name", s.name, "Run name (output subdirectory)")->capture_default_str();
  cmd->add_option("--data", s.data_csv, "Market CSV (timestamp,spot_price,rr_price,rl_price,wind_mw)");
  cmd->add_option("--agc", s.agc_csv, "AGC trace CSV matching --data");
  cmd->add_option("--profile", s.profile, "Synthetic price profile: constant, square-wave, mean-reverting")
      ->capture_default_str();
  cmd->add_option("--square-period", s.square_period, "Square-wave period in intervals")->capture_default_str();
  cmd->add_option("--synthetic-wind", s.synthetic_wind, "Generate wind (false: zero wind)")->capture_default_str();
  cmd->add_option("--data-length", s.data_length, "Synthetic intervals to generate")->capture_default_str();
  cmd->add_option("--data-seed", s.data_seed, "Seed for synthetic data and AGC traces")->capture_default_str();
  cmd->add_option("--train-ratio", s.train_ratio, "Chronological training share")->capture_default_str();
  cmd->add_option("--eval-length", s.eval_length, "Eval intervals (0: whole held-out split)")->capture_default_str();
  cmd->add_option("--market", f.market, "spot, reg or joint")->capture_default_str();
  cmd->add_option("--coupled", s.coupled, "Battery may charge from curtailed wind")->capture_default_str();
  cmd->add_option("--agent", f.agent, "td3, po, random or idle")->capture_default_str();
  cmd->add_option("--steps", s.train_steps, "Training steps")->capture_default_str();
  cmd->add_option("--episode-len", s.episode_len, "Intervals per episode (0: whole stream)")->capture_default_str();
  cmd->add_option("--seeds", s.seeds, "Agent seeds")->capture_default_str();
  cmd->add_option("--hidden", s.hidden, "Hidden layer widths")->capture_default_str();
  cmd->add_option("--batch", s.batch_size, "Minibatch size")->capture_default_str();
  cmd->add_option("--warmup", s.warmup_steps, "Random-action warm-up steps")->capture_default_str();
  cmd->add_option("--buffer", s.buffer_capacity, "Replay buffer capacity")->capture_default_str();
  cmd->add_option("--explore-noise", s.explore_noise, "Exploration noise std")->capture_default_str();
  cmd->add_option("--actor-lr", s.actor_lr)->capture_default_str();
  cmd->add_option("--critic-lr", s.critic_lr)->capture_default_str();
  cmd->add_option("--reward-scale", s.reward_scale, "Reward multiplier inside critic targets")
      ->capture_default_str();
  cmd->add_option("--rejected-action", f.rejected,
                  "Battery action stored when energy limits force idle: submitted or zeroed")
      ->capture_default_str();
  cmd->add_option("--checkpoint-dir", s.checkpoint_dir, "Load trained agents from this directory");
  cmd->add_option("--forecast", f.forecast, "persistence, ema or perfect")->capture_default_str();
  cmd->add_option("--horizon", s.horizon, "Planning horizon in intervals")->capture_default_str();
  cmd->add_option("--n-energy", s.n_energy, "SoC grid levels")->capture_default_str();
  cmd->add_option("--n-action", s.n_action, "Power levels per battery channel")->capture_default_str();
  cmd->add_option("--out", f.out, "Output directory (default: $WINDBESS_OUTPUT_ROOT/<name>)");
}

void finalize(SpecFlags& f) {
  f.spec.market = env::parse_market(f.market);
  f.spec.agent = exp::parse_agent(f.agent);
  f.spec.forecast = po::parse_forecast_method(f.forecast);
  f.spec.rejected_action = td3::parse_rejected_action(f.rejected);
}

void sync_strings(SpecFlags& f) {
  f.market = std::string(env::to_string(f.spec.market));
  f.agent = std::string(exp::to_string(f.spec.agent));
  f.forecast = std::string(po::to_string(f.spec.forecast));
  f.rejected = std::string(td3::to_string(f.spec.rejected_action));
}

// The config file seeds every default so flags given on the command line win.
std::optional<std::string> find_config(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--config" && i + 1 < argc) return std::string(argv[i + 1]);
    if (a.rfind("--config=", 0) == 0) return a.substr(9);
  }
  return std::nullopt;
}

void print_summary(const exp::ExperimentResult& r, const fs::path& out) {
  std::cout << "run " << r.spec.name << " (" << exp::to_string(r.spec.agent) << ", "
            << env::to_string(r.spec.market) << (r.spec.coupled ? ", coupled" : ", uncoupled") << ")\n";
  for (const exp::SeedRun& s : r.runs) {
    const metrics::MetricsReport& m = s.metrics;
    std::printf("  seed %-6llu wind %12.2f  bess %10.2f  deg %8.2f  total %12.2f  curtailment %s MWh\n",
                static_cast<unsigned long long>(s.seed), m.wind_revenue, m.bess_revenue, m.degradation_cost,
                m.total_revenue, m.curtailment_ratio().c_str());
  }
  std::printf("  median total %.2f\n", r.median_total_revenue);
  if (!out.empty()) std::cout << "  wrote " << out.string() << "\n";
}

int run_spec(SpecFlags& f) {
  finalize(f);
  const fs::path out = f.out.empty() ? exp::output_root() / f.spec.name : fs::path(f.out);
  const exp::ExperimentResult r = exp::run_experiment(f.spec, out);
  print_summary(r, out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Joint wind/battery market bidding: training, evaluation and benchmarks"};
  app.require_subcommand(1);
  std::string config_path;

  SpecFlags train_flags, eval_flags;
  try {
    if (const auto cfg = find_config(argc, argv)) {
      train_flags.spec = exp::load_spec(*cfg);
      eval_flags.spec = train_flags.spec;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  sync_strings(train_flags);
  sync_strings(eval_flags);

  auto* train = app.add_subcommand("train", "Train agents on the training split, then evaluate");
  train->add_option("--config", config_path, "JSON experiment spec; flags override it");
  add_spec_options(train, train_flags);

  auto* evaluate = app.add_subcommand("evaluate", "Evaluate a bidder on the held-out split");
  evaluate->add_option("--config", config_path, "JSON experiment spec; flags override it");
  add_spec_options(evaluate, eval_flags);

  auto* compare = app.add_subcommand("compare", "Compare report.json files against the first");
  std::vector<std::string> reports;
  std::string compare_csv;
  compare->add_option("reports", reports, "report.json files, baseline first")->required()->check(CLI::ExistingFile);
  compare->add_option("--csv", compare_csv, "Also write the table as CSV");

  auto* gen = app.add_subcommand("generate-data", "Write a synthetic market CSV and its AGC traces");
  std::string gen_profile = "mean-reverting", gen_out, gen_agc;
  size_t gen_length = 288 * 28;
  std::uint64_t gen_seed = 1;
  int gen_period = 2;
  bool gen_wind = true;
  gen->add_option("--profile", gen_profile, "constant, square-wave or mean-reverting")->capture_default_str();
  gen->add_option("--length", gen_length, "Intervals")->capture_default_str();
  gen->add_option("--seed", gen_seed)->capture_default_str();
  gen->add_option("--square-period", gen_period)->capture_default_str();
  gen->add_option("--synthetic-wind", gen_wind)->capture_default_str();
  gen->add_option("--out", gen_out, "Market CSV path")->required();
  gen->add_option("--agc-out", gen_agc, "AGC CSV path");

  auto* grad = app.add_subcommand("grad-check", "Compare analytic loss gradients with finite differences");
  int gc_instances = 10;
  std::uint64_t gc_seed = 1;
  std::vector<int> gc_hidden = {8, 8};
  size_t gc_batch = 8;
  double gc_tol = 1e-4;
  double gc_beta = 10.0;
  grad->add_option("--instances", gc_instances)->capture_default_str();
  grad->add_option("--seed", gc_seed)->capture_default_str();
  grad->add_option("--hidden", gc_hidden)->capture_default_str();
  grad->add_option("--batch", gc_batch)->capture_default_str();
  grad->add_option("--beta", gc_beta, "Capacity penalty weight")->capture_default_str();
  grad->add_option("--tolerance", gc_tol)->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) return run_spec(train_flags);
    if (*evaluate) {
      if (eval_flags.agent == "td3" && eval_flags.spec.checkpoint_dir.empty()) {
        std::cerr << "error: evaluate with --agent td3 needs --checkpoint-dir\n";
        return 2;
      }
      return run_spec(eval_flags);
    }
    if (*compare) {
      std::vector<metrics::RunSummary> runs;
      for (const std::string& p : reports) runs.push_back(exp::read_report_summary(p));
      const auto rows = metrics::compare_scenarios(runs);
      std::cout << metrics::format_comparison(rows);
      if (!compare_csv.empty()) {
        std::ofstream out(compare_csv);
        out << "run,wind_revenue,bess_revenue,total_revenue,boost\n";
        for (const auto& r : rows) {
          out << r.name << ',' << market::format_double(r.wind_revenue) << ','
              << market::format_double(r.bess_revenue) << ',' << market::format_double(r.total_revenue) << ','
              << r.boost_vs_baseline << '\n';
        }
      }
      return 0;
    }
    if (*gen) {
      exp::ExperimentSpec s;
      s.profile = gen_profile;
      s.data_length = gen_length;
      s.data_seed = gen_seed;
      s.square_period = gen_period;
      s.synthetic_wind = gen_wind;
      s.validate();
      const auto ticks = exp::load_ticks(s);
      market::write_market_csv(fs::path(gen_out), ticks);
      if (!gen_agc.empty()) {
        std::ofstream agc(gen_agc);
        market::write_agc_csv(agc, ticks);
      }
      std::cout << "wrote " << ticks.size() << " intervals to " << gen_out << "\n";
      return 0;
    }
    if (*grad) {
      std::mt19937_64 rng(gc_seed);
      double worst = 0.0;
      const env::Scenario scenarios[] = {{env::Market::Joint, true}, {env::Market::SpotOnly, false}};
      for (int i = 0; i < gc_instances; ++i) {
        const auto r = td3::check_loss_gradients(rng, gc_hidden, gc_batch, scenarios[i % 2], gc_beta);
        std::printf("instance %3d  actor %.3e  critic %.3e  (%zu / %zu params)\n", i, r.actor_error, r.critic_error,
                    r.actor_params, r.critic_params);
        worst = std::max({worst, r.actor_error, r.critic_error});
      }
      const bool ok = worst <= gc_tol;
      std::printf("max relative error %.3e (tolerance %.1e): %s\n", worst, gc_tol, ok ? "ok" : "FAILED");
      return ok ? 0 : 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
