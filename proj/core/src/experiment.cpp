#include "windbess/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include "json.hpp"

#include "windbess/csv.hpp"
#include "windbess/policy.hpp"

namespace windbess::exp {

using nlohmann::json;

std::string_view to_string(AgentKind kind) {
  switch (kind) {
    case AgentKind::Td3: return "td3";
    case AgentKind::Po: return "po";
    case AgentKind::Random: return "random";
    case AgentKind::Idle: return "idle";
  }
  return "unknown";
}

AgentKind parse_agent(std::string_view name) {
  if (name == "td3") return AgentKind::Td3;
  if (name == "po") return AgentKind::Po;
  if (name == "random") return AgentKind::Random;
  if (name == "idle") return AgentKind::Idle;
  throw std::invalid_argument("unknown agent '" + std::string(name) + "' (expected td3, po, random or idle)");
}

void ExperimentSpec::validate() const {
  auto fail = [](const std::string& field, const std::string& why) {
    throw std::invalid_argument("experiment spec: " + field + " " + why);
  };
  if (name.empty()) fail("name", "must not be empty");
  if (data_csv.empty()) {
    market::price_profile_by_name(profile);
    if (data_length < 2) fail("data_length", "must be at least 2");
    if (square_period < 2) fail("square_period", "must be at least 2");
  }
  if (!agc_csv.empty() && data_csv.empty()) fail("agc_csv", "requires data_csv");
  if (!(train_ratio > 0.0 && train_ratio < 1.0)) fail("train_ratio", "must lie in (0, 1)");
  if (train_steps < 0) fail("train_steps", "must be non-negative");
  if (seeds.empty()) fail("seeds", "must list at least one seed");
  if (horizon == 0) fail("horizon", "must be positive");
  po::DpGrid{n_energy, n_action, horizon}.validate();
  system.validate();
  td3_config().validate();
}

td3::Td3Config ExperimentSpec::td3_config() const {
  td3::Td3Config c;
  c.gamma = system.gamma;
  c.beta_l = system.beta_l;
  c.hidden = hidden;
  c.batch_size = batch_size;
  c.warmup_steps = warmup_steps;
  c.buffer_capacity = buffer_capacity;
  c.explore_noise = explore_noise;
  c.actor_lr = actor_lr;
  c.critic_lr = critic_lr;
  c.reward_scale = reward_scale;
  return c;
}

namespace {

json system_to_json(const model::SystemConfig& s) {
  return {{"dt_hours", s.dt_hours}, {"ds_hours", s.ds_hours}, {"agc_len", s.agc_len},
          {"lambda", s.lambda},     {"eta_ch", s.eta_ch},     {"eta_dch", s.eta_dch},
          {"c_deg", s.c_deg},       {"p_wind_max", s.p_wind_max}, {"p_bess_max", s.p_bess_max},
          {"e_min", s.e_min},       {"e_max", s.e_max},       {"m_window", s.m_window},
          {"tau_s", s.tau_s},       {"gamma", s.gamma},       {"beta_l", s.beta_l}};
}

// Reads known keys and rejects anything else so typos fail loudly.
class Reader {
 public:
  Reader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw std::invalid_argument(where_ + ": expected an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw std::invalid_argument(where_ + "." + key + ": " + e.what());
    }
  }

  void finish() const {
    for (const auto& [key, _] : j_.items()) {
      if (!seen_.count(key)) throw std::invalid_argument(where_ + ": unknown key '" + key + "'");
    }
  }

 private:
  const json& j_;
  std::string where_;
  std::unordered_set<std::string> seen_;
};

void system_from_json(const json& j, model::SystemConfig& s) {
  Reader r(j, "system");
  r.get("dt_hours", s.dt_hours);
  r.get("ds_hours", s.ds_hours);
  r.get("agc_len", s.agc_len);
  r.get("lambda", s.lambda);
  r.get("eta_ch", s.eta_ch);
  r.get("eta_dch", s.eta_dch);
  r.get("c_deg", s.c_deg);
  r.get("p_wind_max", s.p_wind_max);
  r.get("p_bess_max", s.p_bess_max);
  r.get("e_min", s.e_min);
  r.get("e_max", s.e_max);
  r.get("m_window", s.m_window);
  r.get("tau_s", s.tau_s);
  r.get("gamma", s.gamma);
  r.get("beta_l", s.beta_l);
  r.finish();
}

json spec_json(const ExperimentSpec& s) {
  return {{"name", s.name},
          {"data_csv", s.data_csv},
          {"agc_csv", s.agc_csv},
          {"profile", s.profile},
          {"square_period", s.square_period},
          {"synthetic_wind", s.synthetic_wind},
          {"data_length", s.data_length},
          {"data_seed", s.data_seed},
          {"train_ratio", s.train_ratio},
          {"eval_length", s.eval_length},
          {"market", std::string(env::to_string(s.market))},
          {"coupled", s.coupled},
          {"agent", std::string(to_string(s.agent))},
          {"train_steps", s.train_steps},
          {"episode_len", s.episode_len},
          {"seeds", s.seeds},
          {"hidden", s.hidden},
          {"batch_size", s.batch_size},
          {"warmup_steps", s.warmup_steps},
          {"buffer_capacity", s.buffer_capacity},
          {"explore_noise", s.explore_noise},
          {"actor_lr", s.actor_lr},
          {"critic_lr", s.critic_lr},
          {"reward_scale", s.reward_scale},
          {"rejected_action", std::string(td3::to_string(s.rejected_action))},
          {"checkpoint_dir", s.checkpoint_dir},
          {"forecast", std::string(po::to_string(s.forecast))},
          {"horizon", s.horizon},
          {"n_energy", s.n_energy},
          {"n_action", s.n_action},
          {"system", system_to_json(s.system)}};
}

json metrics_json(const metrics::MetricsReport& m) {
  auto buckets = [](const std::array<metrics::QuartileBucket, 4>& b) {
    json arr = json::array();
    for (const auto& q : b) {
      arr.push_back({{"upper", q.upper},
                     {"intervals", q.intervals},
                     {"charge_mwh", q.charge_mwh},
                     {"wc_mwh", q.wc_mwh},
                     {"discharge_mwh", q.discharge_mwh}});
    }
    return arr;
  };
  return {{"intervals", m.intervals},
          {"wind_revenue", m.wind_revenue},
          {"bess_revenue", m.bess_revenue},
          {"degradation_cost", m.degradation_cost},
          {"total_revenue", m.total_revenue},
          {"curtailment",
           {{"available_mwh", m.curtailment_available_mwh},
            {"absorbed_mwh", m.curtailment_absorbed_mwh},
            {"ratio", m.curtailment_ratio()},
            {"curtailed_intervals", m.curtailed_intervals}}},
          {"charge_composition",
           {{"charged_mwh", m.charged_mwh},
            {"spot", m.charge_from_spot},
            {"reg", m.charge_from_reg},
            {"wc", m.charge_from_wc}}},
          {"dispatch_mae_mw", m.dispatch_mae},
          {"rejected_bids", m.rejected_bids},
          {"spot_quartiles", buckets(m.spot_quartiles)},
          {"fwc_quartiles", buckets(m.fwc_quartiles)}};
}

std::vector<std::uint64_t> derive_seeds(std::uint64_t seed, size_t n) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0x77696e64u};
  std::vector<std::uint32_t> raw(2 * n);
  seq.generate(raw.begin(), raw.end());
  std::vector<std::uint64_t> out(n);
  for (size_t i = 0; i < n; ++i) out[i] = (std::uint64_t{raw[2 * i]} << 32) | raw[2 * i + 1];
  return out;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

void write_training_csv(const std::filesystem::path& path, const std::vector<td3::EpisodeLog>& log) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "episode,start,steps,wind_reward,bess_reward,wind_revenue,bess_revenue,deg_cost\n";
  for (const td3::EpisodeLog& e : log) {
    out << e.episode << ',' << e.start << ',' << e.steps << ',' << market::format_double(e.wind_reward) << ','
        << market::format_double(e.bess_reward) << ',' << market::format_double(e.wind_revenue) << ','
        << market::format_double(e.bess_revenue) << ',' << market::format_double(e.degradation_cost) << '\n';
  }
}

}  // namespace

std::string spec_to_json(const ExperimentSpec& spec) { return spec_json(spec).dump(2); }

ExperimentSpec spec_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("experiment spec: malformed JSON: ") + e.what());
  }
  ExperimentSpec s;
  Reader r(j, "spec");
  std::string market = std::string(env::to_string(s.market));
  std::string agent = std::string(to_string(s.agent));
  std::string fc = std::string(po::to_string(s.forecast));
  r.get("name", s.name);
  r.get("data_csv", s.data_csv);
  r.get("agc_csv", s.agc_csv);
  r.get("profile", s.profile);
  r.get("square_period", s.square_period);
  r.get("synthetic_wind", s.synthetic_wind);
  r.get("data_length", s.data_length);
  r.get("data_seed", s.data_seed);
  r.get("train_ratio", s.train_ratio);
  r.get("eval_length", s.eval_length);
  r.get("market", market);
  r.get("coupled", s.coupled);
  r.get("agent", agent);
  r.get("train_steps", s.train_steps);
  r.get("episode_len", s.episode_len);
  r.get("seeds", s.seeds);
  r.get("hidden", s.hidden);
  r.get("batch_size", s.batch_size);
  r.get("warmup_steps", s.warmup_steps);
  r.get("buffer_capacity", s.buffer_capacity);
  r.get("explore_noise", s.explore_noise);
  r.get("actor_lr", s.actor_lr);
  r.get("critic_lr", s.critic_lr);
  r.get("reward_scale", s.reward_scale);
  std::string rejected(td3::to_string(s.rejected_action));
  r.get("rejected_action", rejected);
  r.get("checkpoint_dir", s.checkpoint_dir);
  r.get("forecast", fc);
  r.get("horizon", s.horizon);
  r.get("n_energy", s.n_energy);
  r.get("n_action", s.n_action);
  json system = json::object();
  r.get("system", system);
  r.finish();
  s.market = env::parse_market(market);
  s.agent = parse_agent(agent);
  s.forecast = po::parse_forecast_method(fc);
  s.rejected_action = td3::parse_rejected_action(rejected);
  system_from_json(system, s.system);
  return s;
}

ExperimentSpec load_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  // A run's manifest.json carries its spec under "spec"; accept it as is.
  const json j = json::parse(ss.str(), nullptr, false);
  if (j.is_object() && j.contains("spec") && j.contains("spec_hash")) return spec_from_json(j["spec"].dump());
  return spec_from_json(ss.str());
}

std::uint64_t spec_hash(const ExperimentSpec& spec) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : spec_json(spec).dump()) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::vector<market::MarketTick> load_ticks(const ExperimentSpec& spec) {
  if (!spec.data_csv.empty()) {
    std::optional<std::filesystem::path> agc;
    if (!spec.agc_csv.empty()) agc = spec.agc_csv;
    return market::load_market_csv(spec.data_csv, spec.system, spec.data_seed, agc);
  }
  market::PriceProfile profile = market::price_profile_by_name(spec.profile);
  if (auto* sq = std::get_if<market::SquareWaveProfile>(&profile)) sq->period = spec.square_period;
  const auto prices = market::gen_synthetic_prices(profile, spec.data_length, spec.data_seed);
  std::vector<double> wind(spec.data_length, 0.0);
  if (spec.synthetic_wind) wind = market::gen_synthetic_wind(spec.data_length, spec.system.p_wind_max, spec.data_seed + 1);
  return market::make_ticks(prices, wind, spec.data_seed, spec.system);
}

double median(std::vector<double> values) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

metrics::RunSummary ExperimentResult::summary() const {
  metrics::RunSummary s;
  s.name = spec.name;
  if (!eval_ticks.empty()) {
    s.eval_start = eval_ticks.front().timestamp_min;
    s.eval_end = eval_ticks.back().timestamp_min;
  }
  std::vector<double> w, b, d, t;
  for (const SeedRun& r : runs) {
    w.push_back(r.metrics.wind_revenue);
    b.push_back(r.metrics.bess_revenue);
    d.push_back(r.metrics.degradation_cost);
    t.push_back(r.metrics.total_revenue);
  }
  s.wind_revenue = median(w);
  s.bess_revenue = median(b);
  s.degradation_cost = median(d);
  s.total_revenue = median(t);
  return s;
}

void write_settlement_csv(std::ostream& out, std::span<const model::SettlementResult> settlements,
                          std::span<const market::MarketTick> ticks) {
  if (settlements.size() != ticks.size()) throw std::invalid_argument("write_settlement_csv: length mismatch");
  out << "interval,mode,p_spot,p_reg,p_wc_drawn,wind_avail,v_w,rho_s,rho_rr,rho_rl,wind_rev,bess_rev,deg_cost,soc\n";
  using market::format_double;
  for (size_t i = 0; i < settlements.size(); ++i) {
    const model::SettlementResult& s = settlements[i];
    const market::MarketTick& t = ticks[i];
    out << t.index << ',' << model::to_string(s.bess_bid.mode) << ',' << format_double(s.bess_bid.p_spot) << ','
        << format_double(s.bess_bid.p_reg) << ',' << format_double(s.p_wc_drawn) << ','
        << format_double(s.wind_bid.availability) << ',' << format_double(s.wind_bid.spot_share) << ','
        << format_double(t.rho_s) << ',' << format_double(t.rho_rr) << ',' << format_double(t.rho_rl) << ','
        << format_double(s.wind_revenue) << ',' << format_double(s.bess_revenue) << ','
        << format_double(s.degradation_cost) << ',' << format_double(s.energy_after) << '\n';
  }
}

std::filesystem::path output_root() {
  const char* root = std::getenv("WINDBESS_OUTPUT_ROOT");
  return root && *root ? std::filesystem::path(root) : std::filesystem::path("runs");
}

ExperimentResult run_experiment(const ExperimentSpec& spec, const std::filesystem::path& out_dir) {
  spec.validate();
  const std::vector<market::MarketTick> ticks = load_ticks(spec);
  auto [train_ticks, eval_ticks] = market::split_train_eval(ticks, spec.train_ratio);
  if (spec.eval_length > 0 && spec.eval_length < eval_ticks.size()) eval_ticks.resize(spec.eval_length);
  if (eval_ticks.empty()) throw std::invalid_argument("experiment spec: eval split is empty");

  ExperimentResult result;
  result.spec = spec;
  result.eval_ticks = eval_ticks;
  if (!out_dir.empty()) std::filesystem::create_directories(out_dir);

  const auto train_stream = std::make_shared<const std::vector<market::MarketTick>>(std::move(train_ticks));
  const auto eval_stream = std::make_shared<const std::vector<market::MarketTick>>(eval_ticks);
  env::EnvOptions options;
  options.episode_len = spec.episode_len;

  for (std::uint64_t seed : spec.seeds) {
    SeedRun run;
    run.seed = seed;
    std::unique_ptr<policy::BiddingPolicy> bidder;
    double train_seconds = 0.0;

    switch (spec.agent) {
      case AgentKind::Td3: {
        const auto sub = derive_seeds(seed, 3);
        const td3::Td3Config cfg = spec.td3_config();
        td3::Td3Agent wind(env::kWindStateDim, env::kWindActionDim, cfg, sub[0]);
        td3::Td3Agent bess(env::kBessStateDim, env::kBessActionDim, cfg, sub[1], td3::bess_penalty(spec.scenario()));
        const std::string seed_dir = "seed_" + std::to_string(seed);
        if (!spec.checkpoint_dir.empty()) {
          const std::filesystem::path dir = std::filesystem::path(spec.checkpoint_dir) / seed_dir;
          wind.load(dir, "wind");
          bess.load(dir, "bess");
        } else {
          const auto t0 = std::chrono::steady_clock::now();
          env::Environment train_env(spec.system, spec.scenario(), train_stream, options);
          run.training = td3::train(wind, bess, train_env, {spec.train_steps, sub[2], spec.rejected_action});
          train_seconds = seconds_since(t0);
          if (!out_dir.empty()) {
            const std::filesystem::path dir = out_dir / "checkpoints" / seed_dir;
            wind.save(dir, "wind");
            bess.save(dir, "bess");
            write_training_csv(out_dir / ("training_seed_" + std::to_string(seed) + ".csv"), run.training);
          }
        }
        bidder = std::make_unique<policy::ActorPolicy>(wind.actor(), bess.actor());
        break;
      }
      case AgentKind::Po:
        bidder = std::make_unique<po::PoPolicy>(spec.forecast, po::DpGrid{spec.n_energy, spec.n_action, spec.horizon});
        break;
      case AgentKind::Random: bidder = std::make_unique<policy::RandomPolicy>(seed); break;
      case AgentKind::Idle: bidder = std::make_unique<policy::IdlePolicy>(); break;
    }

    const auto t0 = std::chrono::steady_clock::now();
    env::Environment eval_env(spec.system, spec.scenario(), eval_stream, options);
    run.settlements = policy::evaluate_policy(*bidder, eval_env);
    const double eval_seconds = seconds_since(t0);
    run.metrics = metrics::report_metrics(run.settlements, eval_ticks, spec.system);
    run.metrics.train_seconds = train_seconds;
    run.metrics.eval_seconds = eval_seconds;

    if (!out_dir.empty()) {
      std::ofstream csv(out_dir / ("settlements_seed_" + std::to_string(seed) + ".csv"));
      write_settlement_csv(csv, run.settlements, eval_ticks);
    }
    result.runs.push_back(std::move(run));
  }

  std::vector<double> totals, nets;
  for (const SeedRun& r : result.runs) {
    totals.push_back(r.metrics.total_revenue);
    nets.push_back(r.metrics.bess_revenue - r.metrics.degradation_cost);
  }
  result.median_total_revenue = median(totals);
  result.median_bess_net = median(nets);

  if (!out_dir.empty()) {
    write_text(out_dir / "report.json", report_json(result));
    json timing = json::array();
    for (const SeedRun& r : result.runs) {
      timing.push_back({{"seed", r.seed}, {"train_seconds", r.metrics.train_seconds},
                        {"eval_seconds", r.metrics.eval_seconds}});
    }
    write_text(out_dir / "timing.json", timing.dump(2) + "\n");
    const json manifest = {{"spec", spec_json(spec)},
                           {"spec_hash", spec_hash(spec)},
                           {"seeds", spec.seeds},
                           {"train_steps", spec.train_steps},
                           {"version", 1}};
    write_text(out_dir / "manifest.json", manifest.dump(2) + "\n");
  }
  return result;
}

std::string report_json(const ExperimentResult& result) {
  const metrics::RunSummary s = result.summary();
  json runs = json::array();
  for (const SeedRun& r : result.runs) runs.push_back({{"seed", r.seed}, {"metrics", metrics_json(r.metrics)}});
  const json report = {{"format", "windbess-report"},
                       {"version", 1},
                       {"name", result.spec.name},
                       {"agent", std::string(to_string(result.spec.agent))},
                       {"market", std::string(env::to_string(result.spec.market))},
                       {"coupled", result.spec.coupled},
                       {"spec_hash", spec_hash(result.spec)},
                       {"eval_window",
                        {{"start", market::format_timestamp(s.eval_start)},
                         {"end", market::format_timestamp(s.eval_end)},
                         {"start_min", s.eval_start},
                         {"end_min", s.eval_end},
                         {"intervals", result.eval_ticks.size()}}},
                       {"summary",
                        {{"median_wind_revenue", s.wind_revenue},
                         {"median_bess_revenue", s.bess_revenue},
                         {"median_degradation_cost", s.degradation_cost},
                         {"median_total_revenue", s.total_revenue},
                         {"median_bess_net", result.median_bess_net}}},
                       {"runs", runs}};
  return report.dump(2) + "\n";
}

metrics::RunSummary read_report_summary(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open report " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::runtime_error("malformed report " + path.string() + ": " + e.what());
  }
  if (j.value("format", "") != "windbess-report") throw std::runtime_error(path.string() + " is not a windbess report");
  metrics::RunSummary s;
  s.name = j.at("name").get<std::string>();
  s.eval_start = j.at("eval_window").at("start_min").get<std::int64_t>();
  s.eval_end = j.at("eval_window").at("end_min").get<std::int64_t>();
  const json& sum = j.at("summary");
  s.wind_revenue = sum.at("median_wind_revenue").get<double>();
  s.bess_revenue = sum.at("median_bess_revenue").get<double>();
  s.degradation_cost = sum.at("median_degradation_cost").get<double>();
  s.total_revenue = sum.at("median_total_revenue").get<double>();
  return s;
}

}  // namespace windbess::exp
