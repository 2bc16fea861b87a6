#include "windbess/policy.hpp"

#include <algorithm>
#include <array>

namespace windbess::policy {

model::WindBid persistence_wind_bid(const env::Environment& env) {
  const auto history = env.history();
  model::WindBid bid;
  if (!history.empty()) {
    bid.availability = std::clamp(history.back().p_wind_act, 0.0, env.config().p_wind_max);
  }
  switch (env.scenario().market) {
    case env::Market::SpotOnly: bid.spot_share = 1.0; break;
    case env::Market::RegOnly: bid.spot_share = 0.0; break;
    case env::Market::Joint:
      bid.spot_share = history.empty() || history.back().rho_s >= history.back().rho_rr ? 1.0 : 0.0;
      break;
  }
  return bid;
}

Bids IdlePolicy::act(const env::Environment& env) { return {persistence_wind_bid(env), model::BessBid::idle()}; }

Bids RandomPolicy::act(const env::Environment& env) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::array<double, env::kWindActionDim> w{};
  std::array<double, env::kBessActionDim> b{};
  for (double& x : w) x = u(rng_);
  for (double& x : b) x = u(rng_);
  return {env::decode_wind_action(w, env.scenario().market, env.config()),
          env::decode_bess_action(b, env.scenario(), env.config())};
}

namespace {

template <size_t N>
std::vector<double> run_actor(const nn::Mlp& actor, const std::array<double, N>& state) {
  const Eigen::MatrixXd out = actor.forward(Eigen::Map<const Eigen::MatrixXd>(state.data(), N, 1));
  return {out.data(), out.data() + out.size()};
}

}  // namespace

Bids ActorPolicy::act(const env::Environment& env) {
  const env::Observation& obs = env.observation();
  return {env::decode_wind_action(run_actor(wind_actor_, obs.wind), env.scenario().market, env.config()),
          env::decode_bess_action(run_actor(bess_actor_, obs.bess), env.scenario(), env.config())};
}

std::vector<model::SettlementResult> evaluate_policy(BiddingPolicy& policy, env::Environment& env) {
  std::vector<model::SettlementResult> out;
  out.reserve(env.stream().size());
  env.reset(0);
  while (true) {
    if (env.done()) {
      if (env.position() >= env.stream().size()) break;
      env.reset(env.position());
    }
    const Bids bids = policy.act(env);
    out.push_back(env.step_bids(bids.wind, bids.bess).settlement);
  }
  return out;
}

}  // namespace windbess::policy
