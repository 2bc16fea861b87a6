// Pluggable bidding policies and the evaluation rollout that drives them.

#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "windbess/env.hpp"
#include "windbess/model.hpp"
#include "windbess/nn.hpp"

namespace windbess::policy {

struct Bids {
  model::WindBid wind;
  model::BessBid bess;
};

class BiddingPolicy {
 public:
  virtual ~BiddingPolicy() = default;
  virtual std::string name() const = 0;
  /// Bids for the environment's current interval. Must only read data the
  /// environment exposes as history unless the policy is an explicit oracle.
  virtual Bids act(const env::Environment& env) = 0;
};

/// Wind bid shared by the simple baselines: persistence of the previous
/// actual output, routed to the dearer market of the previous interval.
model::WindBid persistence_wind_bid(const env::Environment& env);

/// Battery never acts.
class IdlePolicy final : public BiddingPolicy {
 public:
  std::string name() const override { return "idle"; }
  Bids act(const env::Environment& env) override;
};

/// Uniform raw actions for both agents, decoded under the scenario.
class RandomPolicy final : public BiddingPolicy {
 public:
  explicit RandomPolicy(std::uint64_t seed) : rng_(seed) {}
  std::string name() const override { return "random"; }
  Bids act(const env::Environment& env) override;

 private:
  std::mt19937_64 rng_;
};

/// Deterministic actors of a trained wind/battery agent pair.
class ActorPolicy final : public BiddingPolicy {
 public:
  ActorPolicy(nn::Mlp wind_actor, nn::Mlp bess_actor)
      : wind_actor_(std::move(wind_actor)), bess_actor_(std::move(bess_actor)) {}
  std::string name() const override { return "td3"; }
  Bids act(const env::Environment& env) override;

 private:
  nn::Mlp wind_actor_;
  nn::Mlp bess_actor_;
};

/// Runs the policy over the whole stream from position 0 in consecutive
/// episodes and returns one settlement per interval.
std::vector<model::SettlementResult> evaluate_policy(BiddingPolicy& policy, env::Environment& env);

}  // namespace windbess::policy
