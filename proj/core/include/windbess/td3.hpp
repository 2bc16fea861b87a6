// Twin-delayed deep deterministic policy gradient learner.
//
// One agent owns an actor, twin critics, their target copies, Adam state and
// a replay buffer. The battery agent additionally carries an action penalty
// that discourages bids above the power rating.

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "windbess/env.hpp"
#include "windbess/nn.hpp"

namespace windbess::td3 {

struct Transition {
  std::vector<double> state;
  std::vector<double> action;
  double reward = 0.0;
  std::vector<double> next_state;
};

struct Batch {
  Eigen::MatrixXd states;       // state_dim x n
  Eigen::MatrixXd actions;      // action_dim x n
  Eigen::RowVectorXd rewards;   // 1 x n
  Eigen::MatrixXd next_states;  // state_dim x n
};

/// Bounded FIFO of transitions with uniform sampling (with replacement).
class ReplayBuffer {
 public:
  ReplayBuffer(size_t capacity, size_t state_dim, size_t action_dim);

  void push(std::span<const double> state, std::span<const double> action, double reward,
            std::span<const double> next_state);

  size_t size() const { return size_; }
  size_t capacity() const { return capacity_; }
  /// i-th oldest stored transition.
  Transition at(size_t i) const;

  /// Throws std::invalid_argument when n is zero or exceeds size().
  Batch sample(size_t n, std::mt19937_64& rng) const;

 private:
  size_t slot(size_t i) const { return (head_ + capacity_ - size_ + i) % capacity_; }

  size_t capacity_;
  size_t state_dim_;
  size_t action_dim_;
  size_t head_ = 0;  // next write slot
  size_t size_ = 0;
  std::vector<double> states_, actions_, rewards_, next_states_;
};

struct Td3Config {
  double gamma = 0.99;
  double tau_actor = 0.01;
  double tau_critic = 0.01;
  int policy_delay = 2;
  size_t batch_size = 256;
  size_t buffer_capacity = 1'000'000;
  size_t warmup_steps = 1000;
  double explore_noise = 0.1;
  bool target_smoothing = true;
  double target_noise = 0.2;
  double target_noise_clip = 0.5;
  double beta_l = 10.0;
  double actor_lr = 3e-4;
  double critic_lr = 3e-4;
  double reward_scale = 1.0;  // applied to rewards inside the critic target
  std::vector<int> hidden = {256, 256};

  /// Throws std::invalid_argument naming the broken field.
  void validate() const;
};

/// Penalty on a single raw action. Writes d(penalty)/d(action) into `grad`
/// (pre-zeroed, action_dim long) and returns the penalty value.
using ActionPenaltyFn = std::function<double(std::span<const double> action, std::span<double> grad)>;

/// Capacity penalty of the battery MDP under `scenario`.
ActionPenaltyFn bess_penalty(env::Scenario scenario);

struct LossAndGrad {
  double loss = 0.0;
  std::vector<double> grad;
};

/// Actor objective -mean Q(s, pi(s)) + beta * mean penalty(pi(s)) and its
/// gradient with respect to the actor parameters.
LossAndGrad actor_loss(const nn::Mlp& actor, const nn::Mlp& critic, const Eigen::MatrixXd& states,
                       const ActionPenaltyFn& penalty, double beta);

/// Critic objective mean 0.5 (Q(s, a) - y)^2 and its parameter gradient.
LossAndGrad critic_loss(const nn::Mlp& critic, const Eigen::MatrixXd& states, const Eigen::MatrixXd& actions,
                        const Eigen::RowVectorXd& targets);

/// Stacks states over actions for critic input.
Eigen::MatrixXd critic_input(const Eigen::MatrixXd& states, const Eigen::MatrixXd& actions);

struct LossGradCheck {
  double actor_error = 0.0;   // max relative error, actor loss vs central differences
  double critic_error = 0.0;  // same for the critic loss
  size_t actor_params = 0;
  size_t critic_params = 0;
  // Disagreement between central differences at h and h/2. Large values
  // mean a perturbation crossed a ReLU or penalty kink, where finite
  // differences say nothing about the gradient.
  double actor_fd_spread = 0.0;
  double critic_fd_spread = 0.0;

  bool smooth(double tol = 1e-3) const { return actor_fd_spread <= tol && critic_fd_spread <= tol; }
};

/// Draws a random battery actor/critic pair with the given hidden layers,
/// a random batch and random critic targets, then compares the analytic
/// actor (with capacity penalty weight `beta`) and critic loss gradients
/// against central differences.
LossGradCheck check_loss_gradients(std::mt19937_64& rng, const std::vector<int>& hidden, size_t batch,
                                   env::Scenario scenario, double beta, double h = 1e-5);

struct CriticLosses {
  double q1 = 0.0;
  double q2 = 0.0;
};

class Td3Agent {
 public:
  Td3Agent(size_t state_dim, size_t action_dim, Td3Config cfg, std::uint64_t seed, ActionPenaltyFn penalty = {});

  /// Actor output; with `explore`, adds N(0, explore_noise) and clips to [-1, 1].
  std::vector<double> select_action(std::span<const double> state, bool explore);
  /// Uniform action in [-1, 1], used during warm-up.
  std::vector<double> random_action();

  /// r * reward_scale + gamma * min(Q1', Q2') at the smoothed target action.
  Eigen::RowVectorXd critic_target(const Batch& batch);
  CriticLosses critic_update(const Batch& batch);
  /// Returns the actor loss (negated mean Q plus any penalty).
  double actor_update(const Batch& batch);
  void target_soft_update();

  /// One learning iteration: sample, update critics, and on every
  /// policy_delay-th call update the actor and targets. No-op until the
  /// buffer holds a full batch.
  bool learn();

  ReplayBuffer& buffer() { return buffer_; }
  const ReplayBuffer& buffer() const { return buffer_; }
  const Td3Config& config() const { return cfg_; }
  bool has_penalty() const { return static_cast<bool>(penalty_); }

  nn::Mlp& actor() { return actor_; }
  nn::Mlp& critic1() { return critic1_; }
  nn::Mlp& critic2() { return critic2_; }
  nn::Mlp& target_actor() { return target_actor_; }
  nn::Mlp& target_critic1() { return target_critic1_; }
  nn::Mlp& target_critic2() { return target_critic2_; }
  const nn::Mlp& actor() const { return actor_; }

  long critic_updates() const { return critic_updates_; }
  long actor_updates() const { return actor_updates_; }
  long target_updates() const { return target_updates_; }

  /// Writes <prefix>_{actor,critic1,critic2,target_actor,target_critic1,target_critic2}.bin.
  void save(const std::filesystem::path& dir, const std::string& prefix) const;
  void load(const std::filesystem::path& dir, const std::string& prefix);

 private:
  size_t state_dim_;
  size_t action_dim_;
  Td3Config cfg_;
  std::mt19937_64 rng_;
  ActionPenaltyFn penalty_;

  nn::Mlp actor_, critic1_, critic2_;
  nn::Mlp target_actor_, target_critic1_, target_critic2_;
  nn::Adam actor_opt_, critic1_opt_, critic2_opt_;
  ReplayBuffer buffer_;

  long critic_updates_ = 0;
  long actor_updates_ = 0;
  long target_updates_ = 0;
};

struct EpisodeLog {
  size_t episode = 0;
  size_t start = 0;
  size_t steps = 0;
  double wind_reward = 0.0;
  double bess_reward = 0.0;
  double wind_revenue = 0.0;
  double bess_revenue = 0.0;
  double degradation_cost = 0.0;
};

/// What the battery buffer records when the energy limits force an idle
/// interval. Either way the stored reward is the idle reward.
enum class RejectedAction {
  Submitted,  // the action the agent chose
  Zeroed,     // the all-zero raw action the environment executed
};

std::string_view to_string(RejectedAction r);
RejectedAction parse_rejected_action(std::string_view name);  // "submitted" or "zeroed"

struct TrainOptions {
  std::int64_t steps = 0;
  std::uint64_t seed = 0;
  RejectedAction rejected = RejectedAction::Submitted;
};

/// Runs both agents through `env` for `steps` intervals: act (random during
/// warm-up), settle, store what the environment executed, learn. Episodes
/// restart where the previous one stopped and wrap to the start of the stream.
/// Throws std::invalid_argument for negative step counts.
std::vector<EpisodeLog> train(Td3Agent& wind, Td3Agent& bess, env::Environment& env, const TrainOptions& options);

}  // namespace windbess::td3
