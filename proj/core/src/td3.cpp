#include "windbess/td3.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>

namespace windbess::td3 {

ReplayBuffer::ReplayBuffer(size_t capacity, size_t state_dim, size_t action_dim)
    : capacity_(capacity), state_dim_(state_dim), action_dim_(action_dim) {
  if (capacity == 0) throw std::invalid_argument("ReplayBuffer: capacity must be positive");
}

void ReplayBuffer::push(std::span<const double> state, std::span<const double> action, double reward,
                        std::span<const double> next_state) {
  if (state.size() != state_dim_ || next_state.size() != state_dim_ || action.size() != action_dim_) {
    throw std::invalid_argument("ReplayBuffer::push: dimension mismatch");
  }
  if (states_.size() < capacity_ * state_dim_ && head_ * state_dim_ == states_.size()) {
    states_.insert(states_.end(), state.begin(), state.end());
    actions_.insert(actions_.end(), action.begin(), action.end());
    rewards_.push_back(reward);
    next_states_.insert(next_states_.end(), next_state.begin(), next_state.end());
  } else {
    std::copy(state.begin(), state.end(), states_.begin() + static_cast<std::ptrdiff_t>(head_ * state_dim_));
    std::copy(action.begin(), action.end(), actions_.begin() + static_cast<std::ptrdiff_t>(head_ * action_dim_));
    rewards_[head_] = reward;
    std::copy(next_state.begin(), next_state.end(),
              next_states_.begin() + static_cast<std::ptrdiff_t>(head_ * state_dim_));
  }
  head_ = (head_ + 1) % capacity_;
  size_ = std::min(size_ + 1, capacity_);
}

Transition ReplayBuffer::at(size_t i) const {
  if (i >= size_) throw std::out_of_range("ReplayBuffer::at");
  const size_t k = slot(i);
  Transition t;
  t.state.assign(states_.begin() + static_cast<std::ptrdiff_t>(k * state_dim_),
                 states_.begin() + static_cast<std::ptrdiff_t>((k + 1) * state_dim_));
  t.action.assign(actions_.begin() + static_cast<std::ptrdiff_t>(k * action_dim_),
                  actions_.begin() + static_cast<std::ptrdiff_t>((k + 1) * action_dim_));
  t.reward = rewards_[k];
  t.next_state.assign(next_states_.begin() + static_cast<std::ptrdiff_t>(k * state_dim_),
                      next_states_.begin() + static_cast<std::ptrdiff_t>((k + 1) * state_dim_));
  return t;
}

Batch ReplayBuffer::sample(size_t n, std::mt19937_64& rng) const {
  if (n == 0 || n > size_) throw std::invalid_argument("ReplayBuffer::sample: batch larger than buffer fill");
  std::uniform_int_distribution<size_t> pick(0, size_ - 1);
  Batch b;
  const auto sd = static_cast<Eigen::Index>(state_dim_);
  const auto ad = static_cast<Eigen::Index>(action_dim_);
  const auto cols = static_cast<Eigen::Index>(n);
  b.states.resize(sd, cols);
  b.actions.resize(ad, cols);
  b.rewards.resize(cols);
  b.next_states.resize(sd, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    const size_t k = slot(pick(rng));
    b.states.col(j) = Eigen::Map<const Eigen::VectorXd>(states_.data() + k * state_dim_, sd);
    b.actions.col(j) = Eigen::Map<const Eigen::VectorXd>(actions_.data() + k * action_dim_, ad);
    b.rewards[j] = rewards_[k];
    b.next_states.col(j) = Eigen::Map<const Eigen::VectorXd>(next_states_.data() + k * state_dim_, sd);
  }
  return b;
}

void Td3Config::validate() const {
  auto fail = [](const char* what) { throw std::invalid_argument(std::string("Td3Config: ") + what); };
  if (!(gamma >= 0.0 && gamma < 1.0)) fail("gamma must lie in [0, 1)");
  if (!(tau_actor > 0.0 && tau_actor <= 1.0) || !(tau_critic > 0.0 && tau_critic <= 1.0)) {
    fail("taus must lie in (0, 1]");
  }
  if (policy_delay < 1) fail("policy_delay must be at least 1");
  if (batch_size == 0) fail("batch_size must be positive");
  if (buffer_capacity < batch_size) fail("buffer_capacity must hold at least one batch");
  if (explore_noise < 0.0 || target_noise < 0.0 || target_noise_clip < 0.0) fail("noise scales must be >= 0");
  if (beta_l < 0.0) fail("beta_l must be >= 0");
  if (!(actor_lr > 0.0) || !(critic_lr > 0.0)) fail("learning rates must be positive");
  if (hidden.empty()) fail("need at least one hidden layer");
}

ActionPenaltyFn bess_penalty(env::Scenario scenario) {
  return [scenario](std::span<const double> action, std::span<double> grad) {
    const env::PenaltyEval p = env::bess_capacity_penalty(action, scenario);
    std::copy(p.grad.begin(), p.grad.end(), grad.begin());
    return p.value;
  };
}

Eigen::MatrixXd critic_input(const Eigen::MatrixXd& states, const Eigen::MatrixXd& actions) {
  Eigen::MatrixXd x(states.rows() + actions.rows(), states.cols());
  x.topRows(states.rows()) = states;
  x.bottomRows(actions.rows()) = actions;
  return x;
}

LossAndGrad actor_loss(const nn::Mlp& actor, const nn::Mlp& critic, const Eigen::MatrixXd& states,
                       const ActionPenaltyFn& penalty, double beta) {
  const auto n = static_cast<double>(states.cols());
  nn::Mlp::Tape actor_tape, critic_tape;
  const Eigen::MatrixXd actions = actor.forward(states, actor_tape);
  const Eigen::MatrixXd q = critic.forward(critic_input(states, actions), critic_tape);

  LossAndGrad out;
  out.loss = -q.sum() / n;
  const Eigen::MatrixXd upstream_q = Eigen::MatrixXd::Constant(1, states.cols(), -1.0 / n);
  const Eigen::MatrixXd d_input = critic.backward(critic_tape, upstream_q).input;
  Eigen::MatrixXd d_actions = d_input.bottomRows(actions.rows());

  if (penalty && beta != 0.0) {
    std::vector<double> a(static_cast<size_t>(actions.rows()));
    std::vector<double> g(a.size());
    double total = 0.0;
    for (Eigen::Index j = 0; j < actions.cols(); ++j) {
      Eigen::Map<Eigen::VectorXd>(a.data(), actions.rows()) = actions.col(j);
      std::fill(g.begin(), g.end(), 0.0);
      total += penalty(a, g);
      d_actions.col(j) += (beta / n) * Eigen::Map<const Eigen::VectorXd>(g.data(), actions.rows());
    }
    out.loss += beta * total / n;
  }
  out.grad = actor.backward(actor_tape, d_actions).params;
  return out;
}

LossAndGrad critic_loss(const nn::Mlp& critic, const Eigen::MatrixXd& states, const Eigen::MatrixXd& actions,
                        const Eigen::RowVectorXd& targets) {
  const auto n = static_cast<double>(states.cols());
  nn::Mlp::Tape tape;
  const Eigen::MatrixXd q = critic.forward(critic_input(states, actions), tape);
  const Eigen::MatrixXd residual = q - targets;
  LossAndGrad out;
  out.loss = 0.5 * residual.squaredNorm() / n;
  out.grad = critic.backward(tape, residual / n).params;
  return out;
}

LossGradCheck check_loss_gradients(std::mt19937_64& rng, const std::vector<int>& hidden, size_t batch,
                                   env::Scenario scenario, double beta, double h) {
  const int sd = static_cast<int>(env::kBessStateDim);
  const int ad = static_cast<int>(env::kBessActionDim);
  std::vector<int> actor_sizes{sd}, critic_sizes{sd + ad};
  actor_sizes.insert(actor_sizes.end(), hidden.begin(), hidden.end());
  critic_sizes.insert(critic_sizes.end(), hidden.begin(), hidden.end());
  actor_sizes.push_back(ad);
  critic_sizes.push_back(1);
  nn::Mlp actor(actor_sizes, nn::Activation::Tanh, rng);
  nn::Mlp critic(critic_sizes, nn::Activation::Identity, rng);

  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const auto n = static_cast<Eigen::Index>(batch);
  Eigen::MatrixXd states(sd, n), actions(ad, n);
  Eigen::RowVectorXd targets(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (int i = 0; i < sd; ++i) states(i, j) = u(rng);
    for (int i = 0; i < ad; ++i) actions(i, j) = u(rng);
    targets(j) = u(rng);
  }

  const ActionPenaltyFn penalty = bess_penalty(scenario);
  LossGradCheck out;
  out.actor_params = actor.parameter_count();
  out.critic_params = critic.parameter_count();

  const auto actor_value = [&] { return actor_loss(actor, critic, states, penalty, beta).loss; };
  const LossAndGrad a = actor_loss(actor, critic, states, penalty, beta);
  const std::vector<double> a_num = nn::finite_difference_gradient(actor.parameters(), actor_value, h);
  out.actor_error = nn::max_relative_error(a.grad, a_num);
  out.actor_fd_spread =
      nn::max_relative_error(a_num, nn::finite_difference_gradient(actor.parameters(), actor_value, h / 2));

  const auto critic_value = [&] { return critic_loss(critic, states, actions, targets).loss; };
  const LossAndGrad c = critic_loss(critic, states, actions, targets);
  const std::vector<double> c_num = nn::finite_difference_gradient(critic.parameters(), critic_value, h);
  out.critic_error = nn::max_relative_error(c.grad, c_num);
  out.critic_fd_spread =
      nn::max_relative_error(c_num, nn::finite_difference_gradient(critic.parameters(), critic_value, h / 2));
  return out;
}

Td3Agent::Td3Agent(size_t state_dim, size_t action_dim, Td3Config cfg, std::uint64_t seed, ActionPenaltyFn penalty)
    : state_dim_(state_dim),
      action_dim_(action_dim),
      cfg_(std::move(cfg)),
      rng_(seed),
      penalty_(std::move(penalty)),
      buffer_(cfg_.buffer_capacity, state_dim, action_dim) {
  cfg_.validate();
  std::vector<int> actor_sizes{static_cast<int>(state_dim)};
  actor_sizes.insert(actor_sizes.end(), cfg_.hidden.begin(), cfg_.hidden.end());
  actor_sizes.push_back(static_cast<int>(action_dim));
  std::vector<int> critic_sizes{static_cast<int>(state_dim + action_dim)};
  critic_sizes.insert(critic_sizes.end(), cfg_.hidden.begin(), cfg_.hidden.end());
  critic_sizes.push_back(1);

  actor_ = nn::Mlp(actor_sizes, nn::Activation::Tanh, rng_);
  critic1_ = nn::Mlp(critic_sizes, nn::Activation::Identity, rng_);
  critic2_ = nn::Mlp(critic_sizes, nn::Activation::Identity, rng_);
  target_actor_ = actor_;
  target_critic1_ = critic1_;
  target_critic2_ = critic2_;

  actor_opt_ = nn::Adam(actor_.parameter_count(), {.lr = cfg_.actor_lr}, "actor");
  critic1_opt_ = nn::Adam(critic1_.parameter_count(), {.lr = cfg_.critic_lr}, "critic1");
  critic2_opt_ = nn::Adam(critic2_.parameter_count(), {.lr = cfg_.critic_lr}, "critic2");
}

std::vector<double> Td3Agent::select_action(std::span<const double> state, bool explore) {
  if (state.size() != state_dim_) throw std::invalid_argument("select_action: state dimension mismatch");
  const Eigen::MatrixXd out =
      actor_.forward(Eigen::Map<const Eigen::MatrixXd>(state.data(), static_cast<Eigen::Index>(state_dim_), 1));
  std::vector<double> a(out.data(), out.data() + action_dim_);
  if (explore && cfg_.explore_noise > 0.0) {
    std::normal_distribution<double> noise(0.0, cfg_.explore_noise);
    for (double& x : a) x = std::clamp(x + noise(rng_), -1.0, 1.0);
  }
  return a;
}

std::vector<double> Td3Agent::random_action() {
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  std::vector<double> a(action_dim_);
  for (double& x : a) x = dist(rng_);
  return a;
}

Eigen::RowVectorXd Td3Agent::critic_target(const Batch& batch) {
  Eigen::MatrixXd next_actions = target_actor_.forward(batch.next_states);
  if (cfg_.target_smoothing && cfg_.target_noise > 0.0) {
    std::normal_distribution<double> noise(0.0, cfg_.target_noise);
    for (Eigen::Index i = 0; i < next_actions.size(); ++i) {
      const double eps = std::clamp(noise(rng_), -cfg_.target_noise_clip, cfg_.target_noise_clip);
      next_actions.data()[i] = std::clamp(next_actions.data()[i] + eps, -1.0, 1.0);
    }
  }
  const Eigen::MatrixXd x = critic_input(batch.next_states, next_actions);
  const Eigen::MatrixXd q1 = target_critic1_.forward(x);
  const Eigen::MatrixXd q2 = target_critic2_.forward(x);
  return cfg_.reward_scale * batch.rewards.array() + cfg_.gamma * q1.cwiseMin(q2).row(0).array();
}

CriticLosses Td3Agent::critic_update(const Batch& batch) {
  const Eigen::RowVectorXd y = critic_target(batch);
  const LossAndGrad l1 = critic_loss(critic1_, batch.states, batch.actions, y);
  const LossAndGrad l2 = critic_loss(critic2_, batch.states, batch.actions, y);
  critic1_opt_.step(critic1_.parameters(), l1.grad);
  critic2_opt_.step(critic2_.parameters(), l2.grad);
  ++critic_updates_;
  return {l1.loss, l2.loss};
}

double Td3Agent::actor_update(const Batch& batch) {
  const LossAndGrad l = actor_loss(actor_, critic1_, batch.states, penalty_, cfg_.beta_l);
  actor_opt_.step(actor_.parameters(), l.grad);
  ++actor_updates_;
  return l.loss;
}

void Td3Agent::target_soft_update() {
  nn::soft_update(target_actor_, actor_, cfg_.tau_actor);
  nn::soft_update(target_critic1_, critic1_, cfg_.tau_critic);
  nn::soft_update(target_critic2_, critic2_, cfg_.tau_critic);
  ++target_updates_;
}

bool Td3Agent::learn() {
  if (buffer_.size() < cfg_.batch_size) return false;
  const Batch batch = buffer_.sample(cfg_.batch_size, rng_);
  critic_update(batch);
  if (critic_updates_ % cfg_.policy_delay == 0) {
    actor_update(batch);
    target_soft_update();
  }
  return true;
}

namespace {

std::filesystem::path net_path(const std::filesystem::path& dir, const std::string& prefix, const char* name) {
  return dir / (prefix + "_" + name + ".bin");
}

void save_net(const std::filesystem::path& p, const nn::Mlp& net) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  nn::save_mlp(out, net);
}

void load_net(const std::filesystem::path& p, nn::Mlp& net) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + p.string());
  nn::Mlp loaded = nn::load_mlp(in);
  if (loaded.sizes() != net.sizes() || loaded.output_activation() != net.output_activation()) {
    throw std::runtime_error("architecture mismatch in " + p.string());
  }
  net = std::move(loaded);
}

}  // namespace

void Td3Agent::save(const std::filesystem::path& dir, const std::string& prefix) const {
  std::filesystem::create_directories(dir);
  save_net(net_path(dir, prefix, "actor"), actor_);
  save_net(net_path(dir, prefix, "critic1"), critic1_);
  save_net(net_path(dir, prefix, "critic2"), critic2_);
  save_net(net_path(dir, prefix, "target_actor"), target_actor_);
  save_net(net_path(dir, prefix, "target_critic1"), target_critic1_);
  save_net(net_path(dir, prefix, "target_critic2"), target_critic2_);
}

void Td3Agent::load(const std::filesystem::path& dir, const std::string& prefix) {
  load_net(net_path(dir, prefix, "actor"), actor_);
  load_net(net_path(dir, prefix, "critic1"), critic1_);
  load_net(net_path(dir, prefix, "critic2"), critic2_);
  load_net(net_path(dir, prefix, "target_actor"), target_actor_);
  load_net(net_path(dir, prefix, "target_critic1"), target_critic1_);
  load_net(net_path(dir, prefix, "target_critic2"), target_critic2_);
}

std::string_view to_string(RejectedAction r) { return r == RejectedAction::Zeroed ? "zeroed" : "submitted"; }

RejectedAction parse_rejected_action(std::string_view name) {
  if (name == "submitted") return RejectedAction::Submitted;
  if (name == "zeroed") return RejectedAction::Zeroed;
  throw std::invalid_argument("unknown rejected-action mode '" + std::string(name) + "' (expected submitted or zeroed)");
}

std::vector<EpisodeLog> train(Td3Agent& wind, Td3Agent& bess, env::Environment& env, const TrainOptions& options) {
  if (options.steps < 0) throw std::invalid_argument("train: step count must be non-negative");
  std::vector<EpisodeLog> log;
  if (options.steps == 0) return log;

  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<double> uniform(-1.0, 1.0);
  auto random_raw = [&](size_t dim) {
    std::vector<double> a(dim);
    for (double& x : a) x = uniform(rng);
    return a;
  };

  const size_t warmup = std::max(wind.config().warmup_steps, bess.config().warmup_steps);
  const std::vector<double> zero_bess(env::kBessActionDim, 0.0);

  env::Observation obs = env.reset(0);
  log.push_back({.episode = 0, .start = 0});
  for (std::int64_t t = 0; t < options.steps; ++t) {
    if (env.done()) {
      const size_t start = env.position() < env.stream().size() ? env.position() : 0;
      obs = env.reset(start);
      log.push_back({.episode = log.size(), .start = start});
    }
    const bool warm = static_cast<size_t>(t) < warmup;
    const std::vector<double> wind_raw =
        warm ? random_raw(env::kWindActionDim) : wind.select_action(obs.wind, true);
    const std::vector<double> bess_raw =
        warm ? random_raw(env::kBessActionDim) : bess.select_action(obs.bess, true);

    const env::StepResult step = env.step(wind_raw, bess_raw);
    const bool zero = step.bess_zeroed && options.rejected == RejectedAction::Zeroed;
    const std::vector<double>& executed = zero ? zero_bess : bess_raw;
    wind.buffer().push(obs.wind, wind_raw, step.wind_reward, step.next.wind);
    bess.buffer().push(obs.bess, executed, step.bess_reward.total, step.next.bess);

    EpisodeLog& ep = log.back();
    ++ep.steps;
    ep.wind_reward += step.wind_reward;
    ep.bess_reward += step.bess_reward.total;
    ep.wind_revenue += step.settlement.wind_revenue;
    ep.bess_revenue += step.settlement.bess_revenue;
    ep.degradation_cost += step.settlement.degradation_cost;
    obs = step.next;

    if (!warm) {
      wind.learn();
      bess.learn();
    }
  }
  return log;
}

}  // namespace windbess::td3
