// Dense multilayer perceptrons with hand-written backpropagation, Adam and a
// central-difference gradient checker.
//
// Batches are column-major: an input of shape (in_dim x batch) produces an
// output of shape (out_dim x batch). Hidden layers use ReLU.

#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace windbess::nn {

enum class Activation : std::uint32_t { Identity = 0, Tanh = 1 };

class Mlp {
 public:
  /// Per-layer record of post-activation outputs, input first.
  struct Tape {
    std::vector<Eigen::MatrixXd> activations;
  };

  struct Gradients {
    std::vector<double> params;  // same layout as parameters()
    Eigen::MatrixXd input;       // d(output . upstream) / d(input)
  };

  Mlp() = default;
  /// Weights and biases drawn from U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
  Mlp(std::vector<int> sizes, Activation output, std::mt19937_64& rng);

  /// All parameters zero.
  static Mlp zeros(std::vector<int> sizes, Activation output);

  int input_dim() const { return sizes_.front(); }
  int output_dim() const { return sizes_.back(); }
  const std::vector<int>& sizes() const { return sizes_; }
  Activation output_activation() const { return output_; }
  size_t layer_count() const { return sizes_.size() - 1; }

  size_t parameter_count() const { return params_.size(); }
  std::span<double> parameters() { return params_; }
  std::span<const double> parameters() const { return params_; }

  Eigen::Map<Eigen::MatrixXd> weight(size_t layer);
  Eigen::Map<const Eigen::MatrixXd> weight(size_t layer) const;
  Eigen::Map<Eigen::VectorXd> bias(size_t layer);
  Eigen::Map<const Eigen::VectorXd> bias(size_t layer) const;

  /// Throws std::invalid_argument when input rows differ from input_dim().
  Eigen::MatrixXd forward(const Eigen::MatrixXd& input) const;
  Eigen::MatrixXd forward(const Eigen::MatrixXd& input, Tape& tape) const;

  /// Gradients of sum(output .* upstream) for the pass recorded in `tape`.
  Gradients backward(const Tape& tape, const Eigen::MatrixXd& upstream) const;

  bool all_finite() const;

  bool operator==(const Mlp&) const = default;

 private:
  void layout();

  std::vector<int> sizes_;
  Activation output_ = Activation::Identity;
  std::vector<double> params_;
  std::vector<size_t> weight_offset_;
  std::vector<size_t> bias_offset_;
};

struct AdamConfig {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Bias-corrected Adam over one flat parameter block.
class Adam {
 public:
  Adam() = default;
  Adam(size_t n, AdamConfig cfg, std::string block_name);

  /// Throws std::domain_error naming the block when a gradient is non-finite;
  /// parameters are left untouched in that case.
  void step(std::span<double> params, std::span<const double> grads);

  long step_count() const { return t_; }
  const std::vector<double>& first_moment() const { return m_; }
  const std::vector<double>& second_moment() const { return v_; }
  const AdamConfig& config() const { return cfg_; }

 private:
  AdamConfig cfg_;
  std::string block_;
  std::vector<double> m_;
  std::vector<double> v_;
  long t_ = 0;
};

/// target <- tau * main + (1 - tau) * target.
void soft_update(Mlp& target, const Mlp& main, double tau);

/// Central differences of `loss` with respect to every entry of `params`.
/// `loss` must read the parameters through the same storage.
std::vector<double> finite_difference_gradient(std::span<double> params, const std::function<double()>& loss,
                                               double h = 1e-5);

/// max_i |a_i - n_i| / max(|a_i|, |n_i|, floor).
double max_relative_error(std::span<const double> analytic, std::span<const double> numeric, double floor = 1e-6);

/// Scalar loss over a network output together with its output gradient.
struct LossFunctional {
  std::function<double(const Eigen::MatrixXd&)> value;
  std::function<Eigen::MatrixXd(const Eigen::MatrixXd&)> gradient;
};

struct GradCheckOptions {
  double h = 1e-5;
  double floor = 1e-6;
  /// Test hook: applied to the analytic gradient before comparison.
  std::function<void(std::vector<double>&)> corrupt;
};

/// Worst relative error between backpropagated and finite-difference
/// parameter gradients of `loss(net(input))`.
double grad_check(const Mlp& net, const Eigen::MatrixXd& input, const LossFunctional& loss,
                  const GradCheckOptions& options = {});

/// Binary checkpoint: magic "WBNN", format version, activation, layer sizes,
/// then the flat parameter array as native little-endian doubles.
void save_mlp(std::ostream& out, const Mlp& net);
Mlp load_mlp(std::istream& in);  // throws std::runtime_error on malformed input

}  // namespace windbess::nn
