#include "windbess/nn.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace windbess::nn {

namespace {

constexpr std::array<char, 4> kMagic = {'W', 'B', 'N', 'N'};
constexpr std::uint32_t kFormatVersion = 1;

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) throw std::runtime_error("checkpoint truncated");
  return v;
}

}  // namespace

Mlp::Mlp(std::vector<int> sizes, Activation output, std::mt19937_64& rng) : sizes_(std::move(sizes)), output_(output) {
  layout();
  for (size_t l = 0; l < layer_count(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(sizes_[l]));
    std::uniform_real_distribution<double> dist(-bound, bound);
    auto w = weight(l);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = dist(rng);
    auto b = bias(l);
    for (Eigen::Index i = 0; i < b.size(); ++i) b[i] = dist(rng);
  }
}

Mlp Mlp::zeros(std::vector<int> sizes, Activation output) {
  Mlp net;
  net.sizes_ = std::move(sizes);
  net.output_ = output;
  net.layout();
  return net;
}

void Mlp::layout() {
  if (sizes_.size() < 2) throw std::invalid_argument("Mlp: need at least input and output sizes");
  for (int s : sizes_) {
    if (s <= 0) throw std::invalid_argument("Mlp: layer sizes must be positive");
  }
  weight_offset_.clear();
  bias_offset_.clear();
  size_t offset = 0;
  for (size_t l = 0; l + 1 < sizes_.size(); ++l) {
    weight_offset_.push_back(offset);
    offset += static_cast<size_t>(sizes_[l]) * static_cast<size_t>(sizes_[l + 1]);
    bias_offset_.push_back(offset);
    offset += static_cast<size_t>(sizes_[l + 1]);
  }
  params_.assign(offset, 0.0);
}

Eigen::Map<Eigen::MatrixXd> Mlp::weight(size_t l) {
  return {params_.data() + weight_offset_[l], sizes_[l + 1], sizes_[l]};
}
Eigen::Map<const Eigen::MatrixXd> Mlp::weight(size_t l) const {
  return {params_.data() + weight_offset_[l], sizes_[l + 1], sizes_[l]};
}
Eigen::Map<Eigen::VectorXd> Mlp::bias(size_t l) { return {params_.data() + bias_offset_[l], sizes_[l + 1]}; }
Eigen::Map<const Eigen::VectorXd> Mlp::bias(size_t l) const {
  return {params_.data() + bias_offset_[l], sizes_[l + 1]};
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& input) const {
  Tape tape;
  return forward(input, tape);
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& input, Tape& tape) const {
  if (input.rows() != input_dim()) {
    throw std::invalid_argument("Mlp::forward: input has " + std::to_string(input.rows()) + " rows, expected " +
                                std::to_string(input_dim()));
  }
  tape.activations.resize(layer_count() + 1);
  tape.activations[0] = input;
  for (size_t l = 0; l < layer_count(); ++l) {
    Eigen::MatrixXd z = weight(l) * tape.activations[l];
    z.colwise() += bias(l);
    if (l + 1 < layer_count()) {
      tape.activations[l + 1] = z.cwiseMax(0.0);
    } else if (output_ == Activation::Tanh) {
      tape.activations[l + 1] = z.array().tanh().matrix();
    } else {
      tape.activations[l + 1] = std::move(z);
    }
  }
  return tape.activations.back();
}

Mlp::Gradients Mlp::backward(const Tape& tape, const Eigen::MatrixXd& upstream) const {
  if (tape.activations.size() != layer_count() + 1) throw std::invalid_argument("Mlp::backward: tape not recorded");
  const Eigen::MatrixXd& out = tape.activations.back();
  if (upstream.rows() != out.rows() || upstream.cols() != out.cols()) {
    throw std::invalid_argument("Mlp::backward: upstream gradient shape mismatch");
  }

  Gradients g;
  g.params.assign(params_.size(), 0.0);
  Eigen::MatrixXd delta =
      output_ == Activation::Tanh ? (upstream.array() * (1.0 - out.array().square())).matrix() : upstream;

  for (size_t l = layer_count(); l-- > 0;) {
    const Eigen::MatrixXd& a_prev = tape.activations[l];
    Eigen::Map<Eigen::MatrixXd>(g.params.data() + weight_offset_[l], sizes_[l + 1], sizes_[l]) =
        delta * a_prev.transpose();
    Eigen::Map<Eigen::VectorXd>(g.params.data() + bias_offset_[l], sizes_[l + 1]) = delta.rowwise().sum();
    Eigen::MatrixXd back = weight(l).transpose() * delta;
    if (l > 0) {
      delta = (back.array() * (a_prev.array() > 0.0).cast<double>()).matrix();
    } else {
      g.input = std::move(back);
    }
  }
  return g;
}

bool Mlp::all_finite() const {
  return std::all_of(params_.begin(), params_.end(), [](double p) { return std::isfinite(p); });
}

Adam::Adam(size_t n, AdamConfig cfg, std::string block_name)
    : cfg_(cfg), block_(std::move(block_name)), m_(n, 0.0), v_(n, 0.0) {}

void Adam::step(std::span<double> params, std::span<const double> grads) {
  if (params.size() != m_.size() || grads.size() != m_.size()) {
    throw std::invalid_argument("Adam::step: shape mismatch in block '" + block_ + "'");
  }
  for (size_t i = 0; i < grads.size(); ++i) {
    if (!std::isfinite(grads[i])) {
      throw std::domain_error("non-finite gradient in parameter block '" + block_ + "' at index " +
                              std::to_string(i));
    }
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (size_t i = 0; i < params.size(); ++i) {
    m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * grads[i];
    v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * grads[i] * grads[i];
    const double m_hat = m_[i] / bc1;
    const double v_hat = v_[i] / bc2;
    params[i] -= cfg_.lr * m_hat / (std::sqrt(v_hat) + cfg_.eps);
  }
}

void soft_update(Mlp& target, const Mlp& main, double tau) {
  if (target.sizes() != main.sizes()) throw std::invalid_argument("soft_update: architecture mismatch");
  auto t = target.parameters();
  auto m = main.parameters();
  for (size_t i = 0; i < t.size(); ++i) t[i] = tau * m[i] + (1.0 - tau) * t[i];
}

std::vector<double> finite_difference_gradient(std::span<double> params, const std::function<double()>& loss,
                                               double h) {
  std::vector<double> grad(params.size());
  for (size_t i = 0; i < params.size(); ++i) {
    const double saved = params[i];
    params[i] = saved + h;
    const double up = loss();
    params[i] = saved - h;
    const double down = loss();
    params[i] = saved;
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

double max_relative_error(std::span<const double> analytic, std::span<const double> numeric, double floor) {
  if (analytic.size() != numeric.size()) throw std::invalid_argument("max_relative_error: size mismatch");
  double worst = 0.0;
  for (size_t i = 0; i < analytic.size(); ++i) {
    const double scale = std::max({std::abs(analytic[i]), std::abs(numeric[i]), floor});
    worst = std::max(worst, std::abs(analytic[i] - numeric[i]) / scale);
  }
  return worst;
}

double grad_check(const Mlp& net, const Eigen::MatrixXd& input, const LossFunctional& loss,
                  const GradCheckOptions& options) {
  Mlp probe = net;
  Mlp::Tape tape;
  const Eigen::MatrixXd out = probe.forward(input, tape);
  std::vector<double> analytic = probe.backward(tape, loss.gradient(out)).params;
  if (options.corrupt) options.corrupt(analytic);

  const std::vector<double> numeric =
      finite_difference_gradient(probe.parameters(), [&] { return loss.value(probe.forward(input)); }, options.h);
  return max_relative_error(analytic, numeric, options.floor);
}

void save_mlp(std::ostream& out, const Mlp& net) {
  out.write(kMagic.data(), kMagic.size());
  put<std::uint32_t>(out, kFormatVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(net.output_activation()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(net.sizes().size()));
  for (int s : net.sizes()) put<std::int32_t>(out, s);
  const auto params = net.parameters();
  put<std::uint64_t>(out, params.size());
  out.write(reinterpret_cast<const char*>(params.data()), static_cast<std::streamsize>(params.size() * sizeof(double)));
  if (!out) throw std::runtime_error("checkpoint write failed");
}

Mlp load_mlp(std::istream& in) {
  std::array<char, 4> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMagic) throw std::runtime_error("not a network checkpoint");
  const auto version = get<std::uint32_t>(in);
  if (version != kFormatVersion) {
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
  }
  const auto act = get<std::uint32_t>(in);
  if (act > static_cast<std::uint32_t>(Activation::Tanh)) throw std::runtime_error("unknown output activation");
  const auto n_sizes = get<std::uint32_t>(in);
  if (n_sizes < 2 || n_sizes > 64) throw std::runtime_error("implausible layer count");
  std::vector<int> sizes(n_sizes);
  for (int& s : sizes) s = get<std::int32_t>(in);
  Mlp net = Mlp::zeros(sizes, static_cast<Activation>(act));
  const auto n_params = get<std::uint64_t>(in);
  if (n_params != net.parameter_count()) throw std::runtime_error("parameter count does not match layer sizes");
  auto params = net.parameters();
  if (!in.read(reinterpret_cast<char*>(params.data()), static_cast<std::streamsize>(n_params * sizeof(double)))) {
    throw std::runtime_error("checkpoint truncated");
  }
  return net;
}

}  // namespace windbess::nn
