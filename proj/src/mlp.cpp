#include "uavlora/mlp.hpp"

#include <algorithm>
#include <cmath>

#include "uavlora/error.hpp"

namespace uavlora {

Mlp::Mlp(std::vector<int> layer_sizes) : sizes_(std::move(layer_sizes)) {
  if (sizes_.size() < 2) throw Error(ErrorCode::InvalidArgument, "an MLP needs at least input and output sizes");
  std::size_t offset = 0;
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    if (sizes_[l] <= 0 || sizes_[l + 1] <= 0) throw Error(ErrorCode::InvalidArgument, "layer sizes must be positive");
    weight_offset_.push_back(offset);
    offset += static_cast<std::size_t>(sizes_[l] * sizes_[l + 1]);
    bias_offset_.push_back(offset);
    offset += static_cast<std::size_t>(sizes_[l + 1]);
  }
  params_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(offset));
}

Eigen::Map<Eigen::MatrixXd> Mlp::weight(std::size_t l) {
  return {params_.data() + weight_offset_[l], sizes_[l + 1], sizes_[l]};
}
Eigen::Map<const Eigen::MatrixXd> Mlp::weight(std::size_t l) const {
  return {params_.data() + weight_offset_[l], sizes_[l + 1], sizes_[l]};
}
Eigen::Map<Eigen::VectorXd> Mlp::bias(std::size_t l) { return {params_.data() + bias_offset_[l], sizes_[l + 1]}; }
Eigen::Map<const Eigen::VectorXd> Mlp::bias(std::size_t l) const {
  return {params_.data() + bias_offset_[l], sizes_[l + 1]};
}

void Mlp::init_orthogonal(std::mt19937_64& rng, double hidden_gain, double output_gain) {
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t l = 0; l < num_layers(); ++l) {
    const int rows = sizes_[l + 1];
    const int cols = sizes_[l];
    const int big = std::max(rows, cols);
    const int small = std::min(rows, cols);
    Eigen::MatrixXd gauss(big, small);
    for (int j = 0; j < small; ++j) {
      for (int i = 0; i < big; ++i) gauss(i, j) = normal(rng);
    }
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(gauss);
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(big, small);
    // Sign fix makes the draw uniform over the orthogonal group.
    const Eigen::MatrixXd r = qr.matrixQR().topRows(small).triangularView<Eigen::Upper>();
    for (int j = 0; j < small; ++j) {
      if (r(j, j) < 0.0) q.col(j) *= -1.0;
    }
    const double gain = (l + 1 == num_layers()) ? output_gain : hidden_gain;
    weight(l) = gain * (rows >= cols ? q : Eigen::MatrixXd(q.transpose()));
    bias(l).setZero();
  }
}

Eigen::VectorXd Mlp::forward(const Eigen::VectorXd& input) const {
  return forward(Eigen::MatrixXd(input), nullptr).col(0);
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& inputs, Cache* cache) const {
  if (inputs.rows() != input_size()) {
    throw Error(ErrorCode::ShapeMismatch, "expected " + std::to_string(input_size()) + " inputs, got " +
                                              std::to_string(inputs.rows()));
  }
  if (cache) {
    cache->activations.clear();
    cache->activations.push_back(inputs);
  }
  Eigen::MatrixXd x = inputs;
  for (std::size_t l = 0; l < num_layers(); ++l) {
    Eigen::MatrixXd z = weight(l) * x;
    z.colwise() += bias(l);
    if (l + 1 < num_layers()) z = z.array().tanh().matrix();
    if (cache) cache->activations.push_back(z);
    x = std::move(z);
  }
  return x;
}

Eigen::VectorXd Mlp::backward(const Cache& cache, const Eigen::MatrixXd& d_output) const {
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(params_.size());
  Eigen::MatrixXd delta = d_output;
  for (std::size_t l = num_layers(); l-- > 0;) {
    const Eigen::MatrixXd& input = cache.activations[l];
    Eigen::Map<Eigen::MatrixXd>(grad.data() + weight_offset_[l], sizes_[l + 1], sizes_[l]) =
        delta * input.transpose();
    Eigen::Map<Eigen::VectorXd>(grad.data() + bias_offset_[l], sizes_[l + 1]) = delta.rowwise().sum();
    if (l > 0) {
      // input is tanh output of the previous layer: d tanh = 1 - a^2.
      delta = ((weight(l).transpose() * delta).array() * (1.0 - input.array().square())).matrix();
    }
  }
  return grad;
}

Adam::Adam(std::size_t n, double learning_rate, double beta1, double beta2, double eps)
    : m_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n))),
      v_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n))),
      lr_(learning_rate),
      beta1_(beta1),
      beta2_(beta2),
      eps_(eps) {}

void Adam::step(Eigen::VectorXd& params, const Eigen::VectorXd& grad) {
  if (grad.size() != m_.size() || params.size() != m_.size()) {
    throw Error(ErrorCode::ShapeMismatch, "optimizer state size differs from the gradient");
  }
  ++t_;
  m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
  v_ = beta2_ * v_ + (1.0 - beta2_) * grad.cwiseProduct(grad);
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  params.array() -= lr_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
}

}  // namespace uavlora
