#pragma once

#include <cstddef>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace uavlora {

/// Fully connected tanh network with a linear output layer. All weights and
/// biases live in one flat parameter vector so optimizers and finite
/// differences can treat the network as a point in R^P.
class Mlp {
 public:
  /// Per-layer activations kept for backpropagation (one column per sample).
  struct Cache {
    std::vector<Eigen::MatrixXd> activations;  // activations[0] is the input
  };

  Mlp() = default;
  /// layer_sizes = {inputs, hidden..., outputs}; parameters start at zero.
  explicit Mlp(std::vector<int> layer_sizes);

  /// Orthogonal weight init scaled by `hidden_gain` / `output_gain`, zero biases.
  void init_orthogonal(std::mt19937_64& rng, double hidden_gain, double output_gain);

  int input_size() const { return sizes_.front(); }
  int output_size() const { return sizes_.back(); }
  std::size_t num_layers() const { return sizes_.size() - 1; }
  const std::vector<int>& layer_sizes() const { return sizes_; }
  std::size_t num_params() const { return static_cast<std::size_t>(params_.size()); }

  Eigen::VectorXd& params() { return params_; }
  const Eigen::VectorXd& params() const { return params_; }

  /// Weight matrix of layer l (outputs x inputs) and its bias.
  Eigen::Map<Eigen::MatrixXd> weight(std::size_t l);
  Eigen::Map<const Eigen::MatrixXd> weight(std::size_t l) const;
  Eigen::Map<Eigen::VectorXd> bias(std::size_t l);
  Eigen::Map<const Eigen::VectorXd> bias(std::size_t l) const;

  Eigen::VectorXd forward(const Eigen::VectorXd& input) const;
  /// Inputs one sample per column; returns outputs one sample per column.
  Eigen::MatrixXd forward(const Eigen::MatrixXd& inputs, Cache* cache) const;

  /// Gradient of sum_j <d_output_j, output_j> w.r.t. the flat parameters.
  Eigen::VectorXd backward(const Cache& cache, const Eigen::MatrixXd& d_output) const;

  friend bool operator==(const Mlp& a, const Mlp& b) {
    return a.sizes_ == b.sizes_ && a.params_.size() == b.params_.size() && a.params_ == b.params_;
  }

 private:
  std::vector<int> sizes_;
  std::vector<std::size_t> weight_offset_;
  std::vector<std::size_t> bias_offset_;
  Eigen::VectorXd params_;
};

/// Adam on a flat parameter vector (gradient descent direction).
class Adam {
 public:
  Adam() = default;
  Adam(std::size_t n, double learning_rate, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

  void step(Eigen::VectorXd& params, const Eigen::VectorXd& grad);

 private:
  Eigen::VectorXd m_;
  Eigen::VectorXd v_;
  double lr_ = 1e-3;
  double beta1_ = 0.9;
  double beta2_ = 0.999;
  double eps_ = 1e-8;
  long t_ = 0;
};

}  // namespace uavlora
