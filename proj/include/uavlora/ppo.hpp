#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "uavlora/env.hpp"
#include "uavlora/mlp.hpp"

namespace uavlora {

struct Hyperparams {
  double gamma = 0.99;
  double clip_epsilon = 0.1;
  /// GAE bias-variance parameter.
  double chi = 0.01;
  double learning_rate = 1e-3;
  int minibatch_size = 64;
  int epochs_per_update = 4;
  /// Number of most recent episodes kept in the replay memory D.
  int replay_capacity = 8;
  std::vector<int> hidden_layers{64, 64};
  double value_coef = 0.5;
  double entropy_coef = 0.0;
  /// Global gradient-norm clip per network; 0 disables.
  double max_grad_norm = 0.5;
  /// Multiplies environment rewards before learning (EE is O(1e5) bit/s/mW).
  double reward_scale = 1e-5;
  bool normalize_advantages = true;
  std::uint64_t seed = 7;

  void validate() const;
};

/// Policy weights theta, value weights, and the sampling copy theta*.
struct PolicyParams {
  Mlp policy;
  Mlp value;
  Mlp sampling_policy;

  /// Randomly initialised networks for `obs_size` inputs and `n_actions` logits.
  static PolicyParams create(int obs_size, int n_actions, const Hyperparams& hp, std::mt19937_64& rng);

  void sync() { sampling_policy = policy; }
  int input_size() const { return policy.input_size(); }
  int num_actions() const { return policy.output_size(); }
};

/// Softmax restricted to allowed entries (masked entries get probability 0).
Eigen::VectorXd masked_softmax(const Eigen::VectorXd& logits, const std::vector<bool>* mask = nullptr);

/// Action probabilities of the trainable policy. Throws Error(ShapeMismatch).
Eigen::VectorXd forward_policy(const Observation& obs, const PolicyParams& params,
                               const std::vector<bool>* mask = nullptr);
Eigen::VectorXd forward_policy(const Observation& obs, const Mlp& policy, const std::vector<bool>* mask = nullptr);
double forward_value(const Observation& obs, const PolicyParams& params);

struct Transition {
  Eigen::VectorXd obs;
  int action = 0;
  double logprob = 0.0;
  double reward = 0.0;
  Eigen::VectorXd next_obs;
  bool done = false;
  double value = 0.0;
};

using Trajectory = std::vector<Transition>;

/// Backward recursion E_t = delta_t + gamma * chi * E_{t+1}, with V = 0 past the
/// terminal state. Throws Error(IncompleteTrajectory) unless the last step is terminal.
std::vector<double> gae_estimator(const Trajectory& traj, const Hyperparams& hp);
/// Same recursion on explicit per-step rewards/values (values has one extra entry for the bootstrap).
std::vector<double> gae_from_rewards(const std::vector<double>& rewards, const std::vector<double>& values,
                                     double gamma, double chi);
std::vector<double> discounted_returns(const std::vector<double>& rewards, double gamma);

struct MiniBatch {
  Eigen::MatrixXd obs;  // one sample per column
  std::vector<int> actions;
  Eigen::VectorXd old_logprob;
  Eigen::VectorXd advantages;
  Eigen::VectorXd returns;

  Eigen::Index size() const { return static_cast<Eigen::Index>(actions.size()); }
};

struct LossAndGrad {
  double value = 0.0;
  Eigen::VectorXd grad;
};

/// Mean over the batch of min(r A, clip(r, 1-eps, 1+eps) A) with r = pi_theta / pi_old,
/// plus `entropy_coef` times the mean policy entropy. The gradient is w.r.t. the policy
/// parameters (ascent direction). Throws Error(EmptyBatch).
LossAndGrad clipped_loss(const MiniBatch& batch, const Mlp& policy, const Hyperparams& hp,
                         const std::vector<bool>* mask = nullptr);

/// Mean squared error of V against batch returns and its gradient (descent direction).
LossAndGrad value_loss(const MiniBatch& batch, const Mlp& value);

struct EpisodeStats {
  long episode = 0;
  double cumulative_reward = 0.0;
  /// Fraction of steps whose action satisfied C1 and C2.
  double accuracy = 0.0;
  double final_ee = 0.0;
};

struct TrainResult {
  PolicyParams params;
  std::vector<EpisodeStats> curve;
  long episodes_trained = 0;
};

using EpisodeCallback = std::function<void(const EpisodeStats&)>;

/// PPO training loop. `initial` resumes from existing weights (retraining);
/// `action_filter` removes actions from the policy support (action-space reduction).
/// Throws Error(DivergenceDetected) when a loss turns non-finite.
TrainResult train(Environment& env, const Hyperparams& hp, long episodes,
                  const std::optional<PolicyParams>& initial = std::nullopt,
                  const std::optional<std::vector<bool>>& action_filter = std::nullopt,
                  long episode_offset = 0, const EpisodeCallback& on_episode = {});

enum class RolloutMode { Greedy, Sampled };

struct RolloutOutcome {
  AllocationState allocation;
  double energy_efficiency = 0.0;
  double cumulative_reward = 0.0;
  double accuracy = 0.0;
  std::vector<int> actions;
};

/// Runs the policy over the environment's current episode (call reset first).
RolloutOutcome rollout(const PolicyParams& params, Environment& env, RolloutMode mode, std::mt19937_64* rng = nullptr,
                       const std::vector<bool>* mask = nullptr);

/// Empirical action frequencies over `episodes` rollouts on episodes [first_episode, first_episode + episodes).
std::vector<double> action_distribution(const PolicyParams& params, Environment& env, long episodes,
                                        RolloutMode mode = RolloutMode::Greedy, std::uint64_t seed = 0,
                                        long first_episode = 0, const std::vector<bool>* mask = nullptr);

/// Keeps actions with probability strictly above `threshold`. Throws Error(AllActionsEliminated).
std::vector<bool> reduce_action_space(const std::vector<double>& distribution, double threshold = 0.001);

struct Checkpoint {
  PolicyParams params;
  Hyperparams hp;
  long episodes_trained = 0;
  std::size_t n_eds = 0;
  std::optional<std::vector<bool>> action_filter;
};

inline constexpr int kCheckpointVersion = 1;

std::string checkpoint_to_json(const Checkpoint& ckpt);
Checkpoint checkpoint_from_json(const std::string& text);
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace uavlora
