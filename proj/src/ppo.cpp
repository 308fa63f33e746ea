#include "uavlora/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "uavlora/error.hpp"
#include "uavlora/rng.hpp"

namespace uavlora {

using nlohmann::json;

void Hyperparams::validate() const {
  if (!(gamma > 0.0 && gamma <= 1.0)) throw Error(ErrorCode::InvalidArgument, "gamma must lie in (0, 1]");
  if (!(clip_epsilon > 0.0 && clip_epsilon < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "clip_epsilon must lie in (0, 1)");
  }
  if (!(chi >= 0.0 && chi <= 1.0)) throw Error(ErrorCode::InvalidArgument, "chi must lie in [0, 1]");
  if (!(learning_rate > 0.0)) throw Error(ErrorCode::InvalidArgument, "learning_rate must be positive");
  if (minibatch_size < 1 || epochs_per_update < 1 || replay_capacity < 1) {
    throw Error(ErrorCode::InvalidArgument, "minibatch_size, epochs_per_update and replay_capacity must be >= 1");
  }
  for (int h : hidden_layers) {
    if (h < 1) throw Error(ErrorCode::InvalidArgument, "hidden layer widths must be positive");
  }
  if (!(reward_scale > 0.0)) throw Error(ErrorCode::InvalidArgument, "reward_scale must be positive");
  if (value_coef < 0.0 || entropy_coef < 0.0 || max_grad_norm < 0.0) {
    throw Error(ErrorCode::InvalidArgument, "loss coefficients and gradient clip must be non-negative");
  }
}

PolicyParams PolicyParams::create(int obs_size, int n_actions, const Hyperparams& hp, std::mt19937_64& rng) {
  std::vector<int> policy_sizes{obs_size};
  policy_sizes.insert(policy_sizes.end(), hp.hidden_layers.begin(), hp.hidden_layers.end());
  std::vector<int> value_sizes = policy_sizes;
  policy_sizes.push_back(n_actions);
  value_sizes.push_back(1);

  PolicyParams p;
  p.policy = Mlp(policy_sizes);
  p.value = Mlp(value_sizes);
  p.policy.init_orthogonal(rng, std::sqrt(2.0), 0.01);
  p.value.init_orthogonal(rng, std::sqrt(2.0), 1.0);
  p.sync();
  return p;
}

Eigen::VectorXd masked_softmax(const Eigen::VectorXd& logits, const std::vector<bool>* mask) {
  if (mask && static_cast<Eigen::Index>(mask->size()) != logits.size()) {
    throw Error(ErrorCode::ShapeMismatch, "action mask length differs from the number of logits");
  }
  double peak = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < logits.size(); ++i) {
    if (!mask || (*mask)[static_cast<std::size_t>(i)]) peak = std::max(peak, logits[i]);
  }
  if (!std::isfinite(peak)) throw Error(ErrorCode::AllActionsEliminated, "no action left in the mask");
  Eigen::VectorXd p(logits.size());
  double total = 0.0;
  for (Eigen::Index i = 0; i < logits.size(); ++i) {
    const bool allowed = !mask || (*mask)[static_cast<std::size_t>(i)];
    p[i] = allowed ? std::exp(logits[i] - peak) : 0.0;
    total += p[i];
  }
  return p / total;
}

namespace {

Eigen::VectorXd to_vector(const Observation& obs) {
  return Eigen::Map<const Eigen::VectorXd>(obs.features.data(), static_cast<Eigen::Index>(obs.features.size()));
}

double global_norm_clip(Eigen::VectorXd& grad, double max_norm) {
  const double norm = grad.norm();
  if (max_norm > 0.0 && norm > max_norm) grad *= max_norm / norm;
  return norm;
}

int sample_index(const Eigen::VectorXd& probs, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double target = u(rng);
  double acc = 0.0;
  int last = -1;
  for (Eigen::Index i = 0; i < probs.size(); ++i) {
    if (probs[i] <= 0.0) continue;
    acc += probs[i];
    last = static_cast<int>(i);
    if (target < acc) return last;
  }
  return last;
}

int argmax_index(const Eigen::VectorXd& probs) {
  Eigen::Index best = 0;
  probs.maxCoeff(&best);
  return static_cast<int>(best);
}

}  // namespace

Eigen::VectorXd forward_policy(const Observation& obs, const Mlp& policy, const std::vector<bool>* mask) {
  if (static_cast<int>(obs.features.size()) != policy.input_size()) {
    throw Error(ErrorCode::ShapeMismatch, "observation has " + std::to_string(obs.features.size()) +
                                              " features, policy expects " + std::to_string(policy.input_size()));
  }
  return masked_softmax(policy.forward(to_vector(obs)), mask);
}

Eigen::VectorXd forward_policy(const Observation& obs, const PolicyParams& params, const std::vector<bool>* mask) {
  return forward_policy(obs, params.policy, mask);
}

double forward_value(const Observation& obs, const PolicyParams& params) {
  if (static_cast<int>(obs.features.size()) != params.value.input_size()) {
    throw Error(ErrorCode::ShapeMismatch, "observation size does not match the value network");
  }
  return params.value.forward(to_vector(obs))[0];
}

std::vector<double> gae_from_rewards(const std::vector<double>& rewards, const std::vector<double>& values,
                                     double gamma, double chi) {
  if (values.size() != rewards.size() + 1) {
    throw Error(ErrorCode::ShapeMismatch, "values must hold one bootstrap entry beyond the rewards");
  }
  std::vector<double> adv(rewards.size());
  double running = 0.0;
  for (std::size_t t = rewards.size(); t-- > 0;) {
    const double delta = rewards[t] + gamma * values[t + 1] - values[t];
    running = delta + gamma * chi * running;
    adv[t] = running;
  }
  return adv;
}

std::vector<double> gae_estimator(const Trajectory& traj, const Hyperparams& hp) {
  if (traj.empty() || !traj.back().done) {
    throw Error(ErrorCode::IncompleteTrajectory, "trajectory does not end in a terminal state");
  }
  std::vector<double> rewards;
  std::vector<double> values;
  for (const auto& tr : traj) {
    rewards.push_back(tr.reward);
    values.push_back(tr.value);
  }
  values.push_back(0.0);
  return gae_from_rewards(rewards, values, hp.gamma, hp.chi);
}

std::vector<double> discounted_returns(const std::vector<double>& rewards, double gamma) {
  std::vector<double> out(rewards.size());
  double running = 0.0;
  for (std::size_t t = rewards.size(); t-- > 0;) {
    running = rewards[t] + gamma * running;
    out[t] = running;
  }
  return out;
}

LossAndGrad clipped_loss(const MiniBatch& batch, const Mlp& policy, const Hyperparams& hp,
                         const std::vector<bool>* mask) {
  const Eigen::Index n = batch.size();
  if (n == 0) throw Error(ErrorCode::EmptyBatch, "clipped objective needs at least one sample");

  Mlp::Cache cache;
  const Eigen::MatrixXd logits = policy.forward(batch.obs, &cache);
  Eigen::MatrixXd d_logits = Eigen::MatrixXd::Zero(logits.rows(), n);
  const double lo = 1.0 - hp.clip_epsilon;
  const double hi = 1.0 + hp.clip_epsilon;
  double objective = 0.0;

  for (Eigen::Index j = 0; j < n; ++j) {
    const Eigen::VectorXd p = masked_softmax(logits.col(j), mask);
    const int a = batch.actions[static_cast<std::size_t>(j)];
    const double adv = batch.advantages[j];
    const double ratio = std::exp(std::log(p[a]) - batch.old_logprob[j]);
    const double unclipped = ratio * adv;
    const double clipped = std::clamp(ratio, lo, hi) * adv;
    objective += std::min(unclipped, clipped);
    if (unclipped <= clipped) {
      // d ratio / d z = ratio * (e_a - p)
      Eigen::VectorXd g = -p;
      g[a] += 1.0;
      d_logits.col(j) += (adv * ratio) * g;
    }
    if (hp.entropy_coef > 0.0) {
      double entropy = 0.0;
      for (Eigen::Index k = 0; k < p.size(); ++k) {
        if (p[k] > 0.0) entropy -= p[k] * std::log(p[k]);
      }
      objective += hp.entropy_coef * entropy;
      for (Eigen::Index k = 0; k < p.size(); ++k) {
        if (p[k] > 0.0) d_logits(k, j) += hp.entropy_coef * (-p[k] * (std::log(p[k]) + entropy));
      }
    }
  }
  const double inv = 1.0 / static_cast<double>(n);
  return {objective * inv, policy.backward(cache, d_logits * inv)};
}

LossAndGrad value_loss(const MiniBatch& batch, const Mlp& value) {
  const Eigen::Index n = batch.size();
  if (n == 0) throw Error(ErrorCode::EmptyBatch, "value loss needs at least one sample");
  Mlp::Cache cache;
  const Eigen::MatrixXd v = value.forward(batch.obs, &cache);
  const Eigen::RowVectorXd err = v.row(0) - batch.returns.transpose();
  const double inv = 1.0 / static_cast<double>(n);
  Eigen::MatrixXd d_out = (2.0 * inv) * err;
  return {err.squaredNorm() * inv, value.backward(cache, d_out)};
}

namespace {

struct Sample {
  const Transition* tr;
  double advantage;
  double ret;
};

MiniBatch make_batch(const std::vector<Sample>& samples, const std::vector<std::size_t>& idx, std::size_t begin,
                     std::size_t end, Eigen::Index obs_size) {
  MiniBatch b;
  const auto n = static_cast<Eigen::Index>(end - begin);
  b.obs.resize(obs_size, n);
  b.old_logprob.resize(n);
  b.advantages.resize(n);
  b.returns.resize(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const Sample& s = samples[idx[begin + static_cast<std::size_t>(j)]];
    b.obs.col(j) = s.tr->obs;
    b.actions.push_back(s.tr->action);
    b.old_logprob[j] = s.tr->logprob;
    b.advantages[j] = s.advantage;
    b.returns[j] = s.ret;
  }
  return b;
}

void check_finite(double x, const char* what, long episode) {
  if (!std::isfinite(x)) {
    throw Error(ErrorCode::DivergenceDetected,
                std::string(what) + " became non-finite at episode " + std::to_string(episode));
  }
}

}  // namespace

TrainResult train(Environment& env, const Hyperparams& hp, long episodes, const std::optional<PolicyParams>& initial,
                  const std::optional<std::vector<bool>>& action_filter, long episode_offset,
                  const EpisodeCallback& on_episode) {
  hp.validate();
  const int obs_size = static_cast<int>(env.observation_size());
  const int n_actions = env.num_actions();
  std::mt19937_64 rng(mix_seed(hp.seed, 0x70706fULL));

  TrainResult result;
  if (initial) {
    if (initial->input_size() != obs_size || initial->num_actions() != n_actions) {
      throw Error(ErrorCode::CheckpointMismatch, "initial parameters do not match the environment shape");
    }
    result.params = *initial;
  } else {
    result.params = PolicyParams::create(obs_size, n_actions, hp, rng);
  }
  PolicyParams& params = result.params;
  params.sync();

  const std::vector<bool>* mask = action_filter ? &*action_filter : nullptr;
  if (mask && static_cast<int>(mask->size()) != n_actions) {
    throw Error(ErrorCode::ShapeMismatch, "action filter length differs from the action count");
  }
  if (mask && std::none_of(mask->begin(), mask->end(), [](bool b) { return b; })) {
    throw Error(ErrorCode::AllActionsEliminated, "action filter removes every action");
  }

  Adam policy_opt(params.policy.num_params(), hp.learning_rate);
  Adam value_opt(params.value.num_params(), hp.learning_rate);
  std::deque<Trajectory> replay;

  for (long e = 0; e < episodes; ++e) {
    const long episode_index = episode_offset + e;
    Observation obs = env.reset_episode(static_cast<std::uint64_t>(episode_index));
    Trajectory traj;
    while (!env.done()) {
      const Eigen::VectorXd probs = forward_policy(obs, params.sampling_policy, mask);
      const int a = sample_index(probs, rng);
      Transition tr;
      tr.obs = to_vector(obs);
      tr.action = a;
      tr.logprob = std::log(probs[a]);
      tr.value = forward_value(obs, params);
      StepResult res = env.step({a});
      tr.reward = res.reward;
      tr.next_obs = to_vector(res.observation);
      tr.done = res.done;
      traj.push_back(std::move(tr));
      obs = std::move(res.observation);
    }

    EpisodeStats stats;
    stats.episode = episode_index;
    stats.cumulative_reward = env.cumulative_reward();
    stats.accuracy = static_cast<double>(env.accepted_steps()) / static_cast<double>(env.n_eds());
    stats.final_ee = env.energy_efficiency();
    result.curve.push_back(stats);

    replay.push_back(std::move(traj));
    while (static_cast<int>(replay.size()) > hp.replay_capacity) replay.pop_front();

    // Advantages and returns from the current value network.
    std::vector<Sample> samples;
    for (const Trajectory& t : replay) {
      std::vector<double> rewards;
      std::vector<double> values;
      for (const Transition& tr : t) {
        rewards.push_back(tr.reward * hp.reward_scale);
        values.push_back(params.value.forward(tr.obs)[0]);
      }
      values.push_back(t.back().done ? 0.0 : params.value.forward(t.back().next_obs)[0]);
      const auto adv = gae_from_rewards(rewards, values, hp.gamma, hp.chi);
      const auto ret = discounted_returns(rewards, hp.gamma);
      for (std::size_t i = 0; i < t.size(); ++i) samples.push_back({&t[i], adv[i], ret[i]});
    }
    if (hp.normalize_advantages && samples.size() > 1) {
      double mean = 0.0;
      for (const auto& s : samples) mean += s.advantage;
      mean /= static_cast<double>(samples.size());
      double var = 0.0;
      for (const auto& s : samples) var += (s.advantage - mean) * (s.advantage - mean);
      const double sd = std::sqrt(var / static_cast<double>(samples.size()));
      for (auto& s : samples) s.advantage = (s.advantage - mean) / (sd + 1e-8);
    }

    std::vector<std::size_t> idx(samples.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    const auto mb = static_cast<std::size_t>(hp.minibatch_size);
    for (int epoch = 0; epoch < hp.epochs_per_update; ++epoch) {
      std::shuffle(idx.begin(), idx.end(), rng);
      for (std::size_t begin = 0; begin < idx.size(); begin += mb) {
        const std::size_t end = std::min(idx.size(), begin + mb);
        const MiniBatch batch = make_batch(samples, idx, begin, end, obs_size);

        LossAndGrad pl = clipped_loss(batch, params.policy, hp, mask);
        check_finite(pl.value, "clipped objective", episode_index);
        Eigen::VectorXd pg = -pl.grad;
        global_norm_clip(pg, hp.max_grad_norm);
        policy_opt.step(params.policy.params(), pg);

        LossAndGrad vl = value_loss(batch, params.value);
        check_finite(vl.value, "value loss", episode_index);
        Eigen::VectorXd vg = hp.value_coef * vl.grad;
        global_norm_clip(vg, hp.max_grad_norm);
        value_opt.step(params.value.params(), vg);
      }
    }
    params.sync();
    if (on_episode) on_episode(stats);
  }
  result.episodes_trained = episodes;
  return result;
}

RolloutOutcome rollout(const PolicyParams& params, Environment& env, RolloutMode mode, std::mt19937_64* rng,
                       const std::vector<bool>* mask) {
  if (mode == RolloutMode::Sampled && rng == nullptr) {
    throw Error(ErrorCode::InvalidArgument, "sampled rollouts need a random generator");
  }
  RolloutOutcome out;
  Observation obs = env.observation();
  while (!env.done()) {
    const Eigen::VectorXd probs = forward_policy(obs, params.policy, mask);
    const int a = mode == RolloutMode::Greedy ? argmax_index(probs) : sample_index(probs, *rng);
    out.actions.push_back(a);
    obs = env.step({a}).observation;
  }
  out.allocation = env.allocation();
  out.energy_efficiency = env.energy_efficiency();
  out.cumulative_reward = env.cumulative_reward();
  out.accuracy = static_cast<double>(env.accepted_steps()) / static_cast<double>(env.n_eds());
  return out;
}

std::vector<double> action_distribution(const PolicyParams& params, Environment& env, long episodes,
                                        RolloutMode mode, std::uint64_t seed, long first_episode,
                                        const std::vector<bool>* mask) {
  std::vector<double> counts(static_cast<std::size_t>(env.num_actions()), 0.0);
  std::mt19937_64 rng(seed);
  double total = 0.0;
  for (long e = 0; e < episodes; ++e) {
    env.reset_episode(static_cast<std::uint64_t>(first_episode + e));
    const auto out = rollout(params, env, mode, &rng, mask);
    for (int a : out.actions) {
      counts[static_cast<std::size_t>(a)] += 1.0;
      total += 1.0;
    }
  }
  if (total > 0.0) {
    for (double& c : counts) c /= total;
  }
  return counts;
}

std::vector<bool> reduce_action_space(const std::vector<double>& distribution, double threshold) {
  std::vector<bool> keep(distribution.size());
  bool any = false;
  for (std::size_t a = 0; a < distribution.size(); ++a) {
    keep[a] = distribution[a] > threshold;
    any = any || keep[a];
  }
  if (!any) throw Error(ErrorCode::AllActionsEliminated, "no action has probability above the threshold");
  return keep;
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

json mlp_to_json(const Mlp& net) {
  json layers = json::array();
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    const auto w = net.weight(l);
    std::vector<double> row_major;
    row_major.reserve(static_cast<std::size_t>(w.size()));
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) row_major.push_back(w(r, c));
    }
    const auto b = net.bias(l);
    layers.push_back({{"rows", w.rows()},
                      {"cols", w.cols()},
                      {"weights", row_major},
                      {"bias", std::vector<double>(b.data(), b.data() + b.size())}});
  }
  return {{"layer_sizes", net.layer_sizes()}, {"layers", layers}};
}

Mlp mlp_from_json(const json& j) {
  Mlp net(j.at("layer_sizes").get<std::vector<int>>());
  const auto& layers = j.at("layers");
  if (layers.size() != net.num_layers()) throw Error(ErrorCode::CheckpointMismatch, "layer count mismatch");
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    const auto& layer = layers[l];
    auto w = net.weight(l);
    const auto weights = layer.at("weights").get<std::vector<double>>();
    const auto bias = layer.at("bias").get<std::vector<double>>();
    if (layer.at("rows").get<Eigen::Index>() != w.rows() || layer.at("cols").get<Eigen::Index>() != w.cols() ||
        static_cast<Eigen::Index>(weights.size()) != w.size() || static_cast<Eigen::Index>(bias.size()) != w.rows()) {
      throw Error(ErrorCode::CheckpointMismatch, "layer " + std::to_string(l) + " has inconsistent dimensions");
    }
    std::size_t k = 0;
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = weights[k++];
    }
    net.bias(l) = Eigen::Map<const Eigen::VectorXd>(bias.data(), static_cast<Eigen::Index>(bias.size()));
  }
  return net;
}

json hyperparams_to_json(const Hyperparams& hp) {
  return {{"gamma", hp.gamma},
          {"clip_epsilon", hp.clip_epsilon},
          {"chi", hp.chi},
          {"learning_rate", hp.learning_rate},
          {"minibatch_size", hp.minibatch_size},
          {"epochs_per_update", hp.epochs_per_update},
          {"replay_capacity", hp.replay_capacity},
          {"hidden_layers", hp.hidden_layers},
          {"value_coef", hp.value_coef},
          {"entropy_coef", hp.entropy_coef},
          {"max_grad_norm", hp.max_grad_norm},
          {"reward_scale", hp.reward_scale},
          {"normalize_advantages", hp.normalize_advantages},
          {"seed", hp.seed}};
}

Hyperparams hyperparams_from_json(const json& j) {
  Hyperparams hp;
  hp.gamma = j.at("gamma").get<double>();
  hp.clip_epsilon = j.at("clip_epsilon").get<double>();
  hp.chi = j.at("chi").get<double>();
  hp.learning_rate = j.at("learning_rate").get<double>();
  hp.minibatch_size = j.at("minibatch_size").get<int>();
  hp.epochs_per_update = j.at("epochs_per_update").get<int>();
  hp.replay_capacity = j.at("replay_capacity").get<int>();
  hp.hidden_layers = j.at("hidden_layers").get<std::vector<int>>();
  hp.value_coef = j.at("value_coef").get<double>();
  hp.entropy_coef = j.at("entropy_coef").get<double>();
  hp.max_grad_norm = j.at("max_grad_norm").get<double>();
  hp.reward_scale = j.at("reward_scale").get<double>();
  hp.normalize_advantages = j.at("normalize_advantages").get<bool>();
  hp.seed = j.at("seed").get<std::uint64_t>();
  return hp;
}

}  // namespace

std::string checkpoint_to_json(const Checkpoint& ckpt) {
  json j{{"format", "uavlora-ppo-checkpoint"},
         {"version", kCheckpointVersion},
         {"n_eds", ckpt.n_eds},
         {"episodes_trained", ckpt.episodes_trained},
         {"hyperparams", hyperparams_to_json(ckpt.hp)},
         {"policy", mlp_to_json(ckpt.params.policy)},
         {"value", mlp_to_json(ckpt.params.value)}};
  j["action_filter"] = ckpt.action_filter ? json(*ckpt.action_filter) : json(nullptr);
  return j.dump(1);
}

Checkpoint checkpoint_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::CheckpointMismatch, std::string("malformed checkpoint: ") + e.what());
  }
  try {
    if (j.at("format").get<std::string>() != "uavlora-ppo-checkpoint") {
      throw Error(ErrorCode::CheckpointMismatch, "not a policy checkpoint");
    }
    if (j.at("version").get<int>() != kCheckpointVersion) {
      throw Error(ErrorCode::CheckpointMismatch, "unsupported checkpoint version " + j.at("version").dump());
    }
    Checkpoint ckpt;
    ckpt.n_eds = j.at("n_eds").get<std::size_t>();
    ckpt.episodes_trained = j.at("episodes_trained").get<long>();
    ckpt.hp = hyperparams_from_json(j.at("hyperparams"));
    ckpt.params.policy = mlp_from_json(j.at("policy"));
    ckpt.params.value = mlp_from_json(j.at("value"));
    if (ckpt.params.policy.input_size() != ckpt.params.value.input_size() ||
        ckpt.params.policy.input_size() != static_cast<int>(3 * ckpt.n_eds)) {
      throw Error(ErrorCode::CheckpointMismatch, "network input sizes do not match n_eds");
    }
    if (!j.at("action_filter").is_null()) ckpt.action_filter = j.at("action_filter").get<std::vector<bool>>();
    ckpt.params.sync();
    return ckpt;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::CheckpointMismatch, std::string("incomplete checkpoint: ") + e.what());
  }
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
  out << checkpoint_to_json(ckpt) << '\n';
  if (!out) throw Error(ErrorCode::IoError, "failed writing " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return checkpoint_from_json(ss.str());
}

}  // namespace uavlora
