#include "uavlora/env.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>

#include "json.hpp"

#include "uavlora/error.hpp"
#include "uavlora/rng.hpp"

namespace uavlora {

int num_actions(const NetworkConfig& cfg) { return kNumSf * static_cast<int>(cfg.tp_levels_dbm.size()); }

DecodedAction decode(Action action, const NetworkConfig& cfg) {
  const int levels = static_cast<int>(cfg.tp_levels_dbm.size());
  if (action.index < 0 || action.index >= num_actions(cfg)) {
    throw Error(ErrorCode::InvalidArgument, "action index " + std::to_string(action.index) + " out of range");
  }
  const int tp_level = action.index % levels;
  return {SpreadingFactor(kMinSf + action.index / levels),
          TransmitPowerDbm{cfg.tp_levels_dbm[static_cast<std::size_t>(tp_level)]}, tp_level};
}

Action encode(SpreadingFactor sf, int tp_level, const NetworkConfig& cfg) {
  const int levels = static_cast<int>(cfg.tp_levels_dbm.size());
  if (tp_level < 0 || tp_level >= levels) throw Error(ErrorCode::InvalidArgument, "TP level out of range");
  return {sf.index() * levels + tp_level};
}

Environment::Environment(NetworkConfig net, EpisodeConfig episode) : net_(std::move(net)), episode_(episode) {
  net_.validate();
  if (episode_.n_eds == 0) throw Error(ErrorCode::InvalidArgument, "episode needs at least one ED");
  reset_episode(0);
  next_episode_ = 0;
}

std::uint64_t Environment::topology_seed(std::uint64_t episode_index) const {
  return mix_seed(episode_.seed, episode_index);
}

Observation Environment::reset() { return reset_episode(next_episode_); }

Observation Environment::reset_episode(std::uint64_t episode_index) {
  next_episode_ = episode_index + 1;
  return reset_with(generate_topology(episode_.n_eds, episode_.area, episode_.gateway, topology_seed(episode_index),
                                      net_.channel, episode_.shadowing));
}

Observation Environment::reset_with(Topology topo) {
  if (topo.size() != episode_.n_eds) {
    throw Error(ErrorCode::ShapeMismatch, "topology size differs from the configured episode length");
  }
  topo.validate();
  topo_ = std::move(topo);
  eval_.emplace(topo_, net_);
  step_ = 0;
  cumulative_reward_ = 0.0;
  accepted_ = 0;
  trace_.clear();

  order_.resize(topo_.size());
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  if (episode_.order == ServiceOrder::Shuffled) {
    std::mt19937_64 rng(mix_seed(topo_.seed, 0x6f726472ULL));
    std::shuffle(order_.begin(), order_.end(), rng);
  }

  // Best case: a lone ED right below the gateway at full power.
  const Position3D below{topo_.gateway.x, topo_.gateway.y, 0.0};
  const double best_loss = a2g_path_loss(below, topo_.gateway, net_.channel);
  const double best_snr = dbm_to_mw(net_.p_max_dbm) / (std::pow(10.0, 0.1 * best_loss) * net_.noise_power_mw());
  rate_scale_ = shannon_capacity(best_snr, net_.phy.bandwidth_hz);
  return observation();
}

std::size_t Environment::current_ed() const {
  if (done()) throw Error(ErrorCode::EpisodeFinished, "episode already finished");
  return order_[step_];
}

Observation Environment::observation() const {
  const std::size_t n = topo_.size();
  const double tp_lo = net_.tp_levels_dbm.front();
  const double tp_span = net_.tp_levels_dbm.back() - tp_lo;
  Observation obs;
  obs.features.assign(3 * n, 0.0);
  const auto& state = eval_->state();
  for (std::size_t i = 0; i < n; ++i) {
    if (!state[i]) {
      obs.features[n + i] = -1.0;
      continue;
    }
    obs.features[i] = (state[i]->sf.value() - 6) / 6.0;
    obs.features[n + i] = tp_span > 0.0 ? (state[i]->tp.value - tp_lo) / tp_span : 0.0;
    obs.features[2 * n + i] = std::clamp(eval_->capacity_of(i) / rate_scale_, 0.0, 1.0);
  }
  return obs;
}

std::vector<bool> Environment::action_mask() const {
  const std::size_t ed = current_ed();
  const double loss = eval_->path_loss_db()[ed];
  std::vector<bool> mask(static_cast<std::size_t>(num_actions()));
  for (int a = 0; a < num_actions(); ++a) {
    const auto d = decode({a}, net_);
    mask[static_cast<std::size_t>(a)] =
        check_c1(eval_->state(), d.sf, net_) && check_c2_with_loss(loss, d.sf, d.tp, net_);
  }
  return mask;
}

StepResult Environment::step(Action action) {
  if (done()) throw Error(ErrorCode::EpisodeFinished, "step() called after the last ED was served");
  const auto d = decode(action, net_);
  const std::size_t ed = order_[step_];

  StepResult result;
  result.info.ed_index = ed;
  if (!check_c1(eval_->state(), d.sf, net_)) {
    result.info.constraint_violated = ConstraintKind::C1;
  } else if (!check_c2_with_loss(eval_->path_loss_db()[ed], d.sf, d.tp, net_)) {
    result.info.constraint_violated = ConstraintKind::C2;
  } else {
    eval_->assign(ed, {d.sf, d.tp});
    ++accepted_;
  }
  ++step_;
  result.done = done();

  const bool accepted = !result.info.constraint_violated.has_value();
  if (accepted) {
    if (episode_.reward_mode == RewardMode::PerStep) {
      result.reward = eval_->energy_efficiency();
    } else if (result.done && accepted_ == topo_.size()) {
      result.reward = eval_->energy_efficiency();
    }
  }
  cumulative_reward_ += result.reward;
  trace_.push_back({step_ - 1, ed, action.index, accepted, result.reward});
  result.observation = observation();
  return result;
}

void write_trace_jsonl(std::ostream& out, const std::vector<TraceEntry>& trace) {
  for (const auto& e : trace) {
    nlohmann::json j{{"step", e.step}, {"ed_index", e.ed_index}, {"action", e.action},
                     {"accepted", e.accepted}, {"reward", e.reward}};
    out << j.dump() << '\n';
  }
}

}  // namespace uavlora
