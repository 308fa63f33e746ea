#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include "uavlora/network.hpp"

namespace uavlora {

/// Flat index into the SF x TP grid: sf = 7 + index / levels, tp = levels[index % levels].
struct Action {
  int index = 0;

  friend bool operator==(Action, Action) = default;
};

struct DecodedAction {
  SpreadingFactor sf;
  TransmitPowerDbm tp;
  int tp_level = 0;
};

int num_actions(const NetworkConfig& cfg);
DecodedAction decode(Action action, const NetworkConfig& cfg);
Action encode(SpreadingFactor sf, int tp_level, const NetworkConfig& cfg);

enum class RewardMode {
  PerStep,   // EE of the allocated prefix after each accepted step
  Terminal,  // EE of the final allocation, paid once if every ED was served
};

enum class ServiceOrder {
  Ascending,
  Shuffled,
};

struct EpisodeConfig {
  std::size_t n_eds = 6;
  Area area = Area::square_km2(2.0);
  Position3D gateway = Area::square_km2(2.0).center(300.0);
  std::uint64_t seed = 1;
  bool shadowing = true;
  RewardMode reward_mode = RewardMode::PerStep;
  ServiceOrder order = ServiceOrder::Ascending;
};

/// Feature vector of length 3N laid out as [sf codes | tp codes | data rates].
/// SF code is 0 when unallocated else (sf - 6) / 6; TP code is -1 when
/// unallocated else (tp - tp_min) / (tp_max - tp_min); rates are capacities
/// normalised by the best-case single-ED capacity and clamped to [0, 1].
struct Observation {
  std::vector<double> features;

  std::size_t n_eds() const { return features.size() / 3; }
  double sf_code(std::size_t i) const { return features[i]; }
  double tp_code(std::size_t i) const { return features[n_eds() + i]; }
  double rate_code(std::size_t i) const { return features[2 * n_eds() + i]; }

  friend bool operator==(const Observation&, const Observation&) = default;
};

enum class ConstraintKind { C1, C2 };

struct StepInfo {
  std::optional<ConstraintKind> constraint_violated;
  std::size_t ed_index = 0;
};

struct StepResult {
  Observation observation;
  double reward = 0.0;
  bool done = false;
  StepInfo info;
};

struct TraceEntry {
  std::size_t step = 0;
  std::size_t ed_index = 0;
  int action = 0;
  bool accepted = false;
  double reward = 0.0;
};

/// Sequential per-ED (SF, TP) assignment over one topology per episode.
class Environment {
 public:
  Environment(NetworkConfig net, EpisodeConfig episode);

  /// Starts the next episode of the configured seed stream.
  Observation reset();
  /// Starts an episode whose topology is derived from `episode_index`.
  Observation reset_episode(std::uint64_t episode_index);
  /// Starts an episode on a caller-supplied topology.
  Observation reset_with(Topology topo);

  /// Throws Error(EpisodeFinished) once N steps were taken.
  StepResult step(Action action);

  /// Entry a is true iff action a satisfies C1 and C2 for the current ED.
  std::vector<bool> action_mask() const;

  Observation observation() const;
  bool done() const { return step_ >= topo_.size(); }
  std::size_t step_index() const { return step_; }
  std::size_t current_ed() const;
  std::size_t n_eds() const { return episode_.n_eds; }
  int num_actions() const { return uavlora::num_actions(net_); }
  std::size_t observation_size() const { return 3 * episode_.n_eds; }
  double cumulative_reward() const { return cumulative_reward_; }
  std::size_t accepted_steps() const { return accepted_; }

  const Topology& topology() const { return topo_; }
  const AllocationState& allocation() const { return eval_->state(); }
  double energy_efficiency() const { return eval_->energy_efficiency(); }
  const NetworkConfig& network() const { return net_; }
  const EpisodeConfig& episode_config() const { return episode_; }
  EpisodeConfig& episode_config() { return episode_; }
  const std::vector<TraceEntry>& trace() const { return trace_; }

 private:
  std::uint64_t topology_seed(std::uint64_t episode_index) const;

  NetworkConfig net_;
  EpisodeConfig episode_;
  Topology topo_;
  std::optional<IncrementalEvaluator> eval_;
  std::vector<std::size_t> order_;
  std::size_t step_ = 0;
  std::uint64_t next_episode_ = 0;
  double cumulative_reward_ = 0.0;
  std::size_t accepted_ = 0;
  double rate_scale_ = 1.0;
  std::vector<TraceEntry> trace_;
};

/// Writes one JSON object per line: {step, ed_index, action, accepted, reward}.
void write_trace_jsonl(std::ostream& out, const std::vector<TraceEntry>& trace);

}  // namespace uavlora
