#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "uavlora/baselines.hpp"
#include "uavlora/env.hpp"
#include "uavlora/ppo.hpp"

namespace uavlora {

struct ScenarioConfig {
  std::vector<std::size_t> n_eds{6};
  Area area = Area::square_km2(2.0);
  Position3D gateway = Area::square_km2(2.0).center(300.0);
  /// Gateway pose after relocation (action-space-reduction workflow).
  Position3D relocated_gateway{0.0, 0.0, 300.0};
  long episodes = 2000;
  long retrain_episodes = 2000;
  int eval_topologies = 20;
  std::vector<std::uint64_t> seeds{1};
  bool shadowing = true;
  RewardMode reward_mode = RewardMode::PerStep;
  ServiceOrder order = ServiceOrder::Ascending;
};

struct AsrConfig {
  double threshold = 0.001;
  long distribution_episodes = 200;
  /// Window and level used to locate where a learning curve plateaus.
  int plateau_window = 100;
  double plateau_fraction = 0.95;
};

struct ExperimentConfig {
  ScenarioConfig scenario;
  NetworkConfig network;
  Hyperparams hp;
  GAConfig ga;
  AsrConfig asr;
  std::string output_dir = "results";

  /// Throws Error(ConfigError) naming the offending section.
  void validate() const;
  EpisodeConfig episode_config(std::size_t n_eds, const Position3D& gateway) const;
};

/// Parses the YAML experiment document. Unknown keys and invalid values raise
/// Error(ConfigError) with a "<source>:<line>:" prefix.
ExperimentConfig parse_config(const std::string& text, const std::string& source_name = "<config>");
ExperimentConfig load_config(const std::string& path);
/// Canonical JSON form of the resolved configuration (hashed into the manifest).
std::string config_to_json(const ExperimentConfig& cfg);
std::string sha256_hex(const std::string& data);

/// Episode at which the full-window moving average of `values` first reaches
/// `fraction` of the mean over the last 10% of the curve. Returns the 1-based
/// episode count (at least `window` when the curve is that long).
long plateau_episode(const std::vector<double>& values, int window, double fraction);
std::vector<double> moving_average(const std::vector<double>& values, int window);

// Evaluation episodes are drawn far past any training index of the same seed stream.
inline constexpr std::uint64_t kEvalEpisodeOffset = 1'000'000'000ULL;

struct SchemeScore {
  std::string scheme;
  std::vector<double> ee;
  std::vector<double> accuracy;

  double mean_ee() const;
  double std_ee() const;
  double mean_accuracy() const;
};

/// Greedy policy and every baseline on the same held-out topologies.
std::vector<SchemeScore> compare_schemes(const ExperimentConfig& cfg, const Checkpoint& ckpt);

struct PolicyScore {
  double mean_ee = 0.0;
  double accuracy = 0.0;
};

PolicyScore evaluate_policy(const ExperimentConfig& cfg, const PolicyParams& params, std::size_t n_eds,
                            const Position3D& gateway, const std::vector<bool>* mask = nullptr);

struct RunManifest {
  std::string command;
  std::string config_hash;
  std::string code_version;
  std::vector<std::pair<std::string, std::string>> artifacts;  // path, CSV schema or format
  std::map<std::string, double> timings_s;
};

void write_manifest(const std::string& output_dir, const RunManifest& manifest);

struct LinkBudgetRow {
  int sf = 0;
  double snr_limit_db = 0.0;
  double sensitivity_dbm = 0.0;
  double data_rate_bps = 0.0;
  double max_distance_m = 0.0;
  double max_horizontal_m = 0.0;
};

/// 3D distance at which the shadowing-free A2G link at `tp_dbm` lands exactly on
/// the SF's sensitivity, by bisection to 0.1 m. Throws Error(NoSolution).
double max_decodable_distance(SpreadingFactor sf, double tp_dbm, double altitude_m, const NetworkConfig& cfg);
std::vector<LinkBudgetRow> link_budget(const NetworkConfig& cfg, double tp_dbm, double altitude_m);

// Subcommands. Each writes its artifacts plus manifest.json into cfg.output_dir.
RunManifest cmd_train(const ExperimentConfig& cfg);
RunManifest cmd_compare(const ExperimentConfig& cfg, const std::string& checkpoint_path);
RunManifest cmd_asr(const ExperimentConfig& cfg, const std::string& checkpoint_path);
RunManifest cmd_linkbudget(const ExperimentConfig& cfg, std::optional<double> tp_dbm, double sweep_step_m);

/// Entry point shared by the executable and the tests.
int run_cli(int argc, const char* const* argv);

}  // namespace uavlora
