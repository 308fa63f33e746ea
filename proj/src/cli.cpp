#include <cstdlib>
#include <filesystem>
#include <iostream>

#include "CLI11.hpp"
#include "uavlora/error.hpp"
#include "uavlora/experiment.hpp"
#include "uavlora/io.hpp"
#include "uavlora/rng.hpp"

namespace uavlora {

namespace {

enum ExitCode : int { kOk = 0, kFailure = 1, kUsage = 2, kInfeasible = 3 };

struct Overrides {
  std::string config_path;
  std::string output_dir;
  std::vector<int> n_eds;
  std::vector<std::uint64_t> seeds;
  long episodes = 0;
  long retrain_episodes = 0;
  int eval_topologies = 0;
  int generations = 0;
  std::string reward_mode;
};

ExperimentConfig resolve(const Overrides& o) {
  ExperimentConfig cfg = o.config_path.empty() ? ExperimentConfig{} : load_config(o.config_path);
  if (const char* env = std::getenv("UAVLORA_OUTPUT_DIR"); env && *env) cfg.output_dir = env;
  if (!o.output_dir.empty()) cfg.output_dir = o.output_dir;
  if (!o.n_eds.empty()) {
    cfg.scenario.n_eds.clear();
    for (int n : o.n_eds) {
      if (n <= 0) throw Error(ErrorCode::ConfigError, "--n-eds values must be positive");
      cfg.scenario.n_eds.push_back(static_cast<std::size_t>(n));
    }
  }
  if (!o.seeds.empty()) cfg.scenario.seeds = o.seeds;
  if (o.episodes > 0) cfg.scenario.episodes = o.episodes;
  if (o.retrain_episodes > 0) cfg.scenario.retrain_episodes = o.retrain_episodes;
  if (o.eval_topologies > 0) cfg.scenario.eval_topologies = o.eval_topologies;
  if (o.generations > 0) cfg.ga.generations = o.generations;
  if (o.reward_mode == "per_step") cfg.scenario.reward_mode = RewardMode::PerStep;
  if (o.reward_mode == "terminal") cfg.scenario.reward_mode = RewardMode::Terminal;
  cfg.validate();
  return cfg;
}

void report(const RunManifest& m) {
  for (const auto& [path, schema] : m.artifacts) std::cout << "wrote " << path << '\n';
}

Topology load_topology(const std::string& path) { return topology_from_json(read_text_file(path)); }

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Energy-efficient SF/TP allocation for LoRa networks served by a flying gateway", "uavlora"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", std::string(UAVLORA_VERSION));

  Overrides o;
  app.add_option("-c,--config", o.config_path, "YAML experiment configuration")->check(CLI::ExistingFile);
  app.add_option("-o,--output-dir", o.output_dir, "Directory for artifacts (overrides config and UAVLORA_OUTPUT_DIR)");
  app.add_option("--n-eds", o.n_eds, "Network densities to run");
  app.add_option("--seed", o.seeds, "Topology seeds");
  app.add_option("--episodes", o.episodes, "Training episodes");
  app.add_option("--retrain-episodes", o.retrain_episodes, "Retraining episodes for the asr workflow");
  app.add_option("--eval-topologies", o.eval_topologies, "Held-out topologies per seed");
  app.add_option("--generations", o.generations, "GA generations");
  app.add_option("--reward-mode", o.reward_mode, "per_step or terminal")
      ->check(CLI::IsMember({"per_step", "terminal"}));

  auto* train_cmd = app.add_subcommand("train", "Train one PPO agent per network density");
  std::string checkpoint;
  auto* compare_cmd = app.add_subcommand("compare", "Compare the trained agent with the baseline schemes");
  compare_cmd->add_option("--checkpoint", checkpoint, "Checkpoint written by train")->required()->check(CLI::ExistingFile);
  auto* asr_cmd = app.add_subcommand("asr", "Relocate the gateway and retrain with and without action-space reduction");
  asr_cmd->add_option("--checkpoint", checkpoint, "Checkpoint trained on the initial scenario")
      ->required()
      ->check(CLI::ExistingFile);

  auto* lb_cmd = app.add_subcommand("linkbudget", "Sensitivity and maximum range per SF");
  std::optional<double> tp;
  double step_m = 50.0;
  lb_cmd->add_option("--tp", tp, "Transmit power in dBm (default: p_max)");
  lb_cmd->add_option("--step", step_m, "Sweep resolution in meters")->check(CLI::PositiveNumber);

  auto* validate_cmd = app.add_subcommand("validate", "Check an allocation against C1, C2 and the power limits");
  std::string topology_path, allocation_path;
  validate_cmd->add_option("--topology", topology_path, "Topology JSON")->required()->check(CLI::ExistingFile);
  validate_cmd->add_option("--allocation", allocation_path, "Allocation JSON")->required()->check(CLI::ExistingFile);

  auto* topo_cmd = app.add_subcommand("topology", "Write the topology of one episode as JSON");
  std::uint64_t episode_index = 0;
  std::string out_path;
  topo_cmd->add_option("--episode", episode_index, "Episode index within the seed stream");
  topo_cmd->add_option("--out", out_path, "Output file")->required();

  auto* alloc_cmd = app.add_subcommand("allocate", "Run a baseline scheme on a topology");
  std::string scheme = "ga";
  alloc_cmd->add_option("--topology", topology_path, "Topology JSON")->required()->check(CLI::ExistingFile);
  alloc_cmd->add_option("--scheme", scheme, "random, distance, ga or brute_force")
      ->check(CLI::IsMember({"random", "distance", "ga", "brute_force"}));
  alloc_cmd->add_option("--out", out_path, "Output file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  }

  try {
    const ExperimentConfig cfg = resolve(o);
    if (*train_cmd) report(cmd_train(cfg));
    if (*compare_cmd) report(cmd_compare(cfg, checkpoint));
    if (*asr_cmd) report(cmd_asr(cfg, checkpoint));
    if (*lb_cmd) report(cmd_linkbudget(cfg, tp, step_m));
    if (*validate_cmd) {
      const Topology topo = load_topology(topology_path);
      const AllocationState alloc = allocation_from_json(read_text_file(allocation_path));
      const ValidationReport rep = validate_allocation(alloc, topo, cfg.network);
      for (const auto& v : rep.violations) std::cout << to_string(v) << '\n';
      std::cout << (rep.feasible() ? "feasible" : "infeasible") << '\n';
      return rep.feasible() ? kOk : kInfeasible;
    }
    if (*topo_cmd) {
      EpisodeConfig ep = cfg.episode_config(cfg.scenario.n_eds.front(), cfg.scenario.gateway);
      Environment env(cfg.network, ep);
      env.reset_episode(episode_index);
      write_text_file_atomic(out_path, topology_to_json(env.topology()));
      std::cout << "wrote " << out_path << '\n';
    }
    if (*alloc_cmd) {
      const Topology topo = load_topology(topology_path);
      AllocationState alloc(topo.size());
      if (scheme == "random") alloc = random_allocate(topo, cfg.network, mix_seed(cfg.scenario.seeds.front(), topo.seed));
      else if (scheme == "distance") alloc = distance_allocate(topo, cfg.network);
      else if (scheme == "ga") alloc = ga_allocate(topo, cfg.network, cfg.ga).allocation;
      else alloc = brute_force_allocate(topo, cfg.network);
      write_text_file_atomic(out_path, allocation_to_json(alloc, summarize(alloc, topo, cfg.network), scheme));
      std::cout << "wrote " << out_path << '\n';
    }
  } catch (const Error& e) {
    std::cerr << "error[" << to_string(e.code()) << "]: " << e.detail() << '\n';
    return kFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kOk;
}

}  // namespace uavlora
