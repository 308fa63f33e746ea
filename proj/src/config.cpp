#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include <openssl/evp.h>
#include <yaml-cpp/yaml.h>

#include "json.hpp"
#include "uavlora/error.hpp"
#include "uavlora/experiment.hpp"
#include "uavlora/io.hpp"

namespace uavlora {

namespace {

class Reader {
 public:
  explicit Reader(std::string source) : source_(std::move(source)) {}

  [[noreturn]] void fail(const YAML::Node& node, const std::string& what) const {
    std::ostringstream os;
    os << source_;
    if (node.IsDefined() && node.Mark().line >= 0) os << ':' << node.Mark().line + 1;
    os << ": " << what;
    throw Error(ErrorCode::ConfigError, os.str());
  }

  void require_map(const YAML::Node& node, const std::string& path) const {
    if (!node.IsMap()) fail(node, path + " must be a mapping");
  }

  // Rejects keys outside `allowed`, so typos never silently fall back to defaults.
  void check_keys(const YAML::Node& node, const std::string& path, const std::set<std::string>& allowed) const {
    for (const auto& kv : node) {
      const auto key = kv.first.as<std::string>();
      if (!allowed.contains(key)) fail(kv.first, "unknown key '" + join(path, key) + "'");
    }
  }

  template <class T>
  void read(const YAML::Node& parent, const std::string& path, const char* key, T& out) const {
    const YAML::Node node = parent[key];
    if (!node.IsDefined() || node.IsNull()) return;
    try {
      out = node.as<T>();
    } catch (const YAML::Exception&) {
      fail(node, "'" + join(path, key) + "' has the wrong type");
    }
  }

  static std::string join(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
  }

  // Runs a sub-config validator, attaching the section's line to its message.
  void validated(const YAML::Node& node, const std::string& path, const std::function<void()>& check) const {
    try {
      check();
    } catch (const Error& e) {
      if (e.code() == ErrorCode::ConfigError) throw;
      fail(node, path + ": " + e.detail());
    }
  }

 private:
  std::string source_;
};

Position3D read_gateway(const Reader& r, const YAML::Node& node, const std::string& path, const Area& area,
                        double altitude_m) {
  if (node.IsScalar()) {
    const auto name = node.as<std::string>();
    if (name == "center") return area.center(altitude_m);
    if (name == "corner") return {0.0, 0.0, altitude_m};
    r.fail(node, "'" + path + "' must be center, corner or a {x_m, y_m, altitude_m} mapping");
  }
  r.require_map(node, path);
  r.check_keys(node, path, {"x_m", "y_m", "altitude_m"});
  Position3D p{0.0, 0.0, altitude_m};
  r.read(node, path, "x_m", p.x);
  r.read(node, path, "y_m", p.y);
  r.read(node, path, "altitude_m", p.z);
  return p;
}

void read_scenario(const Reader& r, const YAML::Node& node, ScenarioConfig& s) {
  const std::string path = "scenario";
  r.require_map(node, path);
  r.check_keys(node, path,
               {"n_eds", "area_km2", "area", "gateway", "gateway_altitude_m", "relocated_gateway", "episodes",
                "retrain_episodes", "eval_topologies", "seeds", "shadowing", "reward_mode", "service_order"});
  if (const auto n = node["n_eds"]; n.IsDefined()) {
    if (n.IsSequence()) {
      s.n_eds.clear();
      for (const auto& item : n) {
        int v = 0;
        try {
          v = item.as<int>();
        } catch (const YAML::Exception&) {
          r.fail(item, "'scenario.n_eds' entries must be integers");
        }
        if (v <= 0) r.fail(item, "'scenario.n_eds' entries must be positive");
        s.n_eds.push_back(static_cast<std::size_t>(v));
      }
      if (s.n_eds.empty()) r.fail(n, "'scenario.n_eds' must not be empty");
    } else {
      int v = 0;
      r.read(node, path, "n_eds", v);
      if (v <= 0) r.fail(n, "'scenario.n_eds' must be positive");
      s.n_eds = {static_cast<std::size_t>(v)};
    }
  }
  if (node["area_km2"].IsDefined() && node["area"].IsDefined())
    r.fail(node["area"], "give either 'scenario.area_km2' or 'scenario.area', not both");
  if (const auto a = node["area_km2"]; a.IsDefined()) {
    double km2 = 0.0;
    r.read(node, path, "area_km2", km2);
    if (!(km2 > 0.0)) r.fail(a, "'scenario.area_km2' must be positive");
    s.area = Area::square_km2(km2);
  }
  if (const auto a = node["area"]; a.IsDefined()) {
    r.require_map(a, "scenario.area");
    r.check_keys(a, "scenario.area", {"width_m", "height_m"});
    r.read(a, "scenario.area", "width_m", s.area.width_m);
    r.read(a, "scenario.area", "height_m", s.area.height_m);
    if (!(s.area.width_m > 0.0 && s.area.height_m > 0.0)) r.fail(a, "'scenario.area' sides must be positive");
  }
  double altitude = 300.0;
  r.read(node, path, "gateway_altitude_m", altitude);
  if (!(altitude > 0.0)) r.fail(node["gateway_altitude_m"], "'scenario.gateway_altitude_m' must be positive");
  s.gateway = s.area.center(altitude);
  s.relocated_gateway = {0.0, 0.0, altitude};
  if (const auto g = node["gateway"]; g.IsDefined())
    s.gateway = read_gateway(r, g, "scenario.gateway", s.area, altitude);
  if (const auto g = node["relocated_gateway"]; g.IsDefined())
    s.relocated_gateway = read_gateway(r, g, "scenario.relocated_gateway", s.area, altitude);

  r.read(node, path, "episodes", s.episodes);
  if (s.episodes <= 0) r.fail(node["episodes"], "'scenario.episodes' must be positive");
  r.read(node, path, "retrain_episodes", s.retrain_episodes);
  if (s.retrain_episodes <= 0) r.fail(node["retrain_episodes"], "'scenario.retrain_episodes' must be positive");
  r.read(node, path, "eval_topologies", s.eval_topologies);
  if (s.eval_topologies <= 0) r.fail(node["eval_topologies"], "'scenario.eval_topologies' must be positive");
  if (const auto seeds = node["seeds"]; seeds.IsDefined()) {
    if (seeds.IsSequence()) {
      s.seeds.clear();
      for (const auto& item : seeds) {
        try {
          s.seeds.push_back(item.as<std::uint64_t>());
        } catch (const YAML::Exception&) {
          r.fail(item, "'scenario.seeds' entries must be non-negative integers");
        }
      }
    } else {
      std::uint64_t v = 0;
      r.read(node, path, "seeds", v);
      s.seeds = {v};
    }
    if (s.seeds.empty()) r.fail(seeds, "'scenario.seeds' must not be empty");
  }
  r.read(node, path, "shadowing", s.shadowing);
  if (const auto m = node["reward_mode"]; m.IsDefined()) {
    const auto v = m.as<std::string>();
    if (v == "per_step") s.reward_mode = RewardMode::PerStep;
    else if (v == "terminal") s.reward_mode = RewardMode::Terminal;
    else r.fail(m, "'scenario.reward_mode' must be per_step or terminal");
  }
  if (const auto m = node["service_order"]; m.IsDefined()) {
    const auto v = m.as<std::string>();
    if (v == "ascending") s.order = ServiceOrder::Ascending;
    else if (v == "shuffled") s.order = ServiceOrder::Shuffled;
    else r.fail(m, "'scenario.service_order' must be ascending or shuffled");
  }
}

void read_phy(const Reader& r, const YAML::Node& node, LoRaPhyConfig& phy) {
  const std::string path = "phy";
  r.require_map(node, path);
  r.check_keys(node, path,
               {"bandwidth_hz", "coding_rate", "noise_figure_db", "snr_limits_db", "carrier_frequency_hz",
                "noise_density_dbm_per_hz"});
  r.read(node, path, "bandwidth_hz", phy.bandwidth_hz);
  r.read(node, path, "coding_rate", phy.coding_rate);
  r.read(node, path, "noise_figure_db", phy.noise_figure_db);
  r.read(node, path, "carrier_frequency_hz", phy.carrier_frequency_hz);
  r.read(node, path, "noise_density_dbm_per_hz", phy.noise_density_dbm_per_hz);
  if (const auto lim = node["snr_limits_db"]; lim.IsDefined()) {
    std::vector<double> v;
    r.read(node, path, "snr_limits_db", v);
    if (v.size() != phy.snr_limits_db.size()) r.fail(lim, "'phy.snr_limits_db' needs one entry per SF (6)");
    std::copy(v.begin(), v.end(), phy.snr_limits_db.begin());
  }
  r.validated(node, path, [&] { phy.validate(); });
}

void read_channel(const Reader& r, const YAML::Node& node, ChannelConfig& ch) {
  const std::string path = "channel";
  r.require_map(node, path);
  r.check_keys(node, path,
               {"beta_los", "beta_nlos", "sigma_los_db", "sigma_nlos_db", "sigmoid_alpha", "sigmoid_lambda",
                "reference_distance_m", "carrier_frequency_hz", "gaussian_noise_power_dbm"});
  r.read(node, path, "beta_los", ch.beta_los);
  r.read(node, path, "beta_nlos", ch.beta_nlos);
  r.read(node, path, "sigma_los_db", ch.sigma_los_db);
  r.read(node, path, "sigma_nlos_db", ch.sigma_nlos_db);
  r.read(node, path, "sigmoid_alpha", ch.sigmoid_alpha);
  r.read(node, path, "sigmoid_lambda", ch.sigmoid_lambda);
  r.read(node, path, "reference_distance_m", ch.reference_distance_m);
  r.read(node, path, "carrier_frequency_hz", ch.carrier_frequency_hz);
  if (node["gaussian_noise_power_dbm"].IsDefined() && !node["gaussian_noise_power_dbm"].IsNull()) {
    double v = 0.0;
    r.read(node, path, "gaussian_noise_power_dbm", v);
    ch.gaussian_noise_power_dbm = v;
  }
  r.validated(node, path, [&] { ch.validate(); });
}

void read_network(const Reader& r, const YAML::Node& node, NetworkConfig& net) {
  const std::string path = "network";
  r.require_map(node, path);
  r.check_keys(node, path, {"tp_levels_dbm", "p_max_dbm", "circuit_power_mw", "max_eds_per_sf"});
  r.read(node, path, "tp_levels_dbm", net.tp_levels_dbm);
  r.read(node, path, "p_max_dbm", net.p_max_dbm);
  r.read(node, path, "circuit_power_mw", net.circuit_power_mw);
  r.read(node, path, "max_eds_per_sf", net.max_eds_per_sf);
}

void read_ppo(const Reader& r, const YAML::Node& node, Hyperparams& hp) {
  const std::string path = "ppo";
  r.require_map(node, path);
  r.check_keys(node, path,
               {"gamma", "clip_epsilon", "chi", "learning_rate", "minibatch_size", "epochs_per_update",
                "replay_capacity", "hidden_layers", "value_coef", "entropy_coef", "max_grad_norm", "reward_scale",
                "normalize_advantages", "seed"});
  r.read(node, path, "gamma", hp.gamma);
  r.read(node, path, "clip_epsilon", hp.clip_epsilon);
  r.read(node, path, "chi", hp.chi);
  r.read(node, path, "learning_rate", hp.learning_rate);
  r.read(node, path, "minibatch_size", hp.minibatch_size);
  r.read(node, path, "epochs_per_update", hp.epochs_per_update);
  r.read(node, path, "replay_capacity", hp.replay_capacity);
  r.read(node, path, "hidden_layers", hp.hidden_layers);
  r.read(node, path, "value_coef", hp.value_coef);
  r.read(node, path, "entropy_coef", hp.entropy_coef);
  r.read(node, path, "max_grad_norm", hp.max_grad_norm);
  r.read(node, path, "reward_scale", hp.reward_scale);
  r.read(node, path, "normalize_advantages", hp.normalize_advantages);
  r.read(node, path, "seed", hp.seed);
  r.validated(node, path, [&] { hp.validate(); });
}

void read_ga(const Reader& r, const YAML::Node& node, GAConfig& ga) {
  const std::string path = "ga";
  r.require_map(node, path);
  r.check_keys(node, path,
               {"population_size", "elite_size", "mutation_rate", "generations", "tournament_size",
                "violation_penalty", "seed"});
  r.read(node, path, "population_size", ga.population_size);
  r.read(node, path, "elite_size", ga.elite_size);
  r.read(node, path, "mutation_rate", ga.mutation_rate);
  r.read(node, path, "generations", ga.generations);
  r.read(node, path, "tournament_size", ga.tournament_size);
  r.read(node, path, "violation_penalty", ga.violation_penalty);
  r.read(node, path, "seed", ga.seed);
  r.validated(node, path, [&] { ga.validate(); });
}

void read_asr(const Reader& r, const YAML::Node& node, AsrConfig& asr) {
  const std::string path = "asr";
  r.require_map(node, path);
  r.check_keys(node, path, {"threshold", "distribution_episodes", "plateau_window", "plateau_fraction"});
  r.read(node, path, "threshold", asr.threshold);
  r.read(node, path, "distribution_episodes", asr.distribution_episodes);
  r.read(node, path, "plateau_window", asr.plateau_window);
  r.read(node, path, "plateau_fraction", asr.plateau_fraction);
  if (!(asr.threshold >= 0.0 && asr.threshold < 1.0)) r.fail(node["threshold"], "'asr.threshold' must lie in [0, 1)");
  if (asr.distribution_episodes <= 0)
    r.fail(node["distribution_episodes"], "'asr.distribution_episodes' must be positive");
  if (asr.plateau_window <= 0) r.fail(node["plateau_window"], "'asr.plateau_window' must be positive");
  if (!(asr.plateau_fraction > 0.0 && asr.plateau_fraction <= 1.0))
    r.fail(node["plateau_fraction"], "'asr.plateau_fraction' must lie in (0, 1]");
}

nlohmann::ordered_json pos_json(const Position3D& p) { return {{"x_m", p.x}, {"y_m", p.y}, {"altitude_m", p.z}}; }

}  // namespace

void ExperimentConfig::validate() const {
  if (scenario.n_eds.empty()) throw Error(ErrorCode::ConfigError, "scenario.n_eds must not be empty");
  if (scenario.seeds.empty()) throw Error(ErrorCode::ConfigError, "scenario.seeds must not be empty");
  if (scenario.episodes <= 0 || scenario.retrain_episodes <= 0 || scenario.eval_topologies <= 0)
    throw Error(ErrorCode::ConfigError, "scenario episode counts must be positive");
  if (!(scenario.area.width_m > 0.0 && scenario.area.height_m > 0.0))
    throw Error(ErrorCode::ConfigError, "scenario.area sides must be positive");
  if (!(scenario.gateway.z > 0.0 && scenario.relocated_gateway.z > 0.0))
    throw Error(ErrorCode::ConfigError, "gateway altitude must be positive");
  network.validate();
  hp.validate();
  ga.validate();
  if (output_dir.empty()) throw Error(ErrorCode::ConfigError, "output_dir must not be empty");
}

EpisodeConfig ExperimentConfig::episode_config(std::size_t n_eds, const Position3D& gateway) const {
  EpisodeConfig ep;
  ep.n_eds = n_eds;
  ep.area = scenario.area;
  ep.gateway = gateway;
  ep.seed = scenario.seeds.front();
  ep.shadowing = scenario.shadowing;
  ep.reward_mode = scenario.reward_mode;
  ep.order = scenario.order;
  return ep;
}

ExperimentConfig parse_config(const std::string& text, const std::string& source_name) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw Error(ErrorCode::ConfigError,
                source_name + ":" + std::to_string(e.mark.line + 1) + ": " + e.msg);
  }
  const Reader r(source_name);
  ExperimentConfig cfg;
  if (root.IsNull()) return cfg;
  r.require_map(root, "top level");
  r.check_keys(root, "", {"scenario", "phy", "channel", "network", "ppo", "ga", "asr", "output_dir"});
  if (const auto n = root["scenario"]; n.IsDefined()) read_scenario(r, n, cfg.scenario);
  if (const auto n = root["phy"]; n.IsDefined()) read_phy(r, n, cfg.network.phy);
  if (const auto n = root["channel"]; n.IsDefined()) read_channel(r, n, cfg.network.channel);
  // One carrier frequency drives both the PHY and the channel unless both are given.
  if (root["phy"]["carrier_frequency_hz"].IsDefined() && !root["channel"]["carrier_frequency_hz"].IsDefined())
    cfg.network.channel.carrier_frequency_hz = cfg.network.phy.carrier_frequency_hz;
  if (const auto n = root["network"]; n.IsDefined()) {
    read_network(r, n, cfg.network);
    r.validated(n, "network", [&] { cfg.network.validate(); });
  }
  if (const auto n = root["ppo"]; n.IsDefined()) read_ppo(r, n, cfg.hp);
  if (const auto n = root["ga"]; n.IsDefined()) read_ga(r, n, cfg.ga);
  if (const auto n = root["asr"]; n.IsDefined()) read_asr(r, n, cfg.asr);
  r.read(root, "", "output_dir", cfg.output_dir);
  r.validated(root, "config", [&] { cfg.validate(); });
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const Error& e) {
    throw Error(ErrorCode::ConfigError, e.detail());
  }
  return parse_config(text, path);
}

std::string config_to_json(const ExperimentConfig& cfg) {
  using nlohmann::ordered_json;
  const auto& s = cfg.scenario;
  const auto& phy = cfg.network.phy;
  const auto& ch = cfg.network.channel;
  ordered_json j;
  j["scenario"] = {
      {"n_eds", s.n_eds},
      {"area", {{"width_m", s.area.width_m}, {"height_m", s.area.height_m}}},
      {"gateway", pos_json(s.gateway)},
      {"relocated_gateway", pos_json(s.relocated_gateway)},
      {"episodes", s.episodes},
      {"retrain_episodes", s.retrain_episodes},
      {"eval_topologies", s.eval_topologies},
      {"seeds", s.seeds},
      {"shadowing", s.shadowing},
      {"reward_mode", s.reward_mode == RewardMode::PerStep ? "per_step" : "terminal"},
      {"service_order", s.order == ServiceOrder::Ascending ? "ascending" : "shuffled"},
  };
  j["phy"] = {{"bandwidth_hz", phy.bandwidth_hz},
              {"coding_rate", phy.coding_rate},
              {"noise_figure_db", phy.noise_figure_db},
              {"snr_limits_db", phy.snr_limits_db},
              {"carrier_frequency_hz", phy.carrier_frequency_hz},
              {"noise_density_dbm_per_hz", phy.noise_density_dbm_per_hz}};
  j["channel"] = {{"beta_los", ch.beta_los},
                  {"beta_nlos", ch.beta_nlos},
                  {"sigma_los_db", ch.sigma_los_db},
                  {"sigma_nlos_db", ch.sigma_nlos_db},
                  {"sigmoid_alpha", ch.sigmoid_alpha},
                  {"sigmoid_lambda", ch.sigmoid_lambda},
                  {"reference_distance_m", ch.reference_distance_m},
                  {"carrier_frequency_hz", ch.carrier_frequency_hz},
                  {"gaussian_noise_power_dbm", ch.gaussian_noise_power_dbm
                                                   ? ordered_json(*ch.gaussian_noise_power_dbm)
                                                   : ordered_json(nullptr)}};
  j["network"] = {{"tp_levels_dbm", cfg.network.tp_levels_dbm},
                  {"p_max_dbm", cfg.network.p_max_dbm},
                  {"circuit_power_mw", cfg.network.circuit_power_mw},
                  {"max_eds_per_sf", cfg.network.max_eds_per_sf}};
  const auto& hp = cfg.hp;
  j["ppo"] = {{"gamma", hp.gamma},
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
  const auto& ga = cfg.ga;
  j["ga"] = {{"population_size", ga.population_size},
             {"elite_size", ga.elite_size},
             {"mutation_rate", ga.mutation_rate},
             {"generations", ga.generations},
             {"tournament_size", ga.tournament_size},
             {"violation_penalty", ga.violation_penalty},
             {"seed", ga.seed}};
  j["asr"] = {{"threshold", cfg.asr.threshold},
              {"distribution_episodes", cfg.asr.distribution_episodes},
              {"plateau_window", cfg.asr.plateau_window},
              {"plateau_fraction", cfg.asr.plateau_fraction}};
  j["output_dir"] = cfg.output_dir;
  return j.dump(2);
}

std::string sha256_hex(const std::string& data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw Error(ErrorCode::IoError, "sha256 digest failed");
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xF]);
  }
  return out;
}

}  // namespace uavlora
