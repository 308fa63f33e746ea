#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "uavlora/error.hpp"
#include "uavlora/experiment.hpp"
#include "uavlora/io.hpp"
#include "uavlora/rng.hpp"

#ifndef UAVLORA_VERSION
#define UAVLORA_VERSION "unknown"
#endif

namespace uavlora {

namespace {

constexpr std::uint64_t kDistributionEpisodeOffset = 2'000'000'000ULL;

// Shortest round-trip decimal form, so reruns print identical bytes.
std::string num(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

class CsvWriter {
 public:
  explicit CsvWriter(const std::vector<std::string>& header) : columns_(header.size()) { row(header); }

  void row(const std::vector<std::string>& cells) {
    if (cells.size() != columns_) throw Error(ErrorCode::ShapeMismatch, "csv row width differs from header");
    for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
    out_ << '\n';
  }

  std::string str() const { return out_.str(); }

 private:
  std::size_t columns_;
  std::ostringstream out_;
};

class Timer {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

class ArtifactSink {
 public:
  ArtifactSink(const ExperimentConfig& cfg, std::string command) {
    manifest_.command = std::move(command);
    manifest_.config_hash = sha256_hex(config_to_json(cfg));
    manifest_.code_version = UAVLORA_VERSION;
    dir_ = cfg.output_dir;
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec) throw Error(ErrorCode::IoError, "cannot create output directory " + dir_ + ": " + ec.message());
  }

  void write(const std::string& name, const std::string& schema, const std::string& content) {
    write_text_file_atomic((std::filesystem::path(dir_) / name).string(), content);
    manifest_.artifacts.emplace_back(name, schema);
  }

  void time(const std::string& what, double seconds) { manifest_.timings_s[what] = seconds; }

  RunManifest finish() {
    write_manifest(dir_, manifest_);
    return manifest_;
  }

 private:
  std::string dir_;
  RunManifest manifest_;
};

std::string suffix(std::size_t n) { return "_N" + std::to_string(n); }

std::string curve_csv(const std::vector<EpisodeStats>& curve) {
  CsvWriter csv({"episode", "reward", "accuracy"});
  for (const auto& s : curve) csv.row({std::to_string(s.episode), num(s.cumulative_reward), num(s.accuracy)});
  return csv.str();
}

std::string actions_csv(const std::vector<double>& dist, const NetworkConfig& net,
                        const std::vector<bool>* kept = nullptr) {
  std::vector<std::string> header{"action", "sf", "tp_dbm", "probability"};
  if (kept) header.emplace_back("kept");
  CsvWriter csv(header);
  for (int a = 0; a < static_cast<int>(dist.size()); ++a) {
    const auto d = decode(Action{a}, net);
    std::vector<std::string> row{std::to_string(a), std::to_string(d.sf.value()), num(d.tp.value), num(dist[a])};
    if (kept) row.emplace_back((*kept)[a] ? "1" : "0");
    csv.row(row);
  }
  return csv.str();
}

double mean(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double stddev(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

double allocation_accuracy(const AllocationState& alloc, const Topology& topo, const NetworkConfig& net) {
  return static_cast<double>(summarize(alloc, topo, net).feasible_count) / static_cast<double>(topo.size());
}

std::vector<EpisodeStats> inference_curve(const ExperimentConfig& cfg, const PolicyParams& params, std::size_t n,
                                          const Position3D& gateway, long episodes) {
  Environment env(cfg.network, cfg.episode_config(n, gateway));
  std::vector<EpisodeStats> curve;
  curve.reserve(static_cast<std::size_t>(episodes));
  for (long e = 0; e < episodes; ++e) {
    env.reset_episode(static_cast<std::uint64_t>(e));
    const auto out = rollout(params, env, RolloutMode::Greedy);
    curve.push_back({e, out.cumulative_reward, out.accuracy, out.energy_efficiency});
  }
  return curve;
}

std::vector<double> rewards_of(const std::vector<EpisodeStats>& curve) {
  std::vector<double> r;
  r.reserve(curve.size());
  for (const auto& s : curve) r.push_back(s.cumulative_reward);
  return r;
}

Checkpoint checkpoint_for(const ExperimentConfig& cfg, const std::string& path) {
  Checkpoint ckpt = load_checkpoint(path);
  const auto& ns = cfg.scenario.n_eds;
  if (std::find(ns.begin(), ns.end(), ckpt.n_eds) == ns.end()) {
    std::ostringstream os;
    os << "checkpoint was trained for N=" << ckpt.n_eds << " but the configuration asks for N=";
    for (std::size_t i = 0; i < ns.size(); ++i) os << (i ? "," : "") << ns[i];
    throw Error(ErrorCode::CheckpointMismatch, os.str());
  }
  return ckpt;
}

}  // namespace

double SchemeScore::mean_ee() const { return mean(ee); }
double SchemeScore::std_ee() const { return stddev(ee); }
double SchemeScore::mean_accuracy() const { return mean(accuracy); }

std::vector<double> moving_average(const std::vector<double>& values, int window) {
  if (window <= 0) throw Error(ErrorCode::InvalidArgument, "moving-average window must be positive");
  std::vector<double> out(values.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    sum += values[i];
    if (i >= static_cast<std::size_t>(window)) sum -= values[i - window];
    out[i] = sum / static_cast<double>(std::min<std::size_t>(i + 1, window));
  }
  return out;
}

long plateau_episode(const std::vector<double>& values, int window, double fraction) {
  if (values.empty()) throw Error(ErrorCode::InvalidArgument, "empty learning curve");
  const auto ma = moving_average(values, window);
  const std::size_t tail = std::max<std::size_t>(1, values.size() / 10);
  const double level =
      std::accumulate(values.end() - static_cast<std::ptrdiff_t>(tail), values.end(), 0.0) / static_cast<double>(tail);
  const double target = level - (1.0 - fraction) * std::abs(level);
  // Only full windows count; a shorter curve is judged on its single average.
  const std::size_t first = std::min<std::size_t>(static_cast<std::size_t>(window), ma.size()) - 1;
  for (std::size_t i = first; i < ma.size(); ++i)
    if (ma[i] >= target) return static_cast<long>(i + 1);
  return static_cast<long>(ma.size());
}

PolicyScore evaluate_policy(const ExperimentConfig& cfg, const PolicyParams& params, std::size_t n_eds,
                            const Position3D& gateway, const std::vector<bool>* mask) {
  std::vector<double> ee, acc;
  for (std::uint64_t seed : cfg.scenario.seeds) {
    EpisodeConfig ep = cfg.episode_config(n_eds, gateway);
    ep.seed = seed;
    Environment env(cfg.network, ep);
    for (int k = 0; k < cfg.scenario.eval_topologies; ++k) {
      env.reset_episode(kEvalEpisodeOffset + static_cast<std::uint64_t>(k));
      const auto out = rollout(params, env, RolloutMode::Greedy, nullptr, mask);
      ee.push_back(out.energy_efficiency);
      acc.push_back(out.accuracy);
    }
  }
  return {mean(ee), mean(acc)};
}

std::vector<SchemeScore> compare_schemes(const ExperimentConfig& cfg, const Checkpoint& ckpt) {
  const std::size_t n = ckpt.n_eds;
  const NetworkConfig& net = cfg.network;
  std::vector<SchemeScore> scores{{"drl", {}, {}}, {"random", {}, {}}, {"distance", {}, {}}, {"ga", {}, {}}};
  const bool brute = n <= 4;
  if (brute) scores.push_back({"brute_force", {}, {}});
  const std::vector<bool>* mask = ckpt.action_filter ? &*ckpt.action_filter : nullptr;

  for (std::uint64_t seed : cfg.scenario.seeds) {
    EpisodeConfig ep = cfg.episode_config(n, cfg.scenario.gateway);
    ep.seed = seed;
    Environment env(net, ep);
    for (int k = 0; k < cfg.scenario.eval_topologies; ++k) {
      env.reset_episode(kEvalEpisodeOffset + static_cast<std::uint64_t>(k));
      const Topology topo = env.topology();
      const auto drl = rollout(ckpt.params, env, RolloutMode::Greedy, nullptr, mask);
      scores[0].ee.push_back(drl.energy_efficiency);
      scores[0].accuracy.push_back(drl.accuracy);

      auto record = [&](SchemeScore& s, const AllocationState& alloc) {
        s.ee.push_back(energy_efficiency(alloc, topo, net));
        s.accuracy.push_back(allocation_accuracy(alloc, topo, net));
      };
      const std::uint64_t salt = mix_seed(seed, static_cast<std::uint64_t>(k));
      record(scores[1], random_allocate(topo, net, mix_seed(salt, 0x72616e64)));
      record(scores[2], distance_allocate(topo, net));
      GAConfig ga = cfg.ga;
      ga.seed = mix_seed(cfg.ga.seed, salt);
      record(scores[3], ga_allocate(topo, net, ga).allocation);
      if (brute) record(scores[4], brute_force_allocate(topo, net));
    }
  }
  return scores;
}

void write_manifest(const std::string& output_dir, const RunManifest& m) {
  nlohmann::ordered_json j;
  j["command"] = m.command;
  j["config_sha256"] = m.config_hash;
  j["code_version"] = m.code_version;
  j["artifacts"] = nlohmann::ordered_json::array();
  for (const auto& [path, schema] : m.artifacts) j["artifacts"].push_back({{"path", path}, {"schema", schema}});
  j["timings_s"] = m.timings_s;
  write_text_file_atomic((std::filesystem::path(output_dir) / (m.command + "_manifest.json")).string(),
                         j.dump(2) + "\n");
}

double max_decodable_distance(SpreadingFactor sf, double tp_dbm, double altitude_m, const NetworkConfig& cfg) {
  if (!(altitude_m > 0.0)) throw Error(ErrorCode::InvalidArgument, "gateway altitude must be positive");
  const Position3D gw{0.0, 0.0, altitude_m};
  const double zeta = sensitivity(sf, cfg.phy);
  auto margin = [&](double horizontal) {
    const double loss = a2g_path_loss({horizontal, 0.0, 0.0}, gw, cfg.channel, {});
    return rssi(tp_dbm, loss) - zeta;
  };
  auto to_3d = [&](double horizontal) { return std::hypot(horizontal, altitude_m); };
  if (margin(0.0) < 0.0)
    throw Error(ErrorCode::NoSolution, "SF" + std::to_string(sf.value()) + " link fails even directly below the gateway");
  double lo = 0.0;
  double hi = altitude_m;
  while (margin(hi) >= 0.0) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e9) throw Error(ErrorCode::NoSolution, "link budget does not close within 1e9 m");
  }
  while (hi - lo > 0.1) {
    const double mid = 0.5 * (lo + hi);
    (margin(mid) >= 0.0 ? lo : hi) = mid;
  }
  return to_3d(0.5 * (lo + hi));
}

std::vector<LinkBudgetRow> link_budget(const NetworkConfig& cfg, double tp_dbm, double altitude_m) {
  std::vector<LinkBudgetRow> rows;
  for (int v = kMinSf; v <= kMaxSf; ++v) {
    const SpreadingFactor sf(v);
    LinkBudgetRow row;
    row.sf = v;
    row.snr_limit_db = snr_limit(sf, cfg.phy);
    row.sensitivity_dbm = sensitivity(sf, cfg.phy);
    row.data_rate_bps = lora_data_rate(sf, cfg.phy);
    row.max_distance_m = max_decodable_distance(sf, tp_dbm, altitude_m, cfg);
    row.max_horizontal_m = std::sqrt(std::max(0.0, row.max_distance_m * row.max_distance_m - altitude_m * altitude_m));
    rows.push_back(row);
  }
  return rows;
}

RunManifest cmd_train(const ExperimentConfig& cfg) {
  cfg.validate();
  ArtifactSink sink(cfg, "train");
  for (std::size_t n : cfg.scenario.n_eds) {
    Timer timer;
    Environment env(cfg.network, cfg.episode_config(n, cfg.scenario.gateway));
    const auto result = train(env, cfg.hp, cfg.scenario.episodes);
    Checkpoint ckpt{result.params, cfg.hp, result.episodes_trained, n, std::nullopt};
    sink.write("checkpoint" + suffix(n) + ".json", "uavlora-ppo-checkpoint/v1", checkpoint_to_json(ckpt));
    sink.write("curve" + suffix(n) + ".csv", "episode,reward,accuracy/v1", curve_csv(result.curve));
    const auto dist = action_distribution(result.params, env, cfg.asr.distribution_episodes, RolloutMode::Greedy, 0,
                                          static_cast<long>(kDistributionEpisodeOffset));
    sink.write("actions" + suffix(n) + ".csv", "action,sf,tp_dbm,probability/v1", actions_csv(dist, cfg.network));
    sink.time("train" + suffix(n), timer.seconds());
  }
  return sink.finish();
}

RunManifest cmd_compare(const ExperimentConfig& cfg, const std::string& checkpoint_path) {
  cfg.validate();
  const Checkpoint ckpt = checkpoint_for(cfg, checkpoint_path);
  ArtifactSink sink(cfg, "compare");
  Timer timer;
  const auto scores = compare_schemes(cfg, ckpt);
  CsvWriter csv({"scheme", "n_eds", "mean_ee", "std_ee", "mean_accuracy", "topologies"});
  for (const auto& s : scores)
    csv.row({s.scheme, std::to_string(ckpt.n_eds), num(s.mean_ee()), num(s.std_ee()), num(s.mean_accuracy()),
             std::to_string(s.ee.size())});
  sink.write("compare" + suffix(ckpt.n_eds) + ".csv", "scheme,n_eds,mean_ee,std_ee,mean_accuracy,topologies/v1",
             csv.str());
  sink.time("compare", timer.seconds());
  return sink.finish();
}

RunManifest cmd_asr(const ExperimentConfig& cfg, const std::string& checkpoint_path) {
  cfg.validate();
  const Checkpoint ckpt = checkpoint_for(cfg, checkpoint_path);
  const std::size_t n = ckpt.n_eds;
  const auto& sc = cfg.scenario;
  ArtifactSink sink(cfg, "asr");
  Timer timer;

  Environment env0(cfg.network, cfg.episode_config(n, sc.gateway));
  const auto dist = action_distribution(ckpt.params, env0, cfg.asr.distribution_episodes, RolloutMode::Greedy, 0,
                                        static_cast<long>(kDistributionEpisodeOffset));
  const auto mask = reduce_action_space(dist, cfg.asr.threshold);
  sink.write("asr_actions" + suffix(n) + ".csv", "action,sf,tp_dbm,probability,kept/v1",
             actions_csv(dist, cfg.network, &mask));

  const auto pretrained = inference_curve(cfg, ckpt.params, n, sc.relocated_gateway, sc.retrain_episodes);
  Environment env1(cfg.network, cfg.episode_config(n, sc.relocated_gateway));
  const auto retrained = train(env1, cfg.hp, sc.retrain_episodes, ckpt.params);
  const auto reduced = train(env1, cfg.hp, sc.retrain_episodes, ckpt.params, mask);
  const auto scratch = train(env1, cfg.hp, sc.episodes);
  sink.time("asr_training" + suffix(n), timer.seconds());

  CsvWriter curves({"episode", "pretrained_reward", "pretrained_accuracy", "retrained_reward", "retrained_accuracy",
                    "retrained_asr_reward", "retrained_asr_accuracy"});
  for (std::size_t e = 0; e < pretrained.size(); ++e)
    curves.row({std::to_string(e), num(pretrained[e].cumulative_reward), num(pretrained[e].accuracy),
                num(retrained.curve[e].cumulative_reward), num(retrained.curve[e].accuracy),
                num(reduced.curve[e].cumulative_reward), num(reduced.curve[e].accuracy)});
  sink.write("asr_curves" + suffix(n) + ".csv",
             "episode,pretrained_reward,pretrained_accuracy,retrained_reward,retrained_accuracy,"
             "retrained_asr_reward,retrained_asr_accuracy/v1",
             curves.str());
  sink.write("asr_scratch" + suffix(n) + ".csv", "episode,reward,accuracy/v1", curve_csv(scratch.curve));

  auto plateau = [&](const std::vector<EpisodeStats>& c) {
    return std::to_string(plateau_episode(rewards_of(c), cfg.asr.plateau_window, cfg.asr.plateau_fraction));
  };
  CsvWriter summary({"variant", "scenario", "mean_ee", "accuracy", "plateau_episode", "episodes"});
  auto add = [&](const std::string& name, int scenario, const PolicyScore& s, const std::string& plat,
                 std::size_t episodes) {
    summary.row({name, std::to_string(scenario), num(s.mean_ee), num(s.accuracy), plat, std::to_string(episodes)});
  };
  add("trained", 0, evaluate_policy(cfg, ckpt.params, n, sc.gateway), "", static_cast<std::size_t>(ckpt.episodes_trained));
  add("pretrained", 1, evaluate_policy(cfg, ckpt.params, n, sc.relocated_gateway), plateau(pretrained), 0);
  add("retrained", 1, evaluate_policy(cfg, retrained.params, n, sc.relocated_gateway), plateau(retrained.curve),
      retrained.curve.size());
  add("retrained_asr", 1, evaluate_policy(cfg, reduced.params, n, sc.relocated_gateway, &mask),
      plateau(reduced.curve), reduced.curve.size());
  add("scratch", 1, evaluate_policy(cfg, scratch.params, n, sc.relocated_gateway), plateau(scratch.curve),
      scratch.curve.size());
  sink.write("asr_summary" + suffix(n) + ".csv", "variant,scenario,mean_ee,accuracy,plateau_episode,episodes/v1",
             summary.str());
  sink.time("asr" + suffix(n), timer.seconds());
  return sink.finish();
}

RunManifest cmd_linkbudget(const ExperimentConfig& cfg, std::optional<double> tp_dbm, double sweep_step_m) {
  cfg.network.validate();
  if (!(sweep_step_m > 0.0)) throw Error(ErrorCode::InvalidArgument, "sweep step must be positive");
  const double tp = tp_dbm.value_or(cfg.network.p_max_dbm);
  const double h = cfg.scenario.gateway.z;
  ArtifactSink sink(cfg, "linkbudget");
  Timer timer;
  const auto rows = link_budget(cfg.network, tp, h);
  CsvWriter table({"sf", "snr_limit_db", "sensitivity_dbm", "data_rate_bps", "tp_dbm", "max_distance_m",
                   "max_horizontal_m"});
  for (const auto& r : rows)
    table.row({std::to_string(r.sf), num(r.snr_limit_db), num(r.sensitivity_dbm), num(r.data_rate_bps), num(tp),
               num(r.max_distance_m), num(r.max_horizontal_m)});
  sink.write("linkbudget.csv", "sf,snr_limit_db,sensitivity_dbm,data_rate_bps,tp_dbm,max_distance_m,max_horizontal_m/v1",
             table.str());

  const Position3D gw{0.0, 0.0, h};
  std::vector<std::string> header{"horizontal_m", "distance_m", "elevation_deg", "los_probability", "path_loss_db",
                                  "rssi_dbm"};
  for (int v = kMinSf; v <= kMaxSf; ++v) header.push_back("decodable_sf" + std::to_string(v));
  CsvWriter sweep(header);
  const double reach = rows.back().max_horizontal_m * 1.1;
  const auto steps = static_cast<long>(std::ceil(reach / sweep_step_m));
  for (long i = 0; i <= steps; ++i) {
    const double x = static_cast<double>(i) * sweep_step_m;
    const Position3D ed{x, 0.0, 0.0};
    const double theta = elevation_angle(ed, gw);
    const double loss = a2g_path_loss(ed, gw, cfg.network.channel, {});
    const double rx = rssi(tp, loss);
    std::vector<std::string> row{num(x), num(distance(ed, gw)), num(theta), num(los_probability(theta, cfg.network.channel)),
                                 num(loss), num(rx)};
    for (int v = kMinSf; v <= kMaxSf; ++v) row.emplace_back(rx >= sensitivity(SpreadingFactor(v), cfg.network.phy) ? "1" : "0");
    sweep.row(row);
  }
  std::string schema;
  for (std::size_t i = 0; i < header.size(); ++i) schema += (i ? "," : "") + header[i];
  sink.write("pathloss_sweep.csv", schema + "/v1", sweep.str());
  sink.time("linkbudget", timer.seconds());
  return sink.finish();
}

}  // namespace uavlora
