// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fails.

#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "uavlora/baselines.hpp"
#include "uavlora/error.hpp"
#include "uavlora/experiment.hpp"
#include "uavlora/io.hpp"
#include "uavlora/ppo.hpp"

using namespace uavlora;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

class Workspace {
 public:
  Workspace() : root_(fs::temp_directory_path() / ("uavlora-acceptance-" + std::to_string(::getpid()))) {
    fs::create_directories(root_);
  }
  ~Workspace() {
    std::error_code ec;
    fs::remove_all(root_, ec);
  }
  Workspace(const Workspace&) = delete;
  Workspace& operator=(const Workspace&) = delete;

  std::string dir(const std::string& name) const { return (root_ / name).string(); }

 private:
  fs::path root_;
};

using Table = std::vector<std::map<std::string, std::string>>;

Table read_csv(const std::string& path) {
  std::istringstream in(read_text_file(path));
  std::string line;
  std::getline(in, line);
  std::vector<std::string> header;
  {
    std::istringstream h(line);
    for (std::string cell; std::getline(h, cell, ',');) header.push_back(cell);
  }
  Table rows;
  while (std::getline(in, line)) {
    std::istringstream r(line);
    std::map<std::string, std::string> row;
    std::size_t i = 0;
    for (std::string cell; std::getline(r, cell, ',');) row[header.at(i++)] = cell;
    rows.push_back(row);
  }
  return rows;
}

double num(const std::map<std::string, std::string>& row, const std::string& key) { return std::stod(row.at(key)); }

// ---------------------------------------------------------------------------------------------

Outcome link_budget_golden() {
  const auto t0 = std::chrono::steady_clock::now();
  // -175 + 10 log10(125000) + 6 = -118.030899869919...
  const double floor_dbm = -175.0 + 50.96910013008056 + 6.0;
  const double limits[] = {-7.5, -10.0, -12.5, -15.0, -17.5, -20.0};
  double worst = 0.0;
  bool table_exact = true;
  for (int i = 0; i < kNumSf; ++i) {
    const SpreadingFactor sf = SpreadingFactor::from_index(i);
    table_exact = table_exact && snr_limit(sf) == limits[i];
    worst = std::max(worst, std::abs(sensitivity(sf) - (floor_dbm + limits[i])));
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {table_exact && worst < 0.01 && secs < 1.0,
          fmt("max |error| %.2e dB, SNR table %s, %.3f s", worst, table_exact ? "exact" : "differs", secs)};
}

Outcome oracle_equivalence() {
  const auto t0 = std::chrono::steady_clock::now();
  const NetworkConfig net;
  const Area area = Area::square_km2(2.0);
  GAConfig ga;
  ga.generations = 200;
  int ga_misses = 0, dominated = 0;
  double worst_gap = 0.0;
  for (int k = 0; k < 50; ++k) {
    const std::size_t n = 2 + static_cast<std::size_t>(k % 3);
    const Topology topo = generate_topology(n, area, area.center(300.0), 1000 + k, net.channel, false);
    const double best = energy_efficiency(brute_force_allocate(topo, net), topo, net);
    ga.seed = static_cast<std::uint64_t>(k);
    const double g = ga_allocate(topo, net, ga).energy_efficiency;
    const double gap = (best - g) / best;
    worst_gap = std::max(worst_gap, gap);
    if (gap > 0.02) ++ga_misses;
    const double r = energy_efficiency(random_allocate(topo, net, static_cast<std::uint64_t>(k)), topo, net);
    const double d = energy_efficiency(distance_allocate(topo, net), topo, net);
    if (r > best * (1.0 + 1e-12) || d > best * (1.0 + 1e-12)) ++dominated;
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {ga_misses == 0 && dominated == 0 && secs < 300.0,
          fmt("worst GA gap %.3f%%, GA misses %d/50, baselines above optimum %d, %.1f s", 100.0 * worst_gap, ga_misses,
              dominated, secs)};
}

double relative_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return (a - b).norm() / std::max({a.norm(), b.norm(), 1e-300});
}

Eigen::VectorXd central_differences(const std::function<double(const Eigen::VectorXd&)>& f, Eigen::VectorXd x,
                                    double h) {
  Eigen::VectorXd g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + h;
    const double up = f(x);
    x[i] = keep - h;
    const double down = f(x);
    x[i] = keep;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

// Forward-only objectives written from the definitions, used as finite-difference targets.
double oracle_clipped_objective(const Mlp& policy, const MiniBatch& b, double eps) {
  const Eigen::MatrixXd logits = policy.forward(b.obs, nullptr);
  double total = 0.0;
  for (Eigen::Index j = 0; j < b.size(); ++j) {
    const double m = logits.col(j).maxCoeff();
    const double log_z = m + std::log((logits.col(j).array() - m).exp().sum());
    const int a = b.actions[static_cast<std::size_t>(j)];
    const double ratio = std::exp(logits(a, j) - log_z - b.old_logprob[j]);
    const double adv = b.advantages[j];
    total += std::min(ratio * adv, std::clamp(ratio, 1.0 - eps, 1.0 + eps) * adv);
  }
  return total / static_cast<double>(b.size());
}

double oracle_value_objective(const Mlp& value, const MiniBatch& b) {
  const Eigen::MatrixXd v = value.forward(b.obs, nullptr);
  return (v.row(0).transpose() - b.returns).squaredNorm() / static_cast<double>(b.size());
}

Outcome gradient_checks() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> normal(0.0, 1.0);
  Hyperparams hp;
  Environment env({}, [] {
    EpisodeConfig ep;
    ep.n_eds = 6;
    return ep;
  }());
  double worst_policy = 0.0, worst_value = 0.0, worst_loss = 0.0;
  for (int draw = 0; draw < 20; ++draw) {
    PolicyParams params = PolicyParams::create(18, 30, hp, rng);
    params.policy.params() += 0.2 * Eigen::VectorXd::NullaryExpr(
                                        static_cast<Eigen::Index>(params.policy.num_params()), [&] { return normal(rng); });
    // Observations from real episodes under random actions.
    MiniBatch b;
    const int n = 8;
    b.obs.resize(18, n);
    b.old_logprob.resize(n);
    b.advantages.resize(n);
    b.returns.resize(n);
    env.reset_episode(static_cast<std::uint64_t>(draw));
    std::uniform_int_distribution<int> action(0, 29);
    for (int j = 0; j < n; ++j) {
      if (env.done()) env.reset_episode(static_cast<std::uint64_t>(1000 + draw * n + j));
      const Observation obs = env.observation();
      b.obs.col(j) = Eigen::Map<const Eigen::VectorXd>(obs.features.data(), 18);
      const int a = action(rng);
      b.actions.push_back(a);
      const Eigen::VectorXd p = forward_policy(obs, params);
      b.old_logprob[j] = std::log(p[a]) + 0.1 * normal(rng);
      b.advantages[j] = normal(rng);
      b.returns[j] = normal(rng);
      env.step(Action{a});
    }
    const auto pg = clipped_loss(b, params.policy, hp);
    const auto pf = central_differences(
        [&](const Eigen::VectorXd& x) {
          Mlp probe = params.policy;
          probe.params() = x;
          return oracle_clipped_objective(probe, b, hp.clip_epsilon);
        },
        params.policy.params(), 1e-6);
    worst_policy = std::max(worst_policy, relative_error(pg.grad, pf));
    worst_loss = std::max(worst_loss, std::abs(pg.value - oracle_clipped_objective(params.policy, b, hp.clip_epsilon)));
    const auto vg = value_loss(b, params.value);
    const auto vf = central_differences(
        [&](const Eigen::VectorXd& x) {
          Mlp probe = params.value;
          probe.params() = x;
          return oracle_value_objective(probe, b);
        },
        params.value.params(), 1e-6);
    worst_value = std::max(worst_value, relative_error(vg.grad, vf));
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {worst_policy < 1e-4 && worst_value < 1e-4 && worst_loss < 1e-12 && secs < 30.0,
          fmt("worst relative error policy %.2e, value %.2e over 20 draws (objective mismatch %.1e), %.1f s",
              worst_policy, worst_value, worst_loss, secs)};
}

Outcome gae_correctness() {
  std::mt19937_64 rng(77);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.5, 1.0);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    Hyperparams hp;
    hp.gamma = unit(rng);
    hp.chi = unit(rng);
    const int T = 50;
    Trajectory traj(T);
    for (auto& tr : traj) {
      tr.obs = tr.next_obs = Eigen::VectorXd::Zero(1);
      tr.reward = 10.0 * normal(rng);
      tr.value = 10.0 * normal(rng);
    }
    traj.back().done = true;
    const auto adv = gae_estimator(traj, hp);
    for (int t = 0; t < T; ++t) {
      double direct = 0.0;
      for (int i = 0; t + i < T; ++i) {
        const double next_v = (t + i + 1 < T) ? traj[t + i + 1].value : 0.0;
        const double delta = traj[t + i].reward + hp.gamma * next_v - traj[t + i].value;
        direct += std::pow(hp.gamma * hp.chi, i) * delta;
      }
      worst = std::max(worst, std::abs(adv[t] - direct));
    }
  }
  return {worst <= 1e-12, fmt("max |difference| %.2e over 100 trajectories of 50 steps", worst)};
}

struct OracleVerdict {
  bool c1 = true;
  bool c2 = true;
};

OracleVerdict oracle_validate(const AllocationState& s, const Topology& topo) {
  OracleVerdict v;
  int psi[13] = {};
  for (std::size_t i = 0; i < s.size(); ++i)
    if (s[i]) ++psi[s[i]->sf.value()];
  for (int sf = 7; sf <= 12; ++sf)
    if (psi[sf] > 6) v.c1 = false;
  const double l0 = 20.0 * std::log10(4.0 * std::numbers::pi * 868e6 / 299792458.0);
  const double snr_lim[] = {-7.5, -10.0, -12.5, -15.0, -17.5, -20.0};
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!s[i]) continue;
    const auto& e = topo.eds[i];
    const auto& g = topo.gateway;
    const double d = std::sqrt((e.x - g.x) * (e.x - g.x) + (e.y - g.y) * (e.y - g.y) + (e.z - g.z) * (e.z - g.z));
    const double theta = std::asin((g.z - e.z) / d) * 180.0 / std::numbers::pi;
    const double p = 1.0 / (1.0 + 9.61 * std::exp(-0.16 * (theta - 9.61)));
    const double loss = p * (l0 + 20.0 * std::log10(d) + topo.shadowing[i].los_db) +
                        (1.0 - p) * (l0 + 25.0 * std::log10(d) + topo.shadowing[i].nlos_db);
    const double zeta = -175.0 + 10.0 * std::log10(125e3) + 6.0 + snr_lim[s[i]->sf.value() - 7];
    if (zeta > s[i]->tp.value - loss) v.c2 = false;
  }
  return v;
}

Outcome validator_equivalence() {
  const NetworkConfig net;
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<int> size(1, 8), level(0, 4), sf(7, 12);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double levels[] = {2.0, 5.0, 8.0, 11.0, 14.0};
  int disagreements = 0, infeasible = 0, c1_fail = 0, c2_fail = 0;
  for (int k = 0; k < 1000; ++k) {
    const auto n = static_cast<std::size_t>(size(rng));
    const Area area = Area::square_km2(unit(rng) < 0.5 ? 2.0 : 200.0);
    const Topology topo = generate_topology(n, area, area.center(300.0), static_cast<std::uint64_t>(k), net.channel);
    AllocationState s(n);
    const bool crowd = unit(rng) < 0.4;
    for (std::size_t i = 0; i < n; ++i) {
      if (unit(rng) < 0.1) continue;
      const int v = crowd ? 9 : sf(rng);
      s.assign(i, {SpreadingFactor(v), TransmitPowerDbm{levels[level(rng)]}});
    }
    const auto rep = validate_allocation(s, topo, net);
    const auto oracle = oracle_validate(s, topo);
    if (rep.sf_load_ok != oracle.c1 || rep.sensitivity_ok != oracle.c2 || rep.feasible() != (oracle.c1 && oracle.c2))
      ++disagreements;
    infeasible += !(oracle.c1 && oracle.c2);
    c1_fail += !oracle.c1;
    c2_fail += !oracle.c2;
  }
  return {disagreements == 0, fmt("%d disagreements on 1000 states (%d infeasible: %d C1, %d C2)", disagreements,
                                  infeasible, c1_fail, c2_fail)};
}

// Shared training run for criteria 6-8 (and the N=8 checkpoint for criterion 9).
struct TrainedRun {
  ExperimentConfig cfg;
  std::string dir;
  double seconds = 0.0;
};

TrainedRun train_run(const Workspace& ws) {
  TrainedRun run;
  run.cfg.scenario.n_eds = {6, 8};
  run.cfg.scenario.episodes = 2000;
  run.cfg.output_dir = run.dir = ws.dir("train");
  const auto t0 = std::chrono::steady_clock::now();
  cmd_train(run.cfg);
  run.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return run;
}

Outcome training_convergence(const TrainedRun& run) {
  const Table curve = read_csv(run.dir + "/curve_N6.csv");
  std::vector<double> reward, accuracy;
  for (const auto& row : curve) {
    reward.push_back(num(row, "reward"));
    accuracy.push_back(num(row, "accuracy"));
  }
  const std::size_t n = reward.size();
  const auto ma = moving_average(reward, 100);
  double first = 0.0;
  for (std::size_t i = 0; i < 100; ++i) first += reward[i] / 100.0;
  const std::size_t tail = n / 10;
  double worst_tail_ma = ma[n - tail];
  double tail_accuracy = 0.0;
  for (std::size_t i = n - tail; i < n; ++i) {
    worst_tail_ma = std::min(worst_tail_ma, ma[i]);
    tail_accuracy += accuracy[i] / static_cast<double>(tail);
  }
  const double gain = worst_tail_ma / first - 1.0;
  return {n <= 2000 && gain >= 0.5 && tail_accuracy >= 0.95,
          fmt("%zu episodes, first-100 mean %.0f, lowest final-10%% MA100 %.0f (+%.0f%%), final-10%% accuracy %.3f, "
              "%.1f s for N=6 and N=8",
              n, first, worst_tail_ma, 100.0 * gain, tail_accuracy, run.seconds)};
}

Outcome scheme_ordering(const TrainedRun& run, const Workspace& ws) {
  ExperimentConfig cfg = run.cfg;
  cfg.scenario.n_eds = {6};
  cfg.scenario.eval_topologies = 20;
  cfg.ga.generations = 200;
  cfg.output_dir = ws.dir("compare");
  cmd_compare(cfg, run.dir + "/checkpoint_N6.json");
  std::map<std::string, double> ee;
  std::string detail;
  for (const auto& row : read_csv(cfg.output_dir + "/compare_N6.csv")) {
    ee[row.at("scheme")] = num(row, "mean_ee");
    detail += fmt("%s %.0f (acc %.3f), ", row.at("scheme").c_str(), num(row, "mean_ee"), num(row, "mean_accuracy"));
  }
  detail.resize(detail.size() - 2);
  return {ee.at("drl") >= ee.at("distance") && ee.at("drl") >= ee.at("random"), "mean EE on 20 topologies: " + detail};
}

Outcome low_tp_preference(const TrainedRun& run) {
  double low = 0.0, high = 0.0;
  for (const auto& row : read_csv(run.dir + "/actions_N6.csv")) {
    const double tp = num(row, "tp_dbm");
    if (tp == 2.0 || tp == 5.0) low += num(row, "probability");
    if (tp == 11.0 || tp == 14.0) high += num(row, "probability");
  }
  return {low > high, fmt("mass on TP{2,5} %.3f vs TP{11,14} %.3f", low, high)};
}

Outcome asr_workflow(const TrainedRun& run, const Workspace& ws) {
  ExperimentConfig cfg = run.cfg;
  cfg.scenario.n_eds = {8};
  cfg.scenario.retrain_episodes = 2000;
  cfg.scenario.eval_topologies = 1000;
  cfg.output_dir = ws.dir("asr");
  cmd_asr(cfg, run.dir + "/checkpoint_N8.json");
  std::map<std::string, std::map<std::string, std::string>> rows;
  for (const auto& row : read_csv(cfg.output_dir + "/asr_summary_N8.csv")) rows[row.at("variant")] = row;
  const double re_plateau = num(rows.at("retrained"), "plateau_episode");
  const double scratch_plateau = num(rows.at("scratch"), "plateau_episode");
  const double pre_acc = num(rows.at("pretrained"), "accuracy");
  const double re_acc = num(rows.at("retrained"), "accuracy");
  const bool faster = re_plateau <= 0.7 * scratch_plateau;
  const bool acc = pre_acc < re_acc;
  return {faster && acc,
          fmt("plateau retrained %.0f vs scratch %.0f episodes (%s); scenario-1 accuracy pretrained %.4f vs retrained "
              "%.4f (%s); trained on scenario 0 %.4f; ASR EE %.0f vs retrained EE %.0f",
              re_plateau, scratch_plateau, faster ? "ok" : "too slow", pre_acc, re_acc, acc ? "ok" : "not below",
              num(rows.at("trained"), "accuracy"), num(rows.at("retrained_asr"), "mean_ee"),
              num(rows.at("retrained"), "mean_ee"))};
}

int cli(std::vector<std::string> args) {
  args.insert(args.begin(), "uavlora");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

Outcome determinism(const Workspace& ws) {
  int failures = 0, compared = 0;
  std::vector<std::string> differing;
  auto run_twice = [&](const std::string& name, const std::vector<std::string>& args) {
    for (const char* rep : {"a", "b"}) {
      std::vector<std::string> full = args;
      full.insert(full.end(), {"-o", ws.dir("det-" + name + "-" + rep)});
      if (cli(full) != 0) ++failures;
    }
    for (const auto& entry : fs::directory_iterator(ws.dir("det-" + name + "-a"))) {
      const auto file = entry.path().filename().string();
      if (entry.path().extension() != ".csv" && entry.path().extension() != ".json") continue;
      if (file.find("manifest") != std::string::npos) continue;
      ++compared;
      if (read_text_file(entry.path().string()) != read_text_file(ws.dir("det-" + name + "-b") + "/" + file))
        differing.push_back(name + "/" + file);
    }
  };
  const std::vector<std::string> small{"--n-eds", "4", "--episodes", "150", "--retrain-episodes", "150",
                                       "--eval-topologies", "3", "--generations", "30", "--seed", "5"};
  auto with = [&](std::vector<std::string> head) {
    head.insert(head.end(), small.begin(), small.end());
    return head;
  };
  run_twice("train", with({"train"}));
  const std::string ckpt = ws.dir("det-train-a") + "/checkpoint_N4.json";
  run_twice("compare", with({"compare", "--checkpoint", ckpt}));
  run_twice("asr", with({"asr", "--checkpoint", ckpt}));
  run_twice("linkbudget", {"linkbudget"});
  for (const char* rep : {"a", "b"}) {
    const std::string dir = ws.dir(std::string("det-alloc-") + rep);
    fs::create_directories(dir);
    if (cli(with({"topology", "--episode", "9", "--out", dir + "/topology.json"})) != 0) ++failures;
    if (cli(with({"allocate", "--topology", dir + "/topology.json", "--scheme", "ga", "--out", dir + "/ga.json"})) != 0)
      ++failures;
    if (cli({"validate", "--topology", dir + "/topology.json", "--allocation", dir + "/ga.json"}) != 0) ++failures;
  }
  for (const char* f : {"topology.json", "ga.json"}) {
    ++compared;
    if (read_text_file(ws.dir("det-alloc-a") + "/" + f) != read_text_file(ws.dir("det-alloc-b") + "/" + f))
      differing.push_back(std::string("alloc/") + f);
  }
  std::string detail = fmt("%d artifacts compared, %zu differ, %d failed runs", compared, differing.size(), failures);
  for (const auto& d : differing) detail += " " + d;
  return {failures == 0 && differing.empty() && compared > 0, detail};
}

}  // namespace

int main() {
  Workspace ws;
  int failed = 0;
  auto report = [&](int id, const char* title, const std::function<Outcome()>& check) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("[%s] %2d %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", id, title, o.detail.c_str(), secs);
    std::fflush(stdout);
    failed += !o.pass;
  };

  report(1, "link-budget golden values", link_budget_golden);
  report(2, "GA and baselines against brute force", oracle_equivalence);
  report(3, "policy and value gradient checks", gradient_checks);
  report(4, "GAE backward recursion", gae_correctness);
  report(5, "constraint validator equivalence", validator_equivalence);

  std::optional<TrainedRun> run;
  try {
    run = train_run(ws);
  } catch (const std::exception& e) {
    std::printf("training for criteria 6-9 failed: %s\n", e.what());
  }
  auto needs_run = [&](const std::function<Outcome(const TrainedRun&)>& f) {
    return [&, f]() -> Outcome {
      if (!run) return {false, "no trained checkpoint"};
      return f(*run);
    };
  };
  report(6, "training convergence at N=6", needs_run(training_convergence));
  report(7, "scheme ordering at N=6", needs_run([&](const TrainedRun& r) { return scheme_ordering(r, ws); }));
  report(8, "low transmit-power preference", needs_run(low_tp_preference));
  report(9, "action-space reduction workflow at N=8", needs_run([&](const TrainedRun& r) { return asr_workflow(r, ws); }));
  report(10, "determinism of every subcommand", [&] { return determinism(ws); });

  std::printf("%d of 10 criteria passed\n", 10 - failed);
  return failed == 0 ? 0 : 1;
}
