#include <sstream>

#include "doctest.h"
#include "uavlora/env.hpp"
#include "uavlora/error.hpp"

using namespace uavlora;

namespace {

EpisodeConfig small(std::size_t n, RewardMode mode = RewardMode::PerStep) {
  EpisodeConfig ep;
  ep.n_eds = n;
  ep.seed = 3;
  ep.reward_mode = mode;
  return ep;
}

// Every ED directly around the gateway, no shadowing: all actions pass C2.
Topology cluster(std::size_t n) {
  Topology t;
  t.area = {1000.0, 1000.0};
  t.gateway = {500.0, 500.0, 300.0};
  for (std::size_t i = 0; i < n; ++i) {
    t.eds.push_back({500.0 + static_cast<double>(i), 500.0, 0.0});
    t.shadowing.push_back({});
  }
  return t;
}

}  // namespace

TEST_CASE("action codec") {
  const NetworkConfig cfg;
  CHECK(num_actions(cfg) == 30);
  const auto first = decode(Action{0}, cfg);
  CHECK(first.sf.value() == 7);
  CHECK(first.tp.value == 2.0);
  const auto last = decode(Action{29}, cfg);
  CHECK(last.sf.value() == 12);
  CHECK(last.tp.value == 14.0);
  CHECK(decode(Action{13}, cfg).sf.value() == 9);
  CHECK(decode(Action{13}, cfg).tp.value == 11.0);
  for (int a = 0; a < 30; ++a) {
    const auto d = decode(Action{a}, cfg);
    CHECK(encode(d.sf, d.tp_level, cfg) == Action{a});
  }
  CHECK_THROWS_AS(decode(Action{30}, cfg), Error);
  CHECK_THROWS_AS(decode(Action{-1}, cfg), Error);
}

TEST_CASE("initial observation") {
  Environment env({}, small(5));
  const Observation obs = env.reset();
  REQUIRE(obs.features.size() == 15);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(obs.sf_code(i) == 0.0);
    CHECK(obs.tp_code(i) == -1.0);
    CHECK(obs.rate_code(i) == 0.0);
  }
}

TEST_CASE("observation encodes accepted assignments") {
  Environment env({}, small(3));
  env.reset_with(cluster(3));
  const auto r = env.step(Action{29});
  CHECK_FALSE(r.info.constraint_violated.has_value());
  CHECK(r.observation.sf_code(0) == doctest::Approx(1.0));
  CHECK(r.observation.tp_code(0) == doctest::Approx(1.0));
  CHECK(r.observation.rate_code(0) > 0.0);
  CHECK(r.observation.rate_code(0) <= 1.0);
  env.step(Action{0});
  const auto obs = env.observation();
  CHECK(obs.sf_code(1) == doctest::Approx(1.0 / 6.0));
  CHECK(obs.tp_code(1) == 0.0);
}

TEST_CASE("per-step reward is the running energy efficiency") {
  Environment env({}, small(4));
  env.reset_with(cluster(4));
  double total = 0.0;
  for (int a : {0, 5, 10, 15}) {
    const auto r = env.step(Action{a});
    CHECK(r.reward == doctest::Approx(env.energy_efficiency()));
    total += r.reward;
  }
  CHECK(env.done());
  CHECK(env.cumulative_reward() == doctest::Approx(total));
  CHECK_THROWS_AS(env.step(Action{0}), Error);
  CHECK_THROWS_AS(env.current_ed(), Error);
}

TEST_CASE("C1 violation rejects the seventh device on one SF") {
  Environment env({}, small(8));
  env.reset_with(cluster(8));
  for (int i = 0; i < 6; ++i) CHECK_FALSE(env.step(Action{0}).info.constraint_violated.has_value());
  const auto r = env.step(Action{0});
  REQUIRE(r.info.constraint_violated.has_value());
  CHECK(*r.info.constraint_violated == ConstraintKind::C1);
  CHECK(r.reward == 0.0);
  CHECK_FALSE(env.allocation().is_allocated(6));
  CHECK(env.accepted_steps() == 6);
}

TEST_CASE("C2 violation leaves the device unallocated") {
  Topology t = cluster(1);
  t.shadowing[0] = {60.0, 60.0};
  Environment env({}, small(1));
  env.reset_with(t);
  const auto r = env.step(Action{0});
  REQUIRE(r.info.constraint_violated.has_value());
  CHECK(*r.info.constraint_violated == ConstraintKind::C2);
  CHECK(r.done);
}

TEST_CASE("terminal reward is paid once, only for a full allocation") {
  Environment env({}, small(3, RewardMode::Terminal));
  env.reset_with(cluster(3));
  CHECK(env.step(Action{0}).reward == 0.0);
  CHECK(env.step(Action{5}).reward == 0.0);
  const auto last = env.step(Action{10});
  CHECK(last.reward == doctest::Approx(env.energy_efficiency()));
  CHECK(last.reward > 0.0);

  Topology t = cluster(3);
  t.shadowing[1] = {60.0, 60.0};
  env.reset_with(t);
  env.step(Action{0});
  env.step(Action{1});
  CHECK(env.step(Action{10}).reward == 0.0);
}

TEST_CASE("action mask predicts acceptance") {
  Environment env({}, small(8));
  for (std::uint64_t e = 0; e < 20; ++e) {
    env.reset_episode(e);
    while (!env.done()) {
      const auto mask = env.action_mask();
      for (int a = 0; a < 30; ++a) {
        Environment probe = env;
        const bool accepted = !probe.step(Action{a}).info.constraint_violated.has_value();
        CHECK(mask[static_cast<std::size_t>(a)] == accepted);
      }
      env.step(Action{static_cast<int>(e % 30)});
    }
  }
}

TEST_CASE("episodes are reproducible by index") {
  Environment a({}, small(6));
  Environment b({}, small(6));
  a.reset_episode(17);
  b.reset();
  b.reset_episode(17);
  CHECK(a.topology() == b.topology());
  a.reset_episode(18);
  CHECK_FALSE(a.topology() == b.topology());
}

TEST_CASE("shuffled service order visits every device once") {
  EpisodeConfig ep = small(10);
  ep.order = ServiceOrder::Shuffled;
  Environment env({}, ep);
  env.reset_episode(4);
  std::vector<bool> seen(10, false);
  while (!env.done()) {
    const std::size_t ed = env.current_ed();
    CHECK_FALSE(seen[ed]);
    seen[ed] = true;
    env.step(Action{29});
  }
  for (bool s : seen) CHECK(s);
}

TEST_CASE("trace export") {
  Environment env({}, small(3));
  env.reset_with(cluster(3));
  for (int a : {3, 8, 13}) env.step(Action{a});
  std::ostringstream out;
  write_trace_jsonl(out, env.trace());
  std::istringstream in(out.str());
  std::string line;
  int lines = 0;
  while (std::getline(in, line)) {
    CHECK(line.find("\"accepted\":true") != std::string::npos);
    ++lines;
  }
  CHECK(lines == 3);
}
