#include <algorithm>
#include <numeric>
#include <random>

#include "doctest.h"
#include "uavlora/baselines.hpp"
#include "uavlora/error.hpp"

using namespace uavlora;

namespace {

Topology topo_for(std::size_t n, std::uint64_t seed, bool shadowing = true) {
  const Area area = Area::square_km2(2.0);
  return generate_topology(n, area, area.center(300.0), seed, ChannelConfig{}, shadowing);
}

GAConfig quick_ga(std::uint64_t seed = 11) {
  GAConfig ga;
  ga.population_size = 60;
  ga.elite_size = 6;
  ga.generations = 80;
  ga.seed = seed;
  return ga;
}

// Exhaustive search written independently of the library's enumeration order.
double oracle_best_ee(const Topology& topo, const NetworkConfig& cfg) {
  const std::size_t n = topo.size();
  const int choices = kNumSf * 5 + 1;
  std::vector<int> digits(n, 0);
  double best = 0.0;
  for (;;) {
    AllocationState s(n);
    for (std::size_t i = 0; i < n; ++i)
      if (digits[i] > 0)
        s.assign(i, {SpreadingFactor::from_index((digits[i] - 1) / 5),
                     TransmitPowerDbm{cfg.tp_levels_dbm[static_cast<std::size_t>((digits[i] - 1) % 5)]}});
    if (validate_allocation(s, topo, cfg).feasible()) best = std::max(best, energy_efficiency(s, topo, cfg));
    std::size_t k = 0;
    while (k < n && ++digits[k] == choices) digits[k++] = 0;
    if (k == n) break;
  }
  return best;
}

}  // namespace

TEST_CASE("random allocation is feasible and seeded") {
  const NetworkConfig cfg;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const Topology topo = topo_for(10, s);
    const auto a = random_allocate(topo, cfg, s);
    CHECK(validate_allocation(a, topo, cfg).feasible());
    CHECK(a == random_allocate(topo, cfg, s));
  }
}

TEST_CASE("distance allocation fills the lowest SFs with the nearest devices") {
  const NetworkConfig cfg;
  const Topology topo = topo_for(12, 3, false);
  const auto a = distance_allocate(topo, cfg);
  CHECK(validate_allocation(a, topo, cfg).feasible());
  std::vector<std::size_t> order(12);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    return distance(topo.eds[x], topo.gateway) < distance(topo.eds[y], topo.gateway);
  });
  for (std::size_t r = 0; r < 12; ++r) {
    REQUIRE(a.is_allocated(order[r]));
    CHECK(a[order[r]]->sf.value() == 7 + static_cast<int>(r / 6));
  }
  CHECK_THROWS_AS(distance_allocate(topo_for(37, 1), cfg), Error);
}

TEST_CASE("distance allocation picks the smallest sufficient power") {
  const NetworkConfig cfg;
  const Topology topo = topo_for(6, 8, false);
  const auto a = distance_allocate(topo, cfg);
  for (std::size_t i = 0; i < 6; ++i) {
    REQUIRE(a.is_allocated(i));
    for (double lower : cfg.tp_levels_dbm) {
      if (lower >= a[i]->tp.value) break;
      CHECK_FALSE(check_c2(i, a[i]->sf, TransmitPowerDbm{lower}, topo, cfg));
    }
  }
}

TEST_CASE("genetic algorithm") {
  const NetworkConfig cfg;
  const Topology topo = topo_for(8, 2);
  const auto r = ga_allocate(topo, cfg, quick_ga());
  CHECK(validate_allocation(r.allocation, topo, cfg).feasible());
  CHECK(r.energy_efficiency == doctest::Approx(energy_efficiency(r.allocation, topo, cfg)));
  CHECK(r.best_fitness.size() == 81);
  for (std::size_t g = 1; g < r.best_fitness.size(); ++g) CHECK(r.best_fitness[g] >= r.best_fitness[g - 1]);
  const auto again = ga_allocate(topo, cfg, quick_ga());
  CHECK(again.allocation == r.allocation);
}

TEST_CASE("genetic algorithm from a population of clones") {
  const NetworkConfig cfg;
  const Topology topo = topo_for(4, 9, false);
  GAConfig ga = quick_ga();
  Chromosome clone;
  clone.genes.assign(4, Gene{5, 4});  // SF12 at 14 dBm: feasible near the gateway
  std::vector<Chromosome> pop(static_cast<std::size_t>(ga.population_size), clone);
  const auto r = ga_allocate(topo, cfg, ga, pop);
  CHECK(validate_allocation(r.allocation, topo, cfg).feasible());
  AllocationState start(4);
  for (std::size_t i = 0; i < 4; ++i) start.assign(i, {SpreadingFactor(12), TransmitPowerDbm{14.0}});
  CHECK(r.energy_efficiency >= energy_efficiency(start, topo, cfg));
  pop.pop_back();
  CHECK_THROWS_AS(ga_allocate(topo, cfg, ga, pop), Error);
}

TEST_CASE("genetic algorithm without any feasible individual") {
  Topology t;
  t.area = {1e9, 1e9};
  t.gateway = {0.0, 0.0, 300.0};
  t.eds = {{5e8, 5e8, 0.0}};
  t.shadowing = {{}};
  CHECK_THROWS_AS(ga_allocate(t, {}, quick_ga()), Error);
}

TEST_CASE("ga config validation") {
  GAConfig ga;
  CHECK_NOTHROW(ga.validate());
  ga.elite_size = ga.population_size + 1;
  CHECK_THROWS_AS(ga.validate(), Error);
  ga = {};
  ga.mutation_rate = 1.5;
  CHECK_THROWS_AS(ga.validate(), Error);
}

TEST_CASE("brute force is optimal") {
  const NetworkConfig cfg;
  for (std::uint64_t s = 0; s < 4; ++s) {
    const Topology topo = topo_for(2, s);
    const auto best = brute_force_allocate(topo, cfg);
    CHECK(validate_allocation(best, topo, cfg).feasible());
    const double ee = energy_efficiency(best, topo, cfg);
    CHECK(ee == doctest::Approx(oracle_best_ee(topo, cfg)).epsilon(1e-12));
    CHECK(energy_efficiency(random_allocate(topo, cfg, s), topo, cfg) <= ee * (1.0 + 1e-12));
    CHECK(energy_efficiency(distance_allocate(topo, cfg), topo, cfg) <= ee * (1.0 + 1e-12));
  }
  CHECK_THROWS_AS(brute_force_allocate(topo_for(5, 1), cfg), Error);
}
