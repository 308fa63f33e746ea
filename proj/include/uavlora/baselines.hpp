#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "uavlora/network.hpp"

namespace uavlora {

/// One (SF, TP-level) choice per ED.
struct Gene {
  int sf_index = 0;
  int tp_level = 0;

  friend bool operator==(const Gene&, const Gene&) = default;
};

struct Chromosome {
  std::vector<Gene> genes;
  double fitness = 0.0;
};

struct GAConfig {
  int population_size = 200;
  int elite_size = 20;
  double mutation_rate = 0.6;
  int generations = 5000;
  int tournament_size = 4;
  /// Subtracted from EE once per C1/C2 violation.
  double violation_penalty = 1e9;
  std::uint64_t seed = 11;

  void validate() const;
};

struct GAResult {
  AllocationState allocation;
  double energy_efficiency = 0.0;
  /// Best fitness in the population after each generation (index 0 = initial population).
  std::vector<double> best_fitness;
};

/// Precomputed per-ED, per-TP-level SNR table so candidate allocations can be
/// scored without recomputing path losses.
class AllocationScorer {
 public:
  AllocationScorer(const Topology& topo, const NetworkConfig& cfg);

  std::size_t size() const { return loss_db_.size(); }
  int num_tp_levels() const { return static_cast<int>(tp_mw_.size()); }
  /// EE of the assignment; genes with sf_index < 0 are unallocated.
  double energy_efficiency(const std::vector<Gene>& genes) const;
  /// Number of C1 excess assignments plus C2 failures.
  int violations(const std::vector<Gene>& genes) const;
  bool c2_ok(std::size_t ed, const Gene& g) const;
  AllocationState to_allocation(const std::vector<Gene>& genes) const;

 private:
  std::vector<double> loss_db_;
  std::vector<std::vector<double>> snr_;  // [ed][tp level]
  std::vector<double> tp_mw_;
  std::vector<double> tp_dbm_;
  const NetworkConfig* cfg_;
};

/// Per ED, uniform (SF, TP) draws until C1 and C2 hold; skipped after `max_attempts`.
AllocationState random_allocate(const Topology& topo, const NetworkConfig& cfg, std::uint64_t seed,
                                int max_attempts = 30);

/// Nearest EDs fill SF7 first, in blocks of max_eds_per_sf; ties by index.
/// TP is the smallest level meeting the sensitivity under the distance-only
/// (shadowing-free) loss; an ED is skipped if no level works or the realised
/// link still misses the sensitivity. Throws Error(TooManyEds).
AllocationState distance_allocate(const Topology& topo, const NetworkConfig& cfg);

/// Elitist GA with tournament selection, uniform crossover and per-gene mutation.
/// Throws Error(NoFeasibleIndividual).
GAResult ga_allocate(const Topology& topo, const NetworkConfig& cfg, const GAConfig& ga,
                     const std::optional<std::vector<Chromosome>>& initial_population = std::nullopt);

/// Exhaustive search over all (SF, TP)^N; first maximum in lexicographic order wins.
/// Throws Error(InstanceTooLarge) above `max_eds`.
AllocationState brute_force_allocate(const Topology& topo, const NetworkConfig& cfg, std::size_t max_eds = 4);

}  // namespace uavlora
