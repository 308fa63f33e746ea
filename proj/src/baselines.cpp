#include "uavlora/baselines.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <random>

#include "uavlora/error.hpp"
#include "uavlora/rng.hpp"

namespace uavlora {

void GAConfig::validate() const {
  if (population_size < 2) throw Error(ErrorCode::InvalidArgument, "population_size must be >= 2");
  if (elite_size < 0 || elite_size >= population_size) {
    throw Error(ErrorCode::InvalidArgument, "elite_size must lie in [0, population_size)");
  }
  if (!(mutation_rate >= 0.0 && mutation_rate <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "mutation_rate must lie in [0, 1]");
  }
  if (generations < 0) throw Error(ErrorCode::InvalidArgument, "generations must be >= 0");
  if (tournament_size < 1) throw Error(ErrorCode::InvalidArgument, "tournament_size must be >= 1");
}

AllocationScorer::AllocationScorer(const Topology& topo, const NetworkConfig& cfg)
    : loss_db_(path_losses(topo, cfg)), tp_dbm_(cfg.tp_levels_dbm), cfg_(&cfg) {
  const double noise_mw = cfg.noise_power_mw();
  for (double dbm : tp_dbm_) tp_mw_.push_back(dbm_to_mw(dbm));
  snr_.resize(loss_db_.size());
  for (std::size_t i = 0; i < loss_db_.size(); ++i) {
    const double attenuation = std::pow(10.0, 0.1 * loss_db_[i]) * noise_mw;
    for (double mw : tp_mw_) snr_[i].push_back(mw / attenuation);
  }
}

double AllocationScorer::energy_efficiency(const std::vector<Gene>& genes) const {
  std::array<double, kNumSf> group_snr{};
  double power = cfg_->circuit_power_mw;
  for (std::size_t i = 0; i < genes.size(); ++i) {
    const Gene& g = genes[i];
    if (g.sf_index < 0) continue;
    group_snr[static_cast<std::size_t>(g.sf_index)] += snr_[i][static_cast<std::size_t>(g.tp_level)];
    power += tp_mw_[static_cast<std::size_t>(g.tp_level)];
  }
  double rate = 0.0;
  for (std::size_t i = 0; i < genes.size(); ++i) {
    const Gene& g = genes[i];
    if (g.sf_index < 0) continue;
    const double s = snr_[i][static_cast<std::size_t>(g.tp_level)];
    const double interference = group_snr[static_cast<std::size_t>(g.sf_index)] - s;
    rate += shannon_capacity(s / (std::max(interference, 0.0) + 1.0), cfg_->phy.bandwidth_hz);
  }
  return rate / power;
}

bool AllocationScorer::c2_ok(std::size_t ed, const Gene& g) const {
  return check_c2_with_loss(loss_db_[ed], SpreadingFactor::from_index(g.sf_index),
                            TransmitPowerDbm{tp_dbm_[static_cast<std::size_t>(g.tp_level)]}, *cfg_);
}

int AllocationScorer::violations(const std::vector<Gene>& genes) const {
  std::array<int, kNumSf> load{};
  int count = 0;
  for (std::size_t i = 0; i < genes.size(); ++i) {
    if (genes[i].sf_index < 0) continue;
    ++load[static_cast<std::size_t>(genes[i].sf_index)];
    if (!c2_ok(i, genes[i])) ++count;
  }
  for (int l : load) count += std::max(0, l - cfg_->max_eds_per_sf);
  return count;
}

AllocationState AllocationScorer::to_allocation(const std::vector<Gene>& genes) const {
  AllocationState state(genes.size());
  for (std::size_t i = 0; i < genes.size(); ++i) {
    if (genes[i].sf_index < 0) continue;
    state.assign(i, {SpreadingFactor::from_index(genes[i].sf_index),
                     TransmitPowerDbm{tp_dbm_[static_cast<std::size_t>(genes[i].tp_level)]}});
  }
  return state;
}

AllocationState random_allocate(const Topology& topo, const NetworkConfig& cfg, std::uint64_t seed, int max_attempts) {
  topo.validate();
  std::mt19937_64 rng(mix_seed(seed, 0x72616eULL));
  std::uniform_int_distribution<int> sf_dist(0, kNumSf - 1);
  std::uniform_int_distribution<int> tp_dist(0, static_cast<int>(cfg.tp_levels_dbm.size()) - 1);
  AllocationState state(topo.size());
  const auto losses = path_losses(topo, cfg);
  for (std::size_t i = 0; i < topo.size(); ++i) {
    for (int attempt = 0; attempt < max_attempts; ++attempt) {
      const auto sf = SpreadingFactor::from_index(sf_dist(rng));
      const TransmitPowerDbm tp{cfg.tp_levels_dbm[static_cast<std::size_t>(tp_dist(rng))]};
      if (check_c1(state, sf, cfg) && check_c2_with_loss(losses[i], sf, tp, cfg)) {
        state.assign(i, {sf, tp});
        break;
      }
    }
  }
  return state;
}

AllocationState distance_allocate(const Topology& topo, const NetworkConfig& cfg) {
  topo.validate();
  if (topo.size() > static_cast<std::size_t>(kNumSf * cfg.max_eds_per_sf)) {
    throw Error(ErrorCode::TooManyEds, "distance-based allocation supports at most " +
                                           std::to_string(kNumSf * cfg.max_eds_per_sf) + " EDs");
  }
  std::vector<std::size_t> order(topo.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> dist(topo.size());
  for (std::size_t i = 0; i < topo.size(); ++i) dist[i] = distance(topo.eds[i], topo.gateway);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return dist[a] < dist[b]; });

  AllocationState state(topo.size());
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    const std::size_t ed = order[rank];
    const auto sf = SpreadingFactor::from_index(static_cast<int>(rank) / cfg.max_eds_per_sf);
    const double expected_loss = mean_path_loss(ed, topo, cfg);
    const double actual_loss = path_loss(ed, topo, cfg);
    for (double level : cfg.tp_levels_dbm) {
      const TransmitPowerDbm tp{level};
      if (check_c2_with_loss(expected_loss, sf, tp, cfg)) {
        if (check_c2_with_loss(actual_loss, sf, tp, cfg)) state.assign(ed, {sf, tp});
        break;
      }
    }
  }
  return state;
}

namespace {

Gene random_gene(std::mt19937_64& rng, int levels) {
  std::uniform_int_distribution<int> sf_dist(0, kNumSf - 1);
  std::uniform_int_distribution<int> tp_dist(0, levels - 1);
  const int sf = sf_dist(rng);
  return {sf, tp_dist(rng)};
}

double fitness_of(const AllocationScorer& scorer, const std::vector<Gene>& genes, double penalty) {
  return scorer.energy_efficiency(genes) - penalty * scorer.violations(genes);
}

}  // namespace

GAResult ga_allocate(const Topology& topo, const NetworkConfig& cfg, const GAConfig& ga,
                     const std::optional<std::vector<Chromosome>>& initial_population) {
  ga.validate();
  topo.validate();
  const AllocationScorer scorer(topo, cfg);
  const std::size_t n = topo.size();
  const int levels = scorer.num_tp_levels();
  std::mt19937_64 rng(mix_seed(ga.seed, 0x6761ULL));

  std::vector<Chromosome> population;
  if (initial_population) {
    population = *initial_population;
    if (population.size() != static_cast<std::size_t>(ga.population_size)) {
      throw Error(ErrorCode::InvalidArgument, "initial population size differs from population_size");
    }
    for (const auto& c : population) {
      if (c.genes.size() != n) throw Error(ErrorCode::ShapeMismatch, "chromosome length differs from N");
    }
  } else {
    population.resize(static_cast<std::size_t>(ga.population_size));
    for (auto& c : population) {
      c.genes.resize(n);
      for (auto& g : c.genes) g = random_gene(rng, levels);
    }
  }
  for (auto& c : population) c.fitness = fitness_of(scorer, c.genes, ga.violation_penalty);

  const auto by_fitness = [](const Chromosome& a, const Chromosome& b) { return a.fitness > b.fitness; };
  std::stable_sort(population.begin(), population.end(), by_fitness);

  GAResult result;
  result.best_fitness.push_back(population.front().fitness);
  std::optional<Chromosome> best_feasible;
  const auto consider = [&](const Chromosome& c) {
    if (scorer.violations(c.genes) == 0 && (!best_feasible || c.fitness > best_feasible->fitness)) best_feasible = c;
  };
  consider(population.front());

  std::uniform_int_distribution<std::size_t> pick(0, population.size() - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto tournament = [&]() -> const Chromosome& {
    std::size_t best = pick(rng);
    for (int k = 1; k < ga.tournament_size; ++k) {
      const std::size_t other = pick(rng);
      if (population[other].fitness > population[best].fitness) best = other;
    }
    return population[best];
  };

  std::vector<Chromosome> next;
  next.reserve(population.size());
  for (int gen = 0; gen < ga.generations; ++gen) {
    next.assign(population.begin(), population.begin() + ga.elite_size);
    while (next.size() < population.size()) {
      const Chromosome& a = tournament();
      const Chromosome& b = tournament();
      Chromosome child;
      child.genes.resize(n);
      for (std::size_t i = 0; i < n; ++i) {
        child.genes[i] = unit(rng) < 0.5 ? a.genes[i] : b.genes[i];
        if (unit(rng) < ga.mutation_rate) {
          // Redraw either the SF or the TP of this gene.
          const Gene fresh = random_gene(rng, levels);
          if (unit(rng) < 0.5) {
            child.genes[i].sf_index = fresh.sf_index;
          } else {
            child.genes[i].tp_level = fresh.tp_level;
          }
        }
      }
      child.fitness = fitness_of(scorer, child.genes, ga.violation_penalty);
      next.push_back(std::move(child));
    }
    population.swap(next);
    std::stable_sort(population.begin(), population.end(), by_fitness);
    result.best_fitness.push_back(population.front().fitness);
    consider(population.front());
  }

  if (!best_feasible) {
    throw Error(ErrorCode::NoFeasibleIndividual, "no individual satisfied C1 and C2 in any generation");
  }
  result.allocation = scorer.to_allocation(best_feasible->genes);
  result.energy_efficiency = scorer.energy_efficiency(best_feasible->genes);
  return result;
}

AllocationState brute_force_allocate(const Topology& topo, const NetworkConfig& cfg, std::size_t max_eds) {
  topo.validate();
  const std::size_t n = topo.size();
  if (n > max_eds) {
    throw Error(ErrorCode::InstanceTooLarge,
                "brute force is limited to " + std::to_string(max_eds) + " EDs, got " + std::to_string(n));
  }
  const AllocationScorer scorer(topo, cfg);
  const int levels = scorer.num_tp_levels();
  // Choice c < 6*levels encodes (sf = c / levels, tp = c % levels); the last choice leaves the ED unallocated.
  const int choices = kNumSf * levels + 1;
  const auto gene_of = [levels](int c) {
    return c == kNumSf * levels ? Gene{-1, 0} : Gene{c / levels, c % levels};
  };

  std::vector<int> digits(n, 0);
  std::vector<Gene> genes(n);
  std::vector<Gene> best(n, Gene{-1, 0});
  double best_ee = 0.0;
  while (true) {
    for (std::size_t i = 0; i < n; ++i) genes[i] = gene_of(digits[i]);
    if (scorer.violations(genes) == 0) {
      const double ee = scorer.energy_efficiency(genes);
      if (ee > best_ee) {
        best_ee = ee;
        best = genes;
      }
    }
    std::size_t pos = n;
    while (pos > 0) {
      --pos;
      if (++digits[pos] < choices) break;
      digits[pos] = 0;
      if (pos == 0) return scorer.to_allocation(best);
    }
    if (n == 0) return scorer.to_allocation(best);
  }
}

}  // namespace uavlora
