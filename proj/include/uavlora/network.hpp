#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "uavlora/channel.hpp"
#include "uavlora/phy.hpp"

namespace uavlora {

/// Everything needed to evaluate links and constraints of one network.
struct NetworkConfig {
  LoRaPhyConfig phy;
  ChannelConfig channel;
  std::vector<double> tp_levels_dbm{2.0, 5.0, 8.0, 11.0, 14.0};
  double p_max_dbm = 14.0;
  double circuit_power_mw = 10.0;
  /// Co-SF capacity limit (at most this many EDs share one SF).
  int max_eds_per_sf = 6;

  /// Channel override if set, otherwise the PHY thermal noise floor.
  double noise_power_dbm() const;
  double noise_power_mw() const;
  bool is_tp_level(double dbm) const;
  void validate() const;
};

/// Rectangular deployment area anchored at the origin.
struct Area {
  double width_m = 0.0;
  double height_m = 0.0;

  static Area square_km2(double km2);
  Position3D center(double altitude_m) const { return {width_m / 2.0, height_m / 2.0, altitude_m}; }
  bool contains(const Position3D& p) const;

  friend bool operator==(const Area&, const Area&) = default;
};

struct Topology {
  std::vector<Position3D> eds;
  Position3D gateway;
  std::vector<ShadowingSample> shadowing;
  Area area;
  std::uint64_t seed = 0;

  std::size_t size() const { return eds.size(); }
  void validate() const;

  friend bool operator==(const Topology&, const Topology&) = default;
};

/// Uniform i.i.d. ground-level EDs over `area`. Per-ED shadowing is drawn from
/// N(0, sigma) when `with_shadowing`, else zero. Throws Error(InvalidArea).
Topology generate_topology(std::size_t n, const Area& area, const Position3D& gateway, std::uint64_t seed,
                           const ChannelConfig& channel, bool with_shadowing = true);

struct Assignment {
  SpreadingFactor sf;
  TransmitPowerDbm tp;

  friend bool operator==(const Assignment&, const Assignment&) = default;
};

/// Per-ED (SF, TP) decisions. A slot holds at most one SF, so the
/// binary-indicator and one-SF-per-ED constraints hold by construction.
class AllocationState {
 public:
  AllocationState() = default;
  explicit AllocationState(std::size_t n_eds) : slots_(n_eds) {}

  std::size_t size() const { return slots_.size(); }
  const std::optional<Assignment>& operator[](std::size_t i) const { return slots_.at(i); }
  bool is_allocated(std::size_t i) const { return slots_.at(i).has_value(); }

  void assign(std::size_t i, Assignment a) { slots_.at(i) = a; }
  void clear(std::size_t i) { slots_.at(i).reset(); }

  int count_on(SpreadingFactor sf) const;
  std::size_t allocated_count() const;

  friend bool operator==(const AllocationState&, const AllocationState&) = default;

 private:
  std::vector<std::optional<Assignment>> slots_;
};

struct LinkMetrics {
  double path_loss_db = 0.0;
  double rssi_dbm = 0.0;
  double snr = 0.0;
  double sinr = 0.0;
  double capacity_bps = 0.0;
};

/// One entry per ED; unallocated EDs carry only their path loss.
struct LinkReport {
  std::vector<std::optional<LinkMetrics>> links;
  std::vector<double> path_loss_db;
};

double path_loss(std::size_t ed_index, const Topology& topo, const NetworkConfig& cfg);
std::vector<double> path_losses(const Topology& topo, const NetworkConfig& cfg);
/// Path loss without the ED's shadowing draw (distance-only knowledge).
double mean_path_loss(std::size_t ed_index, const Topology& topo, const NetworkConfig& cfg);

/// Linear SNR p / (10^(l/10) * noise). Throws Error(Unallocated).
double snr(std::size_t ed_index, const AllocationState& alloc, const Topology& topo, const NetworkConfig& cfg);
/// Co-SF SINR: snr / (sum of other same-SF snr + 1). Throws Error(Unallocated).
double sinr(std::size_t ed_index, const AllocationState& alloc, const Topology& topo, const NetworkConfig& cfg);
/// Shannon capacity BW log2(1 + sinr). Throws Error(Unallocated).
double capacity(std::size_t ed_index, const AllocationState& alloc, const Topology& topo, const NetworkConfig& cfg);

double shannon_capacity(double sinr, double bandwidth_hz);

/// Sum capacity over (P_c + sum of linear TPs), bit/s per mW. Unallocated EDs contribute nothing.
double energy_efficiency(const AllocationState& alloc, const Topology& topo, const NetworkConfig& cfg);

LinkReport link_report(const AllocationState& alloc, const Topology& topo, const NetworkConfig& cfg);

/// True iff placing one more ED on `sf` keeps its usage within max_eds_per_sf.
bool check_c1(const AllocationState& alloc, SpreadingFactor sf, const NetworkConfig& cfg);
/// True iff sensitivity(sf) <= rssi(tp, path loss of the ED).
bool check_c2(std::size_t ed_index, SpreadingFactor sf, TransmitPowerDbm tp, const Topology& topo,
              const NetworkConfig& cfg);
bool check_c2_with_loss(double path_loss_db, SpreadingFactor sf, TransmitPowerDbm tp, const NetworkConfig& cfg);

enum class Violation {
  PowerOutOfRange,    // 0 <= linear(p) <= linear(p_max)
  PowerNotInLevelSet, // discrete TP grid
  SfOverloaded,       // per-SF usage above max
  BelowSensitivity,   // sensitivity > RSSI
  SizeMismatch,
};

struct ViolationRecord {
  Violation kind;
  std::size_t ed_index = 0;  // unused for SfOverloaded
  int sf = 0;                // set for SfOverloaded
};

/// One-line human-readable description, e.g. "ED 3: below sensitivity".
std::string to_string(const ViolationRecord& v);

struct ValidationReport {
  std::vector<ViolationRecord> violations;
  bool power_ok = true;
  bool sf_load_ok = true;
  bool sensitivity_ok = true;

  bool feasible() const { return violations.empty(); }
};

/// Standalone re-check of the allocation constraints over a full state.
ValidationReport validate_allocation(const AllocationState& alloc, const Topology& topo, const NetworkConfig& cfg);

/// Maintains per-SF interference sums so EE can be updated as EDs are
/// assigned one at a time. Results match energy_efficiency() on the same state.
class IncrementalEvaluator {
 public:
  IncrementalEvaluator(const Topology& topo, const NetworkConfig& cfg);

  void assign(std::size_t ed_index, Assignment a);
  double energy_efficiency() const;
  double snr_of(std::size_t ed_index, TransmitPowerDbm tp) const;
  /// Current capacity of an allocated ED, 0 otherwise.
  double capacity_of(std::size_t ed_index) const;
  const AllocationState& state() const { return state_; }
  const std::vector<double>& path_loss_db() const { return path_loss_db_; }

 private:
  void refresh_group(int sf_index);

  std::vector<double> path_loss_db_;
  double noise_mw_;
  double bandwidth_hz_;
  double circuit_power_mw_;
  AllocationState state_;
  std::vector<double> snr_;
  std::vector<double> capacity_;
  std::array<std::vector<std::size_t>, kNumSf> members_;
  std::array<double, kNumSf> group_capacity_{};
  double tx_power_mw_ = 0.0;
};

}  // namespace uavlora
