#include "uavlora/network.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "uavlora/error.hpp"
#include "uavlora/rng.hpp"

namespace uavlora {

double NetworkConfig::noise_power_dbm() const {
  return channel.gaussian_noise_power_dbm.value_or(noise_floor_dbm(phy));
}

double NetworkConfig::noise_power_mw() const { return dbm_to_mw(noise_power_dbm()); }

bool NetworkConfig::is_tp_level(double dbm) const {
  return std::find(tp_levels_dbm.begin(), tp_levels_dbm.end(), dbm) != tp_levels_dbm.end();
}

void NetworkConfig::validate() const {
  phy.validate();
  channel.validate();
  if (tp_levels_dbm.empty()) throw Error(ErrorCode::InvalidArgument, "at least one TP level is required");
  if (!std::is_sorted(tp_levels_dbm.begin(), tp_levels_dbm.end()) ||
      std::adjacent_find(tp_levels_dbm.begin(), tp_levels_dbm.end()) != tp_levels_dbm.end()) {
    throw Error(ErrorCode::InvalidArgument, "TP levels must be strictly increasing");
  }
  if (tp_levels_dbm.back() > p_max_dbm) {
    throw Error(ErrorCode::InvalidArgument, "TP levels exceed p_max");
  }
  if (!(circuit_power_mw > 0.0)) throw Error(ErrorCode::InvalidArgument, "circuit power must be positive");
  if (max_eds_per_sf < 1) throw Error(ErrorCode::InvalidArgument, "max_eds_per_sf must be >= 1");
}

Area Area::square_km2(double km2) {
  const double side = std::sqrt(km2) * 1000.0;
  return {side, side};
}

bool Area::contains(const Position3D& p) const {
  return p.x >= 0.0 && p.x <= width_m && p.y >= 0.0 && p.y <= height_m;
}

void Topology::validate() const {
  if (eds.empty()) throw Error(ErrorCode::InvalidArgument, "topology needs at least one ED");
  if (shadowing.size() != eds.size()) {
    throw Error(ErrorCode::InvalidArgument, "one shadowing sample per ED is required");
  }
  if (!(gateway.z > 0.0)) throw Error(ErrorCode::InvalidArgument, "gateway altitude must be positive");
  for (std::size_t i = 0; i < eds.size(); ++i) {
    if (!area.contains(eds[i]) || eds[i].z < 0.0) {
      throw Error(ErrorCode::InvalidArgument, "ED " + std::to_string(i) + " lies outside the target area");
    }
  }
}

Topology generate_topology(std::size_t n, const Area& area, const Position3D& gateway, std::uint64_t seed,
                           const ChannelConfig& channel, bool with_shadowing) {
  if (!(area.width_m > 0.0) || !(area.height_m > 0.0) || !std::isfinite(area.width_m) ||
      !std::isfinite(area.height_m)) {
    throw Error(ErrorCode::InvalidArea, "area dimensions must be positive and finite");
  }
  if (n == 0) throw Error(ErrorCode::InvalidArgument, "topology needs at least one ED");

  Topology topo;
  topo.area = area;
  topo.gateway = gateway;
  topo.seed = seed;
  topo.eds.reserve(n);
  topo.shadowing.reserve(n);

  std::mt19937_64 placement(mix_seed(seed, 0x706c6163ULL));
  std::uniform_real_distribution<double> ux(0.0, area.width_m);
  std::uniform_real_distribution<double> uy(0.0, area.height_m);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = ux(placement);
    const double y = uy(placement);
    topo.eds.push_back({x, y, 0.0});
  }
  for (std::size_t i = 0; i < n; ++i) {
    ShadowingSample s;
    if (with_shadowing) {
      std::mt19937_64 rng(mix_seed(seed, 0x73686164ULL + i));
      std::normal_distribution<double> unit(0.0, 1.0);
      s.los_db = channel.sigma_los_db * unit(rng);
      s.nlos_db = channel.sigma_nlos_db * unit(rng);
    }
    topo.shadowing.push_back(s);
  }
  return topo;
}

int AllocationState::count_on(SpreadingFactor sf) const {
  return static_cast<int>(
      std::count_if(slots_.begin(), slots_.end(), [sf](const auto& s) { return s && s->sf == sf; }));
}

std::size_t AllocationState::allocated_count() const {
  return static_cast<std::size_t>(std::count_if(slots_.begin(), slots_.end(), [](const auto& s) { return s.has_value(); }));
}

double path_loss(std::size_t ed_index, const Topology& topo, const NetworkConfig& cfg) {
  return a2g_path_loss(topo.eds.at(ed_index), topo.gateway, cfg.channel, topo.shadowing.at(ed_index));
}

std::vector<double> path_losses(const Topology& topo, const NetworkConfig& cfg) {
  std::vector<double> out(topo.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = path_loss(i, topo, cfg);
  return out;
}

double mean_path_loss(std::size_t ed_index, const Topology& topo, const NetworkConfig& cfg) {
  return a2g_path_loss(topo.eds.at(ed_index), topo.gateway, cfg.channel);
}

namespace {

const Assignment& require_allocated(std::size_t ed_index, const AllocationState& alloc) {
  const auto& slot = alloc[ed_index];
  if (!slot) throw Error(ErrorCode::Unallocated, "ED " + std::to_string(ed_index) + " has no assignment");
  return *slot;
}

double snr_from(double tp_dbm, double loss_db, double noise_mw) {
  return dbm_to_mw(tp_dbm) / (std::pow(10.0, 0.1 * loss_db) * noise_mw);
}

}  // namespace

double snr(std::size_t ed_index, const AllocationState& alloc, const Topology& topo, const NetworkConfig& cfg) {
  const auto& a = require_allocated(ed_index, alloc);
  return snr_from(a.tp.value, path_loss(ed_index, topo, cfg), cfg.noise_power_mw());
}

double sinr(std::size_t ed_index, const AllocationState& alloc, const Topology& topo, const NetworkConfig& cfg) {
  const auto& a = require_allocated(ed_index, alloc);
  double interference = 0.0;
  for (std::size_t k = 0; k < alloc.size(); ++k) {
    if (k != ed_index && alloc[k] && alloc[k]->sf == a.sf) interference += snr(k, alloc, topo, cfg);
  }
  return snr(ed_index, alloc, topo, cfg) / (interference + 1.0);
}

double shannon_capacity(double sinr_linear, double bandwidth_hz) { return bandwidth_hz * std::log2(1.0 + sinr_linear); }

double capacity(std::size_t ed_index, const AllocationState& alloc, const Topology& topo, const NetworkConfig& cfg) {
  return shannon_capacity(sinr(ed_index, alloc, topo, cfg), cfg.phy.bandwidth_hz);
}

double energy_efficiency(const AllocationState& alloc, const Topology& topo, const NetworkConfig& cfg) {
  double rate = 0.0;
  double power = cfg.circuit_power_mw;
  for (std::size_t i = 0; i < alloc.size(); ++i) {
    if (!alloc[i]) continue;
    rate += capacity(i, alloc, topo, cfg);
    power += dbm_to_mw(alloc[i]->tp.value);
  }
  return rate / power;
}

LinkReport link_report(const AllocationState& alloc, const Topology& topo, const NetworkConfig& cfg) {
  LinkReport report;
  report.path_loss_db = path_losses(topo, cfg);
  report.links.resize(alloc.size());
  for (std::size_t i = 0; i < alloc.size(); ++i) {
    if (!alloc[i]) continue;
    LinkMetrics m;
    m.path_loss_db = report.path_loss_db[i];
    m.rssi_dbm = rssi(alloc[i]->tp.value, m.path_loss_db);
    m.snr = snr(i, alloc, topo, cfg);
    m.sinr = sinr(i, alloc, topo, cfg);
    m.capacity_bps = shannon_capacity(m.sinr, cfg.phy.bandwidth_hz);
    report.links[i] = m;
  }
  return report;
}

bool check_c1(const AllocationState& alloc, SpreadingFactor sf, const NetworkConfig& cfg) {
  return alloc.count_on(sf) + 1 <= cfg.max_eds_per_sf;
}

bool check_c2_with_loss(double path_loss_db, SpreadingFactor sf, TransmitPowerDbm tp, const NetworkConfig& cfg) {
  return is_decodable(rssi(tp.value, path_loss_db), sf, cfg.phy);
}

bool check_c2(std::size_t ed_index, SpreadingFactor sf, TransmitPowerDbm tp, const Topology& topo,
              const NetworkConfig& cfg) {
  return check_c2_with_loss(path_loss(ed_index, topo, cfg), sf, tp, cfg);
}

ValidationReport validate_allocation(const AllocationState& alloc, const Topology& topo, const NetworkConfig& cfg) {
  ValidationReport report;
  if (alloc.size() != topo.size()) {
    report.violations.push_back({Violation::SizeMismatch, 0, 0});
    report.power_ok = report.sf_load_ok = report.sensitivity_ok = false;
    return report;
  }
  const double p_max_mw = dbm_to_mw(cfg.p_max_dbm);
  for (std::size_t i = 0; i < alloc.size(); ++i) {
    if (!alloc[i]) continue;
    const auto& a = *alloc[i];
    const double p_mw = dbm_to_mw(a.tp.value);
    if (!(p_mw >= 0.0 && p_mw <= p_max_mw)) {
      report.violations.push_back({Violation::PowerOutOfRange, i, 0});
      report.power_ok = false;
    }
    if (!cfg.is_tp_level(a.tp.value)) {
      report.violations.push_back({Violation::PowerNotInLevelSet, i, 0});
      report.power_ok = false;
    }
    if (!check_c2(i, a.sf, a.tp, topo, cfg)) {
      report.violations.push_back({Violation::BelowSensitivity, i, a.sf.value()});
      report.sensitivity_ok = false;
    }
  }
  for (int m = 0; m < kNumSf; ++m) {
    const auto sf = SpreadingFactor::from_index(m);
    if (alloc.count_on(sf) > cfg.max_eds_per_sf) {
      report.violations.push_back({Violation::SfOverloaded, 0, sf.value()});
      report.sf_load_ok = false;
    }
  }
  return report;
}

IncrementalEvaluator::IncrementalEvaluator(const Topology& topo, const NetworkConfig& cfg)
    : path_loss_db_(path_losses(topo, cfg)),
      noise_mw_(cfg.noise_power_mw()),
      bandwidth_hz_(cfg.phy.bandwidth_hz),
      circuit_power_mw_(cfg.circuit_power_mw),
      state_(topo.size()),
      snr_(topo.size(), 0.0),
      capacity_(topo.size(), 0.0) {}

double IncrementalEvaluator::snr_of(std::size_t ed_index, TransmitPowerDbm tp) const {
  return snr_from(tp.value, path_loss_db_.at(ed_index), noise_mw_);
}

void IncrementalEvaluator::assign(std::size_t ed_index, Assignment a) {
  if (state_.is_allocated(ed_index)) {
    throw Error(ErrorCode::InvalidArgument, "ED " + std::to_string(ed_index) + " is already allocated");
  }
  state_.assign(ed_index, a);
  snr_[ed_index] = snr_of(ed_index, a.tp);
  tx_power_mw_ += dbm_to_mw(a.tp.value);
  members_[static_cast<std::size_t>(a.sf.index())].push_back(ed_index);
  refresh_group(a.sf.index());
}

void IncrementalEvaluator::refresh_group(int sf_index) {
  const auto& group = members_[static_cast<std::size_t>(sf_index)];
  double total = 0.0;
  for (std::size_t n : group) {
    double interference = 0.0;
    for (std::size_t k : group) {
      if (k != n) interference += snr_[k];
    }
    capacity_[n] = shannon_capacity(snr_[n] / (interference + 1.0), bandwidth_hz_);
    total += capacity_[n];
  }
  group_capacity_[static_cast<std::size_t>(sf_index)] = total;
}

double IncrementalEvaluator::energy_efficiency() const {
  double rate = 0.0;
  for (double g : group_capacity_) rate += g;
  return rate / (circuit_power_mw_ + tx_power_mw_);
}

double IncrementalEvaluator::capacity_of(std::size_t ed_index) const { return capacity_.at(ed_index); }

}  // namespace uavlora

namespace uavlora {

std::string to_string(const ViolationRecord& v) {
  const std::string ed = "ED " + std::to_string(v.ed_index) + ": ";
  switch (v.kind) {
    case Violation::PowerOutOfRange: return ed + "transmit power outside [0, p_max]";
    case Violation::PowerNotInLevelSet: return ed + "transmit power not one of the configured levels";
    case Violation::SfOverloaded: return "SF" + std::to_string(v.sf) + ": more EDs than the per-SF limit";
    case Violation::BelowSensitivity: return ed + "RSSI below the SF sensitivity";
    case Violation::SizeMismatch: return "allocation size differs from the topology";
  }
  return "unknown violation";
}

}  // namespace uavlora
