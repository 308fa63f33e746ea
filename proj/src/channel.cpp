#include "uavlora/channel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "uavlora/error.hpp"

namespace uavlora {

double distance(const Position3D& a, const Position3D& b) {
  return std::hypot(a.x - b.x, a.y - b.y, a.z - b.z);
}

double horizontal_distance(const Position3D& a, const Position3D& b) { return std::hypot(a.x - b.x, a.y - b.y); }

void ChannelConfig::validate() const {
  if (!(beta_los > 0.0) || !(beta_nlos >= beta_los)) {
    throw Error(ErrorCode::InvalidArgument, "path-loss exponents must satisfy beta_nlos >= beta_los > 0");
  }
  if (!(sigma_los_db >= 0.0) || !(sigma_nlos_db >= 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "shadowing standard deviations must be non-negative");
  }
  if (!(reference_distance_m > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "reference distance must be positive");
  }
  if (!(carrier_frequency_hz > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "carrier frequency must be positive");
  }
  if (!(sigmoid_alpha > 0.0) || !(sigmoid_lambda > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "sigmoid parameters must be positive");
  }
}

double free_space_path_loss(const ChannelConfig& cfg) {
  return 20.0 * std::log10(cfg.reference_distance_m * cfg.carrier_frequency_hz * 4.0 * std::numbers::pi /
                           kSpeedOfLight);
}

double elevation_angle(const Position3D& ed, const Position3D& gw) {
  const double d = distance(ed, gw);
  if (d == 0.0) throw Error(ErrorCode::ZeroDistance, "device and gateway coincide");
  const double ratio = std::clamp((gw.z - ed.z) / d, -1.0, 1.0);
  return std::asin(ratio) * 180.0 / std::numbers::pi;
}

double los_probability(double theta_deg, const ChannelConfig& cfg) {
  return 1.0 / (1.0 + cfg.sigmoid_alpha * std::exp(-cfg.sigmoid_lambda * (theta_deg - cfg.sigmoid_alpha)));
}

double los_path_loss(double distance_m, const ChannelConfig& cfg, double shadow_db) {
  return free_space_path_loss(cfg) + 10.0 * cfg.beta_los * std::log10(distance_m / cfg.reference_distance_m) + shadow_db;
}

double nlos_path_loss(double distance_m, const ChannelConfig& cfg, double shadow_db) {
  return free_space_path_loss(cfg) + 10.0 * cfg.beta_nlos * std::log10(distance_m / cfg.reference_distance_m) + shadow_db;
}

double a2g_path_loss(const Position3D& ed, const Position3D& gw, const ChannelConfig& cfg,
                     const ShadowingSample& shadow) {
  const double d = distance(ed, gw);
  if (d == 0.0) throw Error(ErrorCode::ZeroDistance, "device and gateway coincide");
  const double p_los = los_probability(elevation_angle(ed, gw), cfg);
  return p_los * los_path_loss(d, cfg, shadow.los_db) + (1.0 - p_los) * nlos_path_loss(d, cfg, shadow.nlos_db);
}

}  // namespace uavlora
