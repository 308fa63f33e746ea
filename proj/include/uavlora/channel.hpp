#pragma once

#include <optional>

namespace uavlora {

inline constexpr double kSpeedOfLight = 299792458.0;

/// Cartesian position in meters; z is altitude above ground.
struct Position3D {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  friend bool operator==(const Position3D&, const Position3D&) = default;
};

double distance(const Position3D& a, const Position3D& b);
double horizontal_distance(const Position3D& a, const Position3D& b);

/// Parameters of the probabilistic LoS/nLoS air-to-ground model.
struct ChannelConfig {
  double beta_los = 2.0;
  double beta_nlos = 2.5;
  double sigma_los_db = 5.0;
  double sigma_nlos_db = 20.0;
  /// Sigmoid constants of the elevation-angle LoS probability (suburban defaults).
  double sigmoid_alpha = 9.61;
  double sigmoid_lambda = 0.16;
  double reference_distance_m = 1.0;
  double carrier_frequency_hz = 868e6;
  /// Receiver noise power. Unset means "derive from the PHY noise floor".
  std::optional<double> gaussian_noise_power_dbm;

  void validate() const;
};

/// Shadowing draws for one end device, held fixed for an episode.
struct ShadowingSample {
  double los_db = 0.0;
  double nlos_db = 0.0;

  friend bool operator==(const ShadowingSample&, const ShadowingSample&) = default;
};

/// Free-space loss at the reference distance, 20 log10(4 pi d_r f / c).
double free_space_path_loss(const ChannelConfig& cfg);

/// Elevation of the gateway seen from the device, in degrees.
/// Uses the 3D device-gateway distance. Throws Error(ZeroDistance) when the points coincide.
double elevation_angle(const Position3D& ed, const Position3D& gw);

/// Sigmoid LoS probability 1 / (1 + a exp(-l (theta - a))).
double los_probability(double theta_deg, const ChannelConfig& cfg);

double los_path_loss(double distance_m, const ChannelConfig& cfg, double shadow_db = 0.0);
double nlos_path_loss(double distance_m, const ChannelConfig& cfg, double shadow_db = 0.0);

/// Expected A2G loss: P_los * l_los + (1 - P_los) * l_nlos, in dB.
double a2g_path_loss(const Position3D& ed, const Position3D& gw, const ChannelConfig& cfg,
                     const ShadowingSample& shadow = {});

/// Received power for a transmitter at `tp_dbm` over `path_loss_db`.
constexpr double rssi(double tp_dbm, double path_loss_db) { return tp_dbm - path_loss_db; }

}  // namespace uavlora
