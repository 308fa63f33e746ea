#include "uavlora/phy.hpp"

#include <cmath>
#include <string>

#include "uavlora/error.hpp"

namespace uavlora {

SpreadingFactor::SpreadingFactor(int value) : value_(value) {
  if (value < kMinSf || value > kMaxSf) {
    throw Error(ErrorCode::InvalidArgument, "spreading factor " + std::to_string(value) + " outside [7, 12]");
  }
}

SpreadingFactor SpreadingFactor::from_index(int index) { return SpreadingFactor(kMinSf + index); }

void LoRaPhyConfig::validate() const {
  if (bandwidth_hz != 125e3 && bandwidth_hz != 250e3 && bandwidth_hz != 500e3) {
    throw Error(ErrorCode::InvalidArgument, "bandwidth must be 125, 250 or 500 kHz");
  }
  if (!(coding_rate > 0.0) || coding_rate > 4.0 / 5.0 + 1e-12) {
    throw Error(ErrorCode::InvalidArgument, "coding rate must lie in (0, 4/5]");
  }
  for (std::size_t i = 1; i < snr_limits_db.size(); ++i) {
    if (!(snr_limits_db[i] < snr_limits_db[i - 1])) {
      throw Error(ErrorCode::InvalidArgument, "SNR limits must strictly decrease with SF");
    }
  }
  if (!(carrier_frequency_hz > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "carrier frequency must be positive");
  }
}

double snr_limit(SpreadingFactor sf, const LoRaPhyConfig& cfg) {
  return cfg.snr_limits_db[static_cast<std::size_t>(sf.index())];
}

double noise_floor_dbm(const LoRaPhyConfig& cfg) {
  return cfg.noise_density_dbm_per_hz + 10.0 * std::log10(cfg.bandwidth_hz) + cfg.noise_figure_db;
}

double sensitivity(SpreadingFactor sf, const LoRaPhyConfig& cfg) {
  return noise_floor_dbm(cfg) + snr_limit(sf, cfg);
}

double lora_data_rate(SpreadingFactor sf, const LoRaPhyConfig& cfg) {
  const int m = sf.value();
  return m * (cfg.bandwidth_hz / std::ldexp(1.0, m)) * cfg.coding_rate;
}

bool is_decodable(double rssi_dbm, SpreadingFactor sf, const LoRaPhyConfig& cfg) {
  return sensitivity(sf, cfg) <= rssi_dbm;
}

double dbm_to_mw(double dbm) { return std::pow(10.0, dbm / 10.0); }

double mw_to_dbm(double mw) {
  if (!(mw > 0.0)) throw Error(ErrorCode::InvalidArgument, "power in mW must be positive");
  return 10.0 * std::log10(mw);
}

}  // namespace uavlora
