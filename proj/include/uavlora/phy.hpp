#pragma once

#include <array>
#include <compare>
#include <cstdint>

namespace uavlora {

inline constexpr int kMinSf = 7;
inline constexpr int kMaxSf = 12;
inline constexpr int kNumSf = kMaxSf - kMinSf + 1;

/// LoRa spreading factor, always within [7, 12].
class SpreadingFactor {
 public:
  /// Throws Error(InvalidArgument) outside [7, 12].
  explicit SpreadingFactor(int value);

  constexpr int value() const noexcept { return value_; }
  /// Zero-based position in the SF set (SF7 -> 0).
  constexpr int index() const noexcept { return value_ - kMinSf; }

  static SpreadingFactor from_index(int index);

  friend constexpr auto operator<=>(SpreadingFactor, SpreadingFactor) = default;

 private:
  int value_;
};

/// Transmit power of an end device, in dBm.
struct TransmitPowerDbm {
  double value = 0.0;

  friend constexpr auto operator<=>(TransmitPowerDbm, TransmitPowerDbm) = default;
};

struct LoRaPhyConfig {
  double bandwidth_hz = 125e3;
  /// 4/(4+n), n in 1..4.
  double coding_rate = 4.0 / 5.0;
  double noise_figure_db = 6.0;
  /// Demodulation SNR floor per SF, indexed by SpreadingFactor::index().
  std::array<double, kNumSf> snr_limits_db{-7.5, -10.0, -12.5, -15.0, -17.5, -20.0};
  double carrier_frequency_hz = 868e6;
  double noise_density_dbm_per_hz = -175.0;

  /// Throws Error(InvalidArgument) describing the first violated invariant.
  void validate() const;
};

double snr_limit(SpreadingFactor sf, const LoRaPhyConfig& cfg = {});

/// Receiver sensitivity: N0 + 10 log10(BW) + NF + SNR limit.
double sensitivity(SpreadingFactor sf, const LoRaPhyConfig& cfg = {});

/// Thermal noise floor over the configured bandwidth, in dBm (sensitivity without the SNR limit).
double noise_floor_dbm(const LoRaPhyConfig& cfg);

/// Nominal LoRa bit rate SF * BW / 2^SF * CR, in bit/s.
double lora_data_rate(SpreadingFactor sf, const LoRaPhyConfig& cfg = {});

/// True iff sensitivity(sf) <= rssi (boundary inclusive).
bool is_decodable(double rssi_dbm, SpreadingFactor sf, const LoRaPhyConfig& cfg = {});

double dbm_to_mw(double dbm);
double mw_to_dbm(double mw);

}  // namespace uavlora
