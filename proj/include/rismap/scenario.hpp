#pragma once

#include "rismap/common.hpp"
#include "rismap/geometry.hpp"

namespace rismap {

/// Uniform planar array: n_az x n_el elements on the local y (azimuth) and
/// z (elevation) axes with the given element spacing.
struct UpaConfig {
  int n_az = 1;
  int n_el = 1;
  double spacing = 0.0;  // meters

  int size() const { return n_az * n_el; }
};

struct OfdmConfig {
  double carrier_hz = 30e9;
  double subcarrier_spacing_hz = 120e3;
  int n_subcarriers = 1600;
  double bandwidth_hz = 200e6;

  double wavelength() const { return kSpeedOfLight / carrier_hz; }
};

struct Box3 {
  Vec3 lo = Vec3::Zero();
  Vec3 hi = Vec3::Zero();

  bool contains(const Vec3& p, double margin = 0.0) const {
    return (p.array() >= lo.array() - margin).all() &&
           (p.array() <= hi.array() + margin).all();
  }
  double volume() const { return (hi - lo).prod(); }
  Vec3 center() const { return 0.5 * (lo + hi); }
};

/// Physical scene and radio parameters shared by every stage of the pipeline.
/// Defaults reproduce the evaluation setup: 4x4 UE array at lambda/2,
/// 50x50 RIS at lambda/4, 40 transmissions of 1600 subcarriers at 30 GHz,
/// 37 dBm transmit power over -166 dBm/Hz noise.
struct Scenario {
  Pose ris;
  UpaConfig ue_array{4, 4, 0.005};
  UpaConfig ris_array{50, 50, 0.0025};
  OfdmConfig ofdm;
  int num_transmissions = 40;          // T, even; schedule uses T/2 sign pairs
  double tx_power_w = dbm_to_watt(37.0);
  double noise_psd = dbm_to_watt(-166.0);  // N0, W/Hz
  double rcs = 50.0;                   // m^2
  double q0 = 0.285;                   // element radiation-pattern exponent
  Box3 sp_box{{30.0, -30.0, 2.0}, {50.0, 50.0, 10.0}};

  /// Energy allotted to one subcarrier of one transmission.
  double energy_per_subcarrier() const {
    return tx_power_w / (ofdm.n_subcarriers * ofdm.subcarrier_spacing_hz);
  }
  /// True when the configured bandwidth matches n_subcarriers * spacing.
  bool bandwidth_consistent(double rel_tol = 1e-9) const {
    const double implied = ofdm.n_subcarriers * ofdm.subcarrier_spacing_hz;
    return std::abs(implied - ofdm.bandwidth_hz) <= rel_tol * ofdm.bandwidth_hz;
  }

  static Scenario defaults();
};

}  // namespace rismap
