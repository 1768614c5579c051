#pragma once

#include <optional>

#include "rismap/common.hpp"

namespace rismap {

/// Monostatic sensor state: position, heading (yaw, wrapped to [-pi,pi)),
/// speed (m/s, nonnegative).
struct UEState {
  Vec3 position = Vec3::Zero();
  double heading = 0.0;
  double speed = 0.0;
};

/// Rigid pose of an array node. `rotation` holds the local axes as columns
/// (orthonormal, det +1); global->local transform is rotation^T. The array
/// broadside / surface normal is the local x axis.
struct Pose {
  Vec3 position = Vec3::Zero();
  Mat3 rotation = Mat3::Identity();

  Vec3 normal() const { return rotation.col(0); }
  Vec3 to_local(const Vec3& global) const {
    return rotation.transpose() * (global - position);
  }
};

/// Validates orthonormality (to 1e-12) and det = +1.
bool is_valid_rotation(const Mat3& r, double tol = 1e-12);

/// Azimuth/elevation pair in radians, elevation in [-pi/2, pi/2].
struct AzEl {
  double az = 0.0;
  double el = 0.0;
};

/// Unit direction in the local frame for the given angles:
/// [cos el cos az, cos el sin az, sin el].
Vec3 unit_from_azel(const AzEl& a);

/// Angles of a local-frame direction vector (az = atan2(y,x), el = asin(z/|v|)).
AzEl azel_from_local(const Vec3& local);

/// Yaw-only rotation for the UE local frame derived from its heading.
Mat3 ue_rotation(double heading);

/// Geometric parameters of one propagation path. For the bare UE-RIS link
/// (no scattering point) `toa_direct` is absent and the controlled ToA is the
/// two-way UE-RIS round trip; with a scattering point the controlled ToA is
/// the three-segment UE-RIS-SP-UE length and `toa_direct` the two-way UE-SP
/// round trip.
struct ChannelParams {
  double toa_ris = 0.0;                  // seconds, controlled signal
  std::optional<double> toa_direct;      // seconds, uncontrolled signal
  AzEl ris_angle;                        // AoA/AoD at the RIS
  AzEl ue_angle;                         // AoA/AoD at the UE
};

/// Per-path channel parameters from node geometry. Throws
/// degenerate_geometry_error when any two involved points coincide.
ChannelParams channel_params(const Vec3& ue_position, const Pose& ris,
                             const std::optional<Vec3>& sp,
                             const Mat3& ue_rot);

/// Advances the UE one step along a constant-turn (coordinated turn) arc.
/// Exact arc formula with a series fallback for |turn_rate*dt| < 1e-9;
/// speed and z are preserved exactly.
UEState constant_turn_step(const UEState& state, double turn_rate, double dt);

}  // namespace rismap
