#include "rismap/geometry.hpp"

#include <cmath>

namespace rismap {

namespace {
constexpr double kCoincidenceEps = 1e-9;  // meters
}

bool is_valid_rotation(const Mat3& r, double tol) {
  const Mat3 should_be_identity = r.transpose() * r;
  if ((should_be_identity - Mat3::Identity()).cwiseAbs().maxCoeff() > tol)
    return false;
  return std::abs(r.determinant() - 1.0) <= 1e-9;
}

Vec3 unit_from_azel(const AzEl& a) {
  const double ce = std::cos(a.el);
  return {ce * std::cos(a.az), ce * std::sin(a.az), std::sin(a.el)};
}

AzEl azel_from_local(const Vec3& v) {
  const double n = v.norm();
  AzEl a;
  a.az = std::atan2(v.y(), v.x());
  a.el = std::asin(std::clamp(v.z() / n, -1.0, 1.0));
  return a;
}

Mat3 ue_rotation(double heading) {
  const double c = std::cos(heading);
  const double s = std::sin(heading);
  Mat3 r;
  r << c, -s, 0.0,
       s,  c, 0.0,
       0.0, 0.0, 1.0;
  return r;
}

ChannelParams channel_params(const Vec3& ue_position, const Pose& ris,
                             const std::optional<Vec3>& sp,
                             const Mat3& ue_rot) {
  const double d_ur = (ue_position - ris.position).norm();
  if (d_ur < kCoincidenceEps)
    throw degenerate_geometry_error("UE and RIS positions coincide");

  ChannelParams out;
  if (!sp) {
    out.toa_ris = 2.0 * d_ur / kSpeedOfLight;
    out.ris_angle = azel_from_local(ris.to_local(ue_position));
    out.ue_angle = azel_from_local(ue_rot.transpose() * (ris.position - ue_position));
    return out;
  }

  const Vec3 x = *sp;
  const double d_sr = (x - ris.position).norm();
  const double d_su = (x - ue_position).norm();
  if (d_sr < kCoincidenceEps)
    throw degenerate_geometry_error("SP and RIS positions coincide");
  if (d_su < kCoincidenceEps)
    throw degenerate_geometry_error("SP and UE positions coincide");

  out.toa_ris = (d_ur + d_sr + d_su) / kSpeedOfLight;
  out.toa_direct = 2.0 * d_su / kSpeedOfLight;
  out.ris_angle = azel_from_local(ris.to_local(x));
  out.ue_angle = azel_from_local(ue_rot.transpose() * (x - ue_position));
  return out;
}

UEState constant_turn_step(const UEState& state, double turn_rate, double dt) {
  if (dt <= 0.0) throw std::invalid_argument("constant_turn_step: dt must be > 0");

  UEState next = state;
  const double h = state.heading;
  const double v = state.speed;
  const double wdt = turn_rate * dt;

  double dx, dy;
  if (std::abs(wdt) < 1e-9) {
    // First-order expansion of the arc; error O((w*dt)^2 * v*dt).
    dx = v * dt * (std::cos(h) - 0.5 * wdt * std::sin(h));
    dy = v * dt * (std::sin(h) + 0.5 * wdt * std::cos(h));
  } else {
    const double radius = v / turn_rate;
    dx = radius * (std::sin(h + wdt) - std::sin(h));
    dy = radius * (std::cos(h) - std::cos(h + wdt));
  }
  next.position.x() += dx;
  next.position.y() += dy;
  next.heading = wrap_angle(h + wdt);
  return next;
}

}  // namespace rismap
