#include <doctest.h>

#include "rismap/geometry.hpp"
#include "rismap/rng.hpp"

using namespace rismap;

namespace {

Pose ris_at(const Vec3& p) { return Pose{p, Mat3::Identity()}; }

}  // namespace

TEST_CASE("UE-RIS round trip delay matches the hand-computed norm") {
  // sqrt(20^2 + 30^2 + 20^2) = sqrt(1700)
  const ChannelParams p = channel_params(Vec3(50, -30, 0), ris_at({30, 0, 20}),
                                         std::nullopt, Mat3::Identity());
  const double expected = 2.0 * std::sqrt(1700.0) / kSpeedOfLight;
  CHECK(p.toa_ris == doctest::Approx(expected).epsilon(1e-12));
  CHECK(p.toa_ris * 1e9 == doctest::Approx(274.87).epsilon(1e-4));
  CHECK(!p.toa_direct.has_value());
}

TEST_CASE("point on the RIS local x axis sits at broadside") {
  const ChannelParams p = channel_params(Vec3(1, 0, 0), ris_at(Vec3::Zero()),
                                         std::nullopt, Mat3::Identity());
  CHECK(p.ris_angle.az == doctest::Approx(0.0));
  CHECK(p.ris_angle.el == doctest::Approx(0.0));
}

TEST_CASE("coincident points raise degenerate-geometry errors") {
  const Vec3 ue(50, -30, 0);
  CHECK_THROWS_AS(channel_params(ue, ris_at({30, 0, 20}), ue, Mat3::Identity()),
                  degenerate_geometry_error);
  CHECK_THROWS_AS(
      channel_params(ue, ris_at({30, 0, 20}), Vec3(30, 0, 20), Mat3::Identity()),
      degenerate_geometry_error);
  CHECK_THROWS_AS(channel_params(ue, ris_at(ue), std::nullopt, Mat3::Identity()),
                  degenerate_geometry_error);
}

TEST_CASE("three-segment delay satisfies the exact range sums") {
  Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const Vec3 ue = rng.uniform_in_box({0, -40, 0}, {60, 60, 5});
    const Vec3 ris = rng.uniform_in_box({0, -40, 0}, {60, 60, 25});
    const Vec3 sp = rng.uniform_in_box({0, -40, 0}, {60, 60, 12});
    if ((ue - ris).norm() < 1.0 || (sp - ris).norm() < 1.0 ||
        (sp - ue).norm() < 1.0)
      continue;
    const ChannelParams p =
        channel_params(ue, ris_at(ris), sp, ue_rotation(rng.uniform(-kPi, kPi)));
    const double d_sum = (ue - ris).norm() + (sp - ris).norm() + (sp - ue).norm();
    CHECK(p.toa_ris * kSpeedOfLight == doctest::Approx(d_sum).epsilon(1e-12));
    // Controlled ToA dominates both round trips (triangle inequality).
    const ChannelParams l0 =
        channel_params(ue, ris_at(ris), std::nullopt, Mat3::Identity());
    CHECK(p.toa_ris >= l0.toa_ris - 1e-18);
    CHECK(p.toa_ris >= *p.toa_direct - 1e-18);
  }
}

TEST_CASE("angles rebuild the rotated difference vector") {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const Vec3 ue = rng.uniform_in_box({0, -40, 0}, {60, 60, 5});
    const Vec3 sp = rng.uniform_in_box({0, -40, 0}, {60, 60, 12});
    if ((sp - ue).norm() < 1.0) continue;
    const double heading = rng.uniform(-kPi, kPi);
    const Mat3 rot = ue_rotation(heading);
    const ChannelParams p =
        channel_params(ue, ris_at({30, 0, 20}), sp, rot);
    const Vec3 local = rot.transpose() * (sp - ue);
    const Vec3 rebuilt = unit_from_azel(p.ue_angle) * local.norm();
    CHECK((rebuilt - local).norm() / local.norm() < 1e-10);
  }
}

TEST_CASE("straight-line limit of the constant turn model") {
  UEState s{{0, 0, 3}, kPi / 2, 11.11};
  const UEState next = constant_turn_step(s, 0.0, 1.0);
  CHECK(next.position.x() == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(next.position.y() == doctest::Approx(11.11).epsilon(1e-12));
  CHECK(next.position.z() == 3.0);
  CHECK(next.speed == s.speed);
  CHECK(next.heading == doctest::Approx(s.heading));
}

TEST_CASE("four quarter turns close the loop") {
  UEState s{{5, -2, 0}, 0.3, 4.0};
  UEState cur = s;
  for (int i = 0; i < 4; ++i) cur = constant_turn_step(cur, kPi / 2, 1.0);
  CHECK(cur.position.x() == doctest::Approx(s.position.x()).epsilon(1e-9));
  CHECK(cur.position.y() == doctest::Approx(s.position.y()).epsilon(1e-9));
  CHECK(wrap_angle(cur.heading - s.heading) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("series fallback matches the arc expansion near zero turn rate") {
  const UEState s{{1, 2, 0}, 0.7, 10.0};
  // Second-order expansion of the exact arc displacement; at |w*dt| ~ 1e-9
  // the quadratic term is negligible, so this is the ground truth.
  const auto series = [&](double w, double dt) {
    const double wdt = w * dt;
    const double dx = s.speed * dt *
                      (std::cos(s.heading) - 0.5 * wdt * std::sin(s.heading) -
                       wdt * wdt / 6.0 * std::cos(s.heading));
    const double dy = s.speed * dt *
                      (std::sin(s.heading) + 0.5 * wdt * std::cos(s.heading) -
                       wdt * wdt / 6.0 * std::sin(s.heading));
    return Vec3(s.position.x() + dx, s.position.y() + dy, s.position.z());
  };

  const UEState tiny = constant_turn_step(s, 9.9e-10, 1.0);  // fallback branch
  CHECK((tiny.position - series(9.9e-10, 1.0)).norm() < 1e-12);

  const UEState healthy = constant_turn_step(s, 1e-4, 1.0);  // exact branch
  CHECK((healthy.position - series(1e-4, 1.0)).norm() < 1e-9);
}

TEST_CASE("speed and height preserved over many steps and heading wraps") {
  UEState s{{50, -30, 0}, kPi / 2, 11.11};
  for (int i = 0; i < 200; ++i) {
    s = constant_turn_step(s, 0.5, 0.3);
    CHECK(s.speed == 11.11);
    CHECK(s.position.z() == 0.0);
    CHECK(s.heading >= -kPi);
    CHECK(s.heading < kPi);
  }
}

TEST_CASE("evaluation trajectory stays inside the map region") {
  // initial state [50, -30, 0, pi/2, 11.11], 15 steps
  UEState s{{50, -30, 0}, kPi / 2, 11.11};
  for (int k = 0; k < 15; ++k) {
    s = constant_turn_step(s, 0.05, 0.5);
    CHECK(s.position.x() >= 0.0);
    CHECK(s.position.x() <= 60.0);
    CHECK(s.position.y() >= -40.0);
    CHECK(s.position.y() <= 60.0);
  }
}

TEST_CASE("rotation validation accepts yaw matrices and rejects junk") {
  CHECK(is_valid_rotation(ue_rotation(1.234)));
  Mat3 bad = Mat3::Identity();
  bad(0, 0) = 2.0;
  CHECK(!is_valid_rotation(bad));
  Mat3 reflection = Mat3::Identity();
  reflection(2, 2) = -1.0;
  CHECK(!is_valid_rotation(reflection));
}
