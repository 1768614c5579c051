#include <doctest.h>

#include "rismap/channel.hpp"

using namespace rismap;

namespace {

// Small numerology keeps the synthesis tests fast.
Scenario small_scenario() {
  Scenario s = Scenario::defaults();
  s.ue_array = {2, 2, 0.005};
  s.ris_array = {4, 4, 0.0025};
  s.ofdm.n_subcarriers = 64;
  s.ofdm.bandwidth_hz = 64 * s.ofdm.subcarrier_spacing_hz;
  s.num_transmissions = 8;
  return s;
}

std::vector<VecC> uniform_precoders(const Scenario& s) {
  const int n_u = s.ue_array.size();
  VecC f = VecC::Ones(n_u) / std::sqrt(static_cast<double>(n_u));
  return std::vector<VecC>(s.num_transmissions, f);
}

}  // namespace

TEST_CASE("steering vector basics") {
  const UpaConfig cfg{4, 4, 0.005};
  const double lambda = 0.01;

  SUBCASE("broadside gives the all-ones vector") {
    const VecC a = steering_vector(cfg, {0.0, 0.0}, lambda);
    for (int i = 0; i < a.size(); ++i) CHECK(std::abs(a[i] - cd(1, 0)) < 1e-15);
  }
  SUBCASE("unit modulus and squared norm N at any angle") {
    Rng rng(3);
    for (int i = 0; i < 20; ++i) {
      const AzEl ang{rng.uniform(-kPi, kPi), rng.uniform(-kPi / 2, kPi / 2)};
      const VecC a = steering_vector(cfg, ang, lambda);
      CHECK(a.squaredNorm() == doctest::Approx(16.0).epsilon(1e-12));
      for (int n = 0; n < a.size(); ++n)
        CHECK(std::abs(a[n]) == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
  SUBCASE("half-wavelength array at endfire steps by pi along azimuth") {
    const VecC a = steering_vector(cfg, {kPi / 2, 0.0}, lambda);
    for (int q = 0; q < 4; ++q) {
      for (int p = 0; p + 1 < 4; ++p) {
        const cd ratio = a[q * 4 + p + 1] / a[q * 4 + p];
        CHECK(std::abs(ratio - cd(-1.0, 0.0)) < 1e-12);
      }
    }
  }
}

TEST_CASE("ris response") {
  const UpaConfig ris{50, 50, 0.0025};
  const double lambda = 0.01;
  const AzEl phi0{0.3, -0.1};
  const AzEl phil{-0.7, 0.25};
  const VecC a0 = steering_vector(ris, phi0, lambda);
  const VecC al = steering_vector(ris, phil, lambda);

  SUBCASE("phase-conjugate profile focuses to exactly N_R") {
    const VecC omega = (a0.array() * al.array()).conjugate();
    const cd nu = ris_response(omega, al, a0);
    CHECK(nu.real() == doctest::Approx(2500.0).epsilon(1e-12));
    CHECK(std::abs(nu.imag()) < 1e-9);
  }
  SUBCASE("all-ones profile at broadside reflects with gain N_R") {
    const VecC ones = VecC::Ones(ris.size());
    const VecC b = steering_vector(ris, {0.0, 0.0}, lambda);
    CHECK(std::abs(ris_response(ones, b, b) - cd(2500.0, 0.0)) < 1e-9);
  }
  SUBCASE("random profiles average |nu|^2 = N_R over many draws") {
    Rng rng(17);
    double acc = 0.0;
    const int draws = 10000;
    for (int i = 0; i < draws; ++i) {
      VecC omega(ris.size());
      for (int n = 0; n < omega.size(); ++n) {
        const double ph = rng.uniform(0.0, 2.0 * kPi);
        omega[n] = cd(std::cos(ph), std::sin(ph));
      }
      acc += std::norm(ris_response(omega, al, a0));
    }
    CHECK(acc / draws == doctest::Approx(2500.0).epsilon(0.05));
  }
}

TEST_CASE("profile schedule expansion alternates signs") {
  Rng rng(5);
  const RisProfileSchedule sched = random_profile_schedule(16, 8, rng);
  REQUIRE(sched.pairs() == 4);
  for (int t = 1; t <= 4; ++t) {
    CHECK((sched.expanded(2 * t - 1) - sched.base[t - 1]).norm() == 0.0);
    CHECK((sched.expanded(2 * t) + sched.base[t - 1]).norm() == 0.0);
    for (int n = 0; n < 16; ++n)
      CHECK(std::abs(sched.base[t - 1][n]) == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("uncontrolled gain magnitude matches the direct evaluation") {
  Scenario s = Scenario::defaults();
  s.ris.position = Vec3(0, 0, 0);
  // unit energy per subcarrier
  s.tx_power_w = s.ofdm.n_subcarriers * s.ofdm.subcarrier_spacing_hz;
  REQUIRE(s.energy_per_subcarrier() == doctest::Approx(1.0));

  const Vec3 ue(20, 0, 0);
  const Vec3 sp(20, 15, 0);  // d_SU = 15
  const double beta_sq = uncontrolled_gain_sq(s, ue, sp);
  // lambda^2 S / ((4 pi)^3 d^4) with lambda = 1 cm, S = 50, d = 15
  const double expected = 1e-4 * 50.0 / (std::pow(4.0 * kPi, 3.0) * std::pow(15.0, 4.0));
  CHECK(beta_sq == doctest::Approx(expected).epsilon(1e-12));
  CHECK(beta_sq == doctest::Approx(4.98e-11).epsilon(2e-3));
  CHECK(db10(beta_sq) == doctest::Approx(-103.0).epsilon(1e-3));

  SUBCASE("doubling the distance costs a factor 16 (the d^-4 law)") {
    const Vec3 sp2(20, 30, 0);
    CHECK(beta_sq / uncontrolled_gain_sq(s, ue, sp2) ==
          doctest::Approx(16.0).epsilon(1e-12));
  }
}

TEST_CASE("UE in the RIS plane nulls the controlled gain") {
  Scenario s = Scenario::defaults();
  s.ris.position = Vec3(30, 0, 20);
  const Vec3 ue_in_plane(30, 10, 0);  // zero x-offset from the RIS plane
  CHECK(controlled_gain_sq(s, ue_in_plane, std::nullopt) == 0.0);
}

TEST_CASE("SP behind the RIS plane is zeroed and flagged") {
  Scenario s = Scenario::defaults();
  s.ris.position = Vec3(30, 0, 20);
  const Vec3 ue(50, -30, 0);
  const std::vector<Vec3> sps{{20.0, 5.0, 5.0}};  // x < 30: behind the plane
  const PathGains g = path_gains(s, ue, sps, 0.0);
  CHECK(g.behind_ris[0]);
  CHECK(std::abs(g.controlled[1]) == 0.0);
  CHECK(std::abs(g.uncontrolled[0]) > 0.0);
}

TEST_CASE("controlled gain phases carry the delay and common offset") {
  Scenario s = Scenario::defaults();
  const Vec3 ue(50, -30, 0);
  const std::vector<Vec3> sps{{40.0, 10.0, 5.0}};
  const double nu_g = 1.234;
  const PathGains g = path_gains(s, ue, sps, nu_g);
  const ChannelParams p =
      channel_params(ue, s.ris, sps[0], Mat3::Identity());
  const double expected_phase =
      -(2.0 * kPi * s.ofdm.carrier_hz * p.toa_ris + nu_g);
  CHECK(std::arg(g.controlled[1] * std::polar(1.0, -expected_phase)) ==
        doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("synthesized block without SPs is rank one per transmission") {
  const Scenario s = small_scenario();
  const UEState ue{{50, -30, 0}, kPi / 2, 11.11};
  Rng rng(23);
  const auto sched = random_profile_schedule(s.ris_array.size(),
                                             s.num_transmissions, rng);
  const PathGains gains = path_gains(s, ue.position, {}, 0.0);
  SynthesisTerms terms;
  terms.noise = false;
  const RxSignalBlock block = synthesize_rx(s, ue, {}, gains, sched,
                                            uniform_precoders(s), rng, terms);
  REQUIRE(static_cast<int>(block.tx.size()) == s.num_transmissions);
  for (const MatC& y : block.tx) {
    Eigen::JacobiSVD<MatC> svd(y);
    const auto& sv = svd.singularValues();
    CHECK(sv[0] > 0.0);
    for (int i = 1; i < sv.size(); ++i) CHECK(sv[i] < 1e-12 * sv[0]);
  }
}

TEST_CASE("all-zero gains give an all-zero noiseless block") {
  const Scenario s = small_scenario();
  const UEState ue{{50, -30, 0}, 0.0, 0.0};
  Rng rng(29);
  const auto sched = random_profile_schedule(s.ris_array.size(),
                                             s.num_transmissions, rng);
  PathGains gains = path_gains(s, ue.position, {Vec3(40, 10, 5)}, 0.0);
  gains.controlled.assign(gains.controlled.size(), cd(0, 0));
  gains.uncontrolled.assign(gains.uncontrolled.size(), cd(0, 0));
  SynthesisTerms terms;
  terms.noise = false;
  const RxSignalBlock block = synthesize_rx(s, ue, {Vec3(40, 10, 5)}, gains,
                                            sched, uniform_precoders(s), rng,
                                            terms);
  for (const MatC& y : block.tx) CHECK(y.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("subcarrier profile follows the delay phase ramp") {
  const Scenario s = small_scenario();
  const UEState ue{{50, -30, 0}, 0.3, 0.0};
  Rng rng(31);
  const auto sched = random_profile_schedule(s.ris_array.size(),
                                             s.num_transmissions, rng);
  const std::vector<Vec3> sps{{40.0, 10.0, 5.0}};
  const PathGains gains = path_gains(s, ue.position, sps, 0.0);
  SynthesisTerms terms;
  terms.noise = false;
  terms.ue_ris_ue = terms.ris_sp = terms.sp_ris = false;  // direct path only
  const RxSignalBlock block = synthesize_rx(s, ue, sps, gains, sched,
                                            uniform_precoders(s), rng, terms);
  const ChannelParams p = channel_params(ue.position, s.ris, sps[0],
                                         ue_rotation(ue.heading));
  // Independent phase-ramp oracle: y_{t,s} / y_{t,0} = d_s(tau_bar).
  const double dtau = *p.toa_direct;
  const MatC& y = block.tx[0];
  for (int ant = 0; ant < y.rows(); ++ant) {
    for (int sc = 1; sc < y.cols(); ++sc) {
      const cd expected =
          std::polar(1.0, -2.0 * kPi * sc * dtau * s.ofdm.subcarrier_spacing_hz);
      CHECK(std::abs(y(ant, sc) / y(ant, 0) - expected) < 1e-10);
    }
  }
}

TEST_CASE("synthesis is linear in the SP set") {
  const Scenario s = small_scenario();
  const UEState ue{{50, -30, 0}, 0.0, 0.0};
  Rng rng(37);
  const auto sched = random_profile_schedule(s.ris_array.size(),
                                             s.num_transmissions, rng);
  const auto precoders = uniform_precoders(s);
  const Vec3 sp_a(40, 10, 5), sp_b(35, -5, 8);
  SynthesisTerms terms;
  terms.noise = false;
  terms.ue_ris_ue = false;  // the l = 0 term would be double counted

  const PathGains g_ab = path_gains(s, ue.position, {sp_a, sp_b}, 0.5);
  const PathGains g_a = path_gains(s, ue.position, {sp_a}, 0.5);
  const PathGains g_b = path_gains(s, ue.position, {sp_b}, 0.5);
  const RxSignalBlock both = synthesize_rx(s, ue, {sp_a, sp_b}, g_ab, sched,
                                           precoders, rng, terms);
  const RxSignalBlock only_a =
      synthesize_rx(s, ue, {sp_a}, g_a, sched, precoders, rng, terms);
  const RxSignalBlock only_b =
      synthesize_rx(s, ue, {sp_b}, g_b, sched, precoders, rng, terms);

  for (std::size_t t = 0; t < both.tx.size(); ++t) {
    const double scale = both.tx[t].norm();
    CHECK((both.tx[t] - only_a.tx[t] - only_b.tx[t]).norm() <=
          1e-12 * std::max(scale, 1e-30));
  }
}

TEST_CASE("noise injection matches the configured PSD") {
  Scenario s = small_scenario();
  s.noise_psd = 4e-18;
  const UEState ue{{50, -30, 0}, 0.0, 0.0};
  Rng rng(41);
  const auto sched = random_profile_schedule(s.ris_array.size(),
                                             s.num_transmissions, rng);
  PathGains gains = path_gains(s, ue.position, {}, 0.0);
  gains.controlled[0] = cd(0, 0);
  const RxSignalBlock block = synthesize_rx(s, ue, {}, gains, sched,
                                            uniform_precoders(s), rng);
  double acc = 0.0;
  int count = 0;
  for (const MatC& y : block.tx) {
    acc += y.squaredNorm();
    count += static_cast<int>(y.size());
  }
  CHECK(acc / count == doctest::Approx(s.noise_psd).epsilon(0.05));
}
