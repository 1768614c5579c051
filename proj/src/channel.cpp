#include "rismap/channel.hpp"

#include <cmath>

namespace rismap {

VecC steering_vector(const UpaConfig& cfg, const AzEl& angle, double wavelength) {
  if (wavelength <= 0.0)
    throw std::invalid_argument("steering_vector: wavelength must be > 0");
  const double k = 2.0 * kPi / wavelength * cfg.spacing;
  const double u = std::sin(angle.az) * std::cos(angle.el);
  const double w = std::sin(angle.el);
  VecC a(cfg.size());
  int n = 0;
  for (int q = 0; q < cfg.n_el; ++q) {
    for (int p = 0; p < cfg.n_az; ++p) {
      const double phase = k * (p * u + q * w);
      a[n++] = cd(std::cos(phase), std::sin(phase));
    }
  }
  return a;
}

cd ris_response(const VecC& profile, const VecC& a_phi_l, const VecC& a_phi_0) {
  if (profile.size() != a_phi_l.size() || profile.size() != a_phi_0.size())
    throw std::invalid_argument("ris_response: size mismatch");
  cd acc(0.0, 0.0);
  for (Eigen::Index n = 0; n < profile.size(); ++n)
    acc += a_phi_l[n] * profile[n] * a_phi_0[n];
  return acc;
}

RisProfileSchedule random_profile_schedule(int n_elements, int num_transmissions,
                                           Rng& rng) {
  if (num_transmissions % 2 != 0)
    throw std::invalid_argument("schedule: T must be even");
  RisProfileSchedule sched;
  sched.base.resize(num_transmissions / 2);
  for (auto& profile : sched.base) {
    profile.resize(n_elements);
    for (int n = 0; n < n_elements; ++n) {
      const double phase = rng.uniform(0.0, 2.0 * kPi);
      profile[n] = cd(std::cos(phase), std::sin(phase));
    }
  }
  return sched;
}

RisProfileSchedule directional_profile_schedule(const VecC& a_phi_0,
                                                const VecC& a_phi_focus,
                                                int num_transmissions) {
  if (num_transmissions % 2 != 0)
    throw std::invalid_argument("schedule: T must be even");
  VecC profile = (a_phi_0.array() * a_phi_focus.array()).conjugate();
  RisProfileSchedule sched;
  sched.base.assign(num_transmissions / 2, profile);
  return sched;
}

namespace {

// Clamped inward-projection of a point onto the RIS normal direction;
// negative means the point sits behind the reflecting plane.
double plane_cosine(const Scenario& s, const Vec3& p, double dist) {
  return (p - s.ris.position).dot(s.ris.normal()) / dist;
}

}  // namespace

double controlled_gain_sq(const Scenario& s, const Vec3& ue_position,
                          const std::optional<Vec3>& sp) {
  const double lambda = s.ofdm.wavelength();
  const double es = s.energy_per_subcarrier();
  const double d_ur = (ue_position - s.ris.position).norm();
  const double g_ur = plane_cosine(s, ue_position, d_ur);
  if (g_ur < 0.0) return 0.0;

  const double prefactor = es * lambda * lambda * std::pow(g_ur, 2.0 * s.q0) /
                           (16.0 * std::pow(4.0 * kPi, 2.0) * d_ur * d_ur);
  if (!sp) {
    return prefactor * std::pow(g_ur, 2.0 * s.q0) * lambda * lambda /
           (4.0 * kPi * d_ur * d_ur);
  }
  const double d_sr = (*sp - s.ris.position).norm();
  const double d_su = (*sp - ue_position).norm();
  const double g_sr = plane_cosine(s, *sp, d_sr);
  if (g_sr < 0.0) return 0.0;
  return prefactor * std::pow(g_sr, 2.0 * s.q0) * lambda * lambda * s.rcs /
         (std::pow(4.0 * kPi, 2.0) * d_sr * d_sr * d_su * d_su);
}

double uncontrolled_gain_sq(const Scenario& s, const Vec3& ue_position,
                            const Vec3& sp) {
  const double lambda = s.ofdm.wavelength();
  const double d_su = (sp - ue_position).norm();
  return s.energy_per_subcarrier() * lambda * lambda * s.rcs /
         (std::pow(4.0 * kPi, 3.0) * std::pow(d_su, 4.0));
}

PathGains path_gains(const Scenario& s, const Vec3& ue_position,
                     const std::vector<Vec3>& sps, double nu_g) {
  const double fc = s.ofdm.carrier_hz;
  const auto phased = [&](double amp_sq, double toa) {
    const double phase = -(2.0 * kPi * fc * toa + nu_g);
    return std::sqrt(amp_sq) * cd(std::cos(phase), std::sin(phase));
  };

  PathGains gains;
  gains.controlled.reserve(sps.size() + 1);
  gains.uncontrolled.reserve(sps.size());
  gains.behind_ris.assign(sps.size(), false);

  const double d_ur = (ue_position - s.ris.position).norm();
  gains.controlled.push_back(phased(controlled_gain_sq(s, ue_position, std::nullopt),
                                    2.0 * d_ur / kSpeedOfLight));
  for (std::size_t l = 0; l < sps.size(); ++l) {
    const Vec3& x = sps[l];
    const double d_sr = (x - s.ris.position).norm();
    const double d_su = (x - ue_position).norm();
    const double toa = (d_ur + d_sr + d_su) / kSpeedOfLight;
    const double amp_sq = controlled_gain_sq(s, ue_position, x);
    if (amp_sq == 0.0) gains.behind_ris[l] = true;
    gains.controlled.push_back(phased(amp_sq, toa));
    gains.uncontrolled.push_back(phased(uncontrolled_gain_sq(s, ue_position, x),
                                        2.0 * d_su / kSpeedOfLight));
  }
  return gains;
}

RxSignalBlock synthesize_rx(const Scenario& s, const UEState& ue,
                            const std::vector<Vec3>& sps,
                            const PathGains& gains,
                            const RisProfileSchedule& schedule,
                            const std::vector<VecC>& precoders, Rng& rng,
                            const SynthesisTerms& terms) {
  const int n_u = s.ue_array.size();
  const int n_sc = s.ofdm.n_subcarriers;
  const int t_total = static_cast<int>(precoders.size());
  if (t_total != 2 * schedule.pairs())
    throw std::invalid_argument("synthesize_rx: precoder/schedule length mismatch");
  if (gains.controlled.size() != sps.size() + 1 ||
      gains.uncontrolled.size() != sps.size())
    throw std::invalid_argument("synthesize_rx: gain/SP count mismatch");

  const double lambda = s.ofdm.wavelength();
  const Mat3 ue_rot = ue_rotation(ue.heading);
  const ChannelParams ris_link =
      channel_params(ue.position, s.ris, std::nullopt, ue_rot);

  const VecC a_theta0 = steering_vector(s.ue_array, ris_link.ue_angle, lambda);
  const VecC a_phi0 = steering_vector(s.ris_array, ris_link.ris_angle, lambda);

  struct PathTerms {
    VecC a_theta;   // UE steering toward the SP
    VecC a_phi;     // RIS steering toward the SP
    double toa_ris;
    double toa_direct;
  };
  std::vector<PathTerms> paths(sps.size());
  for (std::size_t l = 0; l < sps.size(); ++l) {
    const ChannelParams p = channel_params(ue.position, s.ris, sps[l], ue_rot);
    paths[l] = {steering_vector(s.ue_array, p.ue_angle, lambda),
                steering_vector(s.ris_array, p.ris_angle, lambda), p.toa_ris,
                *p.toa_direct};
  }

  const double df = s.ofdm.subcarrier_spacing_hz;
  const auto subcarrier_ramp = [&](double toa) {
    VecC d(n_sc);
    const double step = -2.0 * kPi * toa * df;
    for (int sc = 0; sc < n_sc; ++sc) {
      const double phase = step * sc;
      d[sc] = cd(std::cos(phase), std::sin(phase));
    }
    return d;
  };

  RxSignalBlock block;
  block.noise_psd = s.noise_psd;
  block.tx.resize(t_total);

  for (int t = 1; t <= t_total; ++t) {
    const VecC& f = precoders[t - 1];
    if (f.size() != n_u)
      throw std::invalid_argument("synthesize_rx: precoder dimension mismatch");
    const VecC omega = schedule.expanded(t);

    MatC y = MatC::Zero(n_u, n_sc);

    // i) UE-RIS-UE
    if (terms.ue_ris_ue) {
      const cd nu0 = ris_response(omega, a_phi0, a_phi0);
      const cd coupling = gains.controlled[0] * nu0 * (a_theta0.transpose() * f)(0);
      y.noalias() += (coupling * a_theta0) * subcarrier_ramp(ris_link.toa_ris).transpose();
    }
    for (std::size_t l = 0; l < sps.size(); ++l) {
      const PathTerms& p = paths[l];
      const cd nu = (terms.ris_sp || terms.sp_ris)
                        ? ris_response(omega, p.a_phi, a_phi0)
                        : cd(0.0, 0.0);
      // ii) UE-RIS-SP-UE: departs toward the RIS, arrives from the SP.
      if (terms.ris_sp) {
        const cd coupling =
            gains.controlled[l + 1] * nu * (a_theta0.transpose() * f)(0);
        y.noalias() += (coupling * p.a_theta) * subcarrier_ramp(p.toa_ris).transpose();
      }
      // iii) UE-SP-RIS-UE: departs toward the SP, arrives from the RIS.
      if (terms.sp_ris) {
        const cd coupling =
            gains.controlled[l + 1] * nu * (p.a_theta.transpose() * f)(0);
        y.noalias() += (coupling * a_theta0) * subcarrier_ramp(p.toa_ris).transpose();
      }
      // iv) UE-SP-UE
      if (terms.direct) {
        const cd coupling =
            gains.uncontrolled[l] * (p.a_theta.transpose() * f)(0);
        y.noalias() += (coupling * p.a_theta) * subcarrier_ramp(p.toa_direct).transpose();
      }
    }

    if (terms.noise) {
      for (int sc = 0; sc < n_sc; ++sc)
        for (int ant = 0; ant < n_u; ++ant)
          y(ant, sc) += rng.complex_normal(s.noise_psd);
    }
    block.tx[t - 1] = std::move(y);
  }
  return block;
}

}  // namespace rismap
