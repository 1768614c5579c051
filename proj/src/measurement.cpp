#include "rismap/measurement.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <json.hpp>

namespace rismap {

namespace {

// Factored single-path branch signal mu_{t,s} = gain * G_t(angles) * d_s(tau):
// the per-pair spatial factor G_t and the subcarrier ramp separate, so Gram
// entries of finite-difference Jacobian columns reduce to products of
// pair-sums and subcarrier-sums.
struct BranchFactors {
  MatC g;       // dim x active pairs
  double toa;   // delay seen by this branch
};

BranchFactors branch_factors(const SensingDesign& design,
                             const ChannelParams& path, Branch branch) {
  const Scenario& s = *design.scenario;
  const double lambda = s.ofdm.wavelength();
  const VecC a_theta = steering_vector(s.ue_array, path.ue_angle, lambda);
  const int t1 = design.plan.t1();
  const int pairs = design.pairs();

  BranchFactors f;
  if (branch == Branch::Direct) {
    if (!path.toa_direct)
      throw std::invalid_argument("branch_factors: direct branch needs an SP path");
    f.toa = *path.toa_direct;
    f.g.resize(a_theta.size(), pairs);
    for (int t = 1; t <= pairs; ++t) {
      const cd coupling = (a_theta.transpose() * design.plan.pair(t))(0);
      f.g.col(t - 1) = coupling * a_theta;
    }
    return f;
  }

  const VecC nu = design.ris_gains(path.ris_angle);
  f.toa = path.toa_ris;
  if (branch == Branch::Directional) {
    const VecC arrival = design.w_perp_h * a_theta;
    f.g.resize(arrival.size(), t1);
    for (int t = 0; t < t1; ++t)
      f.g.col(t) = nu[t] * design.coupling_t0[t] * arrival;
  } else {
    const double root_nu_u = std::sqrt(static_cast<double>(s.ue_array.size()));
    f.g.resize(1, pairs - t1);
    for (int t = t1 + 1; t <= pairs; ++t) {
      const cd coupling = (a_theta.transpose() * design.plan.pair(t))(0);
      f.g(0, t - t1 - 1) = root_nu_u * nu[t - 1] * coupling;
    }
  }
  return f;
}

ChannelParams perturbed(const ChannelParams& p, int angle_index, double h) {
  ChannelParams q = p;
  switch (angle_index) {
    case 0: q.ris_angle.az += h; break;
    case 1: q.ris_angle.el += h; break;
    case 2: q.ue_angle.az += h; break;
    case 3: q.ue_angle.el += h; break;
    default: throw std::logic_error("perturbed: bad angle index");
  }
  return q;
}

}  // namespace

std::optional<MatX> fim_covariance(const SensingDesign& design,
                                   const ChannelParams& path, cd gain,
                                   Branch branch) {
  const Scenario& s = *design.scenario;
  const int n_sc = s.ofdm.n_subcarriers;
  const double df = s.ofdm.subcarrier_spacing_hz;

  const BranchFactors base = branch_factors(design, path, branch);
  // Paths with (numerically) no energy in this branch are unobservable.
  const double noncentrality =
      4.0 * std::norm(gain) * n_sc * base.g.squaredNorm() / s.noise_psd;
  if (noncentrality < 1e-9) return std::nullopt;

  // Observable parameters, in measurement order. D/O observe
  // [phi_az, phi_el, tau, theta_az, theta_el]; N observes
  // [tau_bar, theta_az, theta_el]. Gain Re/Im columns are appended last.
  struct Column {
    cd gain_factor;   // multiplier on the (G, d) product
    const MatC* g;    // pair factor
    bool delay_diff;  // uses the differentiated subcarrier ramp
  };

  const bool ris_branch = branch != Branch::Direct;

  std::vector<MatC> g_variants;
  g_variants.reserve(5);
  const double h_ang = 1e-6;
  if (ris_branch) {
    for (int a = 0; a < 4; ++a) {
      const MatC g_plus =
          branch_factors(design, perturbed(path, a, h_ang), branch).g;
      const MatC g_minus =
          branch_factors(design, perturbed(path, a, -h_ang), branch).g;
      g_variants.push_back((g_plus - g_minus) / (2.0 * h_ang));
    }
  } else {
    for (int a = 2; a < 4; ++a) {
      const MatC g_plus =
          branch_factors(design, perturbed(path, a, h_ang), branch).g;
      const MatC g_minus =
          branch_factors(design, perturbed(path, a, -h_ang), branch).g;
      g_variants.push_back((g_plus - g_minus) / (2.0 * h_ang));
    }
  }

  std::vector<Column> cols;
  if (ris_branch) {
    cols.push_back({gain, &g_variants[0], false});  // phi_az
    cols.push_back({gain, &g_variants[1], false});  // phi_el
    cols.push_back({gain, &base.g, true});          // tau
    cols.push_back({gain, &g_variants[2], false});  // theta_az
    cols.push_back({gain, &g_variants[3], false});  // theta_el
  } else {
    cols.push_back({gain, &base.g, true});          // tau_bar
    cols.push_back({gain, &g_variants[0], false});  // theta_az
    cols.push_back({gain, &g_variants[1], false});  // theta_el
  }
  cols.push_back({cd(1.0, 0.0), &base.g, false});   // Re gain
  cols.push_back({cd(0.0, 1.0), &base.g, false});   // Im gain

  // Subcarrier-sum inner products of the base ramp and its central
  // difference; |d_s| = 1 so <d, d> = N_SC.
  const double h_tau = 1e-6 * std::max(std::abs(base.toa), 1e-9);
  cd dd_base_diff(0.0, 0.0);
  double dd_diff_diff = 0.0;
  for (int sc = 0; sc < n_sc; ++sc) {
    const double w = -2.0 * kPi * sc * df;
    const cd d0 = std::polar(1.0, w * base.toa);
    const cd dp = std::polar(1.0, w * (base.toa + h_tau));
    const cd dm = std::polar(1.0, w * (base.toa - h_tau));
    const cd diff = (dp - dm) / (2.0 * h_tau);
    dd_base_diff += std::conj(d0) * diff;
    dd_diff_diff += std::norm(diff);
  }
  const auto d_inner = [&](bool di, bool dj) -> cd {
    if (!di && !dj) return cd(static_cast<double>(n_sc), 0.0);
    if (di && dj) return cd(dd_diff_diff, 0.0);
    return di ? std::conj(dd_base_diff) : dd_base_diff;
  };

  const int n = static_cast<int>(cols.size());
  MatX fim(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      const cd g_inner = (cols[i].g->conjugate().cwiseProduct(*cols[j].g)).sum();
      const cd val = std::conj(cols[i].gain_factor) * cols[j].gain_factor *
                     g_inner * d_inner(cols[i].delay_diff, cols[j].delay_diff);
      fim(i, j) = fim(j, i) = (2.0 / s.noise_psd) * val.real();
    }
  }

  // Marginalize the gain nuisance by Schur complement, then invert.
  const int m = n - 2;
  const MatX a = fim.topLeftCorner(m, m);
  const MatX b = fim.topRightCorner(m, 2);
  const MatX d = fim.bottomRightCorner(2, 2);
  Eigen::LDLT<MatX> d_ldlt(d);
  if (d_ldlt.info() != Eigen::Success || !d_ldlt.isPositive())
    return std::nullopt;
  const MatX eff = a - b * d_ldlt.solve(b.transpose());

  Eigen::LDLT<MatX> eff_ldlt(eff);
  if (eff_ldlt.info() != Eigen::Success || !eff_ldlt.isPositive())
    return std::nullopt;
  MatX cov = eff_ldlt.solve(MatX::Identity(m, m));
  cov = 0.5 * (cov + cov.transpose()).eval();
  if (!cov.allFinite()) return std::nullopt;
  if (Eigen::LLT<MatX>(cov).info() != Eigen::Success) return std::nullopt;
  return cov;
}

namespace {

VecX sample_gaussian(const MatX& cov, Rng& rng) {
  Eigen::LLT<MatX> llt(cov);
  VecX u(cov.rows());
  for (Eigen::Index i = 0; i < u.size(); ++i) u[i] = rng.normal();
  return llt.matrixL() * u;
}

void wrap_azimuths(VecX& z, MeasBranch branch) {
  if (branch == MeasBranch::N) {
    z[1] = wrap_angle(z[1]);
  } else {
    z[0] = wrap_angle(z[0]);
    z[3] = wrap_angle(z[3]);
  }
}

void shuffle_set(MeasurementSet& set, Rng& rng) {
  for (int i = static_cast<int>(set.size()) - 1; i > 0; --i) {
    const int j = static_cast<int>(rng.uniform01() * (i + 1));
    std::swap(set[i], set[std::min(j, i)]);
  }
}

}  // namespace

GeneratedMeasurements generate_measurements(
    const SensingDesign& design, const std::vector<Vec3>& sps,
    const std::vector<PathDetection>& dps, const PathGains& gains,
    const ClutterModel& clutter, Rng& rng, double noise_scale) {
  if (dps.size() != sps.size())
    throw std::invalid_argument("generate_measurements: dp/SP count mismatch");
  if (gains.controlled.size() != sps.size() + 1)
    throw std::invalid_argument("generate_measurements: gain/SP count mismatch");

  GeneratedMeasurements out;
  const Scenario& s = *design.scenario;

  for (std::size_t l = 0; l < sps.size(); ++l) {
    const ChannelParams path =
        channel_params(design.ue.position, s.ris, sps[l], design.ue_rot);
    const VecX z_ris = (VecX(5) << path.ris_angle.az, path.ris_angle.el,
                        path.toa_ris, path.ue_angle.az, path.ue_angle.el)
                           .finished();
    const VecX z_n = (VecX(3) << *path.toa_direct, path.ue_angle.az,
                      path.ue_angle.el)
                         .finished();

    const struct {
      Branch branch;
      MeasBranch tag;
      double dp;
      cd gain;
      const VecX* z;
      MeasurementSet* sink;
    } kinds[3] = {
        {Branch::Directional, MeasBranch::D, dps[l].dp_d,
         gains.controlled[l + 1], &z_ris, &out.d},
        {Branch::Orthogonal, MeasBranch::O, dps[l].dp_o,
         gains.controlled[l + 1], &z_ris, &out.o},
        {Branch::Direct, MeasBranch::N, dps[l].dp_n, gains.uncontrolled[l],
         &z_n, &out.n},
    };
    for (const auto& k : kinds) {
      if (rng.uniform01() >= k.dp) continue;
      const auto cov = fim_covariance(design, path, k.gain, k.branch);
      if (!cov) {
        ++out.dropped_singular;
        continue;
      }
      Measurement meas;
      meas.branch = k.tag;
      meas.cov = *cov;
      meas.z = *k.z;
      if (noise_scale > 0.0)
        meas.z += noise_scale * sample_gaussian(*cov, rng);
      wrap_azimuths(meas.z, k.tag);
      k.sink->push_back(std::move(meas));
    }
  }

  // Clutter: covariance set to the box-scale diagonal so downstream gating
  // treats clutter like any other measurement.
  const auto add_clutter = [&](MeasurementSet& sink, MeasBranch tag,
                               const VecX& lo, const VecX& hi) {
    const int count = rng.poisson(clutter.mean);
    for (int i = 0; i < count; ++i) {
      Measurement meas;
      meas.branch = tag;
      meas.z.resize(lo.size());
      for (Eigen::Index c = 0; c < lo.size(); ++c)
        meas.z[c] = rng.uniform(lo[c], hi[c]);
      const VecX span = (hi - lo) * 0.02;
      meas.cov = span.cwiseProduct(span).asDiagonal();
      sink.push_back(std::move(meas));
    }
  };
  add_clutter(out.d, MeasBranch::D, clutter.lo_ris, clutter.hi_ris);
  add_clutter(out.o, MeasBranch::O, clutter.lo_ris, clutter.hi_ris);
  add_clutter(out.n, MeasBranch::N, clutter.lo_n, clutter.hi_n);

  shuffle_set(out.d, rng);
  shuffle_set(out.o, rng);
  shuffle_set(out.n, rng);
  return out;
}

MeasurementSet merge_double_bounce(const MeasurementSet& zd,
                                   const MeasurementSet& zo, double t_mg) {
  struct Candidate {
    double dist;
    std::size_t j, jp;
  };
  std::vector<Candidate> candidates;

  const auto residual = [](const Measurement& a, const Measurement& b) {
    VecX r = a.z - b.z;
    r[0] = wrap_angle(r[0]);
    r[3] = wrap_angle(r[3]);
    return r;
  };

  for (std::size_t j = 0; j < zd.size(); ++j) {
    for (std::size_t jp = 0; jp < zo.size(); ++jp) {
      const VecX r = residual(zd[j], zo[jp]);
      const double dist =
          0.5 * (r.dot(Eigen::LDLT<MatX>(zd[j].cov).solve(r)) +
                 r.dot(Eigen::LDLT<MatX>(zo[jp].cov).solve(r)));
      if (dist < t_mg) candidates.push_back({dist, j, jp});
    }
  }
  std::sort(candidates.begin(), candidates.end(),
            [](const Candidate& a, const Candidate& b) { return a.dist < b.dist; });

  std::vector<char> d_used(zd.size(), 0), o_used(zo.size(), 0);
  MeasurementSet merged;
  for (const auto& c : candidates) {
    if (d_used[c.j] || o_used[c.jp]) continue;
    d_used[c.j] = o_used[c.jp] = 1;
    Measurement m;
    m.branch = MeasBranch::R;
    const VecX r = residual(zo[c.jp], zd[c.j]);
    m.z = zd[c.j].z + 0.5 * r;
    wrap_azimuths(m.z, MeasBranch::R);
    m.cov = 0.25 * (zd[c.j].cov + zo[c.jp].cov);
    merged.push_back(std::move(m));
  }
  for (std::size_t j = 0; j < zd.size(); ++j)
    if (!d_used[j]) merged.push_back(zd[j]);
  for (std::size_t jp = 0; jp < zo.size(); ++jp)
    if (!o_used[jp]) merged.push_back(zo[jp]);
  return merged;
}

std::string measurement_set_to_json(const MeasurementSet& set) {
  nlohmann::json arr = nlohmann::json::array();
  for (const Measurement& m : set) {
    nlohmann::json obj;
    switch (m.branch) {
      case MeasBranch::D: obj["branch"] = "D"; break;
      case MeasBranch::O: obj["branch"] = "O"; break;
      case MeasBranch::N: obj["branch"] = "N"; break;
      case MeasBranch::R: obj["branch"] = "R"; break;
    }
    obj["z"] = std::vector<double>(m.z.data(), m.z.data() + m.z.size());
    nlohmann::json cov = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.cov.rows(); ++i)
      cov.push_back(std::vector<double>(m.cov.row(i).begin(), m.cov.row(i).end()));
    obj["cov"] = std::move(cov);
    arr.push_back(std::move(obj));
  }
  return arr.dump();
}

}  // namespace rismap
