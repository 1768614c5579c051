#include "rismap/tracking.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

namespace rismap {

namespace {

constexpr double kLogTwoPi = 1.8378770664093453;

// Jacobian rows of (az, el) at a node with the given rotation, w.r.t. the
// global target position.
Eigen::Matrix<double, 2, 3> angle_jacobian(const Vec3& x, const Vec3& origin,
                                           const Mat3& rot) {
  const Vec3 v = rot.transpose() * (x - origin);
  const double rho2 = v.x() * v.x() + v.y() * v.y();
  const double n2 = v.squaredNorm();
  const double rho = std::sqrt(rho2);
  if (rho2 < 1e-18 || n2 < 1e-18)
    throw degenerate_geometry_error("angle_jacobian: direction undefined");
  Eigen::RowVector3d daz(-v.y() / rho2, v.x() / rho2, 0.0);
  Eigen::RowVector3d del(-v.x() * v.z() / (n2 * rho), -v.y() * v.z() / (n2 * rho),
                         rho / n2);
  Eigen::Matrix<double, 2, 3> j;
  j.row(0) = daz * rot.transpose();
  j.row(1) = del * rot.transpose();
  return j;
}

VecX wrap_to_reference(VecX z, const VecX& ref, MeasBranch branch) {
  if (branch == MeasBranch::N) {
    z[1] = ref[1] + wrap_angle(z[1] - ref[1]);
  } else {
    z[0] = ref[0] + wrap_angle(z[0] - ref[0]);
    z[3] = ref[3] + wrap_angle(z[3] - ref[3]);
  }
  return z;
}

VecX wrap_residual(VecX r, MeasBranch branch) {
  if (branch == MeasBranch::N) {
    r[1] = wrap_angle(r[1]);
  } else {
    r[0] = wrap_angle(r[0]);
    r[3] = wrap_angle(r[3]);
  }
  return r;
}

double logsumexp2(double a, double b) {
  const double m = std::max(a, b);
  if (!std::isfinite(m)) return m;
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

}  // namespace

VecX measurement_model(const Vec3& x, const SensorGeometry& geom,
                       MeasBranch branch) {
  const double d_su = (x - geom.ue_position).norm();
  if (d_su < 1e-9)
    throw degenerate_geometry_error("measurement_model: SP at the UE");
  const AzEl theta = azel_from_local(geom.ue_rot.transpose() * (x - geom.ue_position));

  if (branch == MeasBranch::N) {
    VecX z(3);
    z << 2.0 * d_su / kSpeedOfLight, theta.az, theta.el;
    return z;
  }
  const double d_ur = (geom.ue_position - geom.ris.position).norm();
  const double d_sr = (x - geom.ris.position).norm();
  if (d_sr < 1e-9)
    throw degenerate_geometry_error("measurement_model: SP at the RIS");
  const AzEl phi = azel_from_local(geom.ris.to_local(x));
  VecX z(5);
  z << phi.az, phi.el, (d_ur + d_sr + d_su) / kSpeedOfLight, theta.az, theta.el;
  return z;
}

MatX measurement_jacobian(const Vec3& x, const SensorGeometry& geom,
                          MeasBranch branch) {
  const Vec3 u_su = (x - geom.ue_position).normalized();
  const auto theta_jac = angle_jacobian(x, geom.ue_position, geom.ue_rot);

  if (branch == MeasBranch::N) {
    MatX j(3, 3);
    j.row(0) = 2.0 / kSpeedOfLight * u_su.transpose();
    j.block<2, 3>(1, 0) = theta_jac;
    return j;
  }
  const Vec3 u_sr = (x - geom.ris.position).normalized();
  const auto phi_jac = angle_jacobian(x, geom.ris.position, geom.ris.rotation);
  MatX j(5, 3);
  j.block<2, 3>(0, 0) = phi_jac;
  j.row(2) = (u_sr + u_su).transpose() / kSpeedOfLight;
  j.block<2, 3>(3, 0) = theta_jac;
  return j;
}

std::optional<Vec3> invert_measurement(const VecX& z, const MatX& cov,
                                       const SensorGeometry& geom,
                                       MeasBranch branch) {
  if (branch == MeasBranch::N) {
    const double range = 0.5 * kSpeedOfLight * z[0];
    if (range <= 0.0) return std::nullopt;
    const Vec3 u = geom.ue_rot * unit_from_azel({z[1], z[2]});
    return geom.ue_position + range * u;
  }

  // Total reflected length minus the known UE-RIS leg gives the SP ellipse
  // with foci at the UE and RIS; intersect it with the UE-side bearing, or
  // with the RIS-side bearing when the first is inconsistent.
  const double d_ur = (geom.ue_position - geom.ris.position).norm();
  const double total = kSpeedOfLight * z[2] - d_ur;
  if (total <= 1e-6) return std::nullopt;

  const auto along = [&](const Vec3& origin, const Vec3& other,
                         const Vec3& dir) -> std::optional<Vec3> {
    const Vec3 p = origin - other;
    const double denom = 2.0 * (total + p.dot(dir));
    if (std::abs(denom) < 1e-9) return std::nullopt;
    const double d = (total * total - p.squaredNorm()) / denom;
    if (d <= 1e-6 || total - d <= 1e-6) return std::nullopt;
    return origin + d * dir;
  };

  std::optional<Vec3> seed =
      along(geom.ue_position, geom.ris.position,
            geom.ue_rot * unit_from_azel({z[3], z[4]}));
  if (!seed)
    seed = along(geom.ris.position, geom.ue_position,
                 geom.ris.rotation * unit_from_azel({z[0], z[1]}));
  if (!seed) return std::nullopt;

  // Gauss-Newton refinement against the full 5-dim observation.
  Vec3 x = *seed;
  const Eigen::LDLT<MatX> r_ldlt(cov);
  for (int iter = 0; iter < 10; ++iter) {
    VecX residual;
    MatX jac;
    try {
      residual = wrap_residual(z - measurement_model(x, geom, branch), branch);
      jac = measurement_jacobian(x, geom, branch);
    } catch (const degenerate_geometry_error&) {
      return std::nullopt;
    }
    const MatX jt_rinv = jac.transpose() * r_ldlt.solve(MatX::Identity(5, 5));
    const Mat3 gram = jt_rinv * jac;
    Eigen::LDLT<Mat3> g_ldlt(gram);
    if (g_ldlt.info() != Eigen::Success) return std::nullopt;
    const Vec3 step = g_ldlt.solve(jt_rinv * residual);
    if (!step.allFinite()) return std::nullopt;
    const double cap = 10.0;  // meters, keeps early iterations stable
    x += (step.norm() > cap) ? Vec3(step * (cap / step.norm())) : step;
    if (step.norm() < 1e-10) break;
  }
  return x;
}

AssociationMarginals association_marginals(const MatX& log_psi,
                                           const VecX& log_e,
                                           const PmbParams& params) {
  const int n = static_cast<int>(log_psi.rows());
  const int m = static_cast<int>(log_psi.cols());

  AssociationMarginals out;
  out.component = MatX::Zero(n, m + 1);
  out.unassociated = VecX::Ones(m);
  if (m == 0) {
    out.component.col(0).setOnes();
    return out;
  }

  // Hypothesis count sum_k C(m,k) * n!/(n-k)!.
  double count = 0.0;
  {
    double term = 1.0;  // k = 0
    count = 1.0;
    for (int k = 1; k <= std::min(n, m); ++k) {
      term *= static_cast<double>(m - k + 1) / k * (n - k + 1);
      count += term;
      if (count > 1e15) break;
    }
  }

  if (count <= params.exact_assoc_limit && n <= 62) {
    // Exact enumeration, two passes: max log weight, then shifted sums.
    double max_lw = -std::numeric_limits<double>::infinity();
    std::vector<int> choice(m, -1);
    std::uint64_t used = 0;

    const auto dfs = [&](auto&& self, int j, double lw, auto&& leaf) -> void {
      if (j == m) {
        leaf(lw);
        return;
      }
      choice[j] = -1;
      self(self, j + 1, lw + log_e[j], leaf);
      for (int i = 0; i < n; ++i) {
        if (used & (1ULL << i)) continue;
        if (!std::isfinite(log_psi(i, j))) continue;
        used |= (1ULL << i);
        choice[j] = i;
        self(self, j + 1, lw + log_psi(i, j), leaf);
        used &= ~(1ULL << i);
        choice[j] = -1;
      }
    };

    dfs(dfs, 0, 0.0, [&](double lw) { max_lw = std::max(max_lw, lw); });

    double z_sum = 0.0;
    MatX assoc_sum = MatX::Zero(n, m);
    VecX none_sum = VecX::Zero(m);
    dfs(dfs, 0, 0.0, [&](double lw) {
      const double w = std::exp(lw - max_lw);
      z_sum += w;
      for (int j = 0; j < m; ++j) {
        if (choice[j] >= 0)
          assoc_sum(choice[j], j) += w;
        else
          none_sum[j] += w;
      }
    });

    out.component.block(0, 1, n, m) = assoc_sum / z_sum;
    for (int i = 0; i < n; ++i)
      out.component(i, 0) =
          std::max(0.0, 1.0 - out.component.row(i).tail(m).sum());
    out.unassociated = none_sum / z_sum;
    return out;
  }

  // Loopy belief propagation on the association graph.
  out.used_bp = true;
  MatX psi(n, m);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j)
      psi(i, j) = std::exp(std::clamp(log_psi(i, j) - log_e[j], -300.0, 300.0));

  // Exclusion sums are formed directly (not by subtracting one term from the
  // row total): the likelihood ratios span hundreds of orders of magnitude
  // and the subtraction cancellation can go negative.
  MatX mu = MatX::Ones(n, m);   // component -> measurement
  MatX nu = MatX::Ones(n, m);   // measurement -> component
  for (int iter = 0; iter < params.bp_max_iter; ++iter) {
    MatX mu_new(n, m);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < m; ++j) {
        double excl = 1.0;
        for (int jp = 0; jp < m; ++jp)
          if (jp != j) excl += psi(i, jp) * nu(i, jp);
        mu_new(i, j) = psi(i, j) / excl;
      }
    }
    const double delta = (mu_new - mu).cwiseAbs().maxCoeff();
    mu = mu_new;
    for (int j = 0; j < m; ++j) {
      for (int i = 0; i < n; ++i) {
        double excl = 1.0;
        for (int ip = 0; ip < n; ++ip)
          if (ip != i) excl += mu(ip, j);
        nu(i, j) = 1.0 / excl;
      }
    }
    if (delta < params.bp_tol) break;
  }

  for (int i = 0; i < n; ++i) {
    VecX belief(m + 1);
    belief[0] = 1.0;
    for (int j = 0; j < m; ++j) belief[j + 1] = psi(i, j) * nu(i, j);
    out.component.row(i) = belief.transpose() / belief.sum();
  }
  for (int j = 0; j < m; ++j)
    out.unassociated[j] = 1.0 / (1.0 + mu.col(j).sum());
  return out;
}

void pmb_predict(PMBPosterior& post, const PmbParams& params) {
  for (auto& b : post.bernoullis) b.r *= params.survival;
  post.intensity_weight = params.survival * post.intensity_weight + params.birth_rate;
}

namespace {

struct CkfResult {
  Gaussian3 updated;
  double loglik = -std::numeric_limits<double>::infinity();
};

std::optional<CkfResult> ckf_update(const Gaussian3& prior, const VecX& z,
                                    const MatX& r, const SensorGeometry& geom,
                                    MeasBranch branch) {
  const int nx = 3;
  const int nz = static_cast<int>(z.size());
  Eigen::LLT<Mat3> llt(prior.cov);
  if (llt.info() != Eigen::Success) return std::nullopt;
  const Mat3 sqrt_cov = llt.matrixL();
  const double scale = std::sqrt(static_cast<double>(nx));

  MatX sigma_x(nx, 2 * nx);
  for (int i = 0; i < nx; ++i) {
    sigma_x.col(i) = prior.mean + scale * sqrt_cov.col(i);
    sigma_x.col(nx + i) = prior.mean - scale * sqrt_cov.col(i);
  }

  MatX sigma_z(nz, 2 * nx);
  VecX ref;
  try {
    ref = measurement_model(prior.mean, geom, branch);
    for (int k = 0; k < 2 * nx; ++k)
      sigma_z.col(k) =
          wrap_to_reference(measurement_model(sigma_x.col(k), geom, branch),
                            ref, branch);
  } catch (const degenerate_geometry_error&) {
    return std::nullopt;
  }

  const VecX z_pred = sigma_z.rowwise().mean();
  MatX s = r;
  MatX cross = MatX::Zero(nx, nz);
  const double w = 1.0 / (2.0 * nx);
  for (int k = 0; k < 2 * nx; ++k) {
    const VecX dz = sigma_z.col(k) - z_pred;
    const Vec3 dx = sigma_x.col(k) - prior.mean;
    s += w * dz * dz.transpose();
    cross += w * dx * dz.transpose();
  }

  Eigen::LDLT<MatX> s_ldlt(s);
  if (s_ldlt.info() != Eigen::Success || !s_ldlt.isPositive()) return std::nullopt;
  const VecX residual = wrap_residual(z - z_pred, branch);

  CkfResult res;
  const VecX s_inv_res = s_ldlt.solve(residual);
  double logdet_s = 0.0;
  for (int i = 0; i < nz; ++i) logdet_s += std::log(s_ldlt.vectorD()[i]);
  res.loglik = -0.5 * (nz * kLogTwoPi + logdet_s + residual.dot(s_inv_res));

  const MatX gain = cross * s_ldlt.solve(MatX::Identity(nz, nz));
  res.updated.mean = prior.mean + gain * residual;
  Mat3 cov = prior.cov - gain * s * gain.transpose();
  cov = 0.5 * (cov + cov.transpose()).eval();
  if (Eigen::LLT<Mat3>(cov).info() != Eigen::Success) return std::nullopt;
  res.updated.cov = cov;
  return res;
}

double symmetric_mahalanobis(const Gaussian3& a, const Gaussian3& b) {
  const Vec3 d = a.mean - b.mean;
  const double qa = d.dot(Eigen::LDLT<Mat3>(a.cov).solve(d));
  const double qb = d.dot(Eigen::LDLT<Mat3>(b.cov).solve(d));
  return 0.5 * (qa + qb);
}

void merge_duplicates(PMBPosterior& post, double merge_distance) {
  bool merged = true;
  while (merged) {
    merged = false;
    for (std::size_t i = 0; i < post.bernoullis.size() && !merged; ++i) {
      for (std::size_t j = i + 1; j < post.bernoullis.size() && !merged; ++j) {
        auto& bi = post.bernoullis[i];
        auto& bj = post.bernoullis[j];
        const double dist = symmetric_mahalanobis(bi.density, bj.density);
        if (!std::isfinite(dist) || std::sqrt(dist) >= merge_distance) continue;
        const double wi = bi.r / (bi.r + bj.r);
        const double wj = 1.0 - wi;
        const Vec3 mean = wi * bi.density.mean + wj * bj.density.mean;
        Mat3 cov = wi * (bi.density.cov + (bi.density.mean - mean) *
                                              (bi.density.mean - mean).transpose()) +
                   wj * (bj.density.cov + (bj.density.mean - mean) *
                                              (bj.density.mean - mean).transpose());
        bi.r = std::min(1.0 - 1e-12, 1.0 - (1.0 - bi.r) * (1.0 - bj.r));
        bi.density.mean = mean;
        bi.density.cov = 0.5 * (cov + cov.transpose()).eval();
        post.bernoullis.erase(post.bernoullis.begin() + j);
        merged = true;
      }
    }
  }
}

}  // namespace

PmbUpdateStats pmb_update(PMBPosterior& post, const MeasurementSet& measurements,
                          const SensorGeometry& geom, MeasBranch branch,
                          const std::function<double(const Vec3&)>& dp_at,
                          double log_clutter_density, const PmbParams& params) {
  PmbUpdateStats stats;
  const int n = static_cast<int>(post.bernoullis.size());
  const int m = static_cast<int>(measurements.size());

  // Detection probability per component at its predicted mean.
  VecX dp(n);
  for (int i = 0; i < n; ++i)
    dp[i] = std::clamp(dp_at(post.bernoullis[i].density.mean), 1e-12, 1.0 - 1e-9);

  // Pairwise cubature updates and log likelihood ratios.
  MatX log_psi = MatX::Constant(n, m, -std::numeric_limits<double>::infinity());
  std::vector<std::vector<std::optional<CkfResult>>> pairwise(n);
  VecX log_miss(n);
  for (int i = 0; i < n; ++i) {
    const auto& b = post.bernoullis[i];
    log_miss[i] = std::log1p(-b.r * dp[i]);
    pairwise[i].resize(m);
    for (int j = 0; j < m; ++j) {
      pairwise[i][j] = ckf_update(b.density, measurements[j].z,
                                  measurements[j].cov, geom, branch);
      if (pairwise[i][j])
        log_psi(i, j) = std::log(b.r * dp[i]) + pairwise[i][j]->loglik -
                        log_miss[i];
    }
  }

  // Birth candidates from the uniform intensity. The intensity is
  // moment-matched to one broad Gaussian over the region and pushed through
  // the measurement model (cubature), giving the measurement-space weight
  // dp_u * mu * N(z; z_u, S_u + R); the conditional location density comes
  // from the local inversion with covariance (J^T R^-1 J)^-1.
  struct BirthCandidate {
    double log_weight = -std::numeric_limits<double>::infinity();
    Gaussian3 density;
  };
  std::vector<BirthCandidate> births(m);
  Gaussian3 region_gaussian;
  region_gaussian.mean = post.region.center();
  region_gaussian.cov =
      ((post.region.hi - post.region.lo).cwiseProduct(post.region.hi - post.region.lo) /
       12.0)
          .asDiagonal();
  const double log_mu_dp =
      std::log(std::max(post.intensity_weight, 1e-300) * params.intensity_dp);

  std::optional<Gaussian3> region_image_mean_cov;  // z_u and spread (before +R)
  VecX z_u;
  MatX s_u;
  try {
    Eigen::LLT<Mat3> llt(region_gaussian.cov);
    const Mat3 sqrt_cov = llt.matrixL();
    const double scale = std::sqrt(3.0);
    const VecX ref = measurement_model(region_gaussian.mean, geom, branch);
    const int nz = static_cast<int>(ref.size());
    MatX sigma_z(nz, 6);
    for (int i = 0; i < 3; ++i) {
      sigma_z.col(i) = wrap_to_reference(
          measurement_model(region_gaussian.mean + scale * sqrt_cov.col(i), geom,
                            branch),
          ref, branch);
      sigma_z.col(3 + i) = wrap_to_reference(
          measurement_model(region_gaussian.mean - scale * sqrt_cov.col(i), geom,
                            branch),
          ref, branch);
    }
    z_u = sigma_z.rowwise().mean();
    s_u = MatX::Zero(nz, nz);
    for (int k = 0; k < 6; ++k) {
      const VecX dz = sigma_z.col(k) - z_u;
      s_u += (1.0 / 6.0) * dz * dz.transpose();
    }
    region_image_mean_cov = region_gaussian;
  } catch (const degenerate_geometry_error&) {
  }

  for (int j = 0; j < m; ++j) {
    if (!region_image_mean_cov) break;
    const auto x0 = invert_measurement(measurements[j].z, measurements[j].cov,
                                       geom, branch);
    if (!x0 || !post.region.contains(*x0, 2.0)) continue;
    try {
      const int nz = static_cast<int>(measurements[j].z.size());
      const MatX jac = measurement_jacobian(*x0, geom, branch);
      const Eigen::LDLT<MatX> r_ldlt(measurements[j].cov);
      const Mat3 gram = jac.transpose() * r_ldlt.solve(MatX::Identity(nz, nz)) * jac;
      Eigen::LDLT<Mat3> g_ldlt(gram);
      if (g_ldlt.info() != Eigen::Success || !g_ldlt.isPositive()) continue;
      Mat3 cov = g_ldlt.solve(Mat3::Identity());
      cov = 0.5 * (cov + cov.transpose()).eval();
      if (Eigen::LLT<Mat3>(cov).info() != Eigen::Success) continue;

      const MatX s_total = s_u + measurements[j].cov;
      Eigen::LDLT<MatX> s_ldlt(s_total);
      if (s_ldlt.info() != Eigen::Success || !s_ldlt.isPositive()) continue;
      const VecX res = wrap_residual(measurements[j].z - z_u, branch);
      double logdet_s = 0.0;
      for (int i = 0; i < nz; ++i) logdet_s += std::log(s_ldlt.vectorD()[i]);

      births[j].log_weight =
          log_mu_dp - 0.5 * (nz * kLogTwoPi + logdet_s + res.dot(s_ldlt.solve(res)));
      births[j].density = {*x0, cov};
    } catch (const degenerate_geometry_error&) {
      continue;
    }
  }

  VecX log_e(m);
  for (int j = 0; j < m; ++j)
    log_e[j] = logsumexp2(log_clutter_density, births[j].log_weight);

  const AssociationMarginals marg =
      association_marginals(log_psi, log_e, params);
  stats.used_bp = marg.used_bp;

  // Track-oriented merge: moment-match each component over its association
  // mixture, spawn one Bernoulli per measurement from the intensity.
  std::vector<BernoulliComponent> updated;
  updated.reserve(n + m);
  for (int i = 0; i < n; ++i) {
    const auto& b = post.bernoullis[i];
    const double r_miss =
        b.r * (1.0 - dp[i]) / std::exp(log_miss[i]);  // conditional on miss

    double r_new = marg.component(i, 0) * r_miss;
    Vec3 mean = marg.component(i, 0) * r_miss * b.density.mean;
    for (int j = 0; j < m; ++j) {
      if (!pairwise[i][j]) continue;
      const double w = marg.component(i, j + 1);
      r_new += w;
      mean += w * pairwise[i][j]->updated.mean;
    }
    if (r_new < 1e-12) continue;
    mean /= r_new;

    Mat3 cov = Mat3::Zero();
    {
      const double w = marg.component(i, 0) * r_miss / r_new;
      const Vec3 d = b.density.mean - mean;
      cov += w * (b.density.cov + d * d.transpose());
    }
    for (int j = 0; j < m; ++j) {
      if (!pairwise[i][j]) continue;
      const double w = marg.component(i, j + 1) / r_new;
      const Vec3 d = pairwise[i][j]->updated.mean - mean;
      cov += w * (pairwise[i][j]->updated.cov + d * d.transpose());
    }
    const Mat3 cov_sym = 0.5 * (cov + cov.transpose()).eval();
    if (!std::isfinite(r_new) || !mean.allFinite() || !cov_sym.allFinite() ||
        Eigen::LLT<Mat3>(cov_sym).info() != Eigen::Success) {
      ++stats.dropped_components;
      continue;
    }
    updated.push_back({std::min(r_new, 1.0 - 1e-12), Gaussian3{mean, cov_sym}});
  }

  for (int j = 0; j < m; ++j) {
    if (!std::isfinite(births[j].log_weight)) continue;
    const double r_birth = std::exp(births[j].log_weight - log_e[j]);
    const double r_new = marg.unassociated[j] * r_birth;
    if (r_new < params.prune_r) continue;
    updated.push_back({std::min(r_new, 1.0 - 1e-12), births[j].density});
  }

  post.bernoullis = std::move(updated);
  post.intensity_weight *= (1.0 - params.intensity_dp);

  std::erase_if(post.bernoullis,
                [&](const BernoulliComponent& b) { return b.r < params.prune_r; });
  merge_duplicates(post, params.merge_distance);
  return stats;
}

PMBPosterior gci_fuse(const PMBPosterior& a, const PMBPosterior& b, double w_a,
                      double w_b, double gate) {
  if (std::abs(w_a + w_b - 1.0) > 1e-9 || w_a < 0.0 || w_b < 0.0)
    throw std::invalid_argument("gci_fuse: weights must be nonnegative and sum to 1");
  if (w_a > 1.0 - 1e-12) return a;
  if (w_b > 1.0 - 1e-12) return b;

  PMBPosterior fused;
  fused.region = a.region;
  fused.intensity_weight = std::pow(std::max(a.intensity_weight, 0.0), w_a) *
                           std::pow(std::max(b.intensity_weight, 0.0), w_b);

  // Track-to-track gating on the difference covariance: robust when the two
  // posteriors have very different precisions.
  struct Pair {
    double dist;
    std::size_t i, j;
  };
  std::vector<Pair> pairs;
  for (std::size_t i = 0; i < a.bernoullis.size(); ++i)
    for (std::size_t j = 0; j < b.bernoullis.size(); ++j) {
      const Vec3 dm = a.bernoullis[i].density.mean - b.bernoullis[j].density.mean;
      const Mat3 sum_cov = a.bernoullis[i].density.cov + b.bernoullis[j].density.cov;
      const double d = dm.dot(Eigen::LDLT<Mat3>(sum_cov).solve(dm));
      if (std::isfinite(d) && d < gate) pairs.push_back({d, i, j});
    }
  std::sort(pairs.begin(), pairs.end(),
            [](const Pair& x, const Pair& y) { return x.dist < y.dist; });

  std::vector<char> used_a(a.bernoullis.size(), 0), used_b(b.bernoullis.size(), 0);
  for (const Pair& p : pairs) {
    if (used_a[p.i] || used_b[p.j]) continue;
    used_a[p.i] = used_b[p.j] = 1;
    const auto& ba = a.bernoullis[p.i];
    const auto& bb = b.bernoullis[p.j];

    const Mat3 prec = w_a * ba.density.cov.inverse() + w_b * bb.density.cov.inverse();
    const Mat3 cov = prec.inverse();
    const Vec3 mean = cov * (w_a * ba.density.cov.inverse() * ba.density.mean +
                             w_b * bb.density.cov.inverse() * bb.density.mean);

    // log of integral N_a^{w_a} N_b^{w_b} dx (Gaussian GCI normalizer).
    const auto log_kappa = [](double w, const Mat3& p) {
      return 0.5 * (1.0 - w) * 3.0 * kLogTwoPi - 1.5 * std::log(w) +
             0.5 * (1.0 - w) * std::log(p.determinant());
    };
    const Mat3 sum_cov = ba.density.cov / w_a + bb.density.cov / w_b;
    const Vec3 dm = ba.density.mean - bb.density.mean;
    const double log_norm =
        -0.5 * (3.0 * kLogTwoPi + std::log(sum_cov.determinant()) +
                dm.dot(sum_cov.inverse() * dm));
    const double log_g =
        log_kappa(w_a, ba.density.cov) + log_kappa(w_b, bb.density.cov) + log_norm;

    const double log_num = w_a * std::log(ba.r) + w_b * std::log(bb.r) + log_g;
    const double log_den =
        logsumexp2(w_a * std::log1p(-ba.r) + w_b * std::log1p(-bb.r), log_num);
    fused.bernoullis.push_back(
        {std::exp(log_num - log_den), Gaussian3{mean, 0.5 * (cov + cov.transpose()).eval()}});
  }

  const auto carry_unmatched = [&fused](const std::vector<BernoulliComponent>& list,
                                        const std::vector<char>& used, double w) {
    for (std::size_t i = 0; i < list.size(); ++i) {
      if (used[i]) continue;
      const double num = std::pow(list[i].r, w);
      const double den = num + std::pow(1.0 - list[i].r, w);
      fused.bernoullis.push_back({num / den, list[i].density});
    }
  };
  carry_unmatched(a.bernoullis, used_a, w_a);
  carry_unmatched(b.bernoullis, used_b, w_b);
  return fused;
}

std::vector<Vec3> extract_estimates(const PMBPosterior& post, double threshold) {
  std::vector<Vec3> out;
  for (const auto& b : post.bernoullis)
    if (b.r > threshold) out.push_back(b.density.mean);
  return out;
}

std::string posterior_to_json(const PMBPosterior& post) {
  nlohmann::json obj;
  obj["intensity_weight"] = post.intensity_weight;
  nlohmann::json comps = nlohmann::json::array();
  for (const auto& b : post.bernoullis) {
    nlohmann::json c;
    c["r"] = b.r;
    c["mean"] = {b.density.mean.x(), b.density.mean.y(), b.density.mean.z()};
    nlohmann::json cov = nlohmann::json::array();
    for (int i = 0; i < 3; ++i)
      cov.push_back({b.density.cov(i, 0), b.density.cov(i, 1), b.density.cov(i, 2)});
    c["cov"] = std::move(cov);
    comps.push_back(std::move(c));
  }
  obj["components"] = std::move(comps);
  return obj.dump();
}

}  // namespace rismap
