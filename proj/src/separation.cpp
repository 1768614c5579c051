#include "rismap/separation.hpp"

#include <cmath>

namespace rismap {

std::vector<VecC> PrecoderPlan::expanded_full() const {
  std::vector<VecC> full;
  full.reserve(2 * pairs());
  for (int t = 1; t <= pairs(); ++t) {
    full.push_back(pair(t));
    full.push_back(pair(t));
  }
  return full;
}

PrecoderPlan build_precoder_plan(const AzEl& theta0, const UpaConfig& cfg,
                                 double wavelength, int num_transmissions,
                                 double split_ratio, Rng& rng, bool random_t1) {
  const int n_u = cfg.size();
  if (n_u < 2)
    throw std::invalid_argument("build_precoder_plan: need N_U >= 2 for a null space");
  if (num_transmissions % 2 != 0 || num_transmissions < 4)
    throw std::invalid_argument("build_precoder_plan: need even T with T/2 >= 2");
  if (split_ratio <= 0.0)
    throw std::invalid_argument("build_precoder_plan: split_ratio must be > 0");

  const int pairs = num_transmissions / 2;
  int t1 = static_cast<int>(std::lround(pairs * split_ratio / (1.0 + split_ratio)));
  t1 = std::clamp(t1, 1, pairs - 1);

  const VecC a0 = steering_vector(cfg, theta0, wavelength);
  const VecC beam = a0.conjugate() / a0.norm();

  // Hermitian-orthonormal basis of span{a0, conj(a0)}; projecting a vector
  // out of this span nulls both a0^H f and a0^T f.
  std::vector<VecC> span_basis;
  span_basis.push_back(a0.normalized());
  {
    VecC c = a0.conjugate();
    for (const VecC& b : span_basis) c -= b * (b.adjoint() * c)(0);
    if (c.norm() > 1e-8) span_basis.push_back(c.normalized());
  }

  const auto random_unit = [&] {
    VecC f(n_u);
    for (int i = 0; i < n_u; ++i) f[i] = rng.complex_normal(1.0);
    return VecC(f / f.norm());
  };

  PrecoderPlan plan;
  for (int i = 0; i < t1; ++i)
    plan.toward_ris.push_back(random_t1 ? random_unit() : beam);
  for (int i = 0; i < pairs - t1; ++i) {
    VecC f;
    double n = 0.0;
    do {
      f = random_unit();
      for (const VecC& b : span_basis) f -= b * (b.adjoint() * f)(0);
      n = f.norm();
    } while (n < 1e-6);
    plan.null_to_ris.push_back(f / n);
  }
  return plan;
}

Combiner build_combiner(const AzEl& theta0, const UpaConfig& cfg,
                        double wavelength) {
  const VecC a0 = steering_vector(cfg, theta0, wavelength);
  const int n_u = cfg.size();

  Eigen::HouseholderQR<MatC> qr(a0);
  MatC q = qr.householderQ() * MatC::Identity(n_u, n_u);
  const cd r00 = qr.matrixQR()(0, 0);
  // Rotate the first column's phase so it equals a0/||a0|| exactly.
  q.col(0) *= r00 / std::abs(r00);

  Combiner c;
  c.w = std::move(q);
  return c;
}

SplitSignals split_ris_nonris(const RxSignalBlock& block) {
  const int t_total = static_cast<int>(block.tx.size());
  if (t_total % 2 != 0)
    throw std::invalid_argument("split_ris_nonris: T must be even");

  SplitSignals out;
  out.noise_psd = block.noise_psd / 2.0;
  out.ris.reserve(t_total / 2);
  out.nonris.reserve(t_total / 2);
  for (int i = 0; i < t_total / 2; ++i) {
    const MatC& odd = block.tx[2 * i];      // transmission 2t-1
    const MatC& even = block.tx[2 * i + 1]; // transmission 2t
    out.ris.push_back(0.5 * (even - odd));
    out.nonris.push_back(0.5 * (even + odd));
  }
  return out;
}

std::vector<MatC> extract_directional(const std::vector<MatC>& y_ris,
                                      const Combiner& combiner, int t1) {
  if (t1 < 0 || t1 > static_cast<int>(y_ris.size()))
    throw std::invalid_argument("extract_directional: bad t1");
  const MatC w_perp_h = combiner.w_perp().adjoint();
  std::vector<MatC> out;
  out.reserve(t1);
  for (int t = 0; t < t1; ++t) out.push_back(w_perp_h * y_ris[t]);
  return out;
}

MatC extract_orthogonal(const std::vector<MatC>& y_ris, const Combiner& combiner,
                        int t1) {
  const int pairs = static_cast<int>(y_ris.size());
  if (t1 < 0 || t1 > pairs)
    throw std::invalid_argument("extract_orthogonal: bad t1");
  const Eigen::RowVectorXcd row = combiner.w.col(0).adjoint();
  MatC out(pairs - t1, y_ris.empty() ? 0 : y_ris.front().cols());
  for (int t = t1; t < pairs; ++t) out.row(t - t1) = row * y_ris[t];
  return out;
}

}  // namespace rismap
