#pragma once

#include <vector>

#include "rismap/channel.hpp"

namespace rismap {

/// Per-pair precoders for one epoch: the first t1 entries aim at the RIS
/// (conjugate beam, or arbitrary unit vectors in the degraded variant), the
/// remaining t2 place a transmit null on the RIS direction. Expansion over T
/// transmissions repeats each entry for its sign-alternated pair.
struct PrecoderPlan {
  std::vector<VecC> toward_ris;
  std::vector<VecC> null_to_ris;

  int t1() const { return static_cast<int>(toward_ris.size()); }
  int t2() const { return static_cast<int>(null_to_ris.size()); }
  int pairs() const { return t1() + t2(); }

  /// Per-pair precoder, 1-based pair index.
  const VecC& pair(int t) const {
    return t <= t1() ? toward_ris.at(t - 1) : null_to_ris.at(t - t1() - 1);
  }
  /// Length-T list with f_{2t-1} = f_{2t}.
  std::vector<VecC> expanded_full() const;
};

/// Splits T/2 pairs as T1 = T2 when split_ratio = 1 (T1 = ratio/(1+ratio)
/// of the pairs otherwise). Null precoders are random unit vectors projected
/// onto the complement of both a_U(theta_0) and its conjugate, so the
/// transmit coupling a_U^T(theta_0) f vanishes along with the Hermitian one.
/// With random_t1 the T1 slots use plain random unit vectors instead of the
/// conjugate beam.
PrecoderPlan build_precoder_plan(const AzEl& theta0, const UpaConfig& cfg,
                                 double wavelength, int num_transmissions,
                                 double split_ratio, Rng& rng,
                                 bool random_t1 = false);

/// Unitary receive combiner W = [a_U(theta_0)/||a_U||, W_perp], built by
/// QR completion so construction is deterministic.
struct Combiner {
  MatC w;  // N_U x N_U, W^H W = I

  VecC first_row_h() const { return w.col(0).conjugate(); }
  MatC w_perp() const { return w.rightCols(w.cols() - 1); }
};

Combiner build_combiner(const AzEl& theta0, const UpaConfig& cfg,
                        double wavelength);

/// Controlled/uncontrolled halves after pair differencing:
/// ris[t] = (y_{2t+2} - y_{2t+1})/2, nonris[t] = (y_{2t+2} + y_{2t+1})/2
/// (0-based t over T/2 pairs). Branch noise variance is N0/2.
struct SplitSignals {
  std::vector<MatC> ris;
  std::vector<MatC> nonris;
  double noise_psd = 0.0;  // per-branch complex noise variance
};

SplitSignals split_ris_nonris(const RxSignalBlock& block);

/// W_perp^H applied to the first t1 RIS-branch pairs; (N_U - 1) x N_SC per pair.
std::vector<MatC> extract_directional(const std::vector<MatC>& y_ris,
                                      const Combiner& combiner, int t1);

/// First combiner row applied to the last T/2 - t1 RIS-branch pairs; the
/// result is one scalar per (pair, subcarrier), returned as a T2 x N_SC matrix.
MatC extract_orthogonal(const std::vector<MatC>& y_ris, const Combiner& combiner,
                        int t1);

}  // namespace rismap
