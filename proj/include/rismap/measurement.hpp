#pragma once

#include <optional>
#include <vector>

#include "rismap/detection.hpp"

namespace rismap {

enum class MeasBranch { D, O, N, R };

/// One noisy channel-parameter vector. D/O/R: z = [phi_az, phi_el, tau,
/// theta_az, theta_el]; N: z = [tau_bar, theta_az, theta_el]. `cov` is SPD.
struct Measurement {
  VecX z;
  MatX cov;
  MeasBranch branch = MeasBranch::N;
};

using MeasurementSet = std::vector<Measurement>;

/// Poisson clutter with the given mean per branch per epoch, spatially
/// uniform over per-branch measurement-space boxes.
struct ClutterModel {
  double mean = 1.0;
  VecX lo_ris = VecX::Zero(5), hi_ris = VecX::Ones(5);  // D/O space
  VecX lo_n = VecX::Zero(3), hi_n = VecX::Ones(3);      // N space

  double volume_ris() const { return (hi_ris - lo_ris).prod(); }
  double volume_n() const { return (hi_n - lo_n).prod(); }
  double density_ris() const { return mean / volume_ris(); }
  double density_n() const { return mean / volume_n(); }
};

/// CRLB of the observable channel parameters for one path of one branch:
/// inverse of the Fisher information (2/N0) Re(J^H J) of the stacked
/// noiseless branch samples, with the complex path gain treated as nuisance
/// and removed by Schur complement. J is evaluated by central finite
/// differences (relative step 1e-6). Returns nullopt when the information
/// matrix is singular at this geometry (unobservable path).
std::optional<MatX> fim_covariance(const SensingDesign& design,
                                   const ChannelParams& path, cd gain,
                                   Branch branch);

struct GeneratedMeasurements {
  MeasurementSet d, o, n;
  int dropped_singular = 0;  // detections lost to singular information
};

/// Bernoulli-thins each SP per branch with its detection probability, adds
/// zero-mean Gaussian noise with the CRLB covariance (scaled by noise_scale,
/// 0 disables), appends Poisson clutter, and randomizes ordering.
GeneratedMeasurements generate_measurements(
    const SensingDesign& design, const std::vector<Vec3>& sps,
    const std::vector<PathDetection>& dps, const PathGains& gains,
    const ClutterModel& clutter, Rng& rng, double noise_scale = 1.0);

/// Ellipsoidal-gating merge of the two double-bounce sets. Candidate pairs
/// are ranked by Dist(j,j') = 0.5 [ d^T (R_j^D)^-1 d + d^T (R_j'^O)^-1 d ]
/// (azimuth residuals wrapped); pairs below t_mg are averaged with
/// covariance 0.25 (R^D + R^O) and consumed one-to-one, everything else
/// passes through unmerged.
MeasurementSet merge_double_bounce(const MeasurementSet& zd,
                                   const MeasurementSet& zo, double t_mg);

/// One JSON object per measurement ({branch, z, cov}).
std::string measurement_set_to_json(const MeasurementSet& set);

}  // namespace rismap
