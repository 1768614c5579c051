#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "rismap/measurement.hpp"

namespace rismap {

struct Gaussian3 {
  Vec3 mean = Vec3::Zero();
  Mat3 cov = Mat3::Identity();
};

struct BernoulliComponent {
  double r = 0.0;  // existence probability
  Gaussian3 density;
};

/// Poisson multi-Bernoulli posterior over static SP positions: a uniform
/// Poisson intensity of the given weight over `region` (undetected SPs) plus
/// Bernoulli components (detected SPs).
struct PMBPosterior {
  double intensity_weight = 0.0;
  Box3 region;
  std::vector<BernoulliComponent> bernoullis;
};

/// Sensing geometry a measurement model needs: where the UE is and how it
/// and the RIS are oriented.
struct SensorGeometry {
  Vec3 ue_position = Vec3::Zero();
  Mat3 ue_rot = Mat3::Identity();
  Pose ris;
};

/// Predicted measurement of an SP at `x`. R branch (merged double-bounce):
/// [phi_az, phi_el, tau, theta_az, theta_el]; N branch: [tau_bar, theta_az,
/// theta_el]. D and O use the R model.
VecX measurement_model(const Vec3& x, const SensorGeometry& geom,
                       MeasBranch branch);

/// Closed-form Jacobian of measurement_model with respect to x.
MatX measurement_jacobian(const Vec3& x, const SensorGeometry& geom,
                          MeasBranch branch);

/// Geometric inversion z -> SP position (triangulation from the UE-side
/// angles and delay, Gauss-Newton refined for the overdetermined R branch).
/// nullopt when no consistent position exists.
std::optional<Vec3> invert_measurement(const VecX& z, const MatX& cov,
                                       const SensorGeometry& geom,
                                       MeasBranch branch);

struct PmbParams {
  double survival = 0.99;
  double birth_rate = 0.1;         // intensity weight added per epoch
  double intensity_dp = 0.95;      // detection probability of the intensity
  double prune_r = 1e-3;
  double merge_distance = 0.1;     // Mahalanobis merge threshold for Bernoullis
  int exact_assoc_limit = 10000;   // hypothesis count above which BP kicks in
  double bp_tol = 1e-6;
  int bp_max_iter = 200;
};

/// Marginal association probabilities. `component` is n x (m+1): column 0
/// is the missed-detection probability, column j+1 the probability that
/// component i generated measurement j; rows sum to 1. `unassociated[j]` is
/// the probability measurement j came from clutter or a new target.
struct AssociationMarginals {
  MatX component;
  VecX unassociated;
  bool used_bp = false;
};

/// Marginalizes the data association defined by log likelihood ratios:
/// log_psi(i,j) = log of (detection weight of i on j) / (miss weight of i),
/// log_e(j) = log of the clutter-or-new-target weight of j. Exact
/// enumeration when the hypothesis count allows it, loopy BP otherwise.
AssociationMarginals association_marginals(const MatX& log_psi,
                                           const VecX& log_e,
                                           const PmbParams& params);

/// Survival-scaled prediction for static SPs plus intensity birth.
void pmb_predict(PMBPosterior& post, const PmbParams& params);

struct PmbUpdateStats {
  int dropped_components = 0;  // non-finite or non-SPD after the update
  bool used_bp = false;
};

/// Point-target PMB measurement update (track-oriented merge of the
/// association marginals): cubature Gaussian updates per (component,
/// measurement) pair, new Bernoullis born from the intensity, missed
/// components rescaled, pruning and duplicate merging applied at the end.
/// `dp_at` evaluates the branch detection probability at a position;
/// `log_clutter_density` is log kappa of the branch's uniform clutter.
PmbUpdateStats pmb_update(PMBPosterior& post, const MeasurementSet& measurements,
                          const SensorGeometry& geom, MeasBranch branch,
                          const std::function<double(const Vec3&)>& dp_at,
                          double log_clutter_density, const PmbParams& params);

/// Generalized covariance intersection of two PMB posteriors with weights
/// w_a + w_b = 1. Bernoulli components are paired by symmetric Mahalanobis
/// gating (threshold `gate`); matched pairs fuse by covariance intersection
/// and the GCI existence rule, unmatched components carry over with their
/// existence damped by the own-weight exponent, and the uniform intensities
/// fuse as the weighted geometric mean.
PMBPosterior gci_fuse(const PMBPosterior& a, const PMBPosterior& b, double w_a,
                      double w_b, double gate);

/// Positions of Bernoulli components with existence above the threshold.
std::vector<Vec3> extract_estimates(const PMBPosterior& post,
                                    double threshold = 0.5);

/// JSON snapshot: intensity weight plus per-component {r, mean, cov}.
std::string posterior_to_json(const PMBPosterior& post);

}  // namespace rismap
