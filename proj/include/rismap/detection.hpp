#pragma once

#include <functional>
#include <vector>

#include "rismap/separation.hpp"

namespace rismap {

/// First-order Marcum Q-function to absolute error < 1e-9, via the
/// Poisson-weighted sum of central chi-square tail probabilities, with
/// saturation shortcuts far from the transition region.
double marcum_q1(double a, double b);

struct DetectionConfig {
  double p_fa = 1e-3;

  double gamma() const { return -2.0 * std::log(p_fa); }
};

enum class Branch {
  Directional,  // UE-RIS-SP-UE observations (D)
  Orthogonal,   // UE-SP-RIS-UE observations (O)
  Direct,       // UE-SP-UE observations (N)
};

/// Everything the detector and measurement synthesiser need about one epoch:
/// UE pose, the RIS link geometry, the combiner, the precoder plan, and the
/// RIS profile schedule (with per-pair effective profiles cached).
struct SensingDesign {
  const Scenario* scenario = nullptr;
  UEState ue;
  Mat3 ue_rot;
  ChannelParams ris_link;
  VecC a_theta0;
  VecC a_phi0;
  Combiner combiner;
  PrecoderPlan plan;
  RisProfileSchedule schedule;

  // Caches: base profile element-multiplied by a(phi_0) per pair, the
  // conjugated W_perp, and the transmit coupling toward theta_0 per pair.
  MatC profile_eff;   // N_R x pairs
  MatC w_perp_h;      // (N_U-1) x N_U
  VecC coupling_t0;   // pairs

  int pairs() const { return schedule.pairs(); }
  /// nu per pair for a path with the given RIS angle.
  VecC ris_gains(const AzEl& phi) const;
};

SensingDesign make_sensing_design(const Scenario& s, const UEState& ue,
                                  RisProfileSchedule schedule,
                                  PrecoderPlan plan);

/// Matched energy P~ of the branch's hypothetical single-path signal,
/// summed over the branch's transmissions and all subcarriers.
double matched_energy(const SensingDesign& design, const ChannelParams& path,
                      Branch branch);

/// Q1(sqrt(4 gain^2 P~ / N0), sqrt(gamma)); monotone in gain and energy,
/// equals p_fa at zero gain.
double detection_probability(double gain_amp, double matched_energy,
                             double noise_psd, const DetectionConfig& cfg);

struct PathDetection {
  double dp_d = 0.0;
  double dp_o = 0.0;
  double dp_n = 0.0;
};

/// Detection probabilities of one SP position under the given design.
PathDetection detection_probabilities(const SensingDesign& design,
                                      const Vec3& sp,
                                      const DetectionConfig& cfg);

enum class RisProfileMode { Random, Directional };

struct DpMapSpec {
  double x_min = 0.0, x_max = 60.0;
  double y_min = -30.0, y_max = 30.0;
  double z = 0.0;
  double resolution = 1.0;
  Vec3 focus = Vec3(50.0, 15.0, 0.0);  // directional-profile aim point
};

struct DpMapResult {
  std::vector<double> x, y;  // flattened grid
  std::vector<double> dp_d, dp_o;
};

/// Evaluates the D- and O-branch detection probabilities on a horizontal
/// grid of SP positions for the given profile mode.
DpMapResult dp_map(const Scenario& s, const UEState& ue, RisProfileMode mode,
                   const DpMapSpec& spec, const DetectionConfig& cfg, Rng& rng);

/// Received-to-transmitted power ratios of the four signal classes for the
/// broadside link-budget geometry.
struct LinkBudget {
  double pl_r = 0.0;  // UE-RIS-UE
  double pl_d = 0.0;  // UE-RIS-SP-UE
  double pl_o = 0.0;  // UE-SP-RIS-UE (= pl_d by construction)
  double pl_n = 0.0;  // UE-SP-UE
};

LinkBudget link_budget(double d_ur, double d_us, double d_rs,
                       const Scenario& s, bool directional);

}  // namespace rismap
