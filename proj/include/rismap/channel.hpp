#pragma once

#include <vector>

#include "rismap/geometry.hpp"
#include "rismap/rng.hpp"
#include "rismap/scenario.hpp"

namespace rismap {

/// UPA steering vector. Element (p, q), p along azimuth (fastest index) and
/// q along elevation, carries phase (2*pi/lambda)*spacing*(p sin(az)cos(el) +
/// q sin(el)). Unit-modulus entries, ||a||^2 = N.
VecC steering_vector(const UpaConfig& cfg, const AzEl& angle, double wavelength);

/// RIS reflection coefficient nu = a(phi_l)^T diag(profile) a(phi_0).
cd ris_response(const VecC& profile, const VecC& a_phi_l, const VecC& a_phi_0);

/// Sign-alternating RIS profile schedule: base profiles omega_1..omega_{T/2},
/// expanded over T transmissions as omega at 2t-1 = +base[t], at 2t = -base[t].
struct RisProfileSchedule {
  std::vector<VecC> base;

  int pairs() const { return static_cast<int>(base.size()); }
  /// Profile applied at 1-based transmission index t in 1..T.
  VecC expanded(int t) const {
    const VecC& b = base.at((t - 1) / 2);
    return (t % 2 == 1) ? b : VecC(-b);
  }
};

/// Independent uniform phases per element per pair.
RisProfileSchedule random_profile_schedule(int n_elements, int num_transmissions,
                                           Rng& rng);

/// Phase-conjugate profile conj(a(phi_0) .* a(phi_focus)), repeated for
/// every pair; reflects the phi_0 illumination coherently toward the focus.
RisProfileSchedule directional_profile_schedule(const VecC& a_phi_0,
                                                const VecC& a_phi_focus,
                                                int num_transmissions);

/// Complex path gains for one epoch. `controlled[l]` is alpha_l for
/// l = 0..L (RIS-involved paths), `uncontrolled[l-1]` is beta_l for l = 1..L
/// (direct UE-SP-UE paths). Gains of SPs behind the RIS plane are zeroed and
/// flagged.
struct PathGains {
  std::vector<cd> controlled;
  std::vector<cd> uncontrolled;
  std::vector<bool> behind_ris;
};

/// Squared controlled-gain amplitude |alpha_l|^2; pass sp = nullopt for the
/// l = 0 UE-RIS-UE path.
double controlled_gain_sq(const Scenario& s, const Vec3& ue_position,
                          const std::optional<Vec3>& sp);

/// Squared uncontrolled-gain amplitude |beta_l|^2 for the direct UE-SP-UE path.
double uncontrolled_gain_sq(const Scenario& s, const Vec3& ue_position,
                            const Vec3& sp);

/// Gains for all paths at one epoch; `nu_g` is the common phase offset drawn
/// once per epoch, phases are -(2*pi*f_c*toa + nu_g).
PathGains path_gains(const Scenario& s, const Vec3& ue_position,
                     const std::vector<Vec3>& sps, double nu_g);

/// Received OFDM block: one N_U x N_SC matrix per transmission t = 1..T.
struct RxSignalBlock {
  std::vector<MatC> tx;
  double noise_psd = 0.0;
};

/// Term toggles for synthesis, used to isolate path classes in tests.
struct SynthesisTerms {
  bool ue_ris_ue = true;   // l = 0 controlled path
  bool ris_sp = true;      // UE-RIS-SP-UE controlled paths
  bool sp_ris = true;      // UE-SP-RIS-UE controlled paths
  bool direct = true;      // UE-SP-UE uncontrolled paths
  bool noise = true;
};

/// Synthesizes the received signal over all transmissions and subcarriers:
/// per (t, s) the four path-class terms applied to the precoder f_t, the
/// subcarrier phase ramp d_s(tau) = exp(-j*2*pi*(s-1)*tau*delta_f), and
/// (optionally) circular complex Gaussian noise of variance N0 per antenna.
RxSignalBlock synthesize_rx(const Scenario& s, const UEState& ue,
                            const std::vector<Vec3>& sps,
                            const PathGains& gains,
                            const RisProfileSchedule& schedule,
                            const std::vector<VecC>& precoders, Rng& rng,
                            const SynthesisTerms& terms = {});

}  // namespace rismap
