#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rismap/detection.hpp"
#include "rismap/measurement.hpp"
#include "rismap/metrics.hpp"
#include "rismap/tracking.hpp"

namespace rismap {

/// File-facing configuration: evaluation defaults baked in, every field
/// overridable from the config file or `--set key=value`.
struct CampaignConfig {
  std::uint64_t seed = 1;
  int runs = 100;
  int epochs = 15;
  int num_sps = 8;
  double dt = 0.5;             // seconds per epoch
  double turn_rate = 0.05;     // rad/s, constant-turn trajectory

  Vec3 ris_position = Vec3(30.0, 0.0, 20.0);
  int ris_n_az = 50, ris_n_el = 50;
  double ris_spacing_wavelengths = 0.25;
  int ue_n_az = 4, ue_n_el = 4;
  double ue_spacing_wavelengths = 0.5;

  double carrier_hz = 30e9;
  double subcarrier_spacing_hz = 120e3;
  int n_subcarriers = 1600;
  double bandwidth_hz = 200e6;
  int num_transmissions = 40;
  double tx_power_dbm = 37.0;
  double noise_psd_dbm_hz = -166.0;
  double rcs_m2 = 50.0;
  double q0 = 0.285;

  Vec3 sp_box_lo = Vec3(30.0, -30.0, 2.0);
  Vec3 sp_box_hi = Vec3(50.0, 50.0, 10.0);
  // initial UE state: x, y, z, heading, speed
  double init_x = 50.0, init_y = -30.0, init_z = 0.0;
  double init_heading = kPi / 2.0, init_speed = 11.11;

  double p_fa = 1e-3;
  double t_mg = 36.0;
  double clutter_mean = 1.0;
  double split_ratio = 1.0;
  std::string ris_profile_mode = "random";  // random | directional
  Vec3 focus_point = Vec3(50.0, 15.0, 0.0);

  double survival = 0.99;
  double birth_rate = 0.1;
  double intensity_dp = 0.95;
  double initial_intensity = 8.0;
  double prune_r = 1e-3;
  double merge_distance = 0.1;
  double fusion_weight_ris = 0.5;
  double extract_threshold = 0.5;
  double gospa_p = 2.0, gospa_c = 20.0, gospa_alpha = 2.0;

  Scenario scenario() const;
  UEState initial_state() const;
  GospaConfig gospa() const { return {gospa_p, gospa_c, gospa_alpha}; }
  PmbParams pmb_params() const;
  void validate() const;  // throws std::invalid_argument with a precise message
};

/// Parses a `key = value` config file ('#' comments). Unknown keys and
/// malformed values raise errors naming the file and line.
CampaignConfig load_config(const std::string& path);

/// Applies one `key=value` override, same keys as the config file.
void apply_override(CampaignConfig& cfg, const std::string& key,
                    const std::string& value);

/// Per-variant GOSPA trace of one run, epochs 0..K.
struct RunTrace {
  std::vector<double> ris, nris, fused, ris_rand_precoder;
  std::string detections_jsonl;  // one line per epoch
  std::string posteriors_jsonl;
};

struct CampaignResult {
  std::vector<RunTrace> runs;
  int epochs = 0;
};

/// Full pipeline per run and epoch: trajectory, gains, detection
/// probabilities, measurement synthesis, double-bounce merge, two PMB
/// filters plus the random-precoder variant, GCI fusion, GOSPA.
CampaignResult run_campaign(const CampaignConfig& cfg);

/// Executes the campaign and writes gospa_timeseries.csv, dp_ccdf.csv,
/// detections.jsonl and posteriors.jsonl into out_dir.
void run_campaign_to_files(const CampaignConfig& cfg, const std::string& out_dir);

/// Detection-probability map (reference geometry defaults) written as
/// dp_map_random.csv / dp_map_directional.csv with columns x,y,dp_D,dp_O.
struct DpMapOptions {
  double tx_power_dbm = 20.0;
  int num_transmissions = 20;
  Vec3 ue_position = Vec3(50.0, 0.0, 0.0);
  Vec3 ris_position = Vec3(30.0, 0.0, 0.0);
  DpMapSpec spec;
  std::uint64_t seed = 1;
};

void write_dp_maps(const CampaignConfig& cfg, const DpMapOptions& opt,
                   const std::string& out_dir);

/// CCDFs of the per-path detection probabilities over SPs drawn in the box
/// along the campaign trajectory, for random profiles and for directional
/// profiles steered at each evaluated SP; written as dp_ccdf.csv.
void write_dp_ccdf(const CampaignConfig& cfg, const std::string& out_dir,
                   int samples_per_epoch = 40);

/// Path-loss sweeps over collinear broadside geometries: scenario a
/// (SP between UE and RIS, d_UR = 30) and scenario b (UE between RIS and SP,
/// d_RS = 30), each with random and directional RIS gains.
void write_link_budget(const CampaignConfig& cfg, const std::string& out_dir);

/// Worker-pool size: RISMAP_WORKERS env var, else hardware concurrency.
int worker_count();

}  // namespace rismap
