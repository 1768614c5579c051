#include "rismap/campaign.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

namespace rismap {

Scenario CampaignConfig::scenario() const {
  Scenario s;
  s.ris.position = ris_position;
  s.ris.rotation = Mat3::Identity();
  s.ofdm.carrier_hz = carrier_hz;
  s.ofdm.subcarrier_spacing_hz = subcarrier_spacing_hz;
  s.ofdm.n_subcarriers = n_subcarriers;
  s.ofdm.bandwidth_hz = bandwidth_hz;
  const double lambda = s.ofdm.wavelength();
  s.ue_array = {ue_n_az, ue_n_el, ue_spacing_wavelengths * lambda};
  s.ris_array = {ris_n_az, ris_n_el, ris_spacing_wavelengths * lambda};
  s.num_transmissions = num_transmissions;
  s.tx_power_w = dbm_to_watt(tx_power_dbm);
  s.noise_psd = dbm_to_watt(noise_psd_dbm_hz);
  s.rcs = rcs_m2;
  s.q0 = q0;
  s.sp_box = {sp_box_lo, sp_box_hi};
  return s;
}

UEState CampaignConfig::initial_state() const {
  return {Vec3(init_x, init_y, init_z), init_heading, init_speed};
}

PmbParams CampaignConfig::pmb_params() const {
  PmbParams p;
  p.survival = survival;
  p.birth_rate = birth_rate;
  p.intensity_dp = intensity_dp;
  p.prune_r = prune_r;
  p.merge_distance = merge_distance;
  return p;
}

void CampaignConfig::validate() const {
  const auto fail = [](const std::string& msg) {
    throw std::invalid_argument("config: " + msg);
  };
  if (runs < 1) fail("runs must be >= 1");
  if (epochs < 1) fail("epochs must be >= 1");
  if (num_sps < 0) fail("num_sps must be >= 0");
  if (dt <= 0.0) fail("dt must be > 0");
  if (num_transmissions < 4 || num_transmissions % 2 != 0)
    fail("num_transmissions must be even and >= 4");
  if (p_fa <= 0.0 || p_fa >= 1.0) fail("p_fa must be in (0, 1)");
  if (t_mg <= 0.0) fail("t_mg must be > 0");
  if (clutter_mean < 0.0) fail("clutter_mean must be >= 0");
  if (split_ratio <= 0.0) fail("split_ratio must be > 0");
  if (ris_profile_mode != "random" && ris_profile_mode != "directional")
    fail("ris_profile_mode must be 'random' or 'directional'");
  if (fusion_weight_ris <= 0.0 || fusion_weight_ris >= 1.0)
    fail("fusion_weight_ris must be in (0, 1)");
  if ((sp_box_hi - sp_box_lo).minCoeff() <= 0.0) fail("sp_box must be nonempty");
  if (init_speed < 0.0) fail("initial speed must be >= 0");
  if (!std::isfinite(tx_power_dbm) || !std::isfinite(noise_psd_dbm_hz))
    fail("powers must be finite");
}

namespace {

std::vector<std::string> split_ws(const std::string& s) {
  std::istringstream iss(s);
  std::vector<std::string> out;
  std::string tok;
  while (iss >> tok) out.push_back(tok);
  return out;
}

double parse_double(const std::string& s, const std::string& where) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    throw std::invalid_argument(where + ": expected a number, got '" + s + "'");
  }
  if (pos != s.size())
    throw std::invalid_argument(where + ": trailing characters in '" + s + "'");
  return v;
}

Vec3 parse_vec3(const std::vector<std::string>& toks, const std::string& where) {
  if (toks.size() != 3)
    throw std::invalid_argument(where + ": expected 3 numbers");
  return {parse_double(toks[0], where), parse_double(toks[1], where),
          parse_double(toks[2], where)};
}

}  // namespace

void apply_override(CampaignConfig& cfg, const std::string& key,
                    const std::string& value) {
  const std::string where = "key '" + key + "'";
  const auto toks = split_ws(value);
  const auto num = [&] { return parse_double(value, where); };
  const auto integer = [&] {
    const double v = num();
    if (v != std::floor(v))
      throw std::invalid_argument(where + ": expected an integer");
    return static_cast<int>(v);
  };

  if (key == "seed") cfg.seed = static_cast<std::uint64_t>(num());
  else if (key == "runs") cfg.runs = integer();
  else if (key == "epochs") cfg.epochs = integer();
  else if (key == "num_sps") cfg.num_sps = integer();
  else if (key == "dt") cfg.dt = num();
  else if (key == "turn_rate") cfg.turn_rate = num();
  else if (key == "ris_position") cfg.ris_position = parse_vec3(toks, where);
  else if (key == "ris_array") {
    if (toks.size() != 2) throw std::invalid_argument(where + ": expected 2 ints");
    cfg.ris_n_az = static_cast<int>(parse_double(toks[0], where));
    cfg.ris_n_el = static_cast<int>(parse_double(toks[1], where));
  } else if (key == "ris_spacing_wavelengths") cfg.ris_spacing_wavelengths = num();
  else if (key == "ue_array") {
    if (toks.size() != 2) throw std::invalid_argument(where + ": expected 2 ints");
    cfg.ue_n_az = static_cast<int>(parse_double(toks[0], where));
    cfg.ue_n_el = static_cast<int>(parse_double(toks[1], where));
  } else if (key == "ue_spacing_wavelengths") cfg.ue_spacing_wavelengths = num();
  else if (key == "carrier_hz") cfg.carrier_hz = num();
  else if (key == "subcarrier_spacing_hz") cfg.subcarrier_spacing_hz = num();
  else if (key == "n_subcarriers") cfg.n_subcarriers = integer();
  else if (key == "bandwidth_hz") cfg.bandwidth_hz = num();
  else if (key == "num_transmissions") cfg.num_transmissions = integer();
  else if (key == "tx_power_dbm") cfg.tx_power_dbm = num();
  else if (key == "noise_psd_dbm_hz") cfg.noise_psd_dbm_hz = num();
  else if (key == "rcs_m2") cfg.rcs_m2 = num();
  else if (key == "q0") cfg.q0 = num();
  else if (key == "sp_box") {
    if (toks.size() != 6) throw std::invalid_argument(where + ": expected 6 numbers");
    cfg.sp_box_lo = {parse_double(toks[0], where), parse_double(toks[1], where),
                     parse_double(toks[2], where)};
    cfg.sp_box_hi = {parse_double(toks[3], where), parse_double(toks[4], where),
                     parse_double(toks[5], where)};
  } else if (key == "initial_state") {
    if (toks.size() != 5) throw std::invalid_argument(where + ": expected 5 numbers");
    cfg.init_x = parse_double(toks[0], where);
    cfg.init_y = parse_double(toks[1], where);
    cfg.init_z = parse_double(toks[2], where);
    cfg.init_heading = parse_double(toks[3], where);
    cfg.init_speed = parse_double(toks[4], where);
  } else if (key == "p_fa") cfg.p_fa = num();
  else if (key == "t_mg") cfg.t_mg = num();
  else if (key == "clutter_mean") cfg.clutter_mean = num();
  else if (key == "split_ratio") cfg.split_ratio = num();
  else if (key == "ris_profile_mode") cfg.ris_profile_mode = value;
  else if (key == "focus_point") cfg.focus_point = parse_vec3(toks, where);
  else if (key == "survival") cfg.survival = num();
  else if (key == "birth_rate") cfg.birth_rate = num();
  else if (key == "intensity_dp") cfg.intensity_dp = num();
  else if (key == "initial_intensity") cfg.initial_intensity = num();
  else if (key == "prune_r") cfg.prune_r = num();
  else if (key == "merge_distance") cfg.merge_distance = num();
  else if (key == "fusion_weight_ris") cfg.fusion_weight_ris = num();
  else if (key == "extract_threshold") cfg.extract_threshold = num();
  else if (key == "gospa_p") cfg.gospa_p = num();
  else if (key == "gospa_c") cfg.gospa_c = num();
  else if (key == "gospa_alpha") cfg.gospa_alpha = num();
  else throw std::invalid_argument("unknown config key '" + key + "'");
}

CampaignConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("config: cannot open '" + path + "'");
  CampaignConfig cfg;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument(path + ":" + std::to_string(line_no) +
                                  ": expected 'key = value'");
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty())
      throw std::invalid_argument(path + ":" + std::to_string(line_no) +
                                  ": empty key or value");
    try {
      apply_override(cfg, key, value);
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument(path + ":" + std::to_string(line_no) + ": " +
                                  e.what());
    }
  }
  return cfg;
}

namespace {

struct CampaignSetup {
  CampaignConfig cfg;
  Scenario scenario;
  std::vector<UEState> trajectory;  // index 0..epochs
  ClutterModel clutter;
  DetectionConfig detection;
  GospaConfig gospa_cfg;
  PmbParams pmb;
};

ClutterModel make_clutter_model(const Scenario& s,
                                const std::vector<UEState>& trajectory,
                                double mean) {
  ClutterModel c;
  c.mean = mean;
  VecX lo5 = VecX::Constant(5, std::numeric_limits<double>::infinity());
  VecX hi5 = -lo5;
  VecX lo3 = VecX::Constant(3, std::numeric_limits<double>::infinity());
  VecX hi3 = -lo3;

  const Box3& box = s.sp_box;
  for (const UEState& ue : trajectory) {
    SensorGeometry geom{ue.position, ue_rotation(ue.heading), s.ris};
    for (int cx = 0; cx <= 2; ++cx)
      for (int cy = 0; cy <= 2; ++cy)
        for (int cz = 0; cz <= 2; ++cz) {
          const Vec3 p = box.lo + Vec3(cx, cy, cz).cwiseProduct(box.hi - box.lo) / 2.0;
          const VecX zr = measurement_model(p, geom, MeasBranch::R);
          const VecX zn = measurement_model(p, geom, MeasBranch::N);
          lo5 = lo5.cwiseMin(zr);
          hi5 = hi5.cwiseMax(zr);
          lo3 = lo3.cwiseMin(zn);
          hi3 = hi3.cwiseMax(zn);
        }
  }
  // Pad: angles by 50 mrad, delays by 10 ns.
  VecX pad5(5), pad3(3);
  pad5 << 0.05, 0.05, 1e-8, 0.05, 0.05;
  pad3 << 1e-8, 0.05, 0.05;
  c.lo_ris = lo5 - pad5;
  c.hi_ris = hi5 + pad5;
  c.lo_n = lo3 - pad3;
  c.hi_n = hi3 + pad3;
  return c;
}

CampaignSetup make_setup(const CampaignConfig& cfg) {
  cfg.validate();
  CampaignSetup setup;
  setup.cfg = cfg;
  setup.scenario = cfg.scenario();
  setup.trajectory.push_back(cfg.initial_state());
  for (int k = 1; k <= cfg.epochs; ++k)
    setup.trajectory.push_back(
        constant_turn_step(setup.trajectory.back(), cfg.turn_rate, cfg.dt));
  setup.clutter = make_clutter_model(setup.scenario, setup.trajectory,
                                     cfg.clutter_mean);
  setup.detection.p_fa = cfg.p_fa;
  setup.gospa_cfg = cfg.gospa();
  setup.pmb = cfg.pmb_params();
  return setup;
}

PMBPosterior initial_posterior(const CampaignSetup& setup) {
  PMBPosterior p;
  p.intensity_weight = setup.cfg.initial_intensity;
  p.region = setup.scenario.sp_box;
  return p;
}

RisProfileSchedule epoch_schedule(const CampaignSetup& setup,
                                  const Scenario& s, const UEState& ue,
                                  Rng& rng) {
  if (setup.cfg.ris_profile_mode == "random")
    return random_profile_schedule(s.ris_array.size(), s.num_transmissions, rng);
  const double lambda = s.ofdm.wavelength();
  const AzEl phi0 = azel_from_local(s.ris.to_local(ue.position));
  const AzEl phif = azel_from_local(s.ris.to_local(setup.cfg.focus_point));
  return directional_profile_schedule(
      steering_vector(s.ris_array, phi0, lambda),
      steering_vector(s.ris_array, phif, lambda), s.num_transmissions);
}

std::function<double(const Vec3&)> dp_function(const SensingDesign& design,
                                               const DetectionConfig& det,
                                               MeasBranch branch) {
  return [&design, det, branch](const Vec3& x) -> double {
    try {
      const PathDetection dp = detection_probabilities(design, x, det);
      return branch == MeasBranch::N ? dp.dp_n : std::max(dp.dp_d, dp.dp_o);
    } catch (const degenerate_geometry_error&) {
      return det.p_fa;
    }
  };
}

RunTrace run_one(const CampaignSetup& setup, std::uint64_t run_index) {
  const CampaignConfig& cfg = setup.cfg;
  const Scenario& s = setup.scenario;
  Rng rng = Rng::for_run(cfg.seed, run_index);

  std::vector<Vec3> sps(cfg.num_sps);
  for (auto& sp : sps) sp = rng.uniform_in_box(s.sp_box.lo, s.sp_box.hi);

  PMBPosterior post_ris = initial_posterior(setup);
  PMBPosterior post_nris = initial_posterior(setup);
  PMBPosterior post_ris_rand = initial_posterior(setup);

  RunTrace trace;
  const auto record = [&](const PMBPosterior& fused) {
    trace.ris.push_back(
        gospa(extract_estimates(post_ris, cfg.extract_threshold), sps,
              setup.gospa_cfg)
            .total);
    trace.nris.push_back(
        gospa(extract_estimates(post_nris, cfg.extract_threshold), sps,
              setup.gospa_cfg)
            .total);
    trace.fused.push_back(
        gospa(extract_estimates(fused, cfg.extract_threshold), sps,
              setup.gospa_cfg)
            .total);
    trace.ris_rand_precoder.push_back(
        gospa(extract_estimates(post_ris_rand, cfg.extract_threshold), sps,
              setup.gospa_cfg)
            .total);
  };
  record(PMBPosterior{0.0, s.sp_box, {}});  // epoch 0: nothing mapped yet

  std::ostringstream detections, posteriors;
  const double log_kappa_r = std::log(setup.clutter.density_ris());
  const double log_kappa_n = std::log(setup.clutter.density_n());

  for (int k = 1; k <= cfg.epochs; ++k) {
    const UEState& ue = setup.trajectory[k];
    const AzEl theta0 =
        channel_params(ue.position, s.ris, std::nullopt, ue_rotation(ue.heading))
            .ue_angle;
    const double lambda = s.ofdm.wavelength();

    RisProfileSchedule schedule = epoch_schedule(setup, s, ue, rng);
    PrecoderPlan plan_dir = build_precoder_plan(
        theta0, s.ue_array, lambda, s.num_transmissions, cfg.split_ratio, rng);
    PrecoderPlan plan_rand =
        build_precoder_plan(theta0, s.ue_array, lambda, s.num_transmissions,
                            cfg.split_ratio, rng, /*random_t1=*/true);
    const double nu_g = rng.uniform(0.0, 2.0 * kPi);
    const PathGains gains = path_gains(s, ue.position, sps, nu_g);

    const SensingDesign design_dir =
        make_sensing_design(s, ue, schedule, std::move(plan_dir));
    const SensingDesign design_rand =
        make_sensing_design(s, ue, std::move(schedule), std::move(plan_rand));
    const SensorGeometry geom{ue.position, design_dir.ue_rot, s.ris};

    std::vector<PathDetection> dps_dir(sps.size()), dps_rand(sps.size());
    for (std::size_t l = 0; l < sps.size(); ++l) {
      dps_dir[l] = detection_probabilities(design_dir, sps[l], setup.detection);
      dps_rand[l] = detection_probabilities(design_rand, sps[l], setup.detection);
    }

    const GeneratedMeasurements gen = generate_measurements(
        design_dir, sps, dps_dir, gains, setup.clutter, rng);
    const MeasurementSet z_r = merge_double_bounce(gen.d, gen.o, cfg.t_mg);

    pmb_predict(post_ris, setup.pmb);
    pmb_update(post_ris, z_r, geom, MeasBranch::R,
               dp_function(design_dir, setup.detection, MeasBranch::R),
               log_kappa_r, setup.pmb);
    pmb_predict(post_nris, setup.pmb);
    pmb_update(post_nris, gen.n, geom, MeasBranch::N,
               dp_function(design_dir, setup.detection, MeasBranch::N),
               log_kappa_n, setup.pmb);
    const PMBPosterior fused =
        gci_fuse(post_ris, post_nris, cfg.fusion_weight_ris,
                 1.0 - cfg.fusion_weight_ris, cfg.t_mg);

    const GeneratedMeasurements gen_rand = generate_measurements(
        design_rand, sps, dps_rand, gains, setup.clutter, rng);
    const MeasurementSet z_r_rand =
        merge_double_bounce(gen_rand.d, gen_rand.o, cfg.t_mg);
    pmb_predict(post_ris_rand, setup.pmb);
    pmb_update(post_ris_rand, z_r_rand, geom, MeasBranch::R,
               dp_function(design_rand, setup.detection, MeasBranch::R),
               log_kappa_r, setup.pmb);

    record(fused);

    detections << "{\"run\":" << run_index << ",\"epoch\":" << k
               << ",\"d\":" << measurement_set_to_json(gen.d)
               << ",\"o\":" << measurement_set_to_json(gen.o)
               << ",\"n\":" << measurement_set_to_json(gen.n)
               << ",\"merged\":" << measurement_set_to_json(z_r) << "}\n";
    posteriors << "{\"run\":" << run_index << ",\"epoch\":" << k
               << ",\"ris\":" << posterior_to_json(post_ris)
               << ",\"nris\":" << posterior_to_json(post_nris)
               << ",\"fused\":" << posterior_to_json(fused) << "}\n";
  }
  trace.detections_jsonl = detections.str();
  trace.posteriors_jsonl = posteriors.str();
  return trace;
}

}  // namespace

int worker_count() {
  if (const char* env = std::getenv("RISMAP_WORKERS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

CampaignResult run_campaign(const CampaignConfig& cfg) {
  const CampaignSetup setup = make_setup(cfg);

  CampaignResult result;
  result.epochs = cfg.epochs;
  result.runs.resize(cfg.runs);

  const int workers = std::min(worker_count(), cfg.runs);
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (int r = next.fetch_add(1); r < cfg.runs; r = next.fetch_add(1))
        result.runs[r] = run_one(setup, static_cast<std::uint64_t>(r));
    });
  }
  for (auto& t : pool) t.join();
  return result;
}

namespace {

void write_gospa_csv(const CampaignResult& result, const std::string& path) {
  std::ofstream out(path);
  out << "k,ris_mean,ris_std,nris_mean,nris_std,fused_mean,fused_std,"
         "ris_randprec_mean,ris_randprec_std\n";
  const int n_runs = static_cast<int>(result.runs.size());
  for (int k = 0; k <= result.epochs; ++k) {
    const auto stats = [&](auto getter) {
      double mean = 0.0;
      for (const RunTrace& t : result.runs) mean += getter(t)[k];
      mean /= n_runs;
      double var = 0.0;
      for (const RunTrace& t : result.runs) {
        const double d = getter(t)[k] - mean;
        var += d * d;
      }
      var = n_runs > 1 ? var / (n_runs - 1) : 0.0;
      return std::pair<double, double>(mean, std::sqrt(var));
    };
    const auto [rm, rs] = stats([](const RunTrace& t) -> const std::vector<double>& { return t.ris; });
    const auto [nm, ns] = stats([](const RunTrace& t) -> const std::vector<double>& { return t.nris; });
    const auto [fm, fs] = stats([](const RunTrace& t) -> const std::vector<double>& { return t.fused; });
    const auto [qm, qs] = stats([](const RunTrace& t) -> const std::vector<double>& { return t.ris_rand_precoder; });
    char line[512];
    std::snprintf(line, sizeof(line),
                  "%d,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g\n", k, rm, rs, nm,
                  ns, fm, fs, qm, qs);
    out << line;
  }
}

}  // namespace

void run_campaign_to_files(const CampaignConfig& cfg, const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  const CampaignResult result = run_campaign(cfg);
  write_gospa_csv(result, out_dir + "/gospa_timeseries.csv");

  std::ofstream det(out_dir + "/detections.jsonl");
  std::ofstream post(out_dir + "/posteriors.jsonl");
  for (const RunTrace& t : result.runs) {
    det << t.detections_jsonl;
    post << t.posteriors_jsonl;
  }
  write_dp_ccdf(cfg, out_dir);
}

void write_dp_maps(const CampaignConfig& cfg, const DpMapOptions& opt,
                   const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  CampaignConfig map_cfg = cfg;
  map_cfg.tx_power_dbm = opt.tx_power_dbm;
  map_cfg.num_transmissions = opt.num_transmissions;
  map_cfg.ris_position = opt.ris_position;
  Scenario s = map_cfg.scenario();
  const UEState ue{opt.ue_position, 0.0, 0.0};
  const DetectionConfig det{cfg.p_fa};

  const auto write = [&](RisProfileMode mode, const std::string& name) {
    Rng rng(opt.seed);
    const DpMapResult map = dp_map(s, ue, mode, opt.spec, det, rng);
    std::ofstream out(out_dir + "/" + name);
    out << "x,y,dp_D,dp_O\n";
    for (std::size_t i = 0; i < map.x.size(); ++i) {
      char line[256];
      std::snprintf(line, sizeof(line), "%.9g,%.9g,%.9g,%.9g\n", map.x[i],
                    map.y[i], map.dp_d[i], map.dp_o[i]);
      out << line;
    }
  };
  write(RisProfileMode::Random, "dp_map_random.csv");
  write(RisProfileMode::Directional, "dp_map_directional.csv");
}

void write_dp_ccdf(const CampaignConfig& cfg, const std::string& out_dir,
                   int samples_per_epoch) {
  std::filesystem::create_directories(out_dir);
  const CampaignSetup setup = make_setup(cfg);
  const Scenario& s = setup.scenario;
  Rng rng(Rng::splitmix64(cfg.seed ^ 0x5cdf5cdf5cdfULL));

  std::vector<double> d_rand, o_rand, n_all, d_dir, o_dir;
  for (int k = 1; k <= cfg.epochs; ++k) {
    const UEState& ue = setup.trajectory[k];
    const AzEl theta0 =
        channel_params(ue.position, s.ris, std::nullopt, ue_rotation(ue.heading))
            .ue_angle;
    const AzEl phi0 = azel_from_local(s.ris.to_local(ue.position));
    const double lambda = s.ofdm.wavelength();
    const VecC a_phi0 = steering_vector(s.ris_array, phi0, lambda);

    RisProfileSchedule random_sched =
        random_profile_schedule(s.ris_array.size(), s.num_transmissions, rng);
    PrecoderPlan plan = build_precoder_plan(theta0, s.ue_array, lambda,
                                            s.num_transmissions,
                                            cfg.split_ratio, rng);
    const SensingDesign design_rand =
        make_sensing_design(s, ue, std::move(random_sched), plan);

    for (int i = 0; i < samples_per_epoch; ++i) {
      const Vec3 sp = rng.uniform_in_box(s.sp_box.lo, s.sp_box.hi);
      const PathDetection dp_r =
          detection_probabilities(design_rand, sp, setup.detection);
      d_rand.push_back(dp_r.dp_d);
      o_rand.push_back(dp_r.dp_o);
      n_all.push_back(dp_r.dp_n);

      // Directional profile steered at the evaluated SP itself (best-case
      // reflective beamforming for that SP).
      const AzEl phi_sp = azel_from_local(s.ris.to_local(sp));
      RisProfileSchedule dir_sched = directional_profile_schedule(
          a_phi0, steering_vector(s.ris_array, phi_sp, lambda),
          s.num_transmissions);
      const SensingDesign design_dir =
          make_sensing_design(s, ue, std::move(dir_sched), plan);
      const PathDetection dp_d =
          detection_probabilities(design_dir, sp, setup.detection);
      d_dir.push_back(dp_d.dp_d);
      o_dir.push_back(dp_d.dp_o);
    }
  }

  const auto ccdf_at = [](const std::vector<double>& samples, double t) {
    int count = 0;
    for (double v : samples) count += (v > t) ? 1 : 0;
    return static_cast<double>(count) / static_cast<double>(samples.size());
  };

  std::ofstream out(out_dir + "/dp_ccdf.csv");
  out << "dp,d_random,o_random,n,d_directional,o_directional\n";
  for (int i = 0; i <= 300; ++i) {
    const double t = std::pow(10.0, -3.0 + 3.0 * i / 300.0);  // 1e-3 .. 1
    char line[256];
    std::snprintf(line, sizeof(line), "%.9g,%.9g,%.9g,%.9g,%.9g,%.9g\n", t,
                  ccdf_at(d_rand, t), ccdf_at(o_rand, t), ccdf_at(n_all, t),
                  ccdf_at(d_dir, t), ccdf_at(o_dir, t));
    out << line;
  }
}

void write_link_budget(const CampaignConfig& cfg, const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  const Scenario s = cfg.scenario();

  const auto write = [&](bool scenario_a, bool directional,
                         const std::string& name) {
    std::ofstream out(out_dir + "/" + name);
    out << "rho,pl_r_db,pl_d_db,pl_o_db,pl_n_db\n";
    for (int i = 1; i < 1000; ++i) {
      const double rho = i / 1000.0;
      double d_ur, d_rs, d_us;
      if (scenario_a) {  // SP between UE and RIS
        d_ur = 30.0;
        d_rs = rho * d_ur;
        d_us = d_ur - d_rs;
      } else {  // UE between RIS and SP
        d_rs = 30.0;
        d_ur = rho * d_rs;
        d_us = d_rs - d_ur;
      }
      const LinkBudget lb = link_budget(d_ur, d_us, d_rs, s, directional);
      char line[256];
      std::snprintf(line, sizeof(line), "%.9g,%.9g,%.9g,%.9g,%.9g\n", rho,
                    db10(lb.pl_r), db10(lb.pl_d), db10(lb.pl_o), db10(lb.pl_n));
      out << line;
    }
  };
  write(true, false, "linkbudget_a_random.csv");
  write(true, true, "linkbudget_a_directional.csv");
  write(false, false, "linkbudget_b_random.csv");
  write(false, true, "linkbudget_b_directional.csv");
}

}  // namespace rismap
