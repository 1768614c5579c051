#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "rismap/campaign.hpp"

using namespace rismap;

namespace {

// Small numerology keeps the end-to-end campaign tests quick.
CampaignConfig tiny_config() {
  CampaignConfig cfg;
  cfg.runs = 2;
  cfg.epochs = 3;
  cfg.num_sps = 3;
  cfg.n_subcarriers = 128;
  cfg.bandwidth_hz = 128 * cfg.subcarrier_spacing_hz;
  cfg.ris_n_az = cfg.ris_n_el = 10;
  cfg.num_transmissions = 16;
  return cfg;
}

std::string write_temp_config(const std::string& body) {
  const std::string path =
      (std::filesystem::temp_directory_path() / "rismap_test.cfg").string();
  std::ofstream out(path);
  out << body;
  return path;
}

}  // namespace

TEST_CASE("config file parsing") {
  SUBCASE("defaults reflect the evaluation setup") {
    const CampaignConfig cfg;
    const Scenario s = cfg.scenario();
    CHECK(s.ris_array.size() == 2500);
    CHECK(s.ue_array.size() == 16);
    CHECK(s.num_transmissions == 40);
    CHECK(s.ofdm.wavelength() == doctest::Approx(0.01));
    CHECK(s.ue_array.spacing == doctest::Approx(0.005));
    CHECK(s.ris_array.spacing == doctest::Approx(0.0025));
    CHECK(s.tx_power_w == doctest::Approx(dbm_to_watt(37.0)));
    CHECK(s.noise_psd == doctest::Approx(dbm_to_watt(-166.0)));
    CHECK(s.rcs == 50.0);
    CHECK(cfg.epochs == 15);
    CHECK(cfg.p_fa == 1e-3);
    CHECK(cfg.t_mg == 36.0);
    // Table values imply 192 MHz of occupied bandwidth vs 200 configured.
    CHECK(!s.bandwidth_consistent());
  }

  SUBCASE("round trip through a file") {
    const std::string path = write_temp_config(
        "# comment\n"
        "seed = 42\n"
        "runs = 7\n"
        "ris_position = 10 1 2\n"
        "sp_box = 0 0 0 10 10 5   # inline comment\n"
        "ris_profile_mode = directional\n");
    const CampaignConfig cfg = load_config(path);
    CHECK(cfg.seed == 42);
    CHECK(cfg.runs == 7);
    CHECK(cfg.ris_position == Vec3(10, 1, 2));
    CHECK(cfg.sp_box_hi == Vec3(10, 10, 5));
    CHECK(cfg.ris_profile_mode == "directional");
  }

  SUBCASE("errors carry the file and line") {
    const std::string path = write_temp_config("seed = 1\nbogus_key = 3\n");
    try {
      load_config(path);
      FAIL("expected an error");
    } catch (const std::invalid_argument& e) {
      const std::string msg = e.what();
      CHECK(msg.find(":2:") != std::string::npos);
      CHECK(msg.find("bogus_key") != std::string::npos);
    }
    const std::string path2 = write_temp_config("seed 1\n");
    try {
      load_config(path2);
      FAIL("expected an error");
    } catch (const std::invalid_argument& e) {
      CHECK(std::string(e.what()).find(":1:") != std::string::npos);
    }
  }

  SUBCASE("validation rejects bad values") {
    CampaignConfig cfg;
    cfg.p_fa = 2.0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = CampaignConfig();
    cfg.num_transmissions = 7;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = CampaignConfig();
    cfg.ris_profile_mode = "fancy";
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  }

  SUBCASE("overrides parse like file entries") {
    CampaignConfig cfg;
    apply_override(cfg, "tx_power_dbm", "20");
    CHECK(cfg.tx_power_dbm == 20.0);
    CHECK_THROWS_AS(apply_override(cfg, "runs", "2.5"), std::invalid_argument);
    CHECK_THROWS_AS(apply_override(cfg, "dt", "fast"), std::invalid_argument);
  }
}

TEST_CASE("campaign determinism across invocations and worker counts") {
  const CampaignConfig cfg = tiny_config();

  setenv("RISMAP_WORKERS", "1", 1);
  const CampaignResult serial = run_campaign(cfg);
  setenv("RISMAP_WORKERS", "4", 1);
  const CampaignResult parallel = run_campaign(cfg);
  unsetenv("RISMAP_WORKERS");
  const CampaignResult again = run_campaign(cfg);

  REQUIRE(serial.runs.size() == 2);
  for (std::size_t r = 0; r < serial.runs.size(); ++r) {
    for (int k = 0; k <= cfg.epochs; ++k) {
      CHECK(serial.runs[r].ris[k] == parallel.runs[r].ris[k]);
      CHECK(serial.runs[r].nris[k] == parallel.runs[r].nris[k]);
      CHECK(serial.runs[r].fused[k] == again.runs[r].fused[k]);
      CHECK(serial.runs[r].ris_rand_precoder[k] ==
            again.runs[r].ris_rand_precoder[k]);
    }
    CHECK(serial.runs[r].detections_jsonl == parallel.runs[r].detections_jsonl);
    CHECK(serial.runs[r].posteriors_jsonl == again.runs[r].posteriors_jsonl);
  }

  SUBCASE("different seeds change the draw") {
    CampaignConfig other = cfg;
    other.seed = 999;
    const CampaignResult different = run_campaign(other);
    bool any_diff = false;
    for (int k = 0; k <= cfg.epochs; ++k)
      any_diff |= different.runs[0].nris[k] != serial.runs[0].nris[k];
    CHECK(any_diff);
  }
}

TEST_CASE("campaign trace starts at the all-missed penalty") {
  CampaignConfig cfg = tiny_config();
  cfg.runs = 1;
  const CampaignResult result = run_campaign(cfg);
  // k = 0: nothing mapped, so sqrt(num_sps * c^2 / alpha).
  const double expected =
      std::sqrt(cfg.num_sps * cfg.gospa_c * cfg.gospa_c / cfg.gospa_alpha);
  CHECK(result.runs[0].ris[0] == doctest::Approx(expected));
  CHECK(result.runs[0].nris[0] == doctest::Approx(expected));
  CHECK(result.runs[0].fused[0] == doctest::Approx(expected));
}

TEST_CASE("campaign file outputs") {
  const std::string out_dir =
      (std::filesystem::temp_directory_path() / "rismap_out").string();
  std::filesystem::remove_all(out_dir);
  CampaignConfig cfg = tiny_config();
  run_campaign_to_files(cfg, out_dir);

  const auto first_line = [&](const std::string& name) {
    std::ifstream in(out_dir + "/" + name);
    REQUIRE(in.good());
    std::string line;
    std::getline(in, line);
    return line;
  };
  CHECK(first_line("gospa_timeseries.csv") ==
        "k,ris_mean,ris_std,nris_mean,nris_std,fused_mean,fused_std,"
        "ris_randprec_mean,ris_randprec_std");
  CHECK(first_line("dp_ccdf.csv") ==
        "dp,d_random,o_random,n,d_directional,o_directional");
  CHECK(first_line("detections.jsonl").front() == '{');
  CHECK(first_line("posteriors.jsonl").front() == '{');

  SUBCASE("bit-identical files on a second invocation") {
    const std::string out2 = out_dir + "_again";
    std::filesystem::remove_all(out2);
    run_campaign_to_files(cfg, out2);
    for (const char* name : {"gospa_timeseries.csv", "detections.jsonl"}) {
      std::ifstream a(out_dir + "/" + name), b(out2 + "/" + name);
      const std::string sa((std::istreambuf_iterator<char>(a)),
                           std::istreambuf_iterator<char>());
      const std::string sb((std::istreambuf_iterator<char>(b)),
                           std::istreambuf_iterator<char>());
      CHECK(sa == sb);
      CHECK(!sa.empty());
    }
  }
}

TEST_CASE("link budget and dp map writers") {
  const std::string out_dir =
      (std::filesystem::temp_directory_path() / "rismap_aux").string();
  std::filesystem::remove_all(out_dir);
  const CampaignConfig cfg;

  write_link_budget(cfg, out_dir);
  std::ifstream lb(out_dir + "/linkbudget_a_random.csv");
  REQUIRE(lb.good());
  std::string header;
  std::getline(lb, header);
  CHECK(header == "rho,pl_r_db,pl_d_db,pl_o_db,pl_n_db");
  int rows = 0;
  std::string line;
  while (std::getline(lb, line)) ++rows;
  CHECK(rows == 999);

  DpMapOptions opt;
  opt.spec.x_min = 30;
  opt.spec.x_max = 50;
  opt.spec.y_min = -5;
  opt.spec.y_max = 5;
  opt.spec.resolution = 5.0;
  write_dp_maps(cfg, opt, out_dir);
  std::ifstream dm(out_dir + "/dp_map_directional.csv");
  REQUIRE(dm.good());
  std::getline(dm, header);
  CHECK(header == "x,y,dp_D,dp_O");
}
