// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

#include "ghostlab/experiment.hpp"

using namespace ghostlab;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> data_rows(const std::string& csv) {
  std::vector<std::string> rows;
  std::istringstream ss(csv);
  std::string line;
  bool header_seen = false;
  while (std::getline(ss, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      header_seen = true;  // column header
      continue;
    }
    rows.push_back(line);
  }
  return rows;
}

ExperimentConfig tiny_config(const std::string& out, const std::string& detector = "classical") {
  std::ostringstream js;
  js << "{\"output_dir\":\"" << out << "\",\"timing\":\"none\","
     << "\"scene\":{\"count\":2},\"model\":{\"val_count\":1},"
     << "\"patterns\":{\"M\":12},"
     << "\"detector\":{\"kind\":\"" << detector << "\"},"
     << "\"fista\":{\"iterations\":40}}";
  return config_from_json_text(js.str());
}

}  // namespace

TEST_CASE("config: defaults, unknown keys, shape errors, hashing") {
  const ExperimentConfig def = default_config();
  CHECK(def.scene.T == 4);
  CHECK(def.patterns.M == 24);
  CHECK(def.reconstructors == std::vector<std::string>{"dgi", "pi", "fista"});

  CHECK_THROWS_WITH_AS(static_cast<void>(config_from_json_text("{\"scene\":{\"bogus\":1}}")),
                       doctest::Contains("unknown key 'scene.bogus'"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(static_cast<void>(config_from_json_text("{\"nope\":1}")),
                       doctest::Contains("unknown key 'nope'"), std::invalid_argument);
  CHECK_THROWS_AS(static_cast<void>(config_from_json_text("{\"scene\":5}")),
                  std::invalid_argument);
  CHECK_THROWS_AS(static_cast<void>(config_from_json_text("not json")), std::invalid_argument);

  const ExperimentConfig a = config_from_json_text("{\"seeds\":{\"master\":7}}");
  const ExperimentConfig b = config_from_json_text("{\"seeds\":{\"master\":7}}");
  const ExperimentConfig c = config_from_json_text("{\"seeds\":{\"master\":8}}");
  CHECK(a.config_hash == b.config_hash);
  CHECK(a.config_hash != c.config_hash);
  CHECK(a.config_hash == fnv1a64(a.resolved_json));

  // Resolution with overrides tracks them in the hash.
  const ExperimentConfig d = resolve_config("", true, 9, "elsewhere");
  CHECK(d.seed == 9);
  CHECK(d.output_dir == "elsewhere");
  CHECK(d.config_hash != a.config_hash);
}

TEST_CASE("simulate is byte-deterministic and sidecars carry detector physics") {
  const fs::path base = fs::temp_directory_path() / "ghostlab_exp_sim";
  fs::remove_all(base);
  const auto out1 = (base / "run1").string();
  const auto out2 = (base / "run2").string();

  const ExperimentConfig cfg1 = tiny_config(out1, "sipm");
  const ExperimentConfig cfg2 = tiny_config(out2, "sipm");
  const std::string m1 = cmd_simulate(cfg1);
  cmd_simulate(cfg2);
  CHECK(fs::exists(m1));

  CHECK(slurp(fs::path(out1) / "patterns.gtf") == slurp(fs::path(out2) / "patterns.gtf"));
  CHECK(slurp(fs::path(out1) / "buckets" / "seq_000.gtf") ==
        slurp(fs::path(out2) / "buckets" / "seq_000.gtf"));
  CHECK(slurp(fs::path(out1) / "scenes" / "seq_001.gtf") ==
        slurp(fs::path(out2) / "scenes" / "seq_001.gtf"));

  const std::string side = slurp(fs::path(out1) / "buckets" / "seq_000.json");
  CHECK(side.find("\"efficiency\": 0.5") != std::string::npos);
  CHECK(side.find("\"crosstalk_prob\": 0.05") != std::string::npos);
  CHECK(side.find("\"dark_count_rate_hz\": 100000.0") != std::string::npos);
  CHECK(side.find("\"mode\": \"counts\"") != std::string::npos);

  const Dataset ds = load_dataset(out1);
  CHECK(ds.counts_mode);
  CHECK(ds.train_truth.size() == 2);
  CHECK(ds.val_truth.size() == 1);
  CHECK(ds.spec.efficiency == 0.5);
  fs::remove_all(base);
}

TEST_CASE("reconstruct: row schema and end-to-end determinism") {
  const fs::path base = fs::temp_directory_path() / "ghostlab_exp_rec";
  fs::remove_all(base);
  const ExperimentConfig cfg = tiny_config((base / "d").string());
  cmd_simulate(cfg);
  const std::string csv_path = cmd_reconstruct(cfg);
  const std::string csv1 = slurp(csv_path);
  cmd_reconstruct(cfg);
  CHECK(slurp(csv_path) == csv1);  // byte-identical on rerun

  const auto rows = data_rows(csv1);
  // methods x (T + 1 summary) = 3 * 5.
  CHECK(rows.size() == 15);
  int summaries = 0;
  for (const auto& r : rows) {
    if (r.find(",summary,") != std::string::npos) ++summaries;
  }
  CHECK(summaries == 3);
  CHECK(fs::exists(base / "d" / "metrics_pi.json"));
  CHECK(fs::exists(base / "d" / "recon" / "dgi" / "seq_000.gtf"));
  fs::remove_all(base);
}

TEST_CASE("reconstruct: noiseless full-rank pseudo-inverse is near exact") {
  const fs::path base = fs::temp_directory_path() / "ghostlab_exp_pi";
  fs::remove_all(base);
  std::ostringstream js;
  js << "{\"output_dir\":\"" << (base / "d").string() << "\",\"timing\":\"none\","
     << "\"scene\":{\"count\":1},\"model\":{\"val_count\":0},"
     << "\"patterns\":{\"M\":256},"
     << "\"detector\":{\"sigma\":0.0},"
     << "\"reconstructors\":[\"pi\"]}";
  const ExperimentConfig cfg = config_from_json_text(js.str());
  cmd_simulate(cfg);
  const std::string csv = slurp(cmd_reconstruct(cfg));
  // Pull the summary MSE cell.
  for (const auto& row : data_rows(csv)) {
    if (row.find("pi,summary,") == 0) {
      std::istringstream ss(row.substr(11));
      std::string mse_cell;
      std::getline(ss, mse_cell, ',');
      CHECK(std::stod(mse_cell) < 1e-6);
    }
  }
  fs::remove_all(base);
}

TEST_CASE("gradcheck command reports a passing audit") {
  const fs::path base = fs::temp_directory_path() / "ghostlab_exp_gc";
  fs::remove_all(base);
  std::ostringstream js;
  js << "{\"output_dir\":\"" << (base / "d").string() << "\","
     << "\"scene\":{\"count\":1},\"model\":{\"val_count\":0},"
     << "\"patterns\":{\"M\":12},"
     << "\"gradcheck\":{\"probes\":40}}";
  const ExperimentConfig cfg = config_from_json_text(js.str());
  cmd_simulate(cfg);
  const GradCheckReport rep = cmd_gradcheck(cfg);
  CHECK(rep.probes == 40);
  CHECK(rep.max_rel_err < 1e-4);
  CHECK(fs::exists(base / "d" / "gradcheck.json"));
  fs::remove_all(base);
}

TEST_CASE("detector-compare emits detector x method rows with regime ratios") {
  const fs::path base = fs::temp_directory_path() / "ghostlab_exp_dc";
  fs::remove_all(base);
  std::ostringstream js;
  js << "{\"output_dir\":\"" << (base / "d").string() << "\",\"timing\":\"none\","
     << "\"scene\":{\"count\":2},\"model\":{\"val_count\":0},"
     << "\"patterns\":{\"M\":12},"
     << "\"reconstructors\":[\"dgi\",\"pi\"]}";
  const ExperimentConfig cfg = config_from_json_text(js.str());
  const std::string csv = slurp(cmd_detector_compare(cfg));
  const auto rows = data_rows(csv);
  CHECK(rows.size() == 4 * 2);  // detectors x methods
  bool sipm_ratio = false, snspd_ratio = false, classical_inf = false;
  for (const auto& r : rows) {
    if (r.rfind("sipm,", 0) == 0 && r.find(",0.5") != std::string::npos) sipm_ratio = true;
    if (r.rfind("snspd,", 0) == 0 && r.find(",9500") != std::string::npos) snspd_ratio = true;
    if (r.rfind("classical,", 0) == 0 && r.find(",inf") != std::string::npos) classical_inf = true;
  }
  CHECK(sipm_ratio);
  CHECK(snspd_ratio);
  CHECK(classical_inf);
  fs::remove_all(base);
}

TEST_CASE("normalize-sweep: seven rows, stabilized vs raw variance columns") {
  const fs::path base = fs::temp_directory_path() / "ghostlab_exp_ns";
  fs::remove_all(base);
  std::ostringstream js;
  js << "{\"output_dir\":\"" << (base / "d").string() << "\",\"timing\":\"none\","
     << "\"scene\":{\"count\":4},\"model\":{\"val_count\":2},"
     << "\"patterns\":{\"M\":12},"
     << "\"detector\":{\"kind\":\"snspd\"}}";
  const ExperimentConfig cfg = config_from_json_text(js.str());
  cmd_simulate(cfg);
  const std::string csv = slurp(cmd_normalize_sweep(cfg));
  const auto rows = data_rows(csv);
  REQUIRE(rows.size() == 7);

  const auto variance_of = [&](const std::string& name) {
    for (const auto& r : rows) {
      if (r.rfind(name + ",", 0) == 0) {
        std::istringstream ss(r.substr(name.size() + 1));
        std::string cell;
        std::getline(ss, cell, ',');
        return std::stod(cell);
      }
    }
    REQUIRE(false);
    return 0.0;
  };
  const double va = variance_of("anscombe");
  CHECK(va >= 0.90);
  CHECK(va <= 1.10);
  const double vf = variance_of("freeman_tukey");
  CHECK(vf >= 0.90);
  CHECK(vf <= 1.10);
  const double vm = variance_of("minmax");
  CHECK((vm < 0.90 || vm > 1.10));
  fs::remove_all(base);
}

TEST_CASE("snr-sweep echoes its grid and tracks the target SNR") {
  const fs::path base = fs::temp_directory_path() / "ghostlab_exp_snr";
  fs::remove_all(base);
  std::ostringstream js;
  js << "{\"output_dir\":\"" << (base / "d").string() << "\",\"timing\":\"none\","
     << "\"scene\":{\"count\":8},\"model\":{\"val_count\":0},"
     << "\"patterns\":{\"M\":24},"
     << "\"snr\":{\"grid\":[25,10]},"
     << "\"reconstructors\":[\"dgi\"],"
     << "\"fista\":{\"iterations\":30}}";
  const ExperimentConfig cfg = config_from_json_text(js.str());
  cmd_simulate(cfg);
  const std::string csv = slurp(cmd_snr_sweep(cfg));
  const auto rows = data_rows(csv);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].rfind("25,dgi,", 0) == 0);
  CHECK(rows[1].rfind("10,dgi,", 0) == 0);
  for (const auto& r : rows) {
    std::istringstream ss(r);
    std::string target, method, measured;
    std::getline(ss, target, ',');
    std::getline(ss, method, ',');
    std::getline(ss, measured, ',');
    CHECK(std::fabs(std::stod(measured) - std::stod(target)) < 0.5);
  }
  fs::remove_all(base);
}

TEST_CASE("ablate trains the six named variants") {
  const fs::path base = fs::temp_directory_path() / "ghostlab_exp_abl";
  fs::remove_all(base);
  std::ostringstream js;
  js << "{\"output_dir\":\"" << (base / "d").string() << "\",\"timing\":\"none\","
     << "\"scene\":{\"count\":2},\"model\":{\"val_count\":1},"
     << "\"patterns\":{\"M\":12},"
     << "\"ablate\":{\"epochs\":1}}";
  const ExperimentConfig cfg = config_from_json_text(js.str());
  cmd_simulate(cfg);
  const std::string csv = slurp(cmd_ablate(cfg));
  const auto rows = data_rows(csv);
  REQUIRE(rows.size() == 6);
  const char* expected[] = {"full",          "no-temporal-attention", "no-temporal-pos-enc",
                            "mse-only-loss", "no-temp-consistency-loss", "1-temporal-block"};
  for (int i = 0; i < 6; ++i) {
    CHECK(rows[static_cast<size_t>(i)].rfind(std::string(expected[i]) + ",", 0) == 0);
  }
  fs::remove_all(base);
}

TEST_CASE("train writes a loadable checkpoint and a loss history") {
  const fs::path base = fs::temp_directory_path() / "ghostlab_exp_tr";
  fs::remove_all(base);
  std::ostringstream js;
  js << "{\"output_dir\":\"" << (base / "d").string() << "\",\"timing\":\"none\","
     << "\"scene\":{\"count\":2},\"model\":{\"val_count\":1,\"epochs\":2},"
     << "\"patterns\":{\"M\":12},"
     << "\"detector\":{\"kind\":\"snspd\"},"
     << "\"normalization\":\"anscombe\"}";
  const ExperimentConfig cfg = config_from_json_text(js.str());
  cmd_simulate(cfg);
  const std::string ckdir = cmd_train(cfg);
  CHECK(fs::exists(fs::path(ckdir) / "manifest.json"));
  CHECK(fs::exists(base / "d" / "train_loss.csv"));

  // The checkpoint feeds straight back into reconstruction.
  std::ostringstream js2;
  js2 << "{\"output_dir\":\"" << (base / "d").string() << "\",\"timing\":\"none\","
      << "\"scene\":{\"count\":2},\"model\":{\"val_count\":1,\"checkpoint\":\"" << ckdir
      << "\"},"
      << "\"patterns\":{\"M\":12},"
      << "\"detector\":{\"kind\":\"snspd\"},"
      << "\"normalization\":\"anscombe\","
      << "\"reconstructors\":[\"dynghost\"]}";
  const ExperimentConfig cfg2 = config_from_json_text(js2.str());
  const std::string csv = slurp(cmd_reconstruct(cfg2));
  CHECK(data_rows(csv).size() == 5);  // 1 method x (T + 1)
  fs::remove_all(base);
}
