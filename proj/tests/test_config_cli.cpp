#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "slif/config.hpp"
#include "slif/errors.hpp"
#include "slif/graph_build.hpp"
#include "slif/model.hpp"
#include "slif/train.hpp"

using namespace slif;

namespace {

namespace fs = std::filesystem;

std::string tmp_root() {
  auto p = fs::temp_directory_path() / "slif_cli_tests";
  fs::create_directories(p);
  return p.string();
}

int run_cli(const std::string& args, const std::string& out_file) {
  const std::string cmd = std::string(SLIF_CLI_PATH) + " " + args + " >" + out_file + " 2>&1";
  return std::system(cmd.c_str());
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// metric records only (epoch/best/final), the determinism-relevant subset
std::string metric_lines(const std::string& manifest_path) {
  std::ifstream in(manifest_path);
  std::string line, out;
  while (std::getline(in, line))
    if (line.rfind("epoch=", 0) == 0 || line.rfind("best ", 0) == 0 ||
        line.rfind("final", 0) == 0)
      out += line + "\n";
  return out;
}

const std::string kSmallTrainFlags =
    " --d=16 --epochs=3 --batch_size=2048 --sge_topn=4 --lr=0.005";

std::string make_dataset(const std::string& name) {
  const std::string dir = tmp_root() + "/" + name;
  if (!fs::exists(dir + "/config.txt")) {
    const std::string out = tmp_root() + "/synth_out.txt";
    REQUIRE(run_cli("synth --users 120 --items 150 --clusters 3 --feature-dim 6 "
                    "--interactions-per-user 12 --seed 9 --out " + dir,
                    out) == 0);
  }
  return dir;
}

}  // namespace

TEST_CASE("config: overrides, types, and unknown keys") {
  TrainConfig cfg;
  apply_override(cfg, "d", "32");
  apply_override(cfg, "lr", "0.01");
  apply_override(cfg, "sge_enabled", "false");
  apply_override(cfg, "K_list", "10,20");
  CHECK(cfg.d == 32);
  CHECK(cfg.lr == 0.01);
  CHECK_FALSE(cfg.sge_enabled);
  CHECK(cfg.K_list == std::vector<int>{10, 20});

  CHECK_THROWS_AS(apply_override(cfg, "no_such_key", "1"), ConfigError);
  CHECK_THROWS_AS(apply_override(cfg, "d", "abc"), ConfigError);
  CHECK_THROWS_AS(apply_override(cfg, "sge_enabled", "maybe"), ConfigError);

  try {
    apply_override(cfg, "bogus", "1");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("bogus") != std::string::npos);
  }
}

TEST_CASE("config: validation catches out-of-range values by name") {
  auto expect_bad = [](const std::string& key, const std::string& value) {
    TrainConfig cfg;
    apply_override(cfg, key, value);
    try {
      validate_config(cfg);
      FAIL("expected ConfigError for ", key, "=", value);
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find(key) != std::string::npos);
    }
  };
  expect_bad("tau", "0");
  expect_bad("prune_ratio", "1.0");
  expect_bad("L_b", "0");
  expect_bad("sge_interval", "0");
  expect_bad("beta", "-0.1");
  expect_bad("K_list", "0");
  expect_bad("fusion_mode", "magic");

  TrainConfig good;
  validate_config(good);  // defaults are a valid configuration
}

TEST_CASE("config: file save/load round-trip") {
  TrainConfig cfg;
  cfg.d = 48;
  cfg.beta = 0.3;
  cfg.fusion_mode = "sum";
  cfg.K_list = {10, 20, 50};
  const std::string path = tmp_root() + "/roundtrip.cfg";
  save_config_file(path, cfg);
  TrainConfig loaded = load_config_file(path);
  CHECK(loaded.d == 48);
  CHECK(loaded.beta == 0.3);
  CHECK(loaded.fusion_mode == "sum");
  CHECK(loaded.K_list == cfg.K_list);
}

TEST_CASE("config: SLIF_SEED environment override") {
  TrainConfig cfg;
  setenv("SLIF_SEED", "9001", 1);
  apply_env_seed(cfg);
  unsetenv("SLIF_SEED");
  CHECK(cfg.seed == 9001);
}

TEST_CASE("ablating both auxiliary branches forces the interaction branch") {
  GraphInputs inputs;
  inputs.num_users = 3;
  inputs.num_items = 4;
  inputs.num_entities = 4;
  InteractionDataset ds;
  ds.num_users = 3;
  ds.num_items = 4;
  ds.train = {{0, 0}, {1, 1}, {2, 2}, {2, 3}};
  inputs.base_adjacency = build_interaction_adjacency(ds);

  WorkGraphs work = build_work_graphs(inputs, nullptr, {}, 0.0, false, 0);
  CHECK_FALSE(work.has_feature);
  CHECK_FALSE(work.has_kg);

  ParamShapes shapes;
  shapes.num_users = 3;
  shapes.num_entities = 4;
  shapes.num_relations = 1;
  shapes.dim = 8;
  ParamSet p = init_params(shapes, 3);

  Tape tp;
  auto ids = put_params_on_tape(tp, p);
  ModelSettings settings;
  settings.dim = 8;
  auto fwd = model_forward(tp, work, ids, settings);
  CHECK(fwd.active == std::array<bool, 3>{true, false, false});
  for (int64_t i = 0; i < tp.value(fwd.unified).numel(); ++i)
    CHECK(tp.value(fwd.unified)[i] == tp.value(fwd.item_interaction)[i]);
  for (int64_t i = 0; i < tp.value(fwd.fusion_alpha).numel(); ++i)
    CHECK(tp.value(fwd.fusion_alpha)[i] == 1.0f);
}

TEST_CASE("cli: missing dataset path fails with the key name") {
  const std::string out = tmp_root() + "/missing_path.txt";
  CHECK(run_cli("train --epochs=1 --out " + tmp_root() + "/should_not_exist", out) != 0);
  CHECK(slurp(out).find("interactions_path") != std::string::npos);
}

TEST_CASE("cli: train runs are deterministic and eval matches the manifest") {
  const std::string data = make_dataset("data_a");
  const std::string r1 = tmp_root() + "/run_det1";
  const std::string r2 = tmp_root() + "/run_det2";
  fs::remove_all(r1);
  fs::remove_all(r2);
  const std::string out = tmp_root() + "/train_out.txt";
  REQUIRE(run_cli("train --config " + data + "/config.txt" + kSmallTrainFlags + " --out " + r1,
                  out) == 0);
  REQUIRE(run_cli("train --config " + data + "/config.txt" + kSmallTrainFlags + " --out " + r2,
                  out) == 0);

  const std::string lines1 = metric_lines(r1 + "/manifest.txt");
  CHECK(lines1 == metric_lines(r2 + "/manifest.txt"));
  CHECK(!lines1.empty());

  // eval on valid reproduces the recorded best row
  const std::string eval_out = tmp_root() + "/eval_out.txt";
  REQUIRE(run_cli("eval --run " + r1 + " --split valid", eval_out) == 0);
  std::string best_line;
  std::istringstream ss(lines1);
  for (std::string line; std::getline(ss, line);)
    if (line.rfind("best ", 0) == 0) best_line = line;
  const std::string best_value = best_line.substr(best_line.find("valid_recall@20=") + 16);
  CHECK(slurp(eval_out).find("recall@20=" + best_value) != std::string::npos);

  // multiple cutoffs emit a column per K
  REQUIRE(run_cli("eval --run " + r1 + " --split test --K_list 10,20", eval_out) == 0);
  const std::string eval_text = slurp(eval_out);
  CHECK(eval_text.find("recall@10=") != std::string::npos);
  CHECK(eval_text.find("recall@20=") != std::string::npos);
}

TEST_CASE("cli: seed environment variable changes the run") {
  const std::string data = make_dataset("data_a");
  const std::string run_dir = tmp_root() + "/run_env";
  fs::remove_all(run_dir);
  const std::string out = tmp_root() + "/env_out.txt";
  setenv("SLIF_SEED", "12345", 1);
  int rc = run_cli("train --config " + data + "/config.txt" + kSmallTrainFlags + " --out " +
                       run_dir,
                   out);
  unsetenv("SLIF_SEED");
  REQUIRE(rc == 0);
  CHECK(slurp(run_dir + "/manifest.txt").find("seed master=12345") != std::string::npos);
}

TEST_CASE("cli: ablation override reproduces the reduced variant") {
  const std::string data = make_dataset("data_a");
  const std::string run_dir = tmp_root() + "/run_wo_sge";
  fs::remove_all(run_dir);
  const std::string out = tmp_root() + "/wo_sge_out.txt";
  REQUIRE(run_cli("train --config " + data + "/config.txt" + kSmallTrainFlags +
                      " --override sge_enabled=false --out " + run_dir,
                  out) == 0);
  CHECK(slurp(run_dir + "/config.txt").find("sge_enabled=false") != std::string::npos);
}

TEST_CASE("cli: sweep emits one run per grid point plus a summary") {
  const std::string data = make_dataset("data_a");
  const std::string sweep_dir = tmp_root() + "/sweep1";
  fs::remove_all(sweep_dir);
  const std::string out = tmp_root() + "/sweep_out.txt";
  REQUIRE(run_cli("sweep --config " + data + "/config.txt" + kSmallTrainFlags +
                      " --grid sge_interval=1,2 --grid lr=0.005,0.002 --out " + sweep_dir,
                  out) == 0);
  int rows = 0;
  std::ifstream summary(sweep_dir + "/summary.tsv");
  for (std::string line; std::getline(summary, line);) ++rows;
  CHECK(rows == 1 + 4);  // header + cartesian product
  for (int p = 0; p < 4; ++p) {
    char name[32];
    std::snprintf(name, sizeof(name), "point_%03d", p);
    CHECK(fs::exists(sweep_dir + "/" + name + "/manifest.txt"));
  }

  // empty grid is a config error
  CHECK(run_cli("sweep --config " + data + "/config.txt --out " + sweep_dir, out) != 0);
}

TEST_CASE("cli: noise study emits one row per ratio and a clean zero row") {
  const std::string data = make_dataset("data_a");
  const std::string noise_dir = tmp_root() + "/noise1";
  const std::string base_run = tmp_root() + "/noise_base";
  fs::remove_all(noise_dir);
  fs::remove_all(base_run);
  const std::string out = tmp_root() + "/noise_out.txt";
  REQUIRE(run_cli("noise --config " + data + "/config.txt" + kSmallTrainFlags +
                      " --kind interaction --ratios 0,0.2 --out " + noise_dir,
                  out) == 0);
  std::vector<std::string> rows;
  std::ifstream summary(noise_dir + "/noise_summary.tsv");
  for (std::string line; std::getline(summary, line);) rows.push_back(line);
  REQUIRE(rows.size() == 3);  // header + two ratios

  // the ratio-0 row equals an ordinary training run with the same seed
  REQUIRE(run_cli("train --config " + data + "/config.txt" + kSmallTrainFlags + " --out " +
                      base_run,
                  out) == 0);
  std::string final_line;
  std::istringstream ss(metric_lines(base_run + "/manifest.txt"));
  for (std::string line; std::getline(ss, line);)
    if (line.rfind("final", 0) == 0) final_line = line;
  const std::string recall =
      final_line.substr(final_line.find("test_recall@20=") + 15,
                        final_line.find(" test_ndcg") - final_line.find("test_recall@20=") - 15);
  CHECK(rows[1].find("\t" + recall + "\t") != std::string::npos);
}

TEST_CASE("cli: corrupt snapshots are rejected with the file name") {
  const std::string data = make_dataset("data_a");
  const std::string run_dir = tmp_root() + "/run_corrupt";
  fs::remove_all(run_dir);
  const std::string out = tmp_root() + "/corrupt_out.txt";
  REQUIRE(run_cli("train --config " + data + "/config.txt" + kSmallTrainFlags + " --out " +
                      run_dir,
                  out) == 0);
  {
    std::ofstream bad(run_dir + "/snapshot/user_emb.slif", std::ios::binary);
    bad << "JUNKJUNKJUNK";
  }
  CHECK(run_cli("eval --run " + run_dir + " --split test", out) != 0);
  CHECK(slurp(out).find("user_emb.slif") != std::string::npos);
}
