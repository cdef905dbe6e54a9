#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "slif/config.hpp"
#include "slif/datasets.hpp"
#include "slif/errors.hpp"
#include "slif/io.hpp"
#include "slif/train.hpp"

namespace {

using namespace slif;

struct ConfigCli {
  std::string config_path;
  std::map<std::string, std::string> flag_values;
  std::vector<std::string> overrides;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_path, "key=value configuration file");
    for (const std::string& key : config_keys())
      cmd->add_option_function<std::string>(
          "--" + key, [this, key](const std::string& v) { flag_values[key] = v; },
          "config key " + key);
    cmd->add_option("--override", overrides, "extra key=value override (repeatable)");
  }

  TrainConfig resolve() const {
    TrainConfig cfg =
        config_path.empty() ? TrainConfig{} : load_config_file(config_path);
    for (const auto& [k, v] : flag_values) apply_override(cfg, k, v);
    for (const std::string& kv : overrides) {
      auto eq = kv.find('=');
      if (eq == std::string::npos)
        throw ConfigError("--override expects key=value, got '" + kv + "'");
      apply_override(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    TrainConfig out = cfg;
    apply_env_seed(out);
    validate_config(out);
    return out;
  }
};

void print_metrics(const std::string& prefix, const MetricsReport& report) {
  std::string line = prefix;
  for (size_t k = 0; k < report.k_list.size(); ++k) {
    line += " recall@" + std::to_string(report.k_list[k]) + "=" +
            format_metric(report.recall[k]);
    line += " ndcg@" + std::to_string(report.k_list[k]) + "=" + format_metric(report.ndcg[k]);
    line += " precision@" + std::to_string(report.k_list[k]) + "=" +
            format_metric(report.precision[k]);
  }
  std::cout << line << "\n";
}

RunResult run_training(const TrainConfig& cfg, const std::string& out_dir, bool quiet = false) {
  Trainer trainer(cfg, load_and_prepare(cfg));
  RunResult result = trainer.run(out_dir);
  if (!quiet)
    for (const std::string& line : result.epoch_lines) std::cout << line << "\n";
  return result;
}

int cmd_train(const ConfigCli& cli, const std::string& out_dir) {
  TrainConfig cfg = cli.resolve();
  run_training(cfg, out_dir);
  return 0;
}

int cmd_sweep(const ConfigCli& cli, const std::string& out_dir,
              const std::vector<std::string>& grids) {
  TrainConfig base = cli.resolve();
  if (grids.empty()) throw ConfigError("sweep: no --grid given");

  std::vector<std::pair<std::string, std::vector<std::string>>> axes;
  for (const std::string& g : grids) {
    auto eq = g.find('=');
    if (eq == std::string::npos) throw ConfigError("--grid expects key=v1,v2,... got '" + g + "'");
    std::vector<std::string> values;
    std::stringstream ss(g.substr(eq + 1));
    std::string tok;
    while (std::getline(ss, tok, ',')) values.push_back(tok);
    if (values.empty()) throw ConfigError("--grid '" + g + "' lists no values");
    axes.emplace_back(g.substr(0, eq), values);
  }

  size_t total = 1;
  for (const auto& [k, vs] : axes) total *= vs.size();

  ensure_dir(out_dir);
  std::ofstream summary(out_dir + "/summary.tsv");
  summary << "point";
  for (const auto& [k, vs] : axes) summary << '\t' << k;
  summary << "\tbest_valid_recall\ttest_recall\ttest_ndcg\ttest_precision\n";

  for (size_t point = 0; point < total; ++point) {
    TrainConfig cfg = base;
    size_t rem = point;
    std::vector<std::string> assignment;
    for (const auto& [key, values] : axes) {
      const std::string& v = values[rem % values.size()];
      rem /= values.size();
      apply_override(cfg, key, v);
      assignment.push_back(v);
    }
    validate_config(cfg);
    char name[32];
    std::snprintf(name, sizeof(name), "point_%03zu", point);
    std::cout << name;
    for (size_t a = 0; a < axes.size(); ++a)
      std::cout << " " << axes[a].first << "=" << assignment[a];
    std::cout << std::endl;

    RunResult result = run_training(cfg, out_dir + "/" + name, /*quiet=*/true);
    const int k0 = result.final_test.k_list[0];
    summary << name;
    for (const std::string& v : assignment) summary << '\t' << v;
    summary << '\t' << format_metric(result.best_valid) << '\t'
            << format_metric(result.final_test.recall_at(k0)) << '\t'
            << format_metric(result.final_test.ndcg_at(k0)) << '\t'
            << format_metric(result.final_test.precision_at(k0)) << '\n';
    summary.flush();
  }
  std::cout << "summary written to " << out_dir << "/summary.tsv\n";
  return 0;
}

int cmd_eval(const std::string& run_dir, const std::string& split_name,
             const std::string& k_list_override) {
  TrainConfig cfg = load_config_file(run_dir + "/config.txt");
  if (!k_list_override.empty()) apply_override(cfg, "K_list", k_list_override);
  validate_config(cfg);

  Trainer trainer(cfg, load_and_prepare(cfg));
  trainer.restore_snapshot(run_dir + "/snapshot");
  const Split split = split_name == "test" ? Split::kTest : Split::kValid;
  auto report = trainer.evaluate(split, cfg.K_list);
  print_metrics("split=" + split_name, report);
  return 0;
}

int cmd_noise(const ConfigCli& cli, const std::string& out_dir, const std::string& kind_name,
              const std::string& ratio_list) {
  TrainConfig cfg = cli.resolve();
  const NoiseKind kind = noise_kind_from_string(kind_name);

  std::vector<double> ratios;
  std::stringstream ss(ratio_list);
  std::string tok;
  while (std::getline(ss, tok, ',')) ratios.push_back(std::stod(tok));
  if (ratios.empty()) throw ConfigError("noise: empty ratio list");

  PreparedData clean = load_and_prepare(cfg);

  ensure_dir(out_dir);
  std::ofstream summary(out_dir + "/noise_summary.tsv");
  summary << "kind\tratio\ttest_recall\ttest_ndcg\ttest_precision\n";

  for (double ratio : ratios) {
    PreparedData corrupted = clean;
    switch (kind) {
      case NoiseKind::kInteraction:
        corrupted.ds = inject_interaction_noise(clean.ds, ratio, cfg.seed);
        break;
      case NoiseKind::kKgTail:
        if (!corrupted.kg) throw ConfigError("kg_tail noise needs a knowledge graph");
        corrupted.kg = inject_kg_noise(*clean.kg, ratio, cfg.seed);
        break;
      case NoiseKind::kModalityAbsence:
        for (auto& f : corrupted.features) f = inject_feature_absence(f, ratio, cfg.seed);
        break;
    }
    Trainer trainer(cfg, std::move(corrupted));
    RunResult result = trainer.run("");
    const int k0 = result.final_test.k_list[0];
    print_metrics("kind=" + kind_name + " ratio=" + format_metric(ratio), result.final_test);
    summary << kind_name << '\t' << format_metric(ratio) << '\t'
            << format_metric(result.final_test.recall_at(k0)) << '\t'
            << format_metric(result.final_test.ndcg_at(k0)) << '\t'
            << format_metric(result.final_test.precision_at(k0)) << '\n';
    summary.flush();
  }
  std::cout << "summary written to " << out_dir << "/noise_summary.tsv\n";
  return 0;
}

int cmd_synth(const SyntheticSpec& spec, uint64_t seed, const std::string& out_dir) {
  SyntheticData data = gen_synthetic(spec, seed);
  ensure_dir(out_dir);
  save_interactions(out_dir + "/interactions.tsv", data.interactions.train);
  save_kg(out_dir + "/kg.tsv", data.kg);
  save_features_text(out_dir + "/visual.txt", data.visual);
  save_features_text(out_dir + "/textual.txt", data.textual);

  TrainConfig cfg;
  cfg.seed = seed;
  cfg.interactions_path = out_dir + "/interactions.tsv";
  cfg.kg_path = out_dir + "/kg.tsv";
  cfg.visual_features_path = out_dir + "/visual.txt";
  cfg.textual_features_path = out_dir + "/textual.txt";
  save_config_file(out_dir + "/config.txt", cfg);

  std::cout << "users=" << spec.num_users << " items=" << spec.num_items
            << " interactions=" << data.interactions.train.size()
            << " kg_triples=" << data.kg.triples.size()
            << " entities=" << data.kg.num_entities << "\nwrote " << out_dir
            << "/{interactions.tsv,kg.tsv,visual.txt,textual.txt,config.txt}\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"heterogeneous-graph multimodal recommender"};
  app.require_subcommand(1);

  ConfigCli train_cli, sweep_cli, noise_cli;
  std::string train_out, sweep_out, noise_out;
  std::vector<std::string> sweep_grids;
  std::string eval_run, eval_split = "test", eval_klist;
  std::string noise_kind = "interaction", noise_ratios = "0,0.1,0.2";

  auto* train = app.add_subcommand("train", "train a model and write a run directory");
  train_cli.attach(train);
  train->add_option("--out", train_out, "run directory")->required();

  auto* sweep = app.add_subcommand("sweep", "grid search over config keys");
  sweep_cli.attach(sweep);
  sweep->add_option("--out", sweep_out, "sweep output directory")->required();
  sweep->add_option("--grid", sweep_grids, "key=v1,v2,... (repeatable)");

  auto* eval = app.add_subcommand("eval", "evaluate a saved run");
  eval->add_option("--run", eval_run, "run directory")->required();
  eval->add_option("--split", eval_split, "valid or test")
      ->check(CLI::IsMember({"valid", "test"}));
  eval->add_option("--K_list", eval_klist, "comma-separated cutoffs");

  auto* noise = app.add_subcommand("noise", "robustness study under injected noise");
  noise_cli.attach(noise);
  noise->add_option("--out", noise_out, "output directory")->required();
  noise->add_option("--kind", noise_kind, "interaction | kg_tail | modality_absence");
  noise->add_option("--ratios", noise_ratios, "comma-separated corruption ratios");

  SyntheticSpec spec;
  uint64_t synth_seed = 7;
  std::string synth_out;
  auto* synth = app.add_subcommand("synth", "generate a synthetic corpus");
  synth->add_option("--users", spec.num_users);
  synth->add_option("--items", spec.num_items);
  synth->add_option("--clusters", spec.num_clusters);
  synth->add_option("--kg-relations", spec.kg_relations);
  synth->add_option("--feature-dim", spec.feature_dim);
  synth->add_option("--noise", spec.noise);
  synth->add_option("--interactions-per-user", spec.interactions_per_user);
  synth->add_option("--seed", synth_seed);
  synth->add_option("--out", synth_out, "output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) return cmd_train(train_cli, train_out);
    if (sweep->parsed()) return cmd_sweep(sweep_cli, sweep_out, sweep_grids);
    if (eval->parsed()) return cmd_eval(eval_run, eval_split, eval_klist);
    if (noise->parsed()) return cmd_noise(noise_cli, noise_out, noise_kind, noise_ratios);
    if (synth->parsed()) return cmd_synth(spec, synth_seed, synth_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
