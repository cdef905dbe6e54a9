#include "slif/config.hpp"

#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>

#include "slif/errors.hpp"
#include "slif/fusion.hpp"
#include "slif/objectives.hpp"
#include "slif/sge.hpp"

namespace slif {

namespace {

struct Field {
  std::string name;
  std::function<std::string(const TrainConfig&)> get;
  std::function<void(TrainConfig&, const std::string&)> set;
};

int64_t parse_int(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    int64_t out = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': expected integer, got '" + v + "'");
  }
}

double parse_float(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    double out = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': expected number, got '" + v + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("key '" + key + "': expected true/false, got '" + v + "'");
}

std::string format_double(double v) {
  std::ostringstream ss;
  ss << v;
  return ss.str();
}

const std::vector<Field>& fields() {
  auto fi = [](const std::string& name, auto member) {
    return Field{name,
                 [member](const TrainConfig& c) { return std::to_string(c.*member); },
                 [name, member](TrainConfig& c, const std::string& v) {
                   c.*member = static_cast<std::decay_t<decltype(std::declval<TrainConfig>().*
                                                                 member)>>(parse_int(name, v));
                 }};
  };
  auto fd = [](const std::string& name, double TrainConfig::* member) {
    return Field{name, [member](const TrainConfig& c) { return format_double(c.*member); },
                 [name, member](TrainConfig& c, const std::string& v) {
                   c.*member = parse_float(name, v);
                 }};
  };
  auto fb = [](const std::string& name, bool TrainConfig::* member) {
    return Field{name,
                 [member](const TrainConfig& c) { return c.*member ? "true" : "false"; },
                 [name, member](TrainConfig& c, const std::string& v) {
                   c.*member = parse_bool(name, v);
                 }};
  };
  auto fs = [](const std::string& name, std::string TrainConfig::* member) {
    return Field{name, [member](const TrainConfig& c) { return c.*member; },
                 [member](TrainConfig& c, const std::string& v) { c.*member = v; }};
  };

  static const std::vector<Field> table = {
      fi("d", &TrainConfig::d),
      fi("batch_size", &TrainConfig::batch_size),
      fd("lr", &TrainConfig::lr),
      fi("L_b", &TrainConfig::L_b),
      fi("L_m", &TrainConfig::L_m),
      fi("L_k", &TrainConfig::L_k),
      fi("topk_per_modality", &TrainConfig::topk_per_modality),
      fd("prune_ratio", &TrainConfig::prune_ratio),
      fb("graph_binarize", &TrainConfig::graph_binarize),
      fi("sge_interval", &TrainConfig::sge_interval),
      fi("sge_topn", &TrainConfig::sge_topn),
      fs("sge_merge", &TrainConfig::sge_merge),
      fb("sge_enabled", &TrainConfig::sge_enabled),
      fs("fusion_mode", &TrainConfig::fusion_mode),
      fd("tau", &TrainConfig::tau),
      fd("t_uniform", &TrainConfig::t_uniform),
      fd("beta", &TrainConfig::beta),
      fd("gamma", &TrainConfig::gamma),
      fd("eta", &TrainConfig::eta),
      fs("intra_form", &TrainConfig::intra_form),
      fs("intra_f", &TrainConfig::intra_f),
      fb("cl_enabled", &TrainConfig::cl_enabled),
      fb("kg_enabled", &TrainConfig::kg_enabled),
      fb("mm_enabled", &TrainConfig::mm_enabled),
      fb("kg_inverse_edges", &TrainConfig::kg_inverse_edges),
      fb("kg_static_attention", &TrainConfig::kg_static_attention),
      Field{"seed",
            [](const TrainConfig& c) { return std::to_string(c.seed); },
            [](TrainConfig& c, const std::string& v) {
              c.seed = static_cast<uint64_t>(parse_int("seed", v));
            }},
      fi("epochs", &TrainConfig::epochs),
      fi("patience", &TrainConfig::patience),
      fi("eval_interval", &TrainConfig::eval_interval),
      Field{"K_list",
            [](const TrainConfig& c) {
              std::string out;
              for (size_t i = 0; i < c.K_list.size(); ++i)
                out += (i ? "," : "") + std::to_string(c.K_list[i]);
              return out;
            },
            [](TrainConfig& c, const std::string& v) {
              c.K_list.clear();
              std::stringstream ss(v);
              std::string tok;
              while (std::getline(ss, tok, ','))
                c.K_list.push_back(static_cast<int>(parse_int("K_list", tok)));
            }},
      fi("kcore", &TrainConfig::kcore),
      fd("split_train", &TrainConfig::split_train),
      fd("split_valid", &TrainConfig::split_valid),
      fs("interactions_path", &TrainConfig::interactions_path),
      fs("kg_path", &TrainConfig::kg_path),
      fs("visual_features_path", &TrainConfig::visual_features_path),
      fs("textual_features_path", &TrainConfig::textual_features_path),
  };
  return table;
}

}  // namespace

std::vector<std::pair<std::string, std::string>> config_key_values(const TrainConfig& cfg) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const Field& f : fields()) out.emplace_back(f.name, f.get(cfg));
  return out;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const Field& f : fields()) out.push_back(f.name);
  return out;
}

void apply_override(TrainConfig& cfg, const std::string& key, const std::string& value) {
  for (const Field& f : fields())
    if (f.name == key) {
      f.set(cfg, value);
      return;
    }
  throw ConfigError("unknown config key '" + key + "'");
}

TrainConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  TrainConfig cfg;
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string stripped;
    for (char c : line) {
      if (c == '#') break;
      stripped += c;
    }
    while (!stripped.empty() && std::isspace(static_cast<unsigned char>(stripped.back())))
      stripped.pop_back();
    size_t start = 0;
    while (start < stripped.size() && std::isspace(static_cast<unsigned char>(stripped[start])))
      ++start;
    stripped = stripped.substr(start);
    if (stripped.empty()) continue;
    auto eq = stripped.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key=value");
    apply_override(cfg, stripped.substr(0, eq), stripped.substr(eq + 1));
  }
  return cfg;
}

void save_config_file(const std::string& path, const TrainConfig& cfg) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open for writing: " + path);
  for (const auto& [k, v] : config_key_values(cfg)) out << k << '=' << v << '\n';
}

void validate_config(const TrainConfig& cfg) {
  auto fail = [](const std::string& key, const std::string& why) {
    throw ConfigError("config key '" + key + "': " + why);
  };
  if (cfg.d < 1 || cfg.d > 4096) fail("d", "must lie in [1, 4096]");
  if (cfg.batch_size < 1) fail("batch_size", "must be positive");
  if (cfg.lr <= 0) fail("lr", "must be positive");
  for (auto [name, v] : {std::pair<const char*, int>{"L_b", cfg.L_b},
                         {"L_m", cfg.L_m},
                         {"L_k", cfg.L_k}})
    if (v < 1 || v > 16) fail(name, "must lie in [1, 16]");
  if (cfg.topk_per_modality < 1) fail("topk_per_modality", "must be positive");
  if (cfg.prune_ratio < 0.0 || cfg.prune_ratio >= 1.0) fail("prune_ratio", "must lie in [0, 1)");
  if (cfg.sge_interval < 1) fail("sge_interval", "must be >= 1");
  if (cfg.sge_topn < 1) fail("sge_topn", "must be >= 1");
  sge_merge_from_string(cfg.sge_merge);
  fusion_mode_from_string(cfg.fusion_mode);
  if (cfg.tau <= 0) fail("tau", "must be positive");
  if (cfg.t_uniform <= 0) fail("t_uniform", "must be positive");
  if (cfg.beta < 0) fail("beta", "must be non-negative");
  if (cfg.gamma < 0) fail("gamma", "must be non-negative");
  if (cfg.eta < 0) fail("eta", "must be non-negative");
  intra_form_from_string(cfg.intra_form);
  if (cfg.intra_f != "l2norm" && cfg.intra_f != "identity")
    fail("intra_f", "must be l2norm or identity");
  if (cfg.epochs < 1) fail("epochs", "must be >= 1");
  if (cfg.patience < 1) fail("patience", "must be >= 1");
  if (cfg.eval_interval < 1) fail("eval_interval", "must be >= 1");
  if (cfg.K_list.empty()) fail("K_list", "must not be empty");
  for (int k : cfg.K_list)
    if (k < 1) fail("K_list", "entries must be positive");
  if (cfg.kcore < 0) fail("kcore", "must be >= 0");
  if (cfg.split_train <= 0 || cfg.split_valid < 0 ||
      cfg.split_train + cfg.split_valid > 1.0 + 1e-9)
    fail("split_train", "train/valid ratios must be positive and sum to at most 1");
}

void apply_env_seed(TrainConfig& cfg) {
  if (const char* env = std::getenv("SLIF_SEED")) apply_override(cfg, "seed", env);
}

}  // namespace slif
