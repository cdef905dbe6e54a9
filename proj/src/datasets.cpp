#include "slif/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_set>

#include "slif/errors.hpp"
#include "slif/io.hpp"
#include "slif/rng.hpp"

namespace slif {

namespace {

bool is_comment_or_blank(const std::string& line) {
  for (char c : line) {
    if (c == '#') return true;
    if (!std::isspace(static_cast<unsigned char>(c))) return false;
  }
  return true;
}

int32_t parse_id(const std::string& tok, const std::string& file, long line) {
  if (tok.empty()) throw ParseError(file, line, "empty id field");
  int64_t v = 0;
  for (char c : tok) {
    if (c < '0' || c > '9') throw ParseError(file, line, "bad id '" + tok + "'");
    v = v * 10 + (c - '0');
    if (v > INT32_MAX) throw ParseError(file, line, "id too large");
  }
  return static_cast<int32_t>(v);
}

std::vector<std::string> split_on(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

template <typename F>
void shuffle_indices(std::vector<int32_t>& idx, F&& next_below) {
  for (size_t i = idx.size(); i > 1; --i)
    std::swap(idx[i - 1], idx[next_below(static_cast<uint64_t>(i))]);
}

}  // namespace

// ---- loaders ----

InteractionDataset load_interactions(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path, 0, "cannot open file");
  InteractionDataset ds;
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (is_comment_or_blank(line)) continue;
    auto fields = split_on(line, '\t');
    if (fields.size() != 2) throw ParseError(path, lineno, "expected 'user<TAB>item'");
    int32_t u = parse_id(fields[0], path, lineno);
    int32_t i = parse_id(fields[1], path, lineno);
    ds.train.emplace_back(u, i);
    ds.num_users = std::max(ds.num_users, u + 1);
    ds.num_items = std::max(ds.num_items, i + 1);
  }
  return ds;
}

KnowledgeGraph load_kg(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path, 0, "cannot open file");
  KnowledgeGraph kg;
  std::string line;
  long lineno = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (is_comment_or_blank(line)) continue;
    if (!have_header) {
      unsigned long long n = 0, m = 0;
      if (std::sscanf(line.c_str(), "entities=%llu relations=%llu", &n, &m) != 2)
        throw ParseError(path, lineno, "expected header 'entities=<n> relations=<m>'");
      kg.num_entities = static_cast<int32_t>(n);
      kg.num_relations = static_cast<int32_t>(m);
      have_header = true;
      continue;
    }
    auto fields = split_on(line, '\t');
    if (fields.size() != 3) throw ParseError(path, lineno, "expected 'head<TAB>rel<TAB>tail'");
    Triple t{parse_id(fields[0], path, lineno), parse_id(fields[1], path, lineno),
             parse_id(fields[2], path, lineno)};
    if (t.head >= kg.num_entities || t.tail >= kg.num_entities)
      throw ValidationError(path + ":" + std::to_string(lineno) + ": entity id out of range (" +
                            std::to_string(kg.num_entities) + " declared)");
    if (t.relation >= kg.num_relations)
      throw ValidationError(path + ":" + std::to_string(lineno) + ": relation id out of range (" +
                            std::to_string(kg.num_relations) + " declared)");
    kg.triples.push_back(t);
  }
  if (!have_header) throw ParseError(path, lineno, "missing header");
  kg.validate();
  return kg;
}

ModalityFeatures load_features(const std::string& path, Modality modality) {
  ModalityFeatures feats;
  feats.modality = modality;

  std::ifstream bin(path, std::ios::binary);
  if (!bin) throw ParseError(path, 0, "cannot open file");
  char magic[4] = {0, 0, 0, 0};
  bin.read(magic, 4);
  if (bin.gcount() == 4 && std::memcmp(magic, "SLIF", 4) == 0) {
    bin.close();
    feats.matrix = read_tensor_slif(path);
  } else {
    bin.close();
    std::ifstream in(path);
    std::string line;
    long lineno = 0;
    int64_t rows = -1, cols = -1, row = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (is_comment_or_blank(line)) continue;
      std::istringstream ss(line);
      if (rows < 0) {
        if (!(ss >> rows >> cols) || rows < 0 || cols <= 0)
          throw ParseError(path, lineno, "expected header 'num_items dim'");
        feats.matrix = Tensor({rows, cols});
        continue;
      }
      if (row >= rows) throw ParseError(path, lineno, "more rows than declared");
      for (int64_t c = 0; c < cols; ++c) {
        double v;
        if (!(ss >> v)) throw ParseError(path, lineno, "expected " + std::to_string(cols) +
                                                           " floats in feature row");
        feats.matrix.at(row, c) = static_cast<float>(v);
      }
      double extra;
      if (ss >> extra) throw ParseError(path, lineno, "too many values in feature row");
      ++row;
    }
    if (rows < 0) throw ParseError(path, lineno, "missing header");
    if (row != rows)
      throw ValidationError(path + ": declared " + std::to_string(rows) + " rows, found " +
                            std::to_string(row));
  }

  feats.present.assign(static_cast<size_t>(feats.matrix.rows()), 0);
  for (int64_t r = 0; r < feats.matrix.rows(); ++r)
    for (int64_t c = 0; c < feats.matrix.cols(); ++c)
      if (feats.matrix.at(r, c) != 0.0f) {
        feats.present[static_cast<size_t>(r)] = 1;
        break;
      }
  return feats;
}

void save_interactions(const std::string& path, const std::vector<Interaction>& pairs) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot open for writing: " + path);
  for (const auto& [u, i] : pairs) out << u << '\t' << i << '\n';
}

void save_kg(const std::string& path, const KnowledgeGraph& kg) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot open for writing: " + path);
  out << "entities=" << kg.num_entities << " relations=" << kg.num_relations << '\n';
  for (const Triple& t : kg.triples) out << t.head << '\t' << t.relation << '\t' << t.tail << '\n';
}

void save_features_text(const std::string& path, const ModalityFeatures& feats) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot open for writing: " + path);
  out << feats.matrix.rows() << ' ' << feats.matrix.cols() << '\n';
  for (int64_t r = 0; r < feats.matrix.rows(); ++r) {
    for (int64_t c = 0; c < feats.matrix.cols(); ++c) {
      if (c) out << ' ';
      char buf[48];
      std::snprintf(buf, sizeof(buf), "%.8g", static_cast<double>(feats.matrix.at(r, c)));
      out << buf;
    }
    out << '\n';
  }
}

// ---- KnowledgeGraph helpers ----

std::vector<std::vector<int32_t>> KnowledgeGraph::head_index() const {
  std::vector<std::vector<int32_t>> index(static_cast<size_t>(num_entities));
  for (size_t i = 0; i < triples.size(); ++i)
    index[static_cast<size_t>(triples[i].head)].push_back(static_cast<int32_t>(i));
  return index;
}

void KnowledgeGraph::validate() const {
  if (num_items > num_entities)
    throw ValidationError("knowledge graph: item count exceeds entity count");
  for (const Triple& t : triples) {
    if (t.head < 0 || t.head >= num_entities || t.tail < 0 || t.tail >= num_entities)
      throw ValidationError("knowledge graph: entity id out of range");
    if (t.relation < 0 || t.relation >= num_relations)
      throw ValidationError("knowledge graph: relation id out of range");
  }
  std::vector<Triple> sorted = triples;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw ValidationError("knowledge graph: duplicate triple");
}

// ---- k-core ----

KcoreResult kcore_filter_mapped(const InteractionDataset& ds, int k) {
  if (k < 1) throw ConfigError("k-core: k must be >= 1");
  std::vector<uint8_t> user_alive(static_cast<size_t>(ds.num_users), 1);
  std::vector<uint8_t> item_alive(static_cast<size_t>(ds.num_items), 1);

  bool changed = true;
  while (changed) {
    changed = false;
    std::vector<int32_t> udeg(static_cast<size_t>(ds.num_users), 0);
    std::vector<int32_t> ideg(static_cast<size_t>(ds.num_items), 0);
    for (const auto& [u, i] : ds.train)
      if (user_alive[u] && item_alive[i]) {
        udeg[u]++;
        ideg[i]++;
      }
    for (int32_t u = 0; u < ds.num_users; ++u)
      if (user_alive[u] && udeg[u] < k) {
        user_alive[u] = 0;
        changed = true;
      }
    for (int32_t i = 0; i < ds.num_items; ++i)
      if (item_alive[i] && ideg[i] < k) {
        item_alive[i] = 0;
        changed = true;
      }
  }

  KcoreResult res;
  res.user_map.assign(static_cast<size_t>(ds.num_users), -1);
  res.item_map.assign(static_cast<size_t>(ds.num_items), -1);
  int32_t nu = 0, ni = 0;
  for (int32_t u = 0; u < ds.num_users; ++u)
    if (user_alive[u]) res.user_map[u] = nu++;
  for (int32_t i = 0; i < ds.num_items; ++i)
    if (item_alive[i]) res.item_map[i] = ni++;
  if (nu == 0 || ni == 0) throw ValidationError("k-core filtering removed the entire dataset");

  res.dataset.num_users = nu;
  res.dataset.num_items = ni;
  auto remap = [&](const std::vector<Interaction>& src, std::vector<Interaction>& dst) {
    for (const auto& [u, i] : src)
      if (res.user_map[u] >= 0 && res.item_map[i] >= 0)
        dst.emplace_back(res.user_map[u], res.item_map[i]);
  };
  remap(ds.train, res.dataset.train);
  remap(ds.valid, res.dataset.valid);
  remap(ds.test, res.dataset.test);
  return res;
}

InteractionDataset kcore_filter(const InteractionDataset& ds, int k) {
  return kcore_filter_mapped(ds, k).dataset;
}

KnowledgeGraph align_kg(const KnowledgeGraph& kg, const std::vector<int32_t>& item_map,
                        int32_t new_num_items) {
  // Entity remap: surviving items keep the id prefix; every other entity
  // (including removed items) is re-indexed after them.
  std::vector<int32_t> entity_map(static_cast<size_t>(kg.num_entities), -1);
  int32_t next = new_num_items;
  for (int32_t e = 0; e < kg.num_entities; ++e) {
    bool was_item = e < static_cast<int32_t>(item_map.size());
    if (was_item && item_map[e] >= 0)
      entity_map[e] = item_map[e];
    else
      entity_map[e] = next++;
  }

  KnowledgeGraph out;
  out.num_entities = next;
  out.num_relations = kg.num_relations;
  out.num_items = new_num_items;
  for (const Triple& t : kg.triples) {
    bool head_is_removed_item =
        t.head < static_cast<int32_t>(item_map.size()) && item_map[t.head] < 0;
    if (head_is_removed_item) continue;
    out.triples.push_back({entity_map[t.head], t.relation, entity_map[t.tail]});
  }
  return out;
}

ModalityFeatures align_features(const ModalityFeatures& feats,
                                const std::vector<int32_t>& item_map, int32_t new_num_items) {
  ModalityFeatures out;
  out.modality = feats.modality;
  out.matrix = Tensor({new_num_items, feats.dim()});
  out.present.assign(static_cast<size_t>(new_num_items), 0);
  for (size_t old_id = 0; old_id < item_map.size(); ++old_id) {
    int32_t ni = item_map[old_id];
    if (ni < 0) continue;
    for (int64_t c = 0; c < feats.dim(); ++c)
      out.matrix.at(ni, c) = feats.matrix.at(static_cast<int64_t>(old_id), c);
    out.present[static_cast<size_t>(ni)] = feats.present[old_id];
  }
  return out;
}

// ---- splitting ----

InteractionDataset split_dataset(const InteractionDataset& ds, double train_ratio,
                                 double valid_ratio, double test_ratio, uint64_t seed) {
  if (std::abs(train_ratio + valid_ratio + test_ratio - 1.0) > 1e-6)
    throw ConfigError("split ratios must sum to 1");
  if (train_ratio < 0 || valid_ratio < 0 || test_ratio < 0)
    throw ConfigError("split ratios must be non-negative");
  if (!ds.valid.empty() || !ds.test.empty())
    throw ConfigError("split_dataset expects an unsplit dataset");

  std::vector<std::vector<int32_t>> by_user(static_cast<size_t>(ds.num_users));
  for (const auto& [u, i] : ds.train) by_user[u].push_back(i);

  InteractionDataset out;
  out.num_users = ds.num_users;
  out.num_items = ds.num_items;
  for (int32_t u = 0; u < ds.num_users; ++u) {
    auto& items = by_user[u];
    Rng rng(derive_seed(seed, "split", static_cast<uint64_t>(u)));
    shuffle_indices(items, [&](uint64_t bound) { return rng.next_below(bound); });

    const int64_t n = static_cast<int64_t>(items.size());
    int64_t nv = 0, nt = 0;
    if (n >= 3) {
      // the 1e-9 absorbs representation error in ratios like 1 - 0.8 - 0.1
      nv = static_cast<int64_t>(std::floor(static_cast<double>(n) * valid_ratio + 1e-9));
      nt = static_cast<int64_t>(std::floor(static_cast<double>(n) * test_ratio + 1e-9));
      while (n - nv - nt < 1) {  // every user keeps at least one train item
        if (nv >= nt && nv > 0)
          --nv;
        else
          --nt;
      }
    }
    const int64_t ntr = n - nv - nt;
    for (int64_t j = 0; j < n; ++j) {
      if (j < ntr)
        out.train.emplace_back(u, items[j]);
      else if (j < ntr + nv)
        out.valid.emplace_back(u, items[j]);
      else
        out.test.emplace_back(u, items[j]);
    }
  }
  return out;
}

// ---- noise ----

NoiseKind noise_kind_from_string(const std::string& s) {
  if (s == "interaction") return NoiseKind::kInteraction;
  if (s == "kg_tail") return NoiseKind::kKgTail;
  if (s == "modality_absence") return NoiseKind::kModalityAbsence;
  throw ConfigError("unknown noise kind '" + s + "'");
}

const char* noise_kind_name(NoiseKind k) {
  switch (k) {
    case NoiseKind::kInteraction:
      return "interaction";
    case NoiseKind::kKgTail:
      return "kg_tail";
    default:
      return "modality_absence";
  }
}

namespace {
void check_ratio(double ratio) {
  if (ratio < 0.0 || ratio > 0.5) throw ConfigError("noise ratio must lie in [0, 0.5]");
}
}  // namespace

InteractionDataset inject_interaction_noise(const InteractionDataset& ds, double ratio,
                                            uint64_t seed) {
  check_ratio(ratio);
  InteractionDataset out = ds;
  if (ratio == 0.0) return out;

  std::vector<std::unordered_set<int32_t>> taken(static_cast<size_t>(ds.num_users));
  for (const auto& [u, i] : ds.train) taken[u].insert(i);
  for (const auto& [u, i] : ds.valid) taken[u].insert(i);
  for (const auto& [u, i] : ds.test) taken[u].insert(i);

  Rng rng(derive_seed(seed, "noise-interaction"));
  auto corrupt = [&](std::vector<Interaction>& split, const char* tag) {
    const int64_t count =
        static_cast<int64_t>(std::floor(ratio * static_cast<double>(split.size())));
    std::vector<int32_t> idx(split.size());
    std::iota(idx.begin(), idx.end(), 0);
    shuffle_indices(idx, [&](uint64_t bound) { return rng.next_below(bound); });
    for (int64_t c = 0; c < count; ++c) {
      auto& [u, i] = split[static_cast<size_t>(idx[static_cast<size_t>(c)])];
      int attempts = 0;
      for (;;) {
        int32_t j = static_cast<int32_t>(rng.next_below(static_cast<uint64_t>(ds.num_items)));
        if (!taken[u].count(j)) {
          taken[u].insert(j);
          i = j;
          break;
        }
        if (++attempts > 100000)
          throw ValidationError(std::string("interaction noise: no free item for user ") +
                                std::to_string(u) + " in " + tag + " split");
      }
    }
  };
  corrupt(out.train, "train");
  corrupt(out.valid, "valid");
  return out;
}

KnowledgeGraph inject_kg_noise(const KnowledgeGraph& kg, double ratio, uint64_t seed) {
  check_ratio(ratio);
  KnowledgeGraph out = kg;
  if (ratio == 0.0) return out;
  if (kg.num_entities < 2) throw ValidationError("kg noise: need at least 2 entities");

  std::set<Triple> existing(out.triples.begin(), out.triples.end());
  Rng rng(derive_seed(seed, "noise-kg"));
  const int64_t count =
      static_cast<int64_t>(std::floor(ratio * static_cast<double>(out.triples.size())));
  std::vector<int32_t> idx(out.triples.size());
  std::iota(idx.begin(), idx.end(), 0);
  shuffle_indices(idx, [&](uint64_t bound) { return rng.next_below(bound); });
  for (int64_t c = 0; c < count; ++c) {
    Triple& t = out.triples[static_cast<size_t>(idx[static_cast<size_t>(c)])];
    existing.erase(t);
    int attempts = 0;
    for (;;) {
      int32_t nt = static_cast<int32_t>(rng.next_below(static_cast<uint64_t>(kg.num_entities)));
      Triple cand{t.head, t.relation, nt};
      if (nt != t.tail && !existing.count(cand)) {
        t = cand;
        existing.insert(cand);
        break;
      }
      if (++attempts > 100000) throw ValidationError("kg noise: cannot find replacement tail");
    }
  }
  return out;
}

ModalityFeatures inject_feature_absence(const ModalityFeatures& feats, double ratio,
                                        uint64_t seed) {
  check_ratio(ratio);
  ModalityFeatures out = feats;
  if (ratio == 0.0) return out;

  std::vector<int32_t> present_rows;
  for (size_t r = 0; r < out.present.size(); ++r)
    if (out.present[r]) present_rows.push_back(static_cast<int32_t>(r));
  Rng rng(derive_seed(seed, feats.modality == Modality::kVisual ? "noise-feat-v"
                                                                : "noise-feat-t"));
  shuffle_indices(present_rows, [&](uint64_t bound) { return rng.next_below(bound); });
  const int64_t count =
      static_cast<int64_t>(std::floor(ratio * static_cast<double>(present_rows.size())));
  for (int64_t c = 0; c < count; ++c) {
    int32_t r = present_rows[static_cast<size_t>(c)];
    for (int64_t col = 0; col < out.matrix.cols(); ++col) out.matrix.at(r, col) = 0.0f;
    out.present[static_cast<size_t>(r)] = 0;
  }
  return out;
}

// ---- synthetic corpus ----

SyntheticData gen_synthetic(const SyntheticSpec& spec, uint64_t seed) {
  if (spec.num_clusters < 2) throw ConfigError("synthetic: need at least 2 clusters");
  if (spec.num_items < spec.num_clusters)
    throw ConfigError("synthetic: fewer items than clusters");
  if (spec.num_users < 1 || spec.feature_dim < 1 || spec.kg_relations < 1)
    throw ConfigError("synthetic: users, feature_dim and kg_relations must be positive");
  if (spec.noise < 0.0 || spec.noise >= 1.0) throw ConfigError("synthetic: noise must be in [0,1)");
  if (spec.interactions_per_user < 1 || spec.interactions_per_user > spec.num_items)
    throw ConfigError("synthetic: interactions_per_user must be in [1, num_items]");

  const int32_t c_count = spec.num_clusters;
  SyntheticData data;
  data.user_cluster.resize(static_cast<size_t>(spec.num_users));
  data.item_cluster.resize(static_cast<size_t>(spec.num_items));
  for (int32_t u = 0; u < spec.num_users; ++u) data.user_cluster[u] = u % c_count;
  for (int32_t i = 0; i < spec.num_items; ++i) data.item_cluster[i] = i % c_count;

  std::vector<std::vector<int32_t>> cluster_items(static_cast<size_t>(c_count));
  for (int32_t i = 0; i < spec.num_items; ++i) cluster_items[data.item_cluster[i]].push_back(i);

  // Besides its cluster, every user and item carries two independent latent
  // taste coordinates in [0, 1). Interactions concentrate on items close to
  // the user in BOTH coordinates; the modality features expose the first
  // coordinate and the KG attribute buckets the second, so each auxiliary
  // source carries complementary ranking signal that raw co-occurrence
  // reveals only faintly.
  std::vector<double> item_pos(static_cast<size_t>(spec.num_items));
  std::vector<double> item_pos2(static_cast<size_t>(spec.num_items));
  std::vector<double> user_pos(static_cast<size_t>(spec.num_users));
  std::vector<double> user_pos2(static_cast<size_t>(spec.num_users));
  {
    Rng rng(derive_seed(seed, "synth-pos"));
    for (auto& p : item_pos) p = rng.next_unit();
    for (auto& p : item_pos2) p = rng.next_unit();
    for (auto& p : user_pos) p = rng.next_unit();
    for (auto& p : user_pos2) p = rng.next_unit();
  }
  constexpr double kTasteWidth = 0.06;

  // interactions; user activity is heavy-tailed (alternating light/heavy
  // users around the configured mean) so part of the population has too few
  // observations for co-occurrence alone
  data.interactions.num_users = spec.num_users;
  data.interactions.num_items = spec.num_items;
  const int32_t light_count = std::max<int32_t>(1, spec.interactions_per_user / 2);
  const int32_t heavy_count =
      std::min<int32_t>(spec.num_items, 2 * spec.interactions_per_user - light_count);
  std::vector<double> cdf;
  for (int32_t u = 0; u < spec.num_users; ++u) {
    Rng rng(derive_seed(seed, "synth-inter", static_cast<uint64_t>(u)));
    std::unordered_set<int32_t> used;
    const int32_t uc = data.user_cluster[u];
    const auto& mine = cluster_items[uc];
    const int32_t budget = (u + 1 == spec.num_users && spec.num_users % 2 == 1)
                               ? spec.interactions_per_user
                               : (u % 2 == 0 ? light_count : heavy_count);

    cdf.clear();
    double acc = 0.0;
    for (int32_t item : mine) {
      acc += std::exp(-(std::abs(user_pos[u] - item_pos[item]) +
                        std::abs(user_pos2[u] - item_pos2[item])) /
                      kTasteWidth);
      cdf.push_back(acc);
    }
    auto sample_intra = [&] {
      double x = rng.next_unit() * cdf.back();
      size_t lo = static_cast<size_t>(std::lower_bound(cdf.begin(), cdf.end(), x) - cdf.begin());
      return mine[std::min(lo, mine.size() - 1)];
    };

    for (int32_t t = 0; t < budget; ++t) {
      // The intra/cross decision is fixed per slot; rejection re-draws stay
      // inside the chosen mode so collisions cannot skew the mix.
      const bool cross = rng.next_unit() < spec.noise;
      int32_t item = -1;
      for (int attempts = 0; attempts < 1000; ++attempts) {
        int32_t cand = cross ? static_cast<int32_t>(
                                   rng.next_below(static_cast<uint64_t>(spec.num_items)))
                             : sample_intra();
        if (!used.count(cand)) {
          item = cand;
          break;
        }
      }
      if (item < 0) {  // fall back to the first unused id; keeps counts exact
        for (int32_t cand = 0; cand < spec.num_items; ++cand)
          if (!used.count(cand)) {
            item = cand;
            break;
          }
      }
      used.insert(item);
      data.interactions.train.emplace_back(u, item);
    }
  }

  // knowledge graph: attribute entities shared by same-cluster items, one
  // per (relation, cluster, taste bucket)
  // Each relation buckets the second taste coordinate on its own grid; the
  // grids are offset half a step from each other so bucket boundaries of one
  // relation fall inside buckets of the next.
  constexpr int32_t kTasteBuckets = 10;
  data.kg.num_items = spec.num_items;
  data.kg.num_relations = spec.kg_relations;
  data.kg.num_entities =
      spec.num_items + spec.kg_relations * c_count * (kTasteBuckets + 1);
  Rng kg_rng(derive_seed(seed, "synth-kg"));
  auto attr_entity = [&](int32_t relation, int32_t cluster, int32_t bucket) {
    return spec.num_items + (relation * c_count + cluster) * (kTasteBuckets + 1) + bucket;
  };
  for (int32_t i = 0; i < spec.num_items; ++i)
    for (int32_t r = 0; r < spec.kg_relations; ++r) {
      int32_t c = data.item_cluster[i];
      const double offset = static_cast<double>(r) / spec.kg_relations;
      auto b = static_cast<int32_t>(item_pos2[i] * kTasteBuckets + offset);
      b = std::min(b, kTasteBuckets);
      if (kg_rng.next_unit() < 0.5 * spec.noise) {
        c = static_cast<int32_t>(kg_rng.next_below(static_cast<uint64_t>(c_count)));
        b = static_cast<int32_t>(kg_rng.next_below(kTasteBuckets + 1));
      }
      data.kg.triples.push_back({i, r, attr_entity(r, c, b)});
    }

  // modality features: unit-norm cluster centroid plus a within-cluster
  // component of scale `noise` spanning both taste coordinates with a little
  // white jitter; at noise = 0 the rows collapse onto the centroids exactly
  auto make_features = [&](Modality m, const char* stream) {
    ModalityFeatures feats;
    feats.modality = m;
    feats.matrix = Tensor({spec.num_items, spec.feature_dim});
    feats.present.assign(static_cast<size_t>(spec.num_items), 1);
    Rng rng(derive_seed(seed, stream));
    std::vector<std::vector<double>> centroids(static_cast<size_t>(c_count));
    std::vector<std::vector<double>> taste_axis(static_cast<size_t>(c_count));
    std::vector<std::vector<double>> taste_axis2(static_cast<size_t>(c_count));
    for (int32_t c = 0; c < c_count; ++c) {
      for (auto* vec : {&centroids[c], &taste_axis[c], &taste_axis2[c]}) {
        vec->resize(static_cast<size_t>(spec.feature_dim));
        double norm = 0.0;
        for (auto& v : *vec) {
          v = rng.next_gauss();
          norm += v * v;
        }
        norm = std::sqrt(std::max(norm, 1e-12));
        for (auto& v : *vec) v /= norm;
      }
    }
    for (int32_t i = 0; i < spec.num_items; ++i) {
      const int32_t c = data.item_cluster[i];
      const double taste = 2.0 * (item_pos[i] - 0.5);
      const double taste2 = 2.0 * (item_pos2[i] - 0.5);
      for (int64_t d = 0; d < spec.feature_dim; ++d)
        feats.matrix.at(i, d) = static_cast<float>(
            centroids[c][static_cast<size_t>(d)] +
            spec.noise * (1.8 * taste * taste_axis[c][static_cast<size_t>(d)] +
                          1.8 * taste2 * taste_axis2[c][static_cast<size_t>(d)] +
                          0.4 * rng.next_gauss()));
    }
    return feats;
  };
  data.visual = make_features(Modality::kVisual, "synth-feat-v");
  data.textual = make_features(Modality::kTextual, "synth-feat-t");

  return data;
}

}  // namespace slif
