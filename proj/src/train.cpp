#include "slif/train.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "slif/errors.hpp"
#include "slif/graph_build.hpp"
#include "slif/io.hpp"
#include "slif/objectives.hpp"
#include "slif/rng.hpp"

namespace slif {

namespace {

std::vector<std::vector<int32_t>> per_user_sorted(const std::vector<Interaction>& pairs,
                                                  int32_t num_users) {
  std::vector<std::vector<int32_t>> sets(static_cast<size_t>(num_users));
  for (const auto& [u, i] : pairs) sets[static_cast<size_t>(u)].push_back(i);
  for (auto& s : sets) std::sort(s.begin(), s.end());
  return sets;
}

bool contains(const std::vector<int32_t>& sorted, int32_t v) {
  return std::binary_search(sorted.begin(), sorted.end(), v);
}

std::vector<int32_t> sorted_unique(std::vector<int32_t> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

SparseGraph build_modality_graph(const ModalityFeatures& feats, const TrainConfig& cfg) {
  SparseGraph g = knn_topk_graph(feats.matrix, cfg.topk_per_modality);
  g = clamp_nonnegative(g);
  if (cfg.graph_binarize)
    for (float& w : g.weights()) w = 1.0f;
  return laplacian_normalize(g);
}

}  // namespace

uint64_t checksum_interactions(const InteractionDataset& ds) {
  std::vector<int32_t> buf = {ds.num_users, ds.num_items};
  for (const auto* split : {&ds.train, &ds.valid, &ds.test}) {
    buf.push_back(static_cast<int32_t>(split->size()));
    for (const auto& [u, i] : *split) {
      buf.push_back(u);
      buf.push_back(i);
    }
  }
  return fnv1a64(buf.data(), buf.size() * sizeof(int32_t));
}

uint64_t checksum_kg(const KnowledgeGraph& kg) {
  std::vector<int32_t> buf = {kg.num_entities, kg.num_relations, kg.num_items};
  for (const Triple& t : kg.triples) {
    buf.push_back(t.head);
    buf.push_back(t.relation);
    buf.push_back(t.tail);
  }
  return fnv1a64(buf.data(), buf.size() * sizeof(int32_t));
}

uint64_t checksum_features(const ModalityFeatures& feats) {
  uint64_t h = fnv1a64(feats.matrix.ptr(), static_cast<size_t>(feats.matrix.numel()) * 4);
  return h ^ fnv1a64(feats.present.data(), feats.present.size());
}

PreparedData prepare_from_parts(const TrainConfig& cfg, InteractionDataset unsplit,
                                std::optional<KnowledgeGraph> kg,
                                std::vector<ModalityFeatures> features) {
  PreparedData out;

  if (cfg.kcore >= 1) {
    KcoreResult res = kcore_filter_mapped(unsplit, cfg.kcore);
    if (kg) *kg = align_kg(*kg, res.item_map, res.dataset.num_items);
    for (auto& f : features) f = align_features(f, res.item_map, res.dataset.num_items);
    unsplit = std::move(res.dataset);
  }

  const double test_ratio = 1.0 - cfg.split_train - cfg.split_valid;
  out.ds = split_dataset(unsplit, cfg.split_train, cfg.split_valid, test_ratio, cfg.seed);

  if (kg) {
    kg->num_items = out.ds.num_items;
    kg->validate();
    if (kg->num_entities < out.ds.num_items)
      throw ValidationError("knowledge graph declares fewer entities than there are items");
    out.kg_checksum = checksum_kg(*kg);
    out.kg = std::move(kg);
  }
  for (auto& f : features) {
    if (f.num_items() != out.ds.num_items)
      throw ValidationError(std::string("feature matrix rows for modality ") +
                            modality_name(f.modality) + " do not match the item count");
    out.feature_checksums.push_back(checksum_features(f));
  }
  out.features = std::move(features);
  out.interactions_checksum = checksum_interactions(out.ds);
  return out;
}

PreparedData load_and_prepare(const TrainConfig& cfg) {
  if (cfg.interactions_path.empty())
    throw ConfigError("interactions_path: no dataset path configured");
  InteractionDataset ds = load_interactions(cfg.interactions_path);

  std::optional<KnowledgeGraph> kg;
  if (cfg.kg_enabled) {
    if (cfg.kg_path.empty())
      throw ConfigError("kg_path: knowledge graph enabled but no path configured");
    kg = load_kg(cfg.kg_path);
  }
  std::vector<ModalityFeatures> features;
  if (cfg.mm_enabled) {
    if (cfg.visual_features_path.empty() && cfg.textual_features_path.empty())
      throw ConfigError("visual_features_path: modality features enabled but no path configured");
    if (!cfg.visual_features_path.empty())
      features.push_back(load_features(cfg.visual_features_path, Modality::kVisual));
    if (!cfg.textual_features_path.empty())
      features.push_back(load_features(cfg.textual_features_path, Modality::kTextual));
  }
  return prepare_from_parts(cfg, std::move(ds), std::move(kg), std::move(features));
}

PreparedData prepare_synthetic(const TrainConfig& cfg, const SyntheticSpec& spec) {
  SyntheticData data = gen_synthetic(spec, cfg.seed);
  std::vector<ModalityFeatures> features;
  if (cfg.mm_enabled) {
    features.push_back(std::move(data.visual));
    features.push_back(std::move(data.textual));
  }
  std::optional<KnowledgeGraph> kg;
  if (cfg.kg_enabled) kg = std::move(data.kg);
  return prepare_from_parts(cfg, std::move(data.interactions), std::move(kg),
                            std::move(features));
}

std::vector<int32_t> sample_negatives(const std::vector<std::vector<int32_t>>& user_train_sorted,
                                      int32_t num_items, const std::vector<Interaction>& batch,
                                      Rng& rng) {
  std::vector<int32_t> negatives;
  negatives.reserve(batch.size());
  for (const auto& [u, pos] : batch) {
    const auto& seen = user_train_sorted[static_cast<size_t>(u)];
    if (static_cast<int32_t>(seen.size()) >= num_items)
      throw ValidationError("user " + std::to_string(u) +
                            " interacts with every item; no negatives exist");
    for (;;) {
      int32_t j = static_cast<int32_t>(rng.next_below(static_cast<uint64_t>(num_items)));
      if (!contains(seen, j)) {
        negatives.push_back(j);
        break;
      }
    }
  }
  return negatives;
}

Trainer::Trainer(TrainConfig cfg, PreparedData data)
    : cfg_(std::move(cfg)), data_(std::move(data)), adam_(cfg_.lr) {
  validate_config(cfg_);

  inputs_.num_users = data_.ds.num_users;
  inputs_.num_items = data_.ds.num_items;
  inputs_.base_adjacency = build_interaction_adjacency(data_.ds);

  if (cfg_.mm_enabled)
    for (const ModalityFeatures& f : data_.features)
      inputs_.feature_graphs.push_back(build_modality_graph(f, cfg_));

  if (cfg_.kg_enabled && data_.kg) {
    inputs_.kg_triples = data_.kg->triples;
    inputs_.kg_base_relations = data_.kg->num_relations;
    inputs_.kg_inverse_edges = cfg_.kg_inverse_edges;
    inputs_.num_entities = data_.kg->num_entities;
    if (cfg_.sge_enabled)
      inputs_.injected_relation =
          inputs_.kg_base_relations * (cfg_.kg_inverse_edges ? 2 : 1);
  } else {
    inputs_.num_entities = static_cast<int32_t>(data_.ds.num_items);
  }

  active_branches_ = {true, inputs_.has_features(), inputs_.has_kg()};
  const int active_count =
      1 + (active_branches_[1] ? 1 : 0) + (active_branches_[2] ? 1 : 0);

  settings_.layers_interaction = cfg_.L_b;
  settings_.layers_feature = cfg_.L_m;
  settings_.layers_kg = cfg_.L_k;
  settings_.kg_static_attention = cfg_.kg_static_attention;
  settings_.fusion_mode = fusion_mode_from_string(cfg_.fusion_mode);
  settings_.dim = cfg_.d;

  ParamShapes shapes;
  shapes.num_users = data_.ds.num_users;
  shapes.num_entities = inputs_.num_entities;
  shapes.num_relations = inputs_.total_relations();
  shapes.num_modalities = std::max<int64_t>(1, static_cast<int64_t>(inputs_.feature_graphs.size()));
  shapes.dim = cfg_.d;
  shapes.concat_proj_in =
      settings_.fusion_mode == FusionMode::kConcat ? active_count * cfg_.d : 0;
  params_ = init_params(shapes, cfg_.seed);
  adam_.attach(params_);

  sge_.interval = cfg_.sge_interval;
  sge_.top_n = cfg_.sge_topn;
  sge_.merge = sge_merge_from_string(cfg_.sge_merge);
  sge_.enabled = cfg_.sge_enabled;

  train_sets_ = per_user_sorted(data_.ds.train, data_.ds.num_users);
  valid_sets_ = per_user_sorted(data_.ds.valid, data_.ds.num_users);
  test_sets_ = per_user_sorted(data_.ds.test, data_.ds.num_users);
}

std::vector<float> Trainer::modality_alpha_values() const {
  const Tensor& logits = params_.modality_logits;
  std::vector<float> alpha(static_cast<size_t>(logits.numel()));
  double mx = -1e300;
  for (int64_t i = 0; i < logits.numel(); ++i) mx = std::max(mx, static_cast<double>(logits[i]));
  double total = 0.0;
  for (int64_t i = 0; i < logits.numel(); ++i) total += std::exp(logits[i] - mx);
  for (int64_t i = 0; i < logits.numel(); ++i)
    alpha[static_cast<size_t>(i)] = static_cast<float>(std::exp(logits[i] - mx) / total);
  return alpha;
}

WorkGraphs Trainer::build_graphs(bool training, uint64_t epoch_seed) {
  return build_work_graphs(inputs_, &sge_, modality_alpha_values(), cfg_.prune_ratio, training,
                           epoch_seed);
}

Trainer::BatchTerms Trainer::train_batch(const WorkGraphs& work,
                                         const std::vector<Interaction>& batch, Rng& neg_rng) {
  BatchTerms terms;
  std::vector<int32_t> users, pos;
  users.reserve(batch.size());
  pos.reserve(batch.size());
  for (const auto& [u, i] : batch) {
    users.push_back(u);
    pos.push_back(i);
  }
  std::vector<int32_t> neg =
      sample_negatives(train_sets_, data_.ds.num_items, batch, neg_rng);

  Tape tp;
  auto pids = put_params_on_tape(tp, params_);
  auto fwd = model_forward(tp, work, pids, settings_);

  auto user_rows = tp.gather_rows(fwd.user_final, users);
  auto pos_rows = tp.gather_rows(fwd.unified, pos);
  auto neg_rows = tp.gather_rows(fwd.unified, neg);
  auto bpr = bpr_loss(tp, tp.row_dot(user_rows, pos_rows), tp.row_dot(user_rows, neg_rows));
  terms.bpr = tp.scalar(bpr);

  Tape::Id inter = -1, intra = -1;
  const std::vector<int32_t> batch_items = sorted_unique(pos);
  if (cfg_.cl_enabled && batch_items.size() >= 2) {
    auto unified_batch = tp.gather_rows(fwd.unified, batch_items);
    const bool normalize_f = cfg_.intra_f == "l2norm";
    const IntraForm form = intra_form_from_string(cfg_.intra_form);
    std::array<Tape::Id, 3> branch = {fwd.item_interaction, fwd.item_feature, fwd.item_kg};
    for (int b = 0; b < 3; ++b) {
      if (!fwd.active[static_cast<size_t>(b)]) continue;
      auto anchors = tp.gather_rows(branch[static_cast<size_t>(b)], batch_items);
      auto one_inter = inter_modal_term(tp, anchors, unified_batch, cfg_.tau);
      inter = inter < 0 ? one_inter : tp.add(inter, one_inter);
      auto one_intra = intra_modal_term(tp, anchors, cfg_.t_uniform, form, normalize_f);
      intra = intra < 0 ? one_intra : tp.add(intra, one_intra);
    }
    terms.inter = tp.scalar(inter);
    terms.intra = tp.scalar(intra);
  }

  // eta ||Theta||^2 over the embeddings the batch touches plus every shared
  // parameter in play
  auto reg = tp.add(tp.sumsq(tp.gather_rows(pids.user_emb, sorted_unique(users))), [&] {
    std::vector<int32_t> item_rows = pos;
    item_rows.insert(item_rows.end(), neg.begin(), neg.end());
    return tp.sumsq(tp.gather_rows(pids.entity_emb, sorted_unique(std::move(item_rows))));
  }());
  if (settings_.fusion_mode == FusionMode::kAilf ||
      settings_.fusion_mode == FusionMode::kAttention)
    reg = tp.add(reg, tp.add(tp.sumsq(pids.fusion_w), tp.sumsq(pids.fusion_b)));
  if (settings_.fusion_mode == FusionMode::kConcat)
    reg = tp.add(reg, tp.sumsq(pids.concat_proj));
  if (fwd.active[2])
    reg = tp.add(reg, tp.add(tp.sumsq(pids.relation_emb), tp.sumsq(pids.relation_w)));
  if (fwd.active[1]) reg = tp.add(reg, tp.sumsq(pids.modality_logits));
  terms.reg = tp.scalar(reg);

  auto total = weighted_total(tp, bpr, inter, intra, reg, cfg_.beta, cfg_.gamma, cfg_.eta);
  terms.total = tp.scalar(total);
  tp.backward(total);

  std::vector<const Tensor*> grads;
  grads.push_back(&tp.grad(pids.user_emb));
  grads.push_back(&tp.grad(pids.entity_emb));
  grads.push_back(&tp.grad(pids.relation_emb));
  grads.push_back(&tp.grad(pids.relation_w));
  grads.push_back(&tp.grad(pids.fusion_w));
  grads.push_back(&tp.grad(pids.fusion_b));
  grads.push_back(&tp.grad(pids.modality_logits));
  if (params_.concat_proj.numel() > 0) grads.push_back(&tp.grad(pids.concat_proj));
  adam_.step(grads);
  return terms;
}

EpochStats Trainer::train_epoch() {
  const uint64_t epoch_seed = derive_seed(cfg_.seed, "epoch", static_cast<uint64_t>(epoch_));
  WorkGraphs work = build_graphs(/*training=*/true, epoch_seed);

  std::vector<Interaction> order = data_.ds.train;
  {
    Rng shuffle_rng(derive_seed(cfg_.seed, "shuffle", static_cast<uint64_t>(epoch_)));
    for (size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[shuffle_rng.next_below(i)]);
  }

  Rng neg_rng(derive_seed(cfg_.seed, "negatives", static_cast<uint64_t>(epoch_)));
  EpochStats stats;
  int64_t samples = 0;
  for (size_t start = 0; start < order.size(); start += static_cast<size_t>(cfg_.batch_size)) {
    const size_t end = std::min(order.size(), start + static_cast<size_t>(cfg_.batch_size));
    const std::vector<Interaction> batch(order.begin() + static_cast<int64_t>(start),
                                         order.begin() + static_cast<int64_t>(end));
    BatchTerms terms;
    try {
      terms = train_batch(work, batch, neg_rng);
    } catch (const NumericError& e) {
      std::ostringstream ss;
      ss << "epoch " << epoch_ << " batch " << stats.batches << ": " << e.what()
         << " [bpr=" << terms.bpr << " inter=" << terms.inter << " intra=" << terms.intra
         << " reg=" << terms.reg << "]";
      throw NumericError("train_epoch", ss.str());
    }
    const auto n = static_cast<double>(batch.size());
    stats.loss += terms.total * n;
    stats.bpr += terms.bpr * n;
    stats.inter += terms.inter * n;
    stats.intra += terms.intra * n;
    stats.reg += terms.reg * n;
    stats.batches++;
    samples += static_cast<int64_t>(batch.size());
  }
  if (samples > 0) {
    stats.loss /= static_cast<double>(samples);
    stats.bpr /= static_cast<double>(samples);
    stats.inter /= static_cast<double>(samples);
    stats.intra /= static_cast<double>(samples);
    stats.reg /= static_cast<double>(samples);
  }
  if (!std::isfinite(stats.loss))
    throw NumericError("train_epoch", "non-finite epoch loss at epoch " + std::to_string(epoch_));

  if (sge_.enabled && schedule_update(sge_.interval, epoch_)) {
    auto [user_reps, unified] = current_representations();
    (void)user_reps;
    sge_.update(unified);
  }
  ++epoch_;
  return stats;
}

std::pair<Tensor, Tensor> Trainer::current_representations() {
  WorkGraphs work = build_graphs(/*training=*/false, 0);
  Tape tp;
  ParamIds<float> pids;
  pids.user_emb = tp.constant(params_.user_emb);
  pids.entity_emb = tp.constant(params_.entity_emb);
  pids.relation_emb = tp.constant(params_.relation_emb);
  pids.relation_w = tp.constant(params_.relation_w);
  pids.fusion_w = tp.constant(params_.fusion_w);
  pids.fusion_b = tp.constant(params_.fusion_b);
  pids.modality_logits = tp.constant(params_.modality_logits);
  if (params_.concat_proj.numel() > 0) pids.concat_proj = tp.constant(params_.concat_proj);
  auto fwd = model_forward(tp, work, pids, settings_);
  return {tp.value(fwd.user_final), tp.value(fwd.unified)};
}

MetricsReport Trainer::evaluate(Split split, const std::vector<int>& k_list) {
  auto [user_reps, unified] = current_representations();

  Tape tp;
  auto scores_id = tp.matmul_nt(tp.constant(user_reps), tp.constant(unified));
  const Tensor& scores = tp.value(scores_id);

  std::vector<std::vector<int32_t>> masks(static_cast<size_t>(data_.ds.num_users));
  std::vector<std::vector<int32_t>> relevant(static_cast<size_t>(data_.ds.num_users));
  for (int32_t u = 0; u < data_.ds.num_users; ++u) {
    masks[u] = train_sets_[u];
    if (split == Split::kTest) {
      masks[u].insert(masks[u].end(), valid_sets_[u].begin(), valid_sets_[u].end());
      std::sort(masks[u].begin(), masks[u].end());
      relevant[u] = test_sets_[u];
    } else {
      relevant[u] = valid_sets_[u];
    }
  }
  return evaluate_rankings(scores, masks, relevant, k_list);
}

RunResult Trainer::run(const std::string& run_dir) {
  RunResult result;
  const int primary_k =
      std::find(cfg_.K_list.begin(), cfg_.K_list.end(), 20) != cfg_.K_list.end() ? 20
                                                                                 : cfg_.K_list[0];
  std::vector<double> history;

  for (int e = 0; e < cfg_.epochs; ++e) {
    EpochStats stats = train_epoch();
    if (e % cfg_.eval_interval != 0 && e + 1 < cfg_.epochs) continue;

    MetricsReport valid = evaluate(Split::kValid);
    std::ostringstream line;
    line << "epoch=" << e << " loss=" << format_metric(stats.loss)
         << " bpr=" << format_metric(stats.bpr) << " inter=" << format_metric(stats.inter)
         << " intra=" << format_metric(stats.intra) << " reg=" << format_metric(stats.reg);
    for (size_t k = 0; k < valid.k_list.size(); ++k) {
      line << " valid_recall@" << valid.k_list[k] << "=" << format_metric(valid.recall[k]);
      line << " valid_ndcg@" << valid.k_list[k] << "=" << format_metric(valid.ndcg[k]);
      line << " valid_precision@" << valid.k_list[k] << "="
           << format_metric(valid.precision[k]);
    }
    result.epoch_lines.push_back(line.str());

    const double metric = valid.recall_at(primary_k);
    history.push_back(metric);
    if (result.best_epoch < 0 || metric > result.best_valid) {
      result.best_epoch = e;
      result.best_valid = metric;
      best_params_ = params_;
      best_has_graph_ = sge_.has_graph;
      if (sge_.has_graph) best_graph_ = sge_.current;
    }
    if (early_stop(history, cfg_.patience)) break;
  }

  if (best_params_) {
    params_ = *best_params_;
    sge_.has_graph = best_has_graph_;
    if (best_has_graph_) sge_.current = best_graph_;
  }
  result.final_test = evaluate(Split::kTest);

  {
    std::ostringstream line;
    line << "best epoch=" << result.best_epoch
         << " valid_recall@" << primary_k << "=" << format_metric(result.best_valid);
    result.epoch_lines.push_back(line.str());
    std::ostringstream fin;
    fin << "final";
    for (size_t k = 0; k < result.final_test.k_list.size(); ++k) {
      fin << " test_recall@" << result.final_test.k_list[k] << "="
          << format_metric(result.final_test.recall[k]);
      fin << " test_ndcg@" << result.final_test.k_list[k] << "="
          << format_metric(result.final_test.ndcg[k]);
      fin << " test_precision@" << result.final_test.k_list[k] << "="
          << format_metric(result.final_test.precision[k]);
    }
    result.epoch_lines.push_back(fin.str());
  }

  if (!run_dir.empty()) {
    ensure_dir(run_dir);
    save_config_file(run_dir + "/config.txt", cfg_);
    write_manifest(run_dir, result);
    save_snapshot(run_dir + "/snapshot");
  }
  return result;
}

void Trainer::write_manifest(const std::string& run_dir, const RunResult& result) const {
  std::ofstream out(run_dir + "/manifest.txt");
  if (!out) throw FormatError("cannot write manifest under " + run_dir);
  out << "config";
  for (const auto& [k, v] : config_key_values(cfg_)) out << ' ' << k << '=' << v;
  out << '\n';
  out << "seed master=" << cfg_.seed << '\n';
  out << "data interactions_checksum=" << data_.interactions_checksum
      << " kg_checksum=" << data_.kg_checksum;
  for (size_t i = 0; i < data_.feature_checksums.size(); ++i)
    out << " feature_checksum_" << i << "=" << data_.feature_checksums[i];
  out << " users=" << data_.ds.num_users << " items=" << data_.ds.num_items
      << " train=" << data_.ds.train.size() << " valid=" << data_.ds.valid.size()
      << " test=" << data_.ds.test.size() << '\n';
  for (const std::string& line : result.epoch_lines) out << line << '\n';
  out << "snapshot dir=snapshot\n";
}

void Trainer::save_snapshot(const std::string& dir) const {
  save_params_snapshot(dir, params_, sge_.has_graph ? &sge_.current : nullptr);
}

void Trainer::restore_snapshot(const std::string& dir) {
  LoadedSnapshot snap = load_params_snapshot(dir);
  auto expected = params_.named();
  auto loaded = snap.params.named();
  for (size_t i = 0; i < expected.size(); ++i) {
    if (!expected[i].second->same_shape(*loaded[i].second))
      throw FormatError("snapshot tensor '" + expected[i].first + "' has the wrong shape");
    *expected[i].second = *loaded[i].second;
  }
  sge_.has_graph = snap.has_correlation;
  if (snap.has_correlation) sge_.current = snap.correlation;
}

void save_params_snapshot(const std::string& dir, const ParamSet& params,
                          const SparseGraph* correlation) {
  ensure_dir(dir);
  std::ofstream meta(dir + "/meta.txt");
  if (!meta) throw FormatError("cannot write snapshot meta under " + dir);
  for (const auto& [name, tensor] : params.named()) {
    // rank-3 stacks are stored as (dim0*dim1) x dim2 with the dims recorded
    Tensor flat = *tensor;
    std::string dims;
    for (int r = 0; r < tensor->rank(); ++r)
      dims += (r ? "," : "") + std::to_string(tensor->dim(r));
    if (tensor->rank() == 3)
      flat = Tensor::from_data({tensor->dim(0) * tensor->dim(1), tensor->dim(2)},
                               tensor->data());
    write_tensor_slif(dir + "/" + name + ".slif", flat);
    meta << "tensor " << name << " dims=" << dims << " file=" << name << ".slif\n";
  }
  if (correlation) {
    const int64_t nnz = correlation->nnz();
    Tensor rows({1, nnz}), cols({1, nnz}), weights({1, nnz});
    int64_t k = 0;
    for (int64_t r = 0; r < correlation->num_rows(); ++r)
      for (int64_t e = correlation->row_begin(r); e < correlation->row_end(r); ++e, ++k) {
        rows[k] = static_cast<float>(r);
        cols[k] = static_cast<float>(correlation->col_indices()[e]);
        weights[k] = correlation->weights()[e];
      }
    write_tensor_slif(dir + "/correlation_rows.slif", rows);
    write_tensor_slif(dir + "/correlation_cols.slif", cols);
    write_tensor_slif(dir + "/correlation_weights.slif", weights);
    meta << "correlation items=" << correlation->num_rows() << " nnz=" << nnz << "\n";
  }
}

LoadedSnapshot load_params_snapshot(const std::string& dir) {
  std::ifstream meta(dir + "/meta.txt");
  if (!meta) throw FormatError("missing snapshot meta: " + dir + "/meta.txt");
  LoadedSnapshot snap;
  std::string line;
  while (std::getline(meta, line)) {
    std::istringstream ss(line);
    std::string kind;
    ss >> kind;
    if (kind == "tensor") {
      std::string name, dims_field, file_field;
      ss >> name >> dims_field >> file_field;
      Tensor flat = read_tensor_slif(dir + "/" + file_field.substr(5));
      std::vector<int64_t> dims;
      std::stringstream ds(dims_field.substr(5));
      std::string tok;
      while (std::getline(ds, tok, ',')) dims.push_back(std::stoll(tok));
      Tensor shaped = Tensor::from_data(dims, flat.data());
      for (auto& [pname, tensor] : snap.params.named())
        if (pname == name) *tensor = shaped;
      if (name == "concat_proj") snap.params.concat_proj = shaped;
    } else if (kind == "correlation") {
      std::string items_field, nnz_field;
      ss >> items_field >> nnz_field;
      const int64_t items = std::stoll(items_field.substr(6));
      Tensor rows = read_tensor_slif(dir + "/correlation_rows.slif");
      Tensor cols = read_tensor_slif(dir + "/correlation_cols.slif");
      Tensor weights = read_tensor_slif(dir + "/correlation_weights.slif");
      std::vector<SparseGraph::Entry> entries;
      for (int64_t i = 0; i < rows.numel(); ++i)
        entries.push_back({static_cast<int32_t>(rows[i]), static_cast<int32_t>(cols[i]),
                           weights[i]});
      snap.correlation = SparseGraph::from_entries(items, items, std::move(entries));
      snap.has_correlation = true;
    }
  }
  return snap;
}

}  // namespace slif
