#include "slif/params.hpp"

#include <cmath>

#include "slif/errors.hpp"

namespace slif {

void xavier_fill(Tensor& t, int64_t fan_in, int64_t fan_out, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (int64_t i = 0; i < t.numel(); ++i)
    t[i] = static_cast<float>(rng.next_uniform(-bound, bound));
}

std::vector<std::pair<std::string, Tensor*>> ParamSet::named() {
  std::vector<std::pair<std::string, Tensor*>> out = {
      {"user_emb", &user_emb},       {"entity_emb", &entity_emb},
      {"relation_emb", &relation_emb}, {"relation_w", &relation_w},
      {"fusion_w", &fusion_w},       {"fusion_b", &fusion_b},
      {"modality_logits", &modality_logits},
  };
  if (concat_proj.numel() > 0) out.emplace_back("concat_proj", &concat_proj);
  return out;
}

std::vector<std::pair<std::string, const Tensor*>> ParamSet::named() const {
  std::vector<std::pair<std::string, const Tensor*>> out;
  for (auto& [name, t] : const_cast<ParamSet*>(this)->named()) out.emplace_back(name, t);
  return out;
}

ParamSet init_params(const ParamShapes& shapes, uint64_t seed) {
  if (shapes.dim < 1 || shapes.num_users < 1 || shapes.num_entities < 1)
    throw ConfigError("init_params: shapes must be positive");
  const int64_t d = shapes.dim;
  ParamSet p;
  Rng rng(derive_seed(seed, "init"));

  p.user_emb = Tensor({shapes.num_users, d});
  xavier_fill(p.user_emb, shapes.num_users, d, rng);
  p.entity_emb = Tensor({shapes.num_entities, d});
  xavier_fill(p.entity_emb, shapes.num_entities, d, rng);

  const int64_t r = std::max<int64_t>(shapes.num_relations, 1);
  p.relation_emb = Tensor({r, d});
  xavier_fill(p.relation_emb, r, d, rng);
  p.relation_w = Tensor({r, d, d});
  {  // each relation transform is its own d x d Xavier matrix
    for (int64_t k = 0; k < r; ++k) {
      Tensor slab({d, d});
      xavier_fill(slab, d, d, rng);
      std::copy_n(slab.ptr(), d * d, p.relation_w.ptr() + k * d * d);
    }
  }

  p.fusion_w = Tensor({3 * d, 3});
  xavier_fill(p.fusion_w, 3 * d, 3, rng);
  p.fusion_b = Tensor({1, 3});
  p.modality_logits = Tensor({1, std::max<int64_t>(shapes.num_modalities, 1)});

  if (shapes.concat_proj_in > 0) {
    p.concat_proj = Tensor({shapes.concat_proj_in, d});
    xavier_fill(p.concat_proj, shapes.concat_proj_in, d, rng);
  }
  return p;
}

void Adam::attach(ParamSet& params) {
  slots_.clear();
  step_ = 0;
  for (auto& [name, t] : params.named()) {
    Slot s;
    s.param = t;
    s.m = Tensor(t->shape());
    s.v = Tensor(t->shape());
    slots_.push_back(std::move(s));
  }
}

void Adam::step(const std::vector<const Tensor*>& grads) {
  if (grads.size() != slots_.size()) throw ShapeError("adam: gradient list mismatch");
  ++step_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(step_));
  for (size_t k = 0; k < slots_.size(); ++k) {
    if (!grads[k]) continue;
    Slot& s = slots_[k];
    if (!grads[k]->same_shape(*s.param)) throw ShapeError("adam: gradient shape mismatch");
    const auto& g = *grads[k];
    for (int64_t i = 0; i < s.param->numel(); ++i) {
      const double gi = g[i];
      if (!std::isfinite(gi)) throw NumericError("adam", "non-finite gradient");
      const double m = beta1_ * s.m[i] + (1.0 - beta1_) * gi;
      const double v = beta2_ * s.v[i] + (1.0 - beta2_) * gi * gi;
      s.m[i] = static_cast<float>(m);
      s.v[i] = static_cast<float>(v);
      const double mhat = m / bc1;
      const double vhat = v / bc2;
      (*s.param)[i] -= static_cast<float>(lr_ * mhat / (std::sqrt(vhat) + eps_));
    }
  }
}

}  // namespace slif
