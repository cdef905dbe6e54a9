#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "slif/rng.hpp"
#include "slif/tensor.hpp"

namespace slif {

struct ParamShapes {
  int64_t num_users = 0;
  int64_t num_entities = 0;   // items occupy the id prefix
  int64_t num_relations = 0;  // including inverse / injected relation rows
  int64_t num_modalities = 2;
  int64_t dim = 64;
  int64_t concat_proj_in = 0;  // >0 allocates the concat-baseline projection
};

// Every learnable tensor of the model. Branch representations share the item
// rows of entity_emb as their layer-0 input.
struct ParamSet {
  Tensor user_emb;         // U x d
  Tensor entity_emb;       // E x d
  Tensor relation_emb;     // R x d
  Tensor relation_w;       // {R, d, d}
  Tensor fusion_w;         // 3d x 3
  Tensor fusion_b;         // 1 x 3
  Tensor modality_logits;  // 1 x M, softmax -> modality weights
  Tensor concat_proj;      // (k d) x d, empty unless the concat baseline is on

  std::vector<std::pair<std::string, Tensor*>> named();
  std::vector<std::pair<std::string, const Tensor*>> named() const;
};

// Uniform Xavier over +-sqrt(6 / (fan_in + fan_out)) for every weight
// matrix; bias and modality logits start at zero. Deterministic under seed.
ParamSet init_params(const ParamShapes& shapes, uint64_t seed);

// Fills a matrix with uniform Xavier values for the given fans.
void xavier_fill(Tensor& t, int64_t fan_in, int64_t fan_out, Rng& rng);

// Adam with bias correction. Moment buffers are keyed by registration order.
class Adam {
 public:
  explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void attach(ParamSet& params);

  // One optimization step; `grads` must align with the attached parameter
  // order (nullptr entries are treated as all-zero gradients).
  void step(const std::vector<const Tensor*>& grads);

  int64_t step_count() const { return step_; }

 private:
  struct Slot {
    Tensor* param = nullptr;
    Tensor m;
    Tensor v;
  };
  double lr_, beta1_, beta2_, eps_;
  int64_t step_ = 0;
  std::vector<Slot> slots_;
};

}  // namespace slif
