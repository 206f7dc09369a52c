#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "core/tensor.hpp"

namespace axf {

// lr_min + 0.5 * (lr_max - lr_min) * (1 + cos(pi * step / total)); no restarts
double cosine_lr(int64_t step, int64_t total, double lr_max, double lr_min = 0.0);

// scales grads in place when the global L2 norm exceeds max_norm; returns the
// pre-clip norm
double clip_global_norm(std::vector<Tensor*>& grads, double max_norm);

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Standard Adam with bias correction. State is keyed by parameter name so
// the optimizer survives parameter re-binding across tapes.
class Adam {
  public:
    explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

    void begin_step() { ++t_; }
    int64_t step_count() const { return t_; }

    void update(const std::string& name, Tensor& param, const Tensor& grad, double lr);

  private:
    struct Moments {
        Tensor m, v;
    };
    AdamConfig cfg_;
    int64_t t_ = 0;
    std::unordered_map<std::string, Moments> state_;
};

}  // namespace axf
