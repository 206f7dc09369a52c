#pragma once

#include <functional>
#include <vector>

#include "core/axial.hpp"
#include "core/tensor.hpp"

namespace axf {

using VarId = int32_t;
inline constexpr VarId kNoVar = -1;

// Define-by-run reverse-mode tape. Nodes are appended in evaluation order;
// backward() walks them in reverse. Values are plain Tensors; gradients are
// allocated lazily. With grad disabled the same ops run value-only, so
// training and inference share one forward implementation.
class Tape {
  public:
    explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}

    bool grad_enabled() const { return grad_enabled_; }
    size_t size() const { return nodes_.size(); }

    VarId leaf(Tensor value, bool requires_grad = false);
    const Tensor& val(VarId id) const { return nodes_[static_cast<size_t>(id)].value; }
    bool requires_grad(VarId id) const { return nodes_[static_cast<size_t>(id)].requires_grad; }

    // gradient tensor, zero-initialized on first access
    Tensor& grad(VarId id);
    bool has_grad(VarId id) const { return !nodes_[static_cast<size_t>(id)].grad.empty(); }

    // seeds d(root)=1 and propagates; root must be scalar
    void backward(VarId root);

    // elementwise
    VarId add(VarId a, VarId b);
    VarId sub(VarId a, VarId b);
    VarId mul(VarId a, VarId b);
    VarId scale(VarId a, double s);
    VarId add_n(const std::vector<VarId>& xs);
    VarId relu(VarId a);
    VarId softplus(VarId a);
    VarId sum(VarId a);  // scalar total

    VarId reshape(VarId a, std::vector<int64_t> shape);
    // contiguous leading-dimension slice of a 2-D/3-D tensor
    VarId slice_rows(VarId a, int64_t row0, int64_t row1);

    // y = x W (+ b), last-dim contraction; b may be kNoVar
    VarId linear(VarId x, VarId w, VarId b);
    VarId layer_norm(VarId x, VarId gain, VarId bias, double eps = 1e-6);

    // Additive axial attention (fused): shared projections, per-axis
    // normalizers, sigmoid-of-log-difference combination.
    VarId axial_additive_attention(VarId grid, VarId wq, VarId wk, VarId wv, const AxialMaskSet& masks, int heads);
    // Single-axis grid attention (stacked variant / ablations).
    VarId grid_axis_attention(VarId grid, VarId wq, VarId wk, VarId wv, const std::vector<MaskMatrix>& masks,
                              GridAxis axis, int heads);

    // E0 assembly: scatters the six embedded blocks into the (P+3) x (T+1) x D
    // grid (game row, two team rows, P player rows; column 0 = pre-game).
    VarId assemble_grid(VarId game_ctx, VarId game, VarId team_str, VarId team, VarId player_str, VarId player);
    // Pre-game-free layout: (P+3) x T x D from the three live tensors.
    VarId assemble_grid_live(VarId game, VarId team, VarId player);

    // escape hatch for fused ops in other modules (losses); backward receives
    // (tape, self) and must accumulate into parent grads
    VarId emplace(Tensor value, std::vector<VarId> parents, std::function<void(Tape&, VarId)> backward);

  private:
    struct Node {
        Tensor value;
        Tensor grad;
        bool requires_grad = false;
        std::function<void(Tape&, VarId)> backward;
    };

    VarId push(Tensor value, const std::vector<VarId>& parents, std::function<void(Tape&, VarId)> backward);
    bool any_requires(const std::vector<VarId>& parents) const;

    std::vector<Node> nodes_;
    bool grad_enabled_;
};

// shared dense backward for y = x W + b
void linear_backward(const Tensor& x, const Tensor& w, const Tensor& dy, Tensor* dx, Tensor* dw, Tensor* db);

}  // namespace axf
