#pragma once

#include <optional>
#include <vector>

#include "core/mask.hpp"
#include "core/tensor.hpp"

namespace axf {

// Learnable affine map, last-dimension contraction.
struct LinearMap {
    Tensor weights;               // [in_dim x out_dim]
    std::optional<Tensor> bias;   // [out_dim]

    LinearMap() = default;
    LinearMap(Tensor w, std::optional<Tensor> b = std::nullopt);

    int64_t in_dim() const { return weights.dim(0); }
    int64_t out_dim() const { return weights.dim(1); }

    static LinearMap identity(int64_t dim);
};

// y = x W (+ b); x is [... x in_dim], output replaces the last dim by out_dim.
Tensor apply_linear(const Tensor& x, const LinearMap& map);

// Per-row softmax normalizer in shifted form: raw() = exp(shift) * sum.
// Exposing the pair keeps downstream row/column re-weighting exact for
// logits far beyond exp() range. A fully-masked row has shift=-inf, sum=0.
struct RowNormalizer {
    double shift;
    double sum;

    double log() const;
    double raw() const;
    bool empty() const { return sum == 0.0; }
};

struct SoftmaxResult {
    Tensor probs;                    // same shape as input, rows sum to 1 (or 0)
    std::vector<RowNormalizer> norm; // one per row
};

// Row-wise softmax over an S x S matrix whose entries are finite or -inf.
// A fully -inf row produces a zero row and an empty normalizer.
SoftmaxResult softmax_rows(const Tensor& a);

struct MaskedAttentionResult {
    Tensor out;                      // [S x Dv]
    std::vector<RowNormalizer> norm; // [S * heads], head-major within a row
    int heads = 1;

    const RowNormalizer& norm_at(int64_t row, int head = 0) const {
        return norm[static_cast<size_t>(row) * static_cast<size_t>(heads) + static_cast<size_t>(head)];
    }
};

// Masked self-attention over one sequence: logits (M + K Q^T)/sqrt(d) with
// K = S Wk, Q = S Wq, V = S Wv; d is the per-head K/Q dimension. Rows whose
// mask admits nothing yield a zero output row and an empty normalizer.
MaskedAttentionResult masked_attention(const Tensor& seq, const LinearMap& wq, const LinearMap& wk,
                                       const LinearMap& wv, const MaskMatrix& mask, int heads = 1);

// Per-vector normalization over the trailing dimension, then affine.
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-6);

// Two linear maps with ReLU between; shape-preserving (w2 maps back to D).
Tensor feed_forward(const Tensor& x, const LinearMap& w1, const LinearMap& w2);

double relu(double v);
double softplus(double v);
double sigmoid(double v);
// log(softplus(x)) without overflow/underflow
double log_softplus(double v);

}  // namespace axf
