#pragma once

#include <cstdint>
#include <vector>

#include "core/mask.hpp"
#include "core/ops.hpp"
#include "core/tensor.hpp"

namespace axf {

// Per-axis mask bundle for one grid: row_masks[i] governs temporal attention
// within agent row i (W x W), col_masks[j] governs agent attention within
// time-step column j (H x H).
struct AxialMaskSet {
    std::vector<MaskMatrix> row_masks;
    std::vector<MaskMatrix> col_masks;

    int64_t height() const { return static_cast<int64_t>(row_masks.size()); }
    int64_t width() const { return static_cast<int64_t>(col_masks.size()); }

    void validate_shapes(int64_t h, int64_t w) const;
    // Every cell's self-logit must be blocked on at least one axis; throws
    // naming the first offending cell.
    void validate_disjoint() const;
    // True when cell (i, j) can attend to nothing on either axis.
    bool degenerate_cell(int64_t i, int64_t j) const;
    void validate_no_degenerate() const;
};

// Row-major unravelling of an H x W grid, and the permutation that reorders
// a column-major sequence to row-major.
struct UnravelPermutation {
    int64_t h = 0;
    int64_t w = 0;

    UnravelPermutation(int64_t h_, int64_t w_) : h(h_), w(w_) {}
    int64_t size() const { return h * w; }
    // row-major index of grid cell (i, j)
    int64_t row_major(int64_t i, int64_t j) const { return i * w + j; }
    // column-major index of grid cell (i, j)
    int64_t col_major(int64_t i, int64_t j) const { return j * h + i; }
    // maps a column-major position to its row-major position (the P of the
    // sequential-attention construction)
    int64_t to_row_major(int64_t c) const { return (c % h) * w + c / h; }
    int64_t to_col_major(int64_t s) const { return (s % w) * h + s / w; }
};

// Shared projection weights plus the standard transformer block pieces.
// The same wq/wk/wv serve the row and the column attention.
struct AxialAttentionLayer {
    LinearMap wq, wk, wv;
    LinearMap ff1, ff2;
    Tensor ln1_gain, ln1_bias;
    Tensor ln2_gain, ln2_bias;
    int heads = 1;

    static AxialAttentionLayer identity_attention(int64_t dim, int heads = 1);
};

struct AxialAttentionResult {
    Tensor out;                     // H x W x Dv
    std::vector<double> log_norm_row;  // H*W*heads; -inf where the axis is fully masked
    std::vector<double> log_norm_col;
    // combination weight applied to the row result for (cell, head)
    double row_weight(int64_t i, int64_t j, int64_t w, int heads_total, int head) const;
};

// Additive axial attention: row and column attention with shared weights,
// combined per cell by the normalizer ratio w = n_row / (n_row + n_col)
// (computed as a sigmoid of log-normalizer differences). Requires the
// disjointness precondition and no degenerate cells.
AxialAttentionResult axial_attention(const Tensor& grid, const AxialMaskSet& masks, const AxialAttentionLayer& layer);

// Ground-truth path: unravels the grid row-major, runs plain masked
// sequential attention over the H*W sequence with the combined block mask,
// and re-ravels.
Tensor sequential_oracle(const Tensor& grid, const AxialMaskSet& masks, const AxialAttentionLayer& layer);

// Combined mask over the unravelled sequence: position s may attend to t
// when the pair is admitted by its row mask (same grid row) or by its
// column mask (same grid column) after reordering via the permutation.
MaskMatrix combined_sequence_mask(const AxialMaskSet& masks);

// Single-axis attention over the grid (row axis = temporal, column axis =
// agent). Fully masked cells yield zero rows. Used by the stacked variant
// and the single-axis ablations.
enum class GridAxis { Row, Col };
Tensor axis_attention(const Tensor& grid, const std::vector<MaskMatrix>& masks, GridAxis axis, const LinearMap& wq,
                      const LinearMap& wk, const LinearMap& wv, int heads = 1);

// Prior-work composition: row attention then column attention with distinct
// weight sets; each axis normalizes independently (no disjointness needed).
Tensor stacked_axial_attention(const Tensor& grid, const AxialMaskSet& masks, const AxialAttentionLayer& layer_row,
                               const AxialAttentionLayer& layer_col);

// Forecast mask pattern: strict temporal mask on the row axis (a step
// attends only to strictly earlier steps; self blocked) and open agent
// attention on the column axis (self allowed). pregame_col is placed first
// in temporal order. Optional validity vectors exclude padded agents/steps
// from every attendable set.
AxialMaskSet build_forecast_masks(int64_t h, int64_t w, int64_t pregame_col = 0);
AxialMaskSet build_forecast_masks(int64_t h, int64_t w, int64_t pregame_col, const std::vector<uint8_t>& agent_valid,
                                  const std::vector<uint8_t>& step_valid);

namespace detail {

// Shared forward/backward kernel for one axis of grid attention.
// k, q, v are the projected [H*W x dk*heads / dv*heads] matrices (row-major,
// grid cells in row-major order). Outputs R (H*W x dv*heads, zero where the
// axis is fully masked) and optional per-(cell, head) log-normalizers.
// When save_probs is non-null the attention probabilities are stored for
// the backward pass, laid out per (outer, head) as seq*seq row-major.
struct AxisDims {
    int64_t h, w, dk, dv;
    int heads;
};

void axis_attention_forward(const double* k, const double* q, const double* v, const AxisDims& dims,
                            const std::vector<MaskMatrix>& masks, GridAxis axis, double* r_out, double* log_norm,
                            std::vector<double>* save_probs);

// Backward for one axis. d_r is the gradient w.r.t. the axis result,
// d_log_norm (may be null) the gradient w.r.t. the log-normalizers.
// Accumulates into d_k, d_q, d_v (same layout as k/q/v).
void axis_attention_backward(const double* k, const double* q, const double* v, const AxisDims& dims,
                             const std::vector<MaskMatrix>& masks, GridAxis axis, const std::vector<double>& probs,
                             const double* d_r, const double* d_log_norm, double* d_k, double* d_q, double* d_v);

}  // namespace detail

}  // namespace axf
