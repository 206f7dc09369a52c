#include "core/axial.hpp"

#include <cmath>
#include <limits>

#include "core/kernels.hpp"
#include "core/parallel.hpp"

namespace axf {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

void AxialMaskSet::validate_shapes(int64_t h, int64_t w) const {
    if (height() != h)
        throw DimensionError("mask set has " + std::to_string(height()) + " row masks, expected " + std::to_string(h));
    if (width() != w)
        throw DimensionError("mask set has " + std::to_string(width()) + " column masks, expated " + std::to_string(w));
    for (const auto& m : row_masks)
        if (m.size() != w) throw DimensionError("row mask must be " + std::to_string(w) + "x" + std::to_string(w));
    for (const auto& m : col_masks)
        if (m.size() != h) throw DimensionError("column mask must be " + std::to_string(h) + "x" + std::to_string(h));
}

void AxialMaskSet::validate_disjoint() const {
    for (int64_t i = 0; i < height(); ++i) {
        for (int64_t j = 0; j < width(); ++j) {
            if (row_masks[static_cast<size_t>(i)].allows(j, j) && col_masks[static_cast<size_t>(j)].allows(i, i))
                throw ValidationError("disjointness violation at cell (" + std::to_string(i) + "," + std::to_string(j) +
                                      "): self-logit open on both axes");
        }
    }
}

bool AxialMaskSet::degenerate_cell(int64_t i, int64_t j) const {
    return row_masks[static_cast<size_t>(i)].row_fully_masked(j) &&
           col_masks[static_cast<size_t>(j)].row_fully_masked(i);
}

void AxialMaskSet::validate_no_degenerate() const {
    for (int64_t i = 0; i < height(); ++i)
        for (int64_t j = 0; j < width(); ++j)
            if (degenerate_cell(i, j))
                throw ValidationError("degenerate cell (" + std::to_string(i) + "," + std::to_string(j) +
                                      "): nothing attendable on either axis");
}

AxialAttentionLayer AxialAttentionLayer::identity_attention(int64_t dim, int heads) {
    AxialAttentionLayer l;
    l.wq = LinearMap::identity(dim);
    l.wk = LinearMap::identity(dim);
    l.wv = LinearMap::identity(dim);
    l.ff1 = LinearMap::identity(dim);
    l.ff2 = LinearMap::identity(dim);
    l.ln1_gain = Tensor::full({dim}, 1.0);
    l.ln1_bias = Tensor({dim});
    l.ln2_gain = Tensor::full({dim}, 1.0);
    l.ln2_bias = Tensor({dim});
    l.heads = heads;
    return l;
}

double AxialAttentionResult::row_weight(int64_t i, int64_t j, int64_t w, int heads_total, int head) const {
    const size_t idx = static_cast<size_t>((i * w + j) * heads_total + head);
    return sigmoid(log_norm_row[idx] - log_norm_col[idx]);
}

namespace detail {

namespace {

struct AxisView {
    int64_t outer_count;  // sequences along this axis
    int64_t seq_len;
    // flat grid index (row-major) of position p within sequence `outer`
    int64_t flat(int64_t outer, int64_t p, int64_t w, GridAxis axis) const {
        return axis == GridAxis::Row ? outer * w + p : p * w + outer;
    }
};

AxisView make_view(const AxisDims& d, GridAxis axis) {
    return axis == GridAxis::Row ? AxisView{d.h, d.w} : AxisView{d.w, d.h};
}

}  // namespace

void axis_attention_forward(const double* k, const double* q, const double* v, const AxisDims& dims,
                            const std::vector<MaskMatrix>& masks, GridAxis axis, double* r_out, double* log_norm,
                            std::vector<double>* save_probs) {
    const AxisView view = make_view(dims, axis);
    const int64_t dk_total = dims.dk * dims.heads;
    const int64_t dv_total = dims.dv * dims.heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dims.dk));
    if (save_probs)
        save_probs->assign(static_cast<size_t>(view.outer_count * dims.heads * view.seq_len * view.seq_len), 0.0);

    parallel_for(view.outer_count, [&](int64_t outer) {
        const MaskMatrix& mask = masks[static_cast<size_t>(outer)];
        std::vector<double> logits(static_cast<size_t>(view.seq_len));
        for (int64_t a = 0; a < view.seq_len; ++a) {
            const int64_t cell_a = view.flat(outer, a, dims.w, axis);
            for (int h = 0; h < dims.heads; ++h) {
                const double* ka = k + cell_a * dk_total + h * dims.dk;
                double m = kNegInf;
                for (int64_t b = 0; b < view.seq_len; ++b) {
                    if (!mask.allows(a, b)) continue;
                    const int64_t cell_b = view.flat(outer, b, dims.w, axis);
                    const double l = dot(ka, q + cell_b * dk_total + h * dims.dk, dims.dk) * scale;
                    logits[static_cast<size_t>(b)] = l;
                    if (l > m) m = l;
                }
                double* out = r_out + cell_a * dv_total + h * dims.dv;
                for (int64_t d = 0; d < dims.dv; ++d) out[d] = 0.0;
                if (m == kNegInf) {
                    if (log_norm) log_norm[cell_a * dims.heads + h] = kNegInf;
                    continue;
                }
                double sum = 0.0;
                for (int64_t b = 0; b < view.seq_len; ++b) {
                    if (!mask.allows(a, b)) continue;
                    sum += std::exp(logits[static_cast<size_t>(b)] - m);
                }
                const double inv = 1.0 / sum;
                double* probs_row = nullptr;
                if (save_probs)
                    probs_row = save_probs->data() +
                                ((outer * dims.heads + h) * view.seq_len + a) * view.seq_len;
                for (int64_t b = 0; b < view.seq_len; ++b) {
                    if (!mask.allows(a, b)) continue;
                    const double p = std::exp(logits[static_cast<size_t>(b)] - m) * inv;
                    if (probs_row) probs_row[b] = p;
                    const int64_t cell_b = view.flat(outer, b, dims.w, axis);
                    axpy(p, v + cell_b * dv_total + h * dims.dv, dims.dv, out);
                }
                if (log_norm) log_norm[cell_a * dims.heads + h] = m + std::log(sum);
            }
        }
    });
}

void axis_attention_backward(const double* k, const double* q, const double* v, const AxisDims& dims,
                             const std::vector<MaskMatrix>& masks, GridAxis axis, const std::vector<double>& probs,
                             const double* d_r, const double* d_log_norm, double* d_k, double* d_q, double* d_v) {
    const AxisView view = make_view(dims, axis);
    const int64_t dk_total = dims.dk * dims.heads;
    const int64_t dv_total = dims.dv * dims.heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dims.dk));

    parallel_for(view.outer_count, [&](int64_t outer) {
        const MaskMatrix& mask = masks[static_cast<size_t>(outer)];
        std::vector<double> dp(static_cast<size_t>(view.seq_len));
        for (int64_t a = 0; a < view.seq_len; ++a) {
            const int64_t cell_a = view.flat(outer, a, dims.w, axis);
            for (int h = 0; h < dims.heads; ++h) {
                const double* probs_row =
                    probs.data() + ((outer * dims.heads + h) * view.seq_len + a) * view.seq_len;
                const double* dr = d_r + cell_a * dv_total + h * dims.dv;
                const double dln = d_log_norm ? d_log_norm[cell_a * dims.heads + h] : 0.0;

                // dp_b = <dR_a, V_b>; s = sum_b p_ab dp_b
                double s = 0.0;
                bool any = false;
                for (int64_t b = 0; b < view.seq_len; ++b) {
                    if (!mask.allows(a, b)) continue;
                    any = true;
                    const int64_t cell_b = view.flat(outer, b, dims.w, axis);
                    dp[static_cast<size_t>(b)] = dot(dr, v + cell_b * dv_total + h * dims.dv, dims.dv);
                    s += probs_row[b] * dp[static_cast<size_t>(b)];
                }
                if (!any) continue;  // fully masked: no gradient through this row

                const double* ka = k + cell_a * dk_total + h * dims.dk;
                double* dka = d_k + cell_a * dk_total + h * dims.dk;
                for (int64_t b = 0; b < view.seq_len; ++b) {
                    if (!mask.allows(a, b)) continue;
                    const double p = probs_row[b];
                    // softmax backward plus the log-normalizer path (dlogn/dA_b = p_b)
                    const double da = p * (dp[static_cast<size_t>(b)] - s) + dln * p;
                    const int64_t cell_b = view.flat(outer, b, dims.w, axis);
                    axpy(da * scale, q + cell_b * dk_total + h * dims.dk, dims.dk, dka);
                    axpy(da * scale, ka, dims.dk, d_q + cell_b * dk_total + h * dims.dk);
                    axpy(p, dr, dims.dv, d_v + cell_b * dv_total + h * dims.dv);
                }
            }
        }
    });
}

}  // namespace detail

namespace {

struct ProjectionCheck {
    int64_t dk, dv;
};

ProjectionCheck check_layer(const Tensor& grid, const AxialAttentionLayer& layer) {
    if (grid.ndim() != 3) throw DimensionError("axial attention expects an H x W x D grid, got " + shape_str(grid.shape()));
    const int64_t d = grid.dim(2);
    if (layer.wq.in_dim() != d || layer.wk.in_dim() != d || layer.wv.in_dim() != d)
        throw DimensionError("projection in_dim does not match grid dim D=" + std::to_string(d));
    if (layer.wq.out_dim() != layer.wk.out_dim()) throw DimensionError("Wq/Wk out_dim mismatch");
    if (layer.heads < 1 || layer.wq.out_dim() % layer.heads != 0 || layer.wv.out_dim() % layer.heads != 0)
        throw DimensionError("head count must divide projection dims");
    return {layer.wq.out_dim() / layer.heads, layer.wv.out_dim() / layer.heads};
}

}  // namespace

AxialAttentionResult axial_attention(const Tensor& grid, const AxialMaskSet& masks, const AxialAttentionLayer& layer) {
    const auto [dk, dv] = check_layer(grid, layer);
    const int64_t h = grid.dim(0), w = grid.dim(1);
    masks.validate_shapes(h, w);
    masks.validate_disjoint();
    masks.validate_no_degenerate();

    const Tensor flat = grid.reshaped({h * w, grid.dim(2)});
    const Tensor q = apply_linear(flat, layer.wq);
    const Tensor k = apply_linear(flat, layer.wk);
    const Tensor v = apply_linear(flat, layer.wv);

    const detail::AxisDims dims{h, w, dk, dv, layer.heads};
    const int64_t dv_total = dv * layer.heads;
    Tensor r_row({h * w, dv_total}), r_col({h * w, dv_total});
    AxialAttentionResult res;
    res.log_norm_row.assign(static_cast<size_t>(h * w * layer.heads), kNegInf);
    res.log_norm_col.assign(static_cast<size_t>(h * w * layer.heads), kNegInf);

    detail::axis_attention_forward(k.data(), q.data(), v.data(), dims, masks.row_masks, GridAxis::Row, r_row.data(),
                                   res.log_norm_row.data(), nullptr);
    detail::axis_attention_forward(k.data(), q.data(), v.data(), dims, masks.col_masks, GridAxis::Col, r_col.data(),
                                   res.log_norm_col.data(), nullptr);

    res.out = Tensor({h, w, dv_total});
    parallel_for(h * w, [&](int64_t cell) {
        for (int head = 0; head < layer.heads; ++head) {
            const size_t ni = static_cast<size_t>(cell * layer.heads + head);
            const double wr = sigmoid(res.log_norm_row[ni] - res.log_norm_col[ni]);
            const double* rr = r_row.data() + cell * dv_total + head * dv;
            const double* rc = r_col.data() + cell * dv_total + head * dv;
            double* out = res.out.data() + cell * dv_total + head * dv;
            for (int64_t d = 0; d < dv; ++d) out[d] = wr * rr[d] + (1.0 - wr) * rc[d];
        }
    });
    res.out.assert_finite("axial_attention");
    return res;
}

MaskMatrix combined_sequence_mask(const AxialMaskSet& masks) {
    const int64_t h = masks.height(), w = masks.width();
    const UnravelPermutation perm(h, w);
    MaskMatrix out(perm.size(), false);
    // union of the row-block mask and the permuted column-block mask
    for (int64_t i = 0; i < h; ++i) {
        for (int64_t j = 0; j < w; ++j) {
            const int64_t s = perm.row_major(i, j);
            for (int64_t j2 = 0; j2 < w; ++j2)
                if (masks.row_masks[static_cast<size_t>(i)].allows(j, j2)) out.set(s, perm.row_major(i, j2), true);
            for (int64_t i2 = 0; i2 < h; ++i2)
                if (masks.col_masks[static_cast<size_t>(j)].allows(i, i2)) out.set(s, perm.row_major(i2, j), true);
        }
    }
    return out;
}

Tensor sequential_oracle(const Tensor& grid, const AxialMaskSet& masks, const AxialAttentionLayer& layer) {
    check_layer(grid, layer);
    const int64_t h = grid.dim(0), w = grid.dim(1);
    masks.validate_shapes(h, w);
    masks.validate_disjoint();
    masks.validate_no_degenerate();

    const Tensor seq = grid.reshaped({h * w, grid.dim(2)});
    const MaskMatrix mask = combined_sequence_mask(masks);
    MaskedAttentionResult attn = masked_attention(seq, layer.wq, layer.wk, layer.wv, mask, layer.heads);
    return attn.out.reshaped({h, w, layer.wv.out_dim()});
}

Tensor axis_attention(const Tensor& grid, const std::vector<MaskMatrix>& masks, GridAxis axis, const LinearMap& wq,
                      const LinearMap& wk, const LinearMap& wv, int heads) {
    AxialAttentionLayer layer;
    layer.wq = wq;
    layer.wk = wk;
    layer.wv = wv;
    layer.heads = heads;
    const auto [dk, dv] = check_layer(grid, layer);
    const int64_t h = grid.dim(0), w = grid.dim(1);
    const int64_t expected = axis == GridAxis::Row ? h : w;
    const int64_t mask_size = axis == GridAxis::Row ? w : h;
    if (static_cast<int64_t>(masks.size()) != expected) throw DimensionError("axis mask count mismatch");
    for (const auto& m : masks)
        if (m.size() != mask_size) throw DimensionError("axis mask size mismatch");

    const Tensor flat = grid.reshaped({h * w, grid.dim(2)});
    const Tensor q = apply_linear(flat, wq);
    const Tensor k = apply_linear(flat, wk);
    const Tensor v = apply_linear(flat, wv);
    const detail::AxisDims dims{h, w, dk, dv, heads};
    Tensor out({h, w, dv * heads});
    detail::axis_attention_forward(k.data(), q.data(), v.data(), dims, masks, axis, out.data(), nullptr, nullptr);
    out.assert_finite("axis_attention");
    return out;
}

Tensor stacked_axial_attention(const Tensor& grid, const AxialMaskSet& masks, const AxialAttentionLayer& layer_row,
                               const AxialAttentionLayer& layer_col) {
    masks.validate_shapes(grid.dim(0), grid.dim(1));
    Tensor rows = axis_attention(grid, masks.row_masks, GridAxis::Row, layer_row.wq, layer_row.wk, layer_row.wv,
                                 layer_row.heads);
    return axis_attention(rows, masks.col_masks, GridAxis::Col, layer_col.wq, layer_col.wk, layer_col.wv,
                          layer_col.heads);
}

AxialMaskSet build_forecast_masks(int64_t h, int64_t w, int64_t pregame_col) {
    return build_forecast_masks(h, w, pregame_col, std::vector<uint8_t>(static_cast<size_t>(h), 1),
                                std::vector<uint8_t>(static_cast<size_t>(w), 1));
}

AxialMaskSet build_forecast_masks(int64_t h, int64_t w, int64_t pregame_col, const std::vector<uint8_t>& agent_valid,
                                  const std::vector<uint8_t>& step_valid) {
    if (h < 1 || w < 1) throw DimensionError("grid must be at least 1x1");
    if (pregame_col < 0 || pregame_col >= w) throw ValidationError("pregame column out of range");
    if (static_cast<int64_t>(agent_valid.size()) != h || static_cast<int64_t>(step_valid.size()) != w)
        throw DimensionError("validity vector lengths must match grid dims");

    // temporal order: pregame column first, remaining columns in index order
    std::vector<int64_t> rank(static_cast<size_t>(w));
    for (int64_t j = 0; j < w; ++j)
        rank[static_cast<size_t>(j)] = j == pregame_col ? 0 : (j < pregame_col ? j + 1 : j);

    MaskMatrix row(w, false);
    for (int64_t j = 0; j < w; ++j)
        for (int64_t j2 = 0; j2 < w; ++j2)
            if (rank[static_cast<size_t>(j2)] < rank[static_cast<size_t>(j)] && step_valid[static_cast<size_t>(j2)])
                row.set(j, j2, true);

    MaskMatrix col(h, false);
    for (int64_t i = 0; i < h; ++i)
        for (int64_t i2 = 0; i2 < h; ++i2)
            if (agent_valid[static_cast<size_t>(i2)]) col.set(i, i2, true);

    AxialMaskSet set;
    set.row_masks.assign(static_cast<size_t>(h), row);
    set.col_masks.assign(static_cast<size_t>(w), col);
    return set;
}

}  // namespace axf
