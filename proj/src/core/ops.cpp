#include "core/ops.hpp"

#include <cmath>
#include <limits>

#include "core/kernels.hpp"

namespace axf {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

LinearMap::LinearMap(Tensor w, std::optional<Tensor> b) : weights(std::move(w)), bias(std::move(b)) {
    if (weights.ndim() != 2) throw DimensionError("linear weights must be 2-D, got " + shape_str(weights.shape()));
    if (bias && (bias->ndim() != 1 || bias->dim(0) != weights.dim(1)))
        throw DimensionError("linear bias shape does not match out_dim");
}

LinearMap LinearMap::identity(int64_t dim) {
    Tensor w({dim, dim});
    for (int64_t i = 0; i < dim; ++i) w.at2(i, i) = 1.0;
    return LinearMap(std::move(w));
}

Tensor apply_linear(const Tensor& x, const LinearMap& map) {
    if (x.ndim() < 1 || x.dim(x.ndim() - 1) != map.in_dim())
        throw DimensionError("linear: input last dim " + shape_str(x.shape()) + " does not match in_dim " +
                             std::to_string(map.in_dim()));
    std::vector<int64_t> out_shape = x.shape();
    out_shape.back() = map.out_dim();
    Tensor out(out_shape);
    const int64_t rows = x.numel() / map.in_dim();
    const double* bias = map.bias ? map.bias->data() : nullptr;
    for (int64_t r = 0; r < rows; ++r)
        matvec_rowmajor(x.data() + r * map.in_dim(), map.weights.data(), bias, map.in_dim(), map.out_dim(),
                        out.data() + r * map.out_dim());
    return out;
}

double RowNormalizer::log() const { return empty() ? kNegInf : shift + std::log(sum); }
double RowNormalizer::raw() const { return empty() ? 0.0 : std::exp(log()); }

SoftmaxResult softmax_rows(const Tensor& a) {
    if (a.ndim() != 2) throw DimensionError("softmax_rows expects a matrix, got " + shape_str(a.shape()));
    const int64_t rows = a.dim(0), cols = a.dim(1);
    SoftmaxResult res{Tensor({rows, cols}), {}};
    res.norm.reserve(static_cast<size_t>(rows));
    for (int64_t i = 0; i < rows; ++i) {
        const double* in = a.data() + i * cols;
        double* out = res.probs.data() + i * cols;
        double m = kNegInf;
        for (int64_t j = 0; j < cols; ++j) {
            const double v = in[j];
            if (std::isnan(v) || v == std::numeric_limits<double>::infinity())
                throw ValidationError("softmax_rows: entries must be finite or -inf");
            if (v > m) m = v;
        }
        if (m == kNegInf) {  // fully masked row
            for (int64_t j = 0; j < cols; ++j) out[j] = 0.0;
            res.norm.push_back({kNegInf, 0.0});
            continue;
        }
        double sum = 0.0;
        for (int64_t j = 0; j < cols; ++j) {
            const double e = in[j] == kNegInf ? 0.0 : std::exp(in[j] - m);
            out[j] = e;
            sum += e;
        }
        const double inv = 1.0 / sum;
        for (int64_t j = 0; j < cols; ++j) out[j] *= inv;
        res.norm.push_back({m, sum});
    }
    return res;
}

MaskedAttentionResult masked_attention(const Tensor& seq, const LinearMap& wq, const LinearMap& wk,
                                       const LinearMap& wv, const MaskMatrix& mask, int heads) {
    if (seq.ndim() != 2) throw DimensionError("attention expects [S x D] sequence, got " + shape_str(seq.shape()));
    const int64_t s = seq.dim(0);
    if (mask.size() != s)
        throw DimensionError("mask size " + std::to_string(mask.size()) + " does not match sequence length " +
                             std::to_string(s));
    if (wq.in_dim() != seq.dim(1) || wk.in_dim() != seq.dim(1) || wv.in_dim() != seq.dim(1))
        throw DimensionError("attention projection in_dim does not match sequence dim");
    if (wq.out_dim() != wk.out_dim()) throw DimensionError("Wq/Wk out_dim mismatch");
    if (heads < 1 || wq.out_dim() % heads != 0 || wv.out_dim() % heads != 0)
        throw DimensionError("head count must divide K/Q and V dims");

    const Tensor q = apply_linear(seq, wq);
    const Tensor k = apply_linear(seq, wk);
    const Tensor v = apply_linear(seq, wv);
    const int64_t dk = wk.out_dim() / heads;
    const int64_t dv = wv.out_dim() / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dk));

    MaskedAttentionResult res;
    res.out = Tensor({s, wv.out_dim()});
    res.heads = heads;
    res.norm.assign(static_cast<size_t>(s * heads), RowNormalizer{kNegInf, 0.0});

    std::vector<double> logits(static_cast<size_t>(s));
    for (int64_t i = 0; i < s; ++i) {
        for (int h = 0; h < heads; ++h) {
            const double* ki = k.data() + i * k.dim(1) + h * dk;
            double m = kNegInf;
            for (int64_t j = 0; j < s; ++j) {
                if (!mask.allows(i, j)) continue;
                const double* qj = q.data() + j * q.dim(1) + h * dk;
                const double l = dot(ki, qj, dk) * scale;
                logits[static_cast<size_t>(j)] = l;
                if (l > m) m = l;
            }
            double* out = res.out.data() + i * res.out.dim(1) + h * dv;
            if (m == kNegInf) continue;  // fully masked: zero row, empty normalizer
            double sum = 0.0;
            for (int64_t j = 0; j < s; ++j) {
                if (!mask.allows(i, j)) continue;
                sum += std::exp(logits[static_cast<size_t>(j)] - m);
            }
            const double inv = 1.0 / sum;
            for (int64_t j = 0; j < s; ++j) {
                if (!mask.allows(i, j)) continue;
                const double w = std::exp(logits[static_cast<size_t>(j)] - m) * inv;
                axpy(w, v.data() + j * v.dim(1) + h * dv, dv, out);
            }
            res.norm[static_cast<size_t>(i * heads + h)] = {m, sum};
        }
    }
    res.out.assert_finite("masked_attention");
    return res;
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
    if (x.ndim() < 1) throw DimensionError("layer_norm needs at least 1-D input");
    const int64_t d = x.dim(x.ndim() - 1);
    if (gain.numel() != d || bias.numel() != d) throw DimensionError("layer_norm gain/bias length must equal last dim");
    Tensor out(x.shape());
    const int64_t rows = x.numel() / d;
    for (int64_t r = 0; r < rows; ++r) {
        const double* in = x.data() + r * d;
        double* o = out.data() + r * d;
        double mean = 0.0;
        for (int64_t i = 0; i < d; ++i) mean += in[i];
        mean /= static_cast<double>(d);
        double var = 0.0;
        for (int64_t i = 0; i < d; ++i) {
            const double c = in[i] - mean;
            var += c * c;
        }
        var /= static_cast<double>(d);
        const double inv = 1.0 / std::sqrt(var + eps);
        for (int64_t i = 0; i < d; ++i) o[i] = (in[i] - mean) * inv * gain[i] + bias[i];
    }
    out.assert_finite("layer_norm");
    return out;
}

Tensor feed_forward(const Tensor& x, const LinearMap& w1, const LinearMap& w2) {
    if (w2.out_dim() != x.dim(x.ndim() - 1)) throw DimensionError("feed_forward must preserve the trailing dim");
    Tensor h = apply_linear(x, w1);
    for (int64_t i = 0; i < h.numel(); ++i) h[i] = relu(h[i]);
    Tensor out = apply_linear(h, w2);
    out.assert_finite("feed_forward");
    return out;
}

double relu(double v) { return v > 0.0 ? v : 0.0; }

double softplus(double v) {
    if (v > 35.0) return v;
    if (v < -35.0) return std::exp(v);
    return std::log1p(std::exp(v));
}

double sigmoid(double v) {
    if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
    const double e = std::exp(v);
    return e / (1.0 + e);
}

double log_softplus(double v) {
    if (v < -35.0) return v;  // softplus(v) ~= e^v
    return std::log(softplus(v));
}

}  // namespace axf
