#include "core/tape.hpp"

#include <cmath>
#include <limits>
#include <memory>

#include "core/kernels.hpp"
#include "core/parallel.hpp"

namespace axf {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

VarId Tape::leaf(Tensor value, bool requires_grad) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = grad_enabled_ && requires_grad;
    nodes_.push_back(std::move(n));
    return static_cast<VarId>(nodes_.size() - 1);
}

Tensor& Tape::grad(VarId id) {
    Node& n = nodes_[static_cast<size_t>(id)];
    if (n.grad.empty()) n.grad = Tensor(n.value.shape());
    return n.grad;
}

void Tape::backward(VarId root) {
    if (!grad_enabled_) throw ValidationError("backward on a grad-disabled tape");
    if (val(root).numel() != 1) throw ValidationError("backward root must be scalar");
    grad(root)[0] = 1.0;
    for (VarId id = root; id >= 0; --id) {
        Node& n = nodes_[static_cast<size_t>(id)];
        if (n.backward && !n.grad.empty()) n.backward(*this, id);
    }
}

bool Tape::any_requires(const std::vector<VarId>& parents) const {
    for (VarId p : parents)
        if (p != kNoVar && requires_grad(p)) return true;
    return false;
}

VarId Tape::push(Tensor value, const std::vector<VarId>& parents, std::function<void(Tape&, VarId)> backward) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = grad_enabled_ && any_requires(parents);
    if (n.requires_grad) n.backward = std::move(backward);
    nodes_.push_back(std::move(n));
    return static_cast<VarId>(nodes_.size() - 1);
}

VarId Tape::emplace(Tensor value, std::vector<VarId> parents, std::function<void(Tape&, VarId)> backward) {
    return push(std::move(value), parents, std::move(backward));
}

VarId Tape::add(VarId a, VarId b) {
    const Tensor& va = val(a);
    const Tensor& vb = val(b);
    if (!va.same_shape(vb)) throw DimensionError("add: shape mismatch");
    Tensor out(va.shape());
    for (int64_t i = 0; i < out.numel(); ++i) out[i] = va[i] + vb[i];
    return push(std::move(out), {a, b}, [a, b](Tape& t, VarId self) {
        const Tensor& g = t.grad(self);
        if (t.requires_grad(a)) {
            Tensor& ga = t.grad(a);
            for (int64_t i = 0; i < g.numel(); ++i) ga[i] += g[i];
        }
        if (t.requires_grad(b)) {
            Tensor& gb = t.grad(b);
            for (int64_t i = 0; i < g.numel(); ++i) gb[i] += g[i];
        }
    });
}

VarId Tape::sub(VarId a, VarId b) {
    const Tensor& va = val(a);
    const Tensor& vb = val(b);
    if (!va.same_shape(vb)) throw DimensionError("sub: shape mismatch");
    Tensor out(va.shape());
    for (int64_t i = 0; i < out.numel(); ++i) out[i] = va[i] - vb[i];
    return push(std::move(out), {a, b}, [a, b](Tape& t, VarId self) {
        const Tensor& g = t.grad(self);
        if (t.requires_grad(a)) {
            Tensor& ga = t.grad(a);
            for (int64_t i = 0; i < g.numel(); ++i) ga[i] += g[i];
        }
        if (t.requires_grad(b)) {
            Tensor& gb = t.grad(b);
            for (int64_t i = 0; i < g.numel(); ++i) gb[i] -= g[i];
        }
    });
}

VarId Tape::mul(VarId a, VarId b) {
    const Tensor& va = val(a);
    const Tensor& vb = val(b);
    if (!va.same_shape(vb)) throw DimensionError("mul: shape mismatch");
    Tensor out(va.shape());
    for (int64_t i = 0; i < out.numel(); ++i) out[i] = va[i] * vb[i];
    return push(std::move(out), {a, b}, [a, b](Tape& t, VarId self) {
        const Tensor& g = t.grad(self);
        const Tensor& va2 = t.val(a);
        const Tensor& vb2 = t.val(b);
        if (t.requires_grad(a)) {
            Tensor& ga = t.grad(a);
            for (int64_t i = 0; i < g.numel(); ++i) ga[i] += g[i] * vb2[i];
        }
        if (t.requires_grad(b)) {
            Tensor& gb = t.grad(b);
            for (int64_t i = 0; i < g.numel(); ++i) gb[i] += g[i] * va2[i];
        }
    });
}

VarId Tape::scale(VarId a, double s) {
    const Tensor& va = val(a);
    Tensor out(va.shape());
    for (int64_t i = 0; i < out.numel(); ++i) out[i] = va[i] * s;
    return push(std::move(out), {a}, [a, s](Tape& t, VarId self) {
        const Tensor& g = t.grad(self);
        Tensor& ga = t.grad(a);
        for (int64_t i = 0; i < g.numel(); ++i) ga[i] += g[i] * s;
    });
}

VarId Tape::add_n(const std::vector<VarId>& xs) {
    if (xs.empty()) throw ValidationError("add_n of nothing");
    Tensor out(val(xs[0]).shape());
    for (VarId x : xs) {
        const Tensor& v = val(x);
        if (!v.same_shape(out)) throw DimensionError("add_n: shape mismatch");
        for (int64_t i = 0; i < out.numel(); ++i) out[i] += v[i];
    }
    std::vector<VarId> parents = xs;
    return push(std::move(out), parents, [parents](Tape& t, VarId self) {
        const Tensor& g = t.grad(self);
        for (VarId x : parents) {
            if (!t.requires_grad(x)) continue;
            Tensor& gx = t.grad(x);
            for (int64_t i = 0; i < g.numel(); ++i) gx[i] += g[i];
        }
    });
}

VarId Tape::relu(VarId a) {
    const Tensor& va = val(a);
    Tensor out(va.shape());
    for (int64_t i = 0; i < out.numel(); ++i) out[i] = va[i] > 0.0 ? va[i] : 0.0;
    return push(std::move(out), {a}, [a](Tape& t, VarId self) {
        const Tensor& g = t.grad(self);
        const Tensor& va2 = t.val(a);
        Tensor& ga = t.grad(a);
        for (int64_t i = 0; i < g.numel(); ++i)
            if (va2[i] > 0.0) ga[i] += g[i];
    });
}

VarId Tape::softplus(VarId a) {
    const Tensor& va = val(a);
    Tensor out(va.shape());
    for (int64_t i = 0; i < out.numel(); ++i) out[i] = axf::softplus(va[i]);
    return push(std::move(out), {a}, [a](Tape& t, VarId self) {
        const Tensor& g = t.grad(self);
        const Tensor& va2 = t.val(a);
        Tensor& ga = t.grad(a);
        for (int64_t i = 0; i < g.numel(); ++i) ga[i] += g[i] * sigmoid(va2[i]);
    });
}

VarId Tape::sum(VarId a) {
    const Tensor& va = val(a);
    double s = 0.0;
    for (int64_t i = 0; i < va.numel(); ++i) s += va[i];
    return push(Tensor({1}, {s}), {a}, [a](Tape& t, VarId self) {
        const double g = t.grad(self)[0];
        Tensor& ga = t.grad(a);
        for (int64_t i = 0; i < ga.numel(); ++i) ga[i] += g;
    });
}

VarId Tape::reshape(VarId a, std::vector<int64_t> shape) {
    Tensor out = val(a).reshaped(std::move(shape));
    return push(std::move(out), {a}, [a](Tape& t, VarId self) {
        const Tensor& g = t.grad(self);
        Tensor& ga = t.grad(a);
        for (int64_t i = 0; i < g.numel(); ++i) ga[i] += g[i];
    });
}

VarId Tape::slice_rows(VarId a, int64_t row0, int64_t row1) {
    const Tensor& va = val(a);
    if (va.ndim() < 2) throw DimensionError("slice_rows requires >= 2-D");
    if (row0 < 0 || row1 > va.dim(0) || row0 >= row1) throw DimensionError("slice_rows range invalid");
    std::vector<int64_t> shape = va.shape();
    shape[0] = row1 - row0;
    const int64_t stride = va.numel() / va.dim(0);
    Tensor out(shape);
    std::copy(va.data() + row0 * stride, va.data() + row1 * stride, out.data());
    return push(std::move(out), {a}, [a, row0, stride](Tape& t, VarId self) {
        const Tensor& g = t.grad(self);
        Tensor& ga = t.grad(a);
        double* dst = ga.data() + row0 * stride;
        for (int64_t i = 0; i < g.numel(); ++i) dst[i] += g[i];
    });
}

void linear_backward(const Tensor& x, const Tensor& w, const Tensor& dy, Tensor* dx, Tensor* dw, Tensor* db) {
    const int64_t in_n = w.dim(0), out_n = w.dim(1);
    const int64_t rows = x.numel() / in_n;
    if (dx) {
        parallel_for_chunks(rows, [&](int64_t b, int64_t e) {
            for (int64_t r = b; r < e; ++r)
                matvec_rowmajor_backx(dy.data() + r * out_n, w.data(), in_n, out_n, dx->data() + r * in_n);
        });
    }
    if (dw) {
        // dW[k][o] += sum_r x[r][k] * dy[r][o]; parallel over k keeps rows disjoint
        parallel_for_chunks(in_n, [&](int64_t kb, int64_t ke) {
            for (int64_t r = 0; r < rows; ++r) {
                const double* xr = x.data() + r * in_n;
                const double* gr = dy.data() + r * out_n;
                for (int64_t k = kb; k < ke; ++k) axpy(xr[k], gr, out_n, dw->data() + k * out_n);
            }
        });
    }
    if (db) {
        for (int64_t r = 0; r < rows; ++r) axpy(1.0, dy.data() + r * out_n, out_n, db->data());
    }
}

VarId Tape::linear(VarId x, VarId w, VarId b) {
    const Tensor& vx = val(x);
    const Tensor& vw = val(w);
    if (vw.ndim() != 2) throw DimensionError("linear weights must be 2-D");
    const int64_t in_n = vw.dim(0), out_n = vw.dim(1);
    if (vx.dim(vx.ndim() - 1) != in_n) throw DimensionError("linear: input last dim != in_dim");
    const double* bias = nullptr;
    if (b != kNoVar) {
        const Tensor& vb = val(b);
        if (vb.numel() != out_n) throw DimensionError("linear: bias length != out_dim");
        bias = vb.data();
    }
    std::vector<int64_t> shape = vx.shape();
    shape.back() = out_n;
    Tensor out(shape);
    const int64_t rows = vx.numel() / in_n;
    parallel_for_chunks(rows, [&](int64_t rb, int64_t re) {
        for (int64_t r = rb; r < re; ++r)
            matvec_rowmajor(vx.data() + r * in_n, vw.data(), bias, in_n, out_n, out.data() + r * out_n);
    });
    return push(std::move(out), {x, w, b}, [x, w, b](Tape& t, VarId self) {
        const Tensor& g = t.grad(self);
        const Tensor& vx2 = t.val(x);
        const Tensor& vw2 = t.val(w);
        Tensor* dx = t.requires_grad(x) ? &t.grad(x) : nullptr;
        Tensor* dw = t.requires_grad(w) ? &t.grad(w) : nullptr;
        Tensor* db = (b != kNoVar && t.requires_grad(b)) ? &t.grad(b) : nullptr;
        linear_backward(vx2, vw2, g, dx, dw, db);
    });
}

VarId Tape::layer_norm(VarId x, VarId gain, VarId bias, double eps) {
    const Tensor& vx = val(x);
    const Tensor& vg = val(gain);
    const Tensor& vb = val(bias);
    const int64_t d = vx.dim(vx.ndim() - 1);
    if (vg.numel() != d || vb.numel() != d) throw DimensionError("layer_norm gain/bias length != last dim");
    const int64_t rows = vx.numel() / d;

    Tensor out(vx.shape());
    auto stats = std::make_shared<std::vector<double>>(static_cast<size_t>(rows * 2));  // (mean, inv_std)
    parallel_for_chunks(rows, [&](int64_t rb, int64_t re) {
        for (int64_t r = rb; r < re; ++r) {
            const double* in = vx.data() + r * d;
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
            (*stats)[static_cast<size_t>(r * 2)] = mean;
            (*stats)[static_cast<size_t>(r * 2 + 1)] = inv;
            for (int64_t i = 0; i < d; ++i) o[i] = (in[i] - mean) * inv * vg[i] + vb[i];
        }
    });
    return push(std::move(out), {x, gain, bias}, [x, gain, bias, d, rows, stats](Tape& t, VarId self) {
        const Tensor& g = t.grad(self);
        const Tensor& vx2 = t.val(x);
        const Tensor& vg2 = t.val(gain);
        Tensor* dx = t.requires_grad(x) ? &t.grad(x) : nullptr;
        Tensor* dgain = t.requires_grad(gain) ? &t.grad(gain) : nullptr;
        Tensor* dbias = t.requires_grad(bias) ? &t.grad(bias) : nullptr;
        for (int64_t r = 0; r < rows; ++r) {
            const double mean = (*stats)[static_cast<size_t>(r * 2)];
            const double inv = (*stats)[static_cast<size_t>(r * 2 + 1)];
            const double* in = vx2.data() + r * d;
            const double* go = g.data() + r * d;
            if (dgain || dbias) {
                for (int64_t i = 0; i < d; ++i) {
                    const double xhat = (in[i] - mean) * inv;
                    if (dgain) (*dgain)[i] += go[i] * xhat;
                    if (dbias) (*dbias)[i] += go[i];
                }
            }
            if (dx) {
                // dxhat = go * gain; dx = inv * (dxhat - mean(dxhat) - xhat * mean(dxhat*xhat))
                double m1 = 0.0, m2 = 0.0;
                for (int64_t i = 0; i < d; ++i) {
                    const double dxh = go[i] * vg2[i];
                    const double xhat = (in[i] - mean) * inv;
                    m1 += dxh;
                    m2 += dxh * xhat;
                }
                m1 /= static_cast<double>(d);
                m2 /= static_cast<double>(d);
                double* dxr = dx->data() + r * d;
                for (int64_t i = 0; i < d; ++i) {
                    const double dxh = go[i] * vg2[i];
                    const double xhat = (in[i] - mean) * inv;
                    dxr[i] += inv * (dxh - m1 - xhat * m2);
                }
            }
        }
    });
}

namespace {

struct AxialSaved {
    Tensor k, q, v;
    std::vector<double> probs_row, probs_col;
    std::vector<double> logn_row, logn_col;
    Tensor r_row, r_col;
};

}  // namespace

VarId Tape::axial_additive_attention(VarId grid, VarId wq, VarId wk, VarId wv, const AxialMaskSet& masks, int heads) {
    const Tensor& vg = val(grid);
    if (vg.ndim() != 3) throw DimensionError("axial attention expects H x W x D grid");
    const int64_t h = vg.dim(0), w = vg.dim(1), d = vg.dim(2);
    masks.validate_shapes(h, w);
    masks.validate_disjoint();
    masks.validate_no_degenerate();
    const Tensor& vwq = val(wq);
    const Tensor& vwk = val(wk);
    const Tensor& vwv = val(wv);
    if (vwq.dim(0) != d || vwk.dim(0) != d || vwv.dim(0) != d) throw DimensionError("projection in_dim != D");
    if (vwq.dim(1) != vwk.dim(1)) throw DimensionError("Wq/Wk out_dim mismatch");
    if (heads < 1 || vwq.dim(1) % heads != 0 || vwv.dim(1) % heads != 0)
        throw DimensionError("heads must divide projection dims");
    const int64_t dk = vwq.dim(1) / heads, dv = vwv.dim(1) / heads;
    const int64_t dv_total = dv * heads;

    const bool needs_grad = grad_enabled_ && any_requires({grid, wq, wk, wv});
    auto saved = std::make_shared<AxialSaved>();
    const Tensor flat = vg.reshaped({h * w, d});
    saved->q = apply_linear(flat, LinearMap(vwq));
    saved->k = apply_linear(flat, LinearMap(vwk));
    saved->v = apply_linear(flat, LinearMap(vwv));
    saved->logn_row.assign(static_cast<size_t>(h * w * heads), kNegInf);
    saved->logn_col.assign(static_cast<size_t>(h * w * heads), kNegInf);
    saved->r_row = Tensor({h * w, dv_total});
    saved->r_col = Tensor({h * w, dv_total});

    const detail::AxisDims dims{h, w, dk, dv, heads};
    detail::axis_attention_forward(saved->k.data(), saved->q.data(), saved->v.data(), dims, masks.row_masks,
                                   GridAxis::Row, saved->r_row.data(), saved->logn_row.data(),
                                   needs_grad ? &saved->probs_row : nullptr);
    detail::axis_attention_forward(saved->k.data(), saved->q.data(), saved->v.data(), dims, masks.col_masks,
                                   GridAxis::Col, saved->r_col.data(), saved->logn_col.data(),
                                   needs_grad ? &saved->probs_col : nullptr);

    Tensor out({h, w, dv_total});
    parallel_for(h * w, [&](int64_t cell) {
        for (int head = 0; head < heads; ++head) {
            const size_t ni = static_cast<size_t>(cell * heads + head);
            const double wr = sigmoid(saved->logn_row[ni] - saved->logn_col[ni]);
            const double* rr = saved->r_row.data() + cell * dv_total + head * dv;
            const double* rc = saved->r_col.data() + cell * dv_total + head * dv;
            double* o = out.data() + cell * dv_total + head * dv;
            for (int64_t di = 0; di < dv; ++di) o[di] = wr * rr[di] + (1.0 - wr) * rc[di];
        }
    });
    out.assert_finite("axial_additive_attention");
    if (!needs_grad) saved.reset();

    AxialMaskSet masks_copy = masks;
    return push(std::move(out), {grid, wq, wk, wv},
                [grid, wq, wk, wv, masks_copy, saved, dims, dv_total](Tape& t, VarId self) {
                    const Tensor& dout = t.grad(self);
                    const int64_t cells = dims.h * dims.w;
                    const int heads = dims.heads;
                    const int64_t dv = dims.dv;

                    Tensor d_r_row({cells, dv_total}), d_r_col({cells, dv_total});
                    std::vector<double> d_logn_row(static_cast<size_t>(cells * heads), 0.0);
                    std::vector<double> d_logn_col(static_cast<size_t>(cells * heads), 0.0);
                    parallel_for(cells, [&](int64_t cell) {
                        for (int head = 0; head < heads; ++head) {
                            const size_t ni = static_cast<size_t>(cell * heads + head);
                            const double wr = sigmoid(saved->logn_row[ni] - saved->logn_col[ni]);
                            const double* go = dout.data() + cell * dv_total + head * dv;
                            const double* rr = saved->r_row.data() + cell * dv_total + head * dv;
                            const double* rc = saved->r_col.data() + cell * dv_total + head * dv;
                            double* drr = d_r_row.data() + cell * dv_total + head * dv;
                            double* drc = d_r_col.data() + cell * dv_total + head * dv;
                            double dwr = 0.0;
                            for (int64_t di = 0; di < dv; ++di) {
                                drr[di] = wr * go[di];
                                drc[di] = (1.0 - wr) * go[di];
                                dwr += go[di] * (rr[di] - rc[di]);
                            }
                            const double sig_prime = wr * (1.0 - wr);
                            d_logn_row[ni] = dwr * sig_prime;
                            d_logn_col[ni] = -dwr * sig_prime;
                        }
                    });

                    Tensor dk_acc(saved->k.shape()), dq_acc(saved->q.shape()), dv_acc(saved->v.shape());
                    detail::axis_attention_backward(saved->k.data(), saved->q.data(), saved->v.data(), dims,
                                                    masks_copy.row_masks, GridAxis::Row, saved->probs_row,
                                                    d_r_row.data(), d_logn_row.data(), dk_acc.data(), dq_acc.data(),
                                                    dv_acc.data());
                    detail::axis_attention_backward(saved->k.data(), saved->q.data(), saved->v.data(), dims,
                                                    masks_copy.col_masks, GridAxis::Col, saved->probs_col,
                                                    d_r_col.data(), d_logn_col.data(), dk_acc.data(), dq_acc.data(),
                                                    dv_acc.data());

                    const Tensor& vg2 = t.val(grid);
                    const Tensor flat2 = vg2.reshaped({cells, vg2.dim(2)});
                    Tensor* dgrid = t.requires_grad(grid) ? &t.grad(grid) : nullptr;
                    Tensor dgrid_flat;
                    if (dgrid) dgrid_flat = Tensor({cells, vg2.dim(2)});
                    linear_backward(flat2, t.val(wk), dk_acc, dgrid ? &dgrid_flat : nullptr,
                                    t.requires_grad(wk) ? &t.grad(wk) : nullptr, nullptr);
                    linear_backward(flat2, t.val(wq), dq_acc, dgrid ? &dgrid_flat : nullptr,
                                    t.requires_grad(wq) ? &t.grad(wq) : nullptr, nullptr);
                    linear_backward(flat2, t.val(wv), dv_acc, dgrid ? &dgrid_flat : nullptr,
                                    t.requires_grad(wv) ? &t.grad(wv) : nullptr, nullptr);
                    if (dgrid)
                        for (int64_t i = 0; i < dgrid->numel(); ++i) (*dgrid)[i] += dgrid_flat[i];
                });
}

VarId Tape::grid_axis_attention(VarId grid, VarId wq, VarId wk, VarId wv, const std::vector<MaskMatrix>& masks,
                                GridAxis axis, int heads) {
    const Tensor& vg = val(grid);
    if (vg.ndim() != 3) throw DimensionError("grid_axis_attention expects H x W x D grid");
    const int64_t h = vg.dim(0), w = vg.dim(1), d = vg.dim(2);
    const int64_t expected = axis == GridAxis::Row ? h : w;
    const int64_t mask_size = axis == GridAxis::Row ? w : h;
    if (static_cast<int64_t>(masks.size()) != expected) throw DimensionError("axis mask count mismatch");
    for (const auto& m : masks)
        if (m.size() != mask_size) throw DimensionError("axis mask size mismatch");
    const Tensor& vwq = val(wq);
    const Tensor& vwk = val(wk);
    const Tensor& vwv = val(wv);
    if (vwq.dim(0) != d || vwk.dim(0) != d || vwv.dim(0) != d) throw DimensionError("projection in_dim != D");
    if (heads < 1 || vwq.dim(1) % heads != 0 || vwv.dim(1) % heads != 0)
        throw DimensionError("heads must divide projection dims");
    const int64_t dk = vwq.dim(1) / heads, dv = vwv.dim(1) / heads;
    const int64_t dv_total = dv * heads;

    const bool needs_grad = grad_enabled_ && any_requires({grid, wq, wk, wv});
    auto saved = std::make_shared<AxialSaved>();
    const Tensor flat = vg.reshaped({h * w, d});
    saved->q = apply_linear(flat, LinearMap(vwq));
    saved->k = apply_linear(flat, LinearMap(vwk));
    saved->v = apply_linear(flat, LinearMap(vwv));

    const detail::AxisDims dims{h, w, dk, dv, heads};
    Tensor out_flat({h * w, dv_total});
    detail::axis_attention_forward(saved->k.data(), saved->q.data(), saved->v.data(), dims, masks, axis,
                                   out_flat.data(), nullptr, needs_grad ? &saved->probs_row : nullptr);
    Tensor out = out_flat.reshaped({h, w, dv_total});
    out.assert_finite("grid_axis_attention");
    if (!needs_grad) saved.reset();

    std::vector<MaskMatrix> masks_copy = masks;
    return push(std::move(out), {grid, wq, wk, wv},
                [grid, wq, wk, wv, masks_copy, saved, dims, axis](Tape& t, VarId self) {
                    const Tensor& dout = t.grad(self);
                    const int64_t cells = dims.h * dims.w;
                    Tensor dk_acc(saved->k.shape()), dq_acc(saved->q.shape()), dv_acc(saved->v.shape());
                    detail::axis_attention_backward(saved->k.data(), saved->q.data(), saved->v.data(), dims,
                                                    masks_copy, axis, saved->probs_row, dout.data(), nullptr,
                                                    dk_acc.data(), dq_acc.data(), dv_acc.data());
                    const Tensor& vg2 = t.val(grid);
                    const Tensor flat2 = vg2.reshaped({cells, vg2.dim(2)});
                    Tensor* dgrid = t.requires_grad(grid) ? &t.grad(grid) : nullptr;
                    Tensor dgrid_flat;
                    if (dgrid) dgrid_flat = Tensor({cells, vg2.dim(2)});
                    linear_backward(flat2, t.val(wk), dk_acc, dgrid ? &dgrid_flat : nullptr,
                                    t.requires_grad(wk) ? &t.grad(wk) : nullptr, nullptr);
                    linear_backward(flat2, t.val(wq), dq_acc, dgrid ? &dgrid_flat : nullptr,
                                    t.requires_grad(wq) ? &t.grad(wq) : nullptr, nullptr);
                    linear_backward(flat2, t.val(wv), dv_acc, dgrid ? &dgrid_flat : nullptr,
                                    t.requires_grad(wv) ? &t.grad(wv) : nullptr, nullptr);
                    if (dgrid)
                        for (int64_t i = 0; i < dgrid->numel(); ++i) (*dgrid)[i] += dgrid_flat[i];
                });
}

namespace {

// block layout of the E0 grid: row 0 game, rows 1-2 teams, rows 3.. players;
// column 0 pre-game, columns 1.. events
struct GridLayout {
    int64_t p, t, d;
    int64_t h() const { return p + 3; }
    int64_t w() const { return t + 1; }
};

}  // namespace

VarId Tape::assemble_grid(VarId game_ctx, VarId game, VarId team_str, VarId team, VarId player_str, VarId player) {
    const Tensor& vctx = val(game_ctx);    // [D]
    const Tensor& vgame = val(game);       // [T x D]
    const Tensor& vtstr = val(team_str);   // [2 x D]
    const Tensor& vteam = val(team);       // [2 x T x D]
    const Tensor& vpstr = val(player_str); // [P x D]
    const Tensor& vplay = val(player);     // [P x T x D]
    if (vgame.ndim() != 2 || vteam.ndim() != 3 || vplay.ndim() != 3 || vctx.ndim() != 1 || vtstr.ndim() != 2 ||
        vpstr.ndim() != 2)
        throw DimensionError("assemble_grid: unexpected block rank");
    const GridLayout lay{vplay.dim(0), vgame.dim(0), vctx.dim(0)};
    if (vteam.dim(0) != 2 || vtstr.dim(0) != 2) throw DimensionError("assemble_grid: team blocks must have 2 rows");
    if (vteam.dim(1) != lay.t || vplay.dim(1) != lay.t) throw DimensionError("assemble_grid: step counts differ");
    for (const Tensor* b : {&vgame, &vtstr, &vteam, &vpstr, &vplay})
        if (b->dim(b->ndim() - 1) != lay.d) throw DimensionError("assemble_grid: embedding dims differ");

    Tensor out({lay.h(), lay.w(), lay.d});
    auto cell = [&](int64_t i, int64_t j) { return out.data() + (i * lay.w() + j) * lay.d; };
    std::copy(vctx.data(), vctx.data() + lay.d, cell(0, 0));
    for (int64_t j = 0; j < lay.t; ++j) std::copy(vgame.data() + j * lay.d, vgame.data() + (j + 1) * lay.d, cell(0, j + 1));
    for (int64_t r = 0; r < 2; ++r) {
        std::copy(vtstr.data() + r * lay.d, vtstr.data() + (r + 1) * lay.d, cell(1 + r, 0));
        for (int64_t j = 0; j < lay.t; ++j)
            std::copy(vteam.data() + (r * lay.t + j) * lay.d, vteam.data() + (r * lay.t + j + 1) * lay.d, cell(1 + r, j + 1));
    }
    for (int64_t pi = 0; pi < lay.p; ++pi) {
        std::copy(vpstr.data() + pi * lay.d, vpstr.data() + (pi + 1) * lay.d, cell(3 + pi, 0));
        for (int64_t j = 0; j < lay.t; ++j)
            std::copy(vplay.data() + (pi * lay.t + j) * lay.d, vplay.data() + (pi * lay.t + j + 1) * lay.d,
                      cell(3 + pi, j + 1));
    }

    return push(std::move(out), {game_ctx, game, team_str, team, player_str, player},
                [game_ctx, game, team_str, team, player_str, player, lay](Tape& t, VarId self) {
                    const Tensor& g = t.grad(self);
                    auto cellg = [&](int64_t i, int64_t j) { return g.data() + (i * lay.w() + j) * lay.d; };
                    auto accum = [&](VarId id, const double* src, int64_t offset) {
                        if (!t.requires_grad(id)) return;
                        double* dst = t.grad(id).data() + offset;
                        for (int64_t x = 0; x < lay.d; ++x) dst[x] += src[x];
                    };
                    accum(game_ctx, cellg(0, 0), 0);
                    for (int64_t j = 0; j < lay.t; ++j) accum(game, cellg(0, j + 1), j * lay.d);
                    for (int64_t r = 0; r < 2; ++r) {
                        accum(team_str, cellg(1 + r, 0), r * lay.d);
                        for (int64_t j = 0; j < lay.t; ++j) accum(team, cellg(1 + r, j + 1), (r * lay.t + j) * lay.d);
                    }
                    for (int64_t pi = 0; pi < lay.p; ++pi) {
                        accum(player_str, cellg(3 + pi, 0), pi * lay.d);
                        for (int64_t j = 0; j < lay.t; ++j)
                            accum(player, cellg(3 + pi, j + 1), (pi * lay.t + j) * lay.d);
                    }
                });
}

VarId Tape::assemble_grid_live(VarId game, VarId team, VarId player) {
    const Tensor& vgame = val(game);   // [T x D]
    const Tensor& vteam = val(team);   // [2 x T x D]
    const Tensor& vplay = val(player); // [P x T x D]
    if (vgame.ndim() != 2 || vteam.ndim() != 3 || vplay.ndim() != 3)
        throw DimensionError("assemble_grid_live: unexpected block rank");
    const int64_t t_steps = vgame.dim(0), d = vgame.dim(1), p = vplay.dim(0);
    if (vteam.dim(0) != 2 || vteam.dim(1) != t_steps || vplay.dim(1) != t_steps)
        throw DimensionError("assemble_grid_live: step counts differ");
    if (vteam.dim(2) != d || vplay.dim(2) != d) throw DimensionError("assemble_grid_live: embedding dims differ");

    const int64_t h = p + 3;
    Tensor out({h, t_steps, d});
    auto cell = [&](int64_t i, int64_t j) { return out.data() + (i * t_steps + j) * d; };
    for (int64_t j = 0; j < t_steps; ++j) std::copy(vgame.data() + j * d, vgame.data() + (j + 1) * d, cell(0, j));
    for (int64_t r = 0; r < 2; ++r)
        for (int64_t j = 0; j < t_steps; ++j)
            std::copy(vteam.data() + (r * t_steps + j) * d, vteam.data() + (r * t_steps + j + 1) * d, cell(1 + r, j));
    for (int64_t pi = 0; pi < p; ++pi)
        for (int64_t j = 0; j < t_steps; ++j)
            std::copy(vplay.data() + (pi * t_steps + j) * d, vplay.data() + (pi * t_steps + j + 1) * d, cell(3 + pi, j));

    return push(std::move(out), {game, team, player}, [game, team, player, t_steps, d, p](Tape& t, VarId self) {
        const Tensor& g = t.grad(self);
        auto cellg = [&](int64_t i, int64_t j) { return g.data() + (i * t_steps + j) * d; };
        auto accum = [&](VarId id, const double* src, int64_t offset) {
            if (!t.requires_grad(id)) return;
            double* dst = t.grad(id).data() + offset;
            for (int64_t x = 0; x < d; ++x) dst[x] += src[x];
        };
        for (int64_t j = 0; j < t_steps; ++j) accum(game, cellg(0, j), j * d);
        for (int64_t r = 0; r < 2; ++r)
            for (int64_t j = 0; j < t_steps; ++j) accum(team, cellg(1 + r, j), (r * t_steps + j) * d);
        for (int64_t pi = 0; pi < p; ++pi)
            for (int64_t j = 0; j < t_steps; ++j) accum(player, cellg(3 + pi, j), (pi * t_steps + j) * d);
    });
}

}  // namespace axf
