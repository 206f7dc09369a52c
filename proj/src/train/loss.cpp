#include "train/loss.hpp"

#include <cmath>
#include <memory>

#include "core/ops.hpp"

namespace axf {

namespace {

constexpr double kPmfFloor = 1e-300;

void check_counts(const Tensor& raw, int64_t params_per, const Tensor& y, const Tensor& weight) {
    if (raw.numel() != y.numel() * params_per) throw DimensionError("nll: raw/target count mismatch");
    if (y.numel() != weight.numel()) throw DimensionError("nll: weight count mismatch");
}

double norm_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }
double norm_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI); }

}  // namespace

VarId poisson_nll_op(Tape& t, VarId raw, Tensor y, Tensor weight) {
    const Tensor& vr = t.val(raw);
    check_counts(vr, 1, y, weight);
    double total = 0.0;
    for (int64_t i = 0; i < y.numel(); ++i) {
        if (weight[i] == 0.0) continue;
        if (y[i] < 0.0) throw ValidationError("poisson target must be nonnegative");
        const double lam = softplus(vr[i]);
        total += weight[i] * (lam - y[i] * log_softplus(vr[i]) + std::lgamma(y[i] + 1.0));
    }
    auto ys = std::make_shared<Tensor>(std::move(y));
    auto ws = std::make_shared<Tensor>(std::move(weight));
    return t.emplace(Tensor({1}, {total}), {raw}, [raw, ys, ws](Tape& tp, VarId self) {
        const double g = tp.grad(self)[0];
        if (!tp.requires_grad(raw)) return;
        const Tensor& vr2 = tp.val(raw);
        Tensor& dr = tp.grad(raw);
        for (int64_t i = 0; i < ys->numel(); ++i) {
            const double w = (*ws)[i];
            if (w == 0.0) continue;
            const double r = vr2[i];
            const double s = sigmoid(r);
            // d log(softplus(r)) / dr; -> 1 as r -> -inf
            const double ratio = r < -30.0 ? 1.0 : s / softplus(r);
            dr[i] += g * w * (s - (*ys)[i] * ratio);
        }
    });
}

VarId bernoulli_nll_op(Tape& t, VarId raw, Tensor y, Tensor weight) {
    const Tensor& vr = t.val(raw);
    check_counts(vr, 1, y, weight);
    double total = 0.0;
    for (int64_t i = 0; i < y.numel(); ++i) {
        if (weight[i] == 0.0) continue;
        if (y[i] != 0.0 && y[i] != 1.0) throw ValidationError("bernoulli target must be 0 or 1");
        const double r = vr[i];
        total += weight[i] * (std::max(r, 0.0) - r * y[i] + std::log1p(std::exp(-std::fabs(r))));
    }
    auto ys = std::make_shared<Tensor>(std::move(y));
    auto ws = std::make_shared<Tensor>(std::move(weight));
    return t.emplace(Tensor({1}, {total}), {raw}, [raw, ys, ws](Tape& tp, VarId self) {
        const double g = tp.grad(self)[0];
        if (!tp.requires_grad(raw)) return;
        const Tensor& vr2 = tp.val(raw);
        Tensor& dr = tp.grad(raw);
        for (int64_t i = 0; i < ys->numel(); ++i) {
            const double w = (*ws)[i];
            if (w == 0.0) continue;
            dr[i] += g * w * (sigmoid(vr2[i]) - (*ys)[i]);
        }
    });
}

VarId log_gaussian_nll_op(Tape& t, VarId raw, Tensor y, Tensor weight) {
    const Tensor& vr = t.val(raw);
    check_counts(vr, 2, y, weight);
    double total = 0.0;
    for (int64_t i = 0; i < y.numel(); ++i) {
        if (weight[i] == 0.0) continue;
        if (y[i] < 0.0) throw ValidationError("log-gaussian target must be nonnegative");
        double mu, sigma;
        log_gaussian_from_raw(vr[2 * i], vr[2 * i + 1], &mu, &sigma);
        const int64_t k = static_cast<int64_t>(y[i]);
        const double hi = norm_cdf((std::log(static_cast<double>(k + 1)) - mu) / sigma);
        const double lo = k == 0 ? 0.0 : norm_cdf((std::log(static_cast<double>(k)) - mu) / sigma);
        total += weight[i] * -std::log(std::max(hi - lo, kPmfFloor));
    }
    auto ys = std::make_shared<Tensor>(std::move(y));
    auto ws = std::make_shared<Tensor>(std::move(weight));
    return t.emplace(Tensor({1}, {total}), {raw}, [raw, ys, ws](Tape& tp, VarId self) {
        const double g = tp.grad(self)[0];
        if (!tp.requires_grad(raw)) return;
        const Tensor& vr2 = tp.val(raw);
        Tensor& dr = tp.grad(raw);
        for (int64_t i = 0; i < ys->numel(); ++i) {
            const double w = (*ws)[i];
            if (w == 0.0) continue;
            double mu, sigma;
            log_gaussian_from_raw(vr2[2 * i], vr2[2 * i + 1], &mu, &sigma);
            const int64_t k = static_cast<int64_t>((*ys)[i]);
            const double zhi = (std::log(static_cast<double>(k + 1)) - mu) / sigma;
            const double pmf_hi = norm_cdf(zhi);
            double pmf = pmf_hi, dmu = -norm_pdf(zhi) / sigma, dsig = -norm_pdf(zhi) * zhi / sigma;
            if (k > 0) {
                const double zlo = (std::log(static_cast<double>(k)) - mu) / sigma;
                pmf -= norm_cdf(zlo);
                dmu += norm_pdf(zlo) / sigma;
                dsig += norm_pdf(zlo) * zlo / sigma;
            }
            if (pmf <= kPmfFloor) continue;  // clamped region: no gradient
            dr[2 * i] += g * w * -dmu / pmf;
            dr[2 * i + 1] += g * w * -dsig / pmf * sigmoid(vr2[2 * i + 1]);
        }
    });
}

VarId discrete_nll_op(Tape& t, VarId raw, Tensor labels, Tensor weight) {
    const Tensor& vr = t.val(raw);
    const int64_t k = vr.dim(vr.ndim() - 1);
    check_counts(vr, k, labels, weight);
    double total = 0.0;
    for (int64_t i = 0; i < labels.numel(); ++i) {
        if (weight[i] == 0.0) continue;
        const int64_t label = static_cast<int64_t>(labels[i]);
        if (label < 0 || label >= k) throw ValidationError("discrete label out of range");
        const double* row = vr.data() + i * k;
        double m = row[0];
        for (int64_t c = 1; c < k; ++c) m = std::max(m, row[c]);
        double lse = 0.0;
        for (int64_t c = 0; c < k; ++c) lse += std::exp(row[c] - m);
        total += weight[i] * (m + std::log(lse) - row[label]);
    }
    auto ys = std::make_shared<Tensor>(std::move(labels));
    auto ws = std::make_shared<Tensor>(std::move(weight));
    return t.emplace(Tensor({1}, {total}), {raw}, [raw, ys, ws, k](Tape& tp, VarId self) {
        const double g = tp.grad(self)[0];
        if (!tp.requires_grad(raw)) return;
        const Tensor& vr2 = tp.val(raw);
        Tensor& dr = tp.grad(raw);
        for (int64_t i = 0; i < ys->numel(); ++i) {
            const double w = (*ws)[i];
            if (w == 0.0) continue;
            const double* row = vr2.data() + i * k;
            double m = row[0];
            for (int64_t c = 1; c < k; ++c) m = std::max(m, row[c]);
            double lse = 0.0;
            for (int64_t c = 0; c < k; ++c) lse += std::exp(row[c] - m);
            const int64_t label = static_cast<int64_t>((*ys)[i]);
            for (int64_t c = 0; c < k; ++c) {
                const double p = std::exp(row[c] - m) / lse;
                dr[i * k + c] += g * w * (p - (c == label ? 1.0 : 0.0));
            }
        }
    });
}

namespace {

VarId family_nll(Tape& t, const DistSpec& spec, VarId raw, Tensor y, Tensor weight) {
    switch (spec.family) {
        case DistFamily::Poisson: return poisson_nll_op(t, raw, std::move(y), std::move(weight));
        case DistFamily::Bernoulli: return bernoulli_nll_op(t, raw, std::move(y), std::move(weight));
        case DistFamily::LogGaussian: return log_gaussian_nll_op(t, raw, std::move(y), std::move(weight));
        case DistFamily::Discrete: return discrete_nll_op(t, raw, std::move(y), std::move(weight));
    }
    throw ValidationError("unknown family");
}

}  // namespace

LossResult match_loss(Tape& t, const ModelForward& fwd, const ModelConfig& cfg, const TargetBundle& targets,
                      const MatchValidity* validity, const std::map<std::string, double>* loss_weights) {
    const int64_t w = fwd.width;
    const int64_t p = fwd.height - 3;
    const int64_t offset = fwd.has_pregame ? 0 : 1;
    if (targets.player.dim(0) != p) throw DimensionError("targets player count mismatch");
    if (targets.player.dim(1) < w + offset) throw DimensionError("targets narrower than forecasts");

    auto step_valid = [&](int64_t grid_col) -> double {
        if (!validity) return 1.0;
        const int64_t event_step = grid_col + offset - 1;  // -1 = pre-game column
        if (event_step < 0) return 1.0;
        return validity->steps[static_cast<size_t>(event_step)] ? 1.0 : 0.0;
    };
    auto player_valid = [&](int64_t pi) -> double {
        if (!validity) return 1.0;
        return validity->players[static_cast<size_t>(pi)] ? 1.0 : 0.0;
    };

    LossResult res;
    std::vector<VarId> terms;
    for (size_t ai = 0; ai < cfg.action_heads.size(); ++ai) {
        const auto& head = cfg.action_heads[ai];
        double lw = 1.0;
        if (loss_weights) {
            if (auto it = loss_weights->find(head.action); it != loss_weights->end()) lw = it->second;
        }
        Tensor yp({p, w}), wp({p, w});
        for (int64_t pi = 0; pi < p; ++pi)
            for (int64_t col = 0; col < w; ++col) {
                yp.at2(pi, col) = targets.player.at3(pi, col + offset, static_cast<int64_t>(ai));
                wp.at2(pi, col) = lw * player_valid(pi) * step_valid(col);
            }
        const VarId lp = family_nll(t, head.dist, fwd.player_raw[ai], std::move(yp), std::move(wp));
        terms.push_back(lp);
        res.values.per_target.push_back({"player." + head.action, t.val(lp)[0]});

        Tensor yt({2, w}), wt({2, w});
        for (int64_t row = 0; row < 2; ++row)
            for (int64_t col = 0; col < w; ++col) {
                yt.at2(row, col) = targets.team.at3(row, col + offset, static_cast<int64_t>(ai));
                wt.at2(row, col) = lw * step_valid(col);
            }
        const VarId lt = family_nll(t, head.dist, fwd.team_raw[ai], std::move(yt), std::move(wt));
        terms.push_back(lt);
        res.values.per_target.push_back({"team." + head.action, t.val(lt)[0]});
    }

    Tensor yo({w}), wo({w});
    for (int64_t col = 0; col < w; ++col) {
        yo[col] = static_cast<double>(targets.outcome);
        wo[col] = step_valid(col);
    }
    const VarId lo = discrete_nll_op(t, fwd.outcome_raw, std::move(yo), std::move(wo));
    terms.push_back(lo);
    res.values.per_target.push_back({"outcome", t.val(lo)[0]});

    res.total = t.add_n(terms);
    res.values.total = t.val(res.total)[0];
    return res;
}

}  // namespace axf
