#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "core/rng.hpp"
#include "core/tensor.hpp"

namespace axf::testutil {

inline Tensor random_tensor(std::vector<int64_t> shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Tensor t(std::move(shape));
    for (int64_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(lo, hi);
    return t;
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
    double m = 0.0;
    for (int64_t i = 0; i < a.numel(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
    return m;
}

inline double max_abs(const Tensor& a) {
    double m = 0.0;
    for (int64_t i = 0; i < a.numel(); ++i) m = std::max(m, std::fabs(a[i]));
    return m;
}

// Central finite differences against an analytic gradient. 'param' is
// perturbed in place; 'loss' re-runs the forward pass; 'analytic' is the
// gradient produced by the implementation under test. Returns the largest
// relative error over all elements.
inline double fd_max_rel_err(Tensor& param, const Tensor& analytic, const std::function<double()>& loss,
                             double step = 1e-5) {
    double worst = 0.0;
    for (int64_t i = 0; i < param.numel(); ++i) {
        const double keep = param[i];
        param[i] = keep + step;
        const double up = loss();
        param[i] = keep - step;
        const double down = loss();
        param[i] = keep;
        const double fd = (up - down) / (2.0 * step);
        const double g = analytic[i];
        const double rel = std::fabs(fd - g) / std::max(1e-6, std::fabs(fd) + std::fabs(g));
        worst = std::max(worst, rel);
    }
    return worst;
}

}  // namespace axf::testutil
