#include "train/optim.hpp"

#include <cmath>

namespace axf {

double cosine_lr(int64_t step, int64_t total, double lr_max, double lr_min) {
    if (total < 1) throw ValidationError("cosine_lr needs total >= 1");
    if (step < 0 || step > total) throw ValidationError("cosine_lr step outside [0, total]");
    const double phase = M_PI * static_cast<double>(step) / static_cast<double>(total);
    return lr_min + 0.5 * (lr_max - lr_min) * (1.0 + std::cos(phase));
}

double clip_global_norm(std::vector<Tensor*>& grads, double max_norm) {
    double sq = 0.0;
    for (const Tensor* g : grads)
        for (int64_t i = 0; i < g->numel(); ++i) sq += (*g)[i] * (*g)[i];
    const double norm = std::sqrt(sq);
    if (max_norm > 0.0 && norm > max_norm) {
        const double scale = max_norm / norm;
        for (Tensor* g : grads)
            for (int64_t i = 0; i < g->numel(); ++i) (*g)[i] *= scale;
    }
    return norm;
}

void Adam::update(const std::string& name, Tensor& param, const Tensor& grad, double lr) {
    if (!param.same_shape(grad)) throw DimensionError("adam: grad shape mismatch for " + name);
    if (t_ < 1) throw ValidationError("adam: call begin_step() before update()");
    Moments& st = state_[name];
    if (st.m.empty()) {
        st.m = Tensor(param.shape());
        st.v = Tensor(param.shape());
    }
    const double b1 = cfg_.beta1, b2 = cfg_.beta2;
    const double bc1 = 1.0 - std::pow(b1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(b2, static_cast<double>(t_));
    for (int64_t i = 0; i < param.numel(); ++i) {
        const double g = grad[i];
        st.m[i] = b1 * st.m[i] + (1.0 - b1) * g;
        st.v[i] = b2 * st.v[i] + (1.0 - b2) * g * g;
        const double mhat = st.m[i] / bc1;
        const double vhat = st.v[i] / bc2;
        param[i] -= lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
}

}  // namespace axf
