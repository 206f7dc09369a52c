#include "core/mask.hpp"

#include <cmath>
#include <limits>

namespace axf {

MaskMatrix::MaskMatrix(int64_t size, bool allow_all) : size_(size) {
    if (size <= 0) throw DimensionError("mask size must be positive");
    allow_.assign(static_cast<size_t>(size * size), allow_all ? 1 : 0);
}

MaskMatrix MaskMatrix::from_dense(const Tensor& m) {
    if (m.ndim() != 2 || m.dim(0) != m.dim(1)) throw DimensionError("mask must be square, got " + shape_str(m.shape()));
    MaskMatrix out(m.dim(0), false);
    for (int64_t i = 0; i < m.dim(0); ++i) {
        for (int64_t j = 0; j < m.dim(1); ++j) {
            const double v = m.at2(i, j);
            if (v == 0.0) {
                out.set(i, j, true);
            } else if (std::isinf(v) && v < 0.0) {
                out.set(i, j, false);
            } else {
                throw ValidationError("mask entry (" + std::to_string(i) + "," + std::to_string(j) +
                                      ") is not a sentinel (must be 0 or -inf)");
            }
        }
    }
    return out;
}

MaskMatrix MaskMatrix::self_only(int64_t size) {
    MaskMatrix m(size, false);
    for (int64_t i = 0; i < size; ++i) m.set(i, i, true);
    return m;
}

MaskMatrix MaskMatrix::strict_causal(int64_t size) {
    MaskMatrix m(size, false);
    for (int64_t i = 0; i < size; ++i)
        for (int64_t j = 0; j < i; ++j) m.set(i, j, true);
    return m;
}

bool MaskMatrix::row_fully_masked(int64_t i) const { return allowed_in_row(i) == 0; }

int64_t MaskMatrix::allowed_in_row(int64_t i) const {
    int64_t n = 0;
    for (int64_t j = 0; j < size_; ++j) n += allows(i, j) ? 1 : 0;
    return n;
}

Tensor MaskMatrix::to_dense() const {
    Tensor t({size_, size_});
    const double ninf = -std::numeric_limits<double>::infinity();
    for (int64_t i = 0; i < size_; ++i)
        for (int64_t j = 0; j < size_; ++j) t.at2(i, j) = allows(i, j) ? 0.0 : ninf;
    return t;
}

}  // namespace axf
