#pragma once

#include <cstdint>
#include <vector>

#include "core/tensor.hpp"

namespace axf {

// S x S attention mask. Entry (i, j) says whether element i may attend to
// element j. Externally the sentinel values are 0 (attend) and -inf
// (blocked); internally a byte matrix.
class MaskMatrix {
  public:
    MaskMatrix() = default;
    explicit MaskMatrix(int64_t size, bool allow_all = false);

    // Validates the two-sentinel discipline: entries must be exactly 0 or -inf.
    static MaskMatrix from_dense(const Tensor& m);

    static MaskMatrix open(int64_t size) { return MaskMatrix(size, true); }
    static MaskMatrix blocked(int64_t size) { return MaskMatrix(size, false); }
    static MaskMatrix self_only(int64_t size);
    // strict causality: i attends j iff j < i
    static MaskMatrix strict_causal(int64_t size);

    int64_t size() const { return size_; }
    bool allows(int64_t i, int64_t j) const { return allow_[static_cast<size_t>(i * size_ + j)] != 0; }
    void set(int64_t i, int64_t j, bool allow) { allow_[static_cast<size_t>(i * size_ + j)] = allow ? 1 : 0; }

    bool row_fully_masked(int64_t i) const;
    int64_t allowed_in_row(int64_t i) const;

    Tensor to_dense() const;  // 0 / -inf

    bool operator==(const MaskMatrix& o) const { return size_ == o.size_ && allow_ == o.allow_; }

  private:
    int64_t size_ = 0;
    std::vector<uint8_t> allow_;
};

}  // namespace axf
