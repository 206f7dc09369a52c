#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>

#include "core/axial.hpp"
#include "core/rng.hpp"
#include "testutil.hpp"
#include "verify/verify.hpp"

using namespace axf;
using testutil::max_abs_diff;
using testutil::random_tensor;

namespace {

AxialAttentionLayer random_layer(int64_t d, Rng& rng, int heads = 1) {
    AxialAttentionLayer l = AxialAttentionLayer::identity_attention(d, heads);
    l.wq = LinearMap(random_tensor({d, d}, rng));
    l.wk = LinearMap(random_tensor({d, d}, rng));
    l.wv = LinearMap(random_tensor({d, d}, rng));
    return l;
}

}  // namespace

TEST_CASE("unravel permutation is a bijection matching the block construction") {
    UnravelPermutation p(3, 4);
    for (int64_t c = 0; c < p.size(); ++c) CHECK(p.to_col_major(p.to_row_major(c)) == c);
    // cell (i, j): column-major position j*H+i maps to row-major i*W+j
    for (int64_t i = 0; i < 3; ++i)
        for (int64_t j = 0; j < 4; ++j) CHECK(p.to_row_major(p.col_major(i, j)) == p.row_major(i, j));
}

TEST_CASE("single cell: row-blocked self routes all weight to the column axis") {
    Tensor grid({1, 1, 3});
    grid[0] = 0.3;
    grid[1] = -1.2;
    grid[2] = 0.7;
    AxialMaskSet masks;
    masks.row_masks = {MaskMatrix::blocked(1)};
    masks.col_masks = {MaskMatrix::open(1)};
    Rng rng(2);
    AxialAttentionLayer layer = AxialAttentionLayer::identity_attention(3);
    layer.wv = LinearMap(random_tensor({3, 3}, rng));
    AxialAttentionResult r = axial_attention(grid, masks, layer);
    Tensor expect = apply_linear(grid.reshaped({1, 3}), layer.wv);
    CHECK(max_abs_diff(r.out.reshaped({1, 3}), expect) <= 1e-15);
    CHECK(r.row_weight(0, 0, 1, 1, 0) == 0.0);  // row axis fully masked
}

TEST_CASE("constant grid with symmetric masks gives identical cells") {
    Tensor grid = Tensor::full({2, 2, 2}, 0.5);
    AxialMaskSet masks;
    MaskMatrix row(2, true);
    row.set(0, 0, false);
    row.set(1, 1, false);
    masks.row_masks = {row, row};
    masks.col_masks = {MaskMatrix::open(2), MaskMatrix::open(2)};
    AxialAttentionLayer layer = AxialAttentionLayer::identity_attention(2);
    AxialAttentionResult r = axial_attention(grid, masks, layer);
    for (int64_t c = 1; c < 4; ++c) {
        CHECK(r.out[2 * c] == doctest::Approx(r.out[0]));
        CHECK(r.out[2 * c + 1] == doctest::Approx(r.out[1]));
    }
}

TEST_CASE("additive axial equals the sequential oracle on seeded random cases") {
    Rng rng(1001);
    for (int rep = 0; rep < 40; ++rep) {
        const int64_t h = rng.range(1, 7), w = rng.range(1, 7);
        const int64_t dims[] = {1, 2, 4, 8};
        const int64_t d = dims[rng.range(0, 4)];
        Tensor grid = random_tensor({h, w, d}, rng);
        AxialMaskSet masks = random_disjoint_masks(h, w, rng);
        AxialAttentionLayer layer = random_layer(d, rng);
        AxialAttentionResult axial = axial_attention(grid, masks, layer);
        Tensor oracle = sequential_oracle(grid, masks, layer);
        CHECK(max_abs_diff(axial.out, oracle) <= 1e-9);
    }
}

TEST_CASE("equivalence holds with multiple heads") {
    Rng rng(77);
    const int64_t h = 3, w = 4, d = 8;
    Tensor grid = random_tensor({h, w, d}, rng);
    AxialMaskSet masks = random_disjoint_masks(h, w, rng);
    AxialAttentionLayer layer = random_layer(d, rng, 2);
    AxialAttentionResult axial = axial_attention(grid, masks, layer);
    Tensor oracle = sequential_oracle(grid, masks, layer);
    CHECK(max_abs_diff(axial.out, oracle) <= 1e-9);
}

TEST_CASE("H=1 oracle reduces to plain sequential attention over the row") {
    Rng rng(31);
    const int64_t w = 5, d = 3;
    Tensor grid = random_tensor({1, w, d}, rng);
    AxialMaskSet masks;
    MaskMatrix row = MaskMatrix::strict_causal(w);
    // keep cell (0,0) alive through the column axis
    masks.row_masks = {row};
    masks.col_masks.assign(static_cast<size_t>(w), MaskMatrix::open(1));
    AxialAttentionLayer layer = random_layer(d, rng);
    Tensor oracle = sequential_oracle(grid, masks, layer);
    // direct masked attention over the width sequence with the union mask
    MaskMatrix direct(w, false);
    for (int64_t a = 0; a < w; ++a) {
        direct.set(a, a, true);  // column self
        for (int64_t b = 0; b < a; ++b) direct.set(a, b, true);
    }
    MaskedAttentionResult r = masked_attention(grid.reshaped({w, d}), layer.wq, layer.wk, layer.wv, direct);
    CHECK(max_abs_diff(oracle.reshaped({w, d}), r.out) <= 1e-12);
}

TEST_CASE("combined sequence mask matches the enumerated 3x3 pattern") {
    const int64_t h = 3, w = 3;
    AxialMaskSet masks = build_forecast_masks(h, w, 0);
    MaskMatrix m = combined_sequence_mask(masks);
    CHECK(m.size() == 9);
    for (int64_t i = 0; i < h; ++i)
        for (int64_t j = 0; j < w; ++j)
            for (int64_t i2 = 0; i2 < h; ++i2)
                for (int64_t j2 = 0; j2 < w; ++j2) {
                    const bool same_row_earlier = (i == i2) && (j2 < j);  // strict temporal
                    const bool same_col = (j == j2);                     // open agent attention
                    const bool expect = same_row_earlier || same_col;
                    CHECK(m.allows(i * w + j, i2 * w + j2) == expect);
                }
}

TEST_CASE("disjointness violation names the offending cell") {
    AxialMaskSet masks;
    masks.row_masks = {MaskMatrix::open(1)};
    masks.col_masks = {MaskMatrix::open(1)};
    Tensor grid = Tensor::full({1, 1, 2}, 1.0);
    AxialAttentionLayer layer = AxialAttentionLayer::identity_attention(2);
    CHECK_THROWS_WITH_AS(axial_attention(grid, masks, layer),
                         doctest::Contains("disjointness violation at cell (0,0)"), ValidationError);
}

TEST_CASE("degenerate cell is a hard error") {
    AxialMaskSet masks;
    masks.row_masks = {MaskMatrix::blocked(1)};
    masks.col_masks = {MaskMatrix::blocked(1)};
    Tensor grid = Tensor::full({1, 1, 2}, 1.0);
    AxialAttentionLayer layer = AxialAttentionLayer::identity_attention(2);
    CHECK_THROWS_WITH_AS(axial_attention(grid, masks, layer), doctest::Contains("degenerate cell (0,0)"),
                         ValidationError);
    CHECK_THROWS_AS(sequential_oracle(grid, masks, layer), ValidationError);
}

TEST_CASE("combination weights live in [0,1] and hit the exact endpoints") {
    Rng rng(13);
    const int64_t h = 3, w = 4, d = 2;
    Tensor grid = random_tensor({h, w, d}, rng);
    AxialMaskSet masks = build_forecast_masks(h, w, 0);
    AxialAttentionLayer layer = random_layer(d, rng);
    AxialAttentionResult r = axial_attention(grid, masks, layer);
    for (int64_t i = 0; i < h; ++i)
        for (int64_t j = 0; j < w; ++j) {
            const double wr = r.row_weight(i, j, w, 1, 0);
            CHECK(wr >= 0.0);
            CHECK(wr <= 1.0);
        }
    // pre-game column: temporal axis fully masked -> weight exactly 0
    for (int64_t i = 0; i < h; ++i) CHECK(r.row_weight(i, 0, w, 1, 0) == 0.0);

    // column axis fully masked -> weight exactly 1
    AxialMaskSet masks2;
    masks2.row_masks.assign(static_cast<size_t>(h), MaskMatrix::open(w));
    masks2.col_masks.assign(static_cast<size_t>(w), MaskMatrix::blocked(h));
    AxialAttentionResult r2 = axial_attention(grid, masks2, layer);
    for (int64_t i = 0; i < h; ++i)
        for (int64_t j = 0; j < w; ++j) CHECK(r2.row_weight(i, j, w, 1, 0) == 1.0);
}

TEST_CASE("stacked: trivial row masks reduce to pure column attention") {
    Rng rng(17);
    const int64_t h = 4, d = 3;
    Tensor grid = random_tensor({h, 1, d}, rng);
    AxialMaskSet masks;
    masks.row_masks.assign(static_cast<size_t>(h), MaskMatrix::self_only(1));
    masks.col_masks = {MaskMatrix::open(h)};
    AxialAttentionLayer lrow = AxialAttentionLayer::identity_attention(d);
    AxialAttentionLayer lcol = random_layer(d, rng);
    Tensor stacked = stacked_axial_attention(grid, masks, lrow, lcol);
    // identity row stage with self-only mask passes values through unchanged
    Tensor colonly = axis_attention(grid, masks.col_masks, GridAxis::Col, lcol.wq, lcol.wk, lcol.wv);
    CHECK(max_abs_diff(stacked, colonly) <= 1e-12);
}

TEST_CASE("stacked differs from additive on a seeded case") {
    Rng rng(19);
    const int64_t h = 3, w = 3, d = 4;
    Tensor grid = random_tensor({h, w, d}, rng);
    AxialMaskSet masks = build_forecast_masks(h, w, 0);
    AxialAttentionLayer layer = random_layer(d, rng);
    AxialAttentionResult additive = axial_attention(grid, masks, layer);
    Tensor stacked = stacked_axial_attention(grid, masks, layer, layer);
    CHECK(max_abs_diff(additive.out, stacked) > 1e-6);
}

TEST_CASE("stacked with fully open masks equals per-axis oracle composition") {
    Rng rng(29);
    const int64_t h = 2, w = 2, d = 3;
    Tensor grid = random_tensor({h, w, d}, rng);
    AxialMaskSet open_masks;
    open_masks.row_masks.assign(static_cast<size_t>(h), MaskMatrix::open(w));
    open_masks.col_masks.assign(static_cast<size_t>(w), MaskMatrix::open(h));
    AxialAttentionLayer lrow = random_layer(d, rng);
    AxialAttentionLayer lcol = random_layer(d, rng);
    Tensor stacked = stacked_axial_attention(grid, open_masks, lrow, lcol);

    // sequential oracle restricted to one live axis at a time
    AxialMaskSet row_only;
    row_only.row_masks.assign(static_cast<size_t>(h), MaskMatrix::open(w));
    row_only.col_masks.assign(static_cast<size_t>(w), MaskMatrix::blocked(h));
    AxialMaskSet col_only;
    col_only.row_masks.assign(static_cast<size_t>(h), MaskMatrix::blocked(w));
    col_only.col_masks.assign(static_cast<size_t>(w), MaskMatrix::open(h));
    Tensor stage1 = sequential_oracle(grid, row_only, lrow);
    Tensor stage2 = sequential_oracle(stage1, col_only, lcol);
    CHECK(max_abs_diff(stacked, stage2) <= 1e-12);
}

TEST_CASE("build_forecast_masks: strict temporal pattern and disjointness") {
    AxialMaskSet masks = build_forecast_masks(2, 3, 0);
    const MaskMatrix& row = masks.row_masks[0];
    CHECK(row.row_fully_masked(0));  // pre-game column attends to nothing temporally
    CHECK(row.allows(1, 0));
    CHECK_FALSE(row.allows(1, 1));
    CHECK(row.allows(2, 0));
    CHECK(row.allows(2, 1));
    CHECK_FALSE(row.allows(2, 2));
    CHECK_NOTHROW(masks.validate_disjoint());
    CHECK_NOTHROW(masks.validate_no_degenerate());
    for (const auto& col : masks.col_masks)
        for (int64_t i = 0; i < 2; ++i) CHECK_FALSE(col.row_fully_masked(i));
}

TEST_CASE("causality: perturbing step t leaves earlier outputs bit-identical") {
    Rng rng(43);
    const int64_t h = 4, w = 6, d = 3;
    Tensor grid = random_tensor({h, w, d}, rng);
    AxialMaskSet masks = build_forecast_masks(h, w, 0);
    AxialAttentionLayer layer = random_layer(d, rng);
    AxialAttentionResult base = axial_attention(grid, masks, layer);
    Tensor base_oracle = sequential_oracle(grid, masks, layer);

    for (int64_t t = 1; t < w; ++t) {
        Tensor perturbed = grid;
        for (int64_t i = 0; i < h; ++i)
            for (int64_t x = 0; x < d; ++x) perturbed.at3(i, t, x) += rng.uniform(0.5, 1.5);
        AxialAttentionResult out = axial_attention(perturbed, masks, layer);
        Tensor oracle = sequential_oracle(perturbed, masks, layer);
        for (int64_t i = 0; i < h; ++i)
            for (int64_t j = 0; j < t; ++j)
                for (int64_t x = 0; x < d; ++x) {
                    CHECK(out.out.at3(i, j, x) == base.out.at3(i, j, x));
                    CHECK(oracle.at3(i, j, x) == base_oracle.at3(i, j, x));
                }
    }
}

TEST_CASE("agent-permutation equivariance") {
    Rng rng(53);
    const int64_t h = 4, w = 3, d = 2;
    Tensor grid = random_tensor({h, w, d}, rng);
    AxialMaskSet masks = build_forecast_masks(h, w, 0);
    AxialAttentionLayer layer = random_layer(d, rng);
    AxialAttentionResult base = axial_attention(grid, masks, layer);

    std::vector<int64_t> perm{2, 0, 3, 1};
    Tensor permuted({h, w, d});
    for (int64_t i = 0; i < h; ++i)
        for (int64_t j = 0; j < w; ++j)
            for (int64_t x = 0; x < d; ++x) permuted.at3(i, j, x) = grid.at3(perm[static_cast<size_t>(i)], j, x);
    // forecast masks are agent-symmetric, so the mask set is unchanged
    AxialAttentionResult out = axial_attention(permuted, masks, layer);
    for (int64_t i = 0; i < h; ++i)
        for (int64_t j = 0; j < w; ++j)
            for (int64_t x = 0; x < d; ++x)
                CHECK(std::fabs(out.out.at3(i, j, x) - base.out.at3(perm[static_cast<size_t>(i)], j, x)) <= 1e-12);
}

TEST_CASE("random disjoint masks satisfy their contract") {
    Rng rng(99);
    for (int rep = 0; rep < 25; ++rep) {
        const int64_t h = rng.range(1, 7), w = rng.range(1, 7);
        AxialMaskSet masks = random_disjoint_masks(h, w, rng);
        CHECK_NOTHROW(masks.validate_shapes(h, w));
        CHECK_NOTHROW(masks.validate_disjoint());
        CHECK_NOTHROW(masks.validate_no_degenerate());
    }
}
