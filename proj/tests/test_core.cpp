#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>

#include "core/mask.hpp"
#include "core/ops.hpp"
#include "core/rng.hpp"
#include "core/tensor.hpp"
#include "testutil.hpp"

using namespace axf;
using testutil::max_abs_diff;
using testutil::random_tensor;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Independent brute-force attention: plain double loops over every (i, j)
// pair, long-double accumulation, no max-shift. Oracle for masked_attention.
Tensor brute_force_attention(const Tensor& seq, const Tensor& wq, const Tensor& wk, const Tensor& wv,
                             const MaskMatrix& mask) {
    const int64_t s = seq.dim(0), d = seq.dim(1);
    const int64_t dk = wq.dim(1), dv = wv.dim(1);
    auto project = [&](const Tensor& w, int64_t out_dim) {
        std::vector<std::vector<long double>> r(static_cast<size_t>(s), std::vector<long double>(static_cast<size_t>(out_dim), 0.0L));
        for (int64_t i = 0; i < s; ++i)
            for (int64_t o = 0; o < out_dim; ++o)
                for (int64_t k = 0; k < d; ++k) r[i][o] += static_cast<long double>(seq.at2(i, k)) * w.at2(k, o);
        return r;
    };
    const auto q = project(wq, dk);
    const auto k = project(wk, dk);
    const auto v = project(wv, dv);
    const long double scale = 1.0L / std::sqrt(static_cast<long double>(dk));

    Tensor out({s, dv});
    for (int64_t i = 0; i < s; ++i) {
        long double denom = 0.0L;
        std::vector<long double> num(static_cast<size_t>(dv), 0.0L);
        for (int64_t j = 0; j < s; ++j) {
            if (!mask.allows(i, j)) continue;
            long double logit = 0.0L;
            for (int64_t x = 0; x < dk; ++x) logit += k[i][x] * q[j][x];
            const long double e = expl(logit * scale);
            denom += e;
            for (int64_t x = 0; x < dv; ++x) num[x] += e * v[j][x];
        }
        for (int64_t x = 0; x < dv; ++x) out.at2(i, x) = denom == 0.0L ? 0.0 : static_cast<double>(num[x] / denom);
    }
    return out;
}

}  // namespace

TEST_CASE("tensor shape and invariants") {
    Tensor t({2, 3});
    CHECK(t.numel() == 6);
    CHECK_THROWS_AS(Tensor({2, 0}), DimensionError);
    CHECK_THROWS_AS(Tensor({2, 2}, {1.0, 2.0, 3.0}), DimensionError);
    Tensor r = t.reshaped({3, 2});
    CHECK(r.dim(0) == 3);
    CHECK_THROWS_AS(t.reshaped({4, 2}), DimensionError);
    t.at2(1, 2) = std::nan("");
    CHECK_FALSE(t.all_finite());
    CHECK_THROWS_AS(t.assert_finite("test"), ValidationError);
}

TEST_CASE("mask sentinel discipline") {
    Tensor m = Tensor::from_rows({{0.0, -kInf}, {-kInf, 0.0}});
    MaskMatrix mask = MaskMatrix::from_dense(m);
    CHECK(mask.allows(0, 0));
    CHECK_FALSE(mask.allows(0, 1));

    Tensor bad = Tensor::from_rows({{0.0, -1.0}, {0.0, 0.0}});
    CHECK_THROWS_AS(MaskMatrix::from_dense(bad), ValidationError);

    CHECK(MaskMatrix::strict_causal(3).row_fully_masked(0));
    CHECK(MaskMatrix::strict_causal(3).allows(2, 1));
    CHECK_FALSE(MaskMatrix::strict_causal(3).allows(1, 1));
}

TEST_CASE("softmax_rows uniform rows") {
    SoftmaxResult r = softmax_rows(Tensor::from_rows({{0.0, 0.0}, {0.0, 0.0}}));
    for (int64_t i = 0; i < 2; ++i)
        for (int64_t j = 0; j < 2; ++j) CHECK(r.probs.at2(i, j) == doctest::Approx(0.5));
    CHECK(r.norm[0].raw() == doctest::Approx(2.0));
    CHECK(r.norm[1].raw() == doctest::Approx(2.0));
}

TEST_CASE("softmax_rows fully masked row and sentinel zero") {
    Tensor a = Tensor::from_rows({{-kInf, -kInf}, {1.0, -kInf}});
    SoftmaxResult r = softmax_rows(a);
    CHECK(r.probs.at2(0, 0) == 0.0);
    CHECK(r.probs.at2(0, 1) == 0.0);
    CHECK(r.norm[0].empty());
    CHECK(r.norm[0].log() == -kInf);
    // blocked entry weight is exactly zero even in a live row
    CHECK(r.probs.at2(1, 1) == 0.0);
    CHECK(r.probs.at2(1, 0) == 1.0);
}

TEST_CASE("softmax_rows rejects NaN and +inf") {
    Tensor a = Tensor::from_rows({{0.0, kInf}});
    CHECK_THROWS_AS(softmax_rows(a), ValidationError);
}

TEST_CASE("softmax_rows row-stochastic and overflow-safe") {
    Rng rng(11);
    Tensor a = random_tensor({6, 6}, rng, -1000.0, 1000.0);
    SoftmaxResult r = softmax_rows(a);
    for (int64_t i = 0; i < 6; ++i) {
        double sum = 0.0;
        for (int64_t j = 0; j < 6; ++j) sum += r.probs.at2(i, j);
        CHECK(std::fabs(sum - 1.0) <= 1e-9);
        CHECK(std::isfinite(r.norm[static_cast<size_t>(i)].log()));
    }
}

TEST_CASE("softmax_rows matches naive high-precision normalizer") {
    Rng rng(7);
    Tensor a = random_tensor({5, 5}, rng, -3.0, 3.0);
    SoftmaxResult r = softmax_rows(a);
    for (int64_t i = 0; i < 5; ++i) {
        long double n = 0.0L;
        for (int64_t j = 0; j < 5; ++j) n += expl(static_cast<long double>(a.at2(i, j)));
        const double rel = std::fabs(r.norm[static_cast<size_t>(i)].raw() - static_cast<double>(n)) /
                           static_cast<double>(n);
        CHECK(rel <= 1e-12);
    }
}

TEST_CASE("softmax_rows permutation equivariance") {
    Rng rng(23);
    for (int rep = 0; rep < 10; ++rep) {
        const int64_t s = 5;
        Tensor a = random_tensor({s, s}, rng, -4.0, 4.0);
        std::vector<int64_t> perm{0, 1, 2, 3, 4};
        rng.shuffle(perm);

        Tensor pa({s, s});  // P * A (row permutation)
        Tensor ap({s, s});  // A * P (column permutation), with (AP)_ij = A_i,perm(j)
        for (int64_t i = 0; i < s; ++i)
            for (int64_t j = 0; j < s; ++j) {
                pa.at2(i, j) = a.at2(perm[static_cast<size_t>(i)], j);
                ap.at2(i, j) = a.at2(i, perm[static_cast<size_t>(j)]);
            }

        SoftmaxResult base = softmax_rows(a);
        SoftmaxResult rows = softmax_rows(pa);
        SoftmaxResult cols = softmax_rows(ap);
        for (int64_t i = 0; i < s; ++i)
            for (int64_t j = 0; j < s; ++j) {
                CHECK(std::fabs(rows.probs.at2(i, j) - base.probs.at2(perm[static_cast<size_t>(i)], j)) <= 1e-12);
                CHECK(std::fabs(cols.probs.at2(i, j) - base.probs.at2(i, perm[static_cast<size_t>(j)])) <= 1e-12);
            }
    }
}

TEST_CASE("layer_norm examples") {
    // constant vector -> zero before affine
    Tensor x = Tensor({1, 4});
    x.fill(3.5);
    Tensor gain = Tensor::full({4}, 1.0);
    Tensor bias({4});
    Tensor y = layer_norm(x, gain, bias);
    for (int64_t i = 0; i < 4; ++i) CHECK(std::fabs(y[i]) <= 1e-9);

    // already normalized passes through (up to epsilon)
    Tensor z = Tensor({1, 2}, {-1.0, 1.0});
    Tensor gain2 = Tensor::full({2}, 1.0);
    Tensor bias2({2});
    Tensor out = layer_norm(z, gain2, bias2);
    CHECK(std::fabs(out[0] + 1.0) <= 1e-6);
    CHECK(std::fabs(out[1] - 1.0) <= 1e-6);

    // random vector: mean ~0, variance ~1 before affine
    Rng rng(3);
    Tensor r = random_tensor({1, 64}, rng, -5.0, 5.0);
    Tensor gain3 = Tensor::full({64}, 1.0);
    Tensor bias3({64});
    Tensor n = layer_norm(r, gain3, bias3);
    double mean = 0.0, var = 0.0;
    for (int64_t i = 0; i < 64; ++i) mean += n[i];
    mean /= 64.0;
    for (int64_t i = 0; i < 64; ++i) var += (n[i] - mean) * (n[i] - mean);
    var /= 64.0;
    CHECK(std::fabs(mean) <= 1e-9);
    CHECK(std::fabs(var - 1.0) <= 1e-6);
}

TEST_CASE("feed_forward zero weights propagate bias only") {
    Tensor x = Tensor({2, 3}, {1, 2, 3, 4, 5, 6});
    LinearMap w1(Tensor({3, 5}), Tensor::full({5}, 2.0));
    LinearMap w2(Tensor({5, 3}), Tensor::full({3}, -1.0));
    Tensor y = feed_forward(x, w1, w2);
    for (int64_t i = 0; i < y.numel(); ++i) CHECK(y[i] == doctest::Approx(-1.0));
}

TEST_CASE("feed_forward identity on nonnegative input") {
    Tensor x = Tensor({2, 2}, {0.5, 0.0, 2.0, 1.0});
    LinearMap id1 = LinearMap::identity(2);
    LinearMap id2 = LinearMap::identity(2);
    Tensor y = feed_forward(x, id1, id2);
    CHECK(max_abs_diff(x, y) == 0.0);
}

TEST_CASE("masked_attention single element with open self") {
    Tensor seq = Tensor({1, 3}, {0.4, -0.2, 1.0});
    LinearMap id = LinearMap::identity(3);
    MaskedAttentionResult r = masked_attention(seq, id, id, id, MaskMatrix::open(1));
    // single-logit softmax weight is 1: result is the V-projection (identity)
    for (int64_t i = 0; i < 3; ++i) CHECK(r.out[i] == doctest::Approx(seq[i]));
    CHECK(r.norm_at(0).sum == doctest::Approx(1.0));  // shifted normalizer of a single logit
}

TEST_CASE("masked_attention self-only mask returns V-projection rows") {
    Rng rng(5);
    Tensor seq = random_tensor({3, 4}, rng);
    Tensor wv = random_tensor({4, 4}, rng);
    LinearMap id = LinearMap::identity(4);
    MaskedAttentionResult r = masked_attention(seq, id, id, LinearMap(wv), MaskMatrix::self_only(3));
    Tensor expect = apply_linear(seq, LinearMap(wv));
    CHECK(max_abs_diff(r.out, expect) <= 1e-15);
}

TEST_CASE("masked_attention matches brute-force double-loop oracle") {
    Rng rng(41);
    for (int rep = 0; rep < 8; ++rep) {
        const int64_t s = 4, d = 2;
        Tensor seq = random_tensor({s, d}, rng);
        Tensor wq = random_tensor({d, d}, rng);
        Tensor wk = random_tensor({d, d}, rng);
        Tensor wv = random_tensor({d, d}, rng);
        MaskMatrix mask(s, false);
        for (int64_t i = 0; i < s; ++i)
            for (int64_t j = 0; j < s; ++j) mask.set(i, j, rng.uniform() < 0.7);
        MaskedAttentionResult r = masked_attention(seq, LinearMap(wq), LinearMap(wk), LinearMap(wv), mask);
        Tensor oracle = brute_force_attention(seq, wq, wk, wv, mask);
        CHECK(max_abs_diff(r.out, oracle) <= 1e-12);
    }
}

TEST_CASE("masked_attention fully masked row yields zero row and empty normalizer") {
    Rng rng(9);
    Tensor seq = random_tensor({2, 3}, rng);
    MaskMatrix mask(2, false);
    mask.set(1, 0, true);
    LinearMap id = LinearMap::identity(3);
    MaskedAttentionResult r = masked_attention(seq, id, id, id, mask);
    for (int64_t j = 0; j < 3; ++j) CHECK(r.out.at2(0, j) == 0.0);
    CHECK(r.norm_at(0).empty());
    CHECK(r.norm_at(0).raw() == 0.0);
    CHECK_FALSE(r.norm_at(1).empty());
}

TEST_CASE("masked_attention dimension errors") {
    Tensor seq({2, 3});
    LinearMap id = LinearMap::identity(3);
    CHECK_THROWS_AS(masked_attention(seq, id, id, id, MaskMatrix::open(3)), DimensionError);
    LinearMap wrong(Tensor({4, 4}));
    CHECK_THROWS_AS(masked_attention(seq, wrong, id, id, MaskMatrix::open(2)), DimensionError);
}

TEST_CASE("rng determinism and poisson sanity") {
    Rng a(1234), b(1234);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
    Rng r(7);
    double mean = 0.0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) mean += static_cast<double>(r.poisson(3.0));
    mean /= n;
    CHECK(std::fabs(mean - 3.0) < 3.0 * std::sqrt(3.0 / n));
}
