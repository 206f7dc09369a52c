#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "core/tape.hpp"
#include "testutil.hpp"
#include "verify/verify.hpp"

using namespace axf;
using testutil::random_tensor;

TEST_CASE("tape basic arithmetic and fan-out accumulation") {
    Tape t;
    VarId x = t.leaf(Tensor({2}, {3.0, -2.0}), true);
    VarId y = t.add(t.mul(x, x), t.scale(x, 4.0));  // x^2 + 4x
    VarId s = t.sum(y);
    t.backward(s);
    // d/dx = 2x + 4
    CHECK(t.grad(x)[0] == doctest::Approx(10.0));
    CHECK(t.grad(x)[1] == doctest::Approx(0.0));
}

TEST_CASE("tape slice_rows routes gradients to the right rows") {
    Tape t;
    Tensor v({3, 2}, {1, 2, 3, 4, 5, 6});
    VarId x = t.leaf(v, true);
    VarId sl = t.slice_rows(x, 1, 3);
    VarId s = t.sum(sl);
    t.backward(s);
    CHECK(t.grad(x).at2(0, 0) == 0.0);
    CHECK(t.grad(x).at2(1, 0) == 1.0);
    CHECK(t.grad(x).at2(2, 1) == 1.0);
}

TEST_CASE("tape assemble_grid scatters blocks to the documented layout") {
    Tape t;
    const int64_t p = 2, steps = 3, d = 2;
    Rng rng(2);
    Tensor ctx = random_tensor({d}, rng);
    Tensor game = random_tensor({steps, d}, rng);
    Tensor tstr = random_tensor({2, d}, rng);
    Tensor team = random_tensor({2, steps, d}, rng);
    Tensor pstr = random_tensor({p, d}, rng);
    Tensor player = random_tensor({p, steps, d}, rng);
    VarId g = t.assemble_grid(t.leaf(ctx, true), t.leaf(game), t.leaf(tstr), t.leaf(team), t.leaf(pstr),
                              t.leaf(player));
    const Tensor& grid = t.val(g);
    REQUIRE(grid.shape() == std::vector<int64_t>{p + 3, steps + 1, d});
    // column 0: pre-game embeddings
    CHECK(grid.at3(0, 0, 0) == ctx[0]);
    CHECK(grid.at3(1, 0, 1) == tstr.at2(0, 1));
    CHECK(grid.at3(3, 0, 0) == pstr.at2(0, 0));
    // columns 1..T: live embeddings
    CHECK(grid.at3(0, 2, 1) == game.at2(1, 1));
    CHECK(grid.at3(2, 1, 0) == team.at3(1, 0, 0));
    CHECK(grid.at3(4, 3, 1) == player.at3(1, 2, 1));
}

TEST_CASE("every tape op backward matches finite differences") {
    CheckResult r = check_op_gradients();
    INFO(r.detail);
    CHECK(r.pass);
}

TEST_CASE("grad-disabled tape runs value-only") {
    Tape t(false);
    VarId x = t.leaf(Tensor({2}, {1.0, 2.0}), true);
    VarId y = t.mul(x, x);
    CHECK(t.val(y)[1] == 4.0);
    CHECK_FALSE(t.requires_grad(y));
    CHECK_THROWS_AS(t.backward(y), ValidationError);
}
