#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "core/axial.hpp"
#include "core/rng.hpp"

namespace axf {

// Random per-axis masks satisfying the disjointness precondition with no
// degenerate cells; drives the equivalence suites.
AxialMaskSet random_disjoint_masks(int64_t h, int64_t w, Rng& rng);

struct CheckResult {
    std::string name;
    bool pass = false;
    std::string detail;
};

struct VerifyReport {
    std::vector<CheckResult> checks;
    bool all_pass() const;
    std::string to_string() const;  // one line per check
};

// Additive axial attention vs. the unravelled sequential path on seeded
// random cases (H, W in [1,6], D in {1,2,4,8}); elementwise tolerance 1e-9.
CheckResult check_equivalence(int cases = 200, uint64_t seed = 20240901, double tol = 1e-9);
// Softmax permutation equivariance on random matrices; tolerance 1e-12.
CheckResult check_permutation_equivariance(int cases = 50, uint64_t seed = 31, double tol = 1e-12);
// Strict temporal masks: perturbing step t never changes outputs before t.
CheckResult check_causality(int cases = 20, uint64_t seed = 47);
// Analytic backward of every tape op against central finite differences.
CheckResult check_op_gradients(uint64_t seed = 5, double tol = 1e-4);
// Full tiny-model finite-difference check (D=8, L=2, P=3, T=4).
CheckResult check_model_gradients(double tol = 1e-4);

// Everything above, bundled. This is the `verify` CLI subcommand.
VerifyReport run_verify();

}  // namespace axf
