#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "core/tensor.hpp"

namespace axf {

enum class DistFamily { Poisson, Bernoulli, LogGaussian, Discrete };

std::string family_name(DistFamily f);
DistFamily family_from_name(const std::string& name);

struct DistSpec {
    DistFamily family = DistFamily::Poisson;
    int64_t categories = 0;  // Discrete only

    // raw linear-head outputs per prediction: 1, 1, 2, K
    int64_t param_count() const;
    void validate() const;
};

// A concrete distribution with constrained parameters (lambda / p / (mu,
// sigma) / category probabilities). Count families have nonnegative support,
// so means never undershoot running totals.
struct Distribution {
    DistFamily family;
    std::vector<double> params;

    static Distribution from_raw(const DistSpec& spec, const double* raw);

    double mean() const;
    double log_pmf(int64_t k) const;  // LogGaussian is discretized over unit bins
    int64_t mode() const;
};

// positivity / simplex transforms shared by heads, losses and metrics
double poisson_rate_from_raw(double raw);
double bernoulli_p_from_raw(double raw);
void log_gaussian_from_raw(double raw_mu, double raw_sigma, double* mu, double* sigma);
void discrete_probs_from_raw(const double* raw, int64_t k, double* probs);

}  // namespace axf
