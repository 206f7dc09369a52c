#include "model/dist.hpp"

#include <cmath>
#include <limits>

#include "core/ops.hpp"

namespace axf {

namespace {

constexpr double kSigmaFloor = 1e-6;
constexpr double kPmfFloor = 1e-300;

// standard normal CDF
double norm_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// P(Y = k) for the unit-bin discretized log-Gaussian: Z ~ N(mu, sigma^2),
// Y = k when log(k) <= Z < log(k+1); k = 0 absorbs everything below log(1).
double log_gaussian_pmf(double mu, double sigma, int64_t k) {
    if (k < 0) return 0.0;
    const double hi = norm_cdf((std::log(static_cast<double>(k + 1)) - mu) / sigma);
    const double lo = k == 0 ? 0.0 : norm_cdf((std::log(static_cast<double>(k)) - mu) / sigma);
    return std::max(0.0, hi - lo);
}

}  // namespace

std::string family_name(DistFamily f) {
    switch (f) {
        case DistFamily::Poisson: return "poisson";
        case DistFamily::Bernoulli: return "bernoulli";
        case DistFamily::LogGaussian: return "log_gaussian";
        case DistFamily::Discrete: return "discrete";
    }
    return "?";
}

DistFamily family_from_name(const std::string& name) {
    if (name == "poisson") return DistFamily::Poisson;
    if (name == "bernoulli") return DistFamily::Bernoulli;
    if (name == "log_gaussian") return DistFamily::LogGaussian;
    if (name == "discrete") return DistFamily::Discrete;
    throw ValidationError("unknown distribution family: " + name);
}

int64_t DistSpec::param_count() const {
    switch (family) {
        case DistFamily::Poisson: return 1;
        case DistFamily::Bernoulli: return 1;
        case DistFamily::LogGaussian: return 2;
        case DistFamily::Discrete: return categories;
    }
    return 0;
}

void DistSpec::validate() const {
    if (family == DistFamily::Discrete && categories < 2)
        throw ValidationError("discrete family needs >= 2 categories");
}

double poisson_rate_from_raw(double raw) { return std::max(softplus(raw), 1e-12); }

double bernoulli_p_from_raw(double raw) { return sigmoid(raw); }

void log_gaussian_from_raw(double raw_mu, double raw_sigma, double* mu, double* sigma) {
    *mu = raw_mu;
    *sigma = softplus(raw_sigma) + kSigmaFloor;
}

void discrete_probs_from_raw(const double* raw, int64_t k, double* probs) {
    double m = raw[0];
    for (int64_t i = 1; i < k; ++i) m = std::max(m, raw[i]);
    double sum = 0.0;
    for (int64_t i = 0; i < k; ++i) {
        probs[i] = std::exp(raw[i] - m);
        sum += probs[i];
    }
    for (int64_t i = 0; i < k; ++i) probs[i] /= sum;
}

Distribution Distribution::from_raw(const DistSpec& spec, const double* raw) {
    Distribution d;
    d.family = spec.family;
    switch (spec.family) {
        case DistFamily::Poisson:
            d.params = {poisson_rate_from_raw(raw[0])};
            break;
        case DistFamily::Bernoulli:
            d.params = {bernoulli_p_from_raw(raw[0])};
            break;
        case DistFamily::LogGaussian: {
            double mu, sigma;
            log_gaussian_from_raw(raw[0], raw[1], &mu, &sigma);
            d.params = {mu, sigma};
            break;
        }
        case DistFamily::Discrete: {
            d.params.assign(static_cast<size_t>(spec.categories), 0.0);
            discrete_probs_from_raw(raw, spec.categories, d.params.data());
            break;
        }
    }
    return d;
}

double Distribution::mean() const {
    switch (family) {
        case DistFamily::Poisson: return params[0];
        case DistFamily::Bernoulli: return params[0];
        case DistFamily::LogGaussian: {
            // mean of the discretized distribution, truncated far in the tail
            const double mu = params[0], sigma = params[1];
            const int64_t cap = static_cast<int64_t>(std::ceil(std::exp(mu + 8.0 * sigma))) + 2;
            double mean = 0.0;
            for (int64_t k = 1; k < cap; ++k) mean += static_cast<double>(k) * log_gaussian_pmf(mu, sigma, k);
            return mean;
        }
        case DistFamily::Discrete: {
            double m = 0.0;
            for (size_t k = 0; k < params.size(); ++k) m += static_cast<double>(k) * params[k];
            return m;
        }
    }
    return 0.0;
}

double Distribution::log_pmf(int64_t k) const {
    switch (family) {
        case DistFamily::Poisson: {
            if (k < 0) return -std::numeric_limits<double>::infinity();
            const double lambda = params[0];
            return static_cast<double>(k) * std::log(lambda) - lambda - std::lgamma(static_cast<double>(k) + 1.0);
        }
        case DistFamily::Bernoulli: {
            if (k != 0 && k != 1) return -std::numeric_limits<double>::infinity();
            const double p = params[0];
            return std::log(std::max(k == 1 ? p : 1.0 - p, kPmfFloor));
        }
        case DistFamily::LogGaussian:
            return std::log(std::max(log_gaussian_pmf(params[0], params[1], k), kPmfFloor));
        case DistFamily::Discrete: {
            if (k < 0 || k >= static_cast<int64_t>(params.size()))
                return -std::numeric_limits<double>::infinity();
            return std::log(std::max(params[static_cast<size_t>(k)], kPmfFloor));
        }
    }
    return -std::numeric_limits<double>::infinity();
}

int64_t Distribution::mode() const {
    switch (family) {
        case DistFamily::Poisson:
            // floor(lambda); at integer lambda the tie with lambda-1 resolves down
            return params[0] == std::floor(params[0]) && params[0] >= 1.0
                       ? static_cast<int64_t>(params[0]) - 1
                       : static_cast<int64_t>(std::floor(params[0]));
        case DistFamily::Bernoulli: return params[0] > 0.5 ? 1 : 0;
        case DistFamily::LogGaussian: {
            const double mu = params[0], sigma = params[1];
            const int64_t cap = static_cast<int64_t>(std::ceil(std::exp(mu + 4.0 * sigma))) + 2;
            int64_t best = 0;
            double best_p = log_gaussian_pmf(mu, sigma, 0);
            for (int64_t k = 1; k < cap; ++k) {
                const double p = log_gaussian_pmf(mu, sigma, k);
                if (p > best_p) {
                    best_p = p;
                    best = k;
                }
            }
            return best;
        }
        case DistFamily::Discrete: {
            int64_t best = 0;
            for (size_t k = 1; k < params.size(); ++k)
                if (params[k] > params[static_cast<size_t>(best)]) best = static_cast<int64_t>(k);
            return best;
        }
    }
    return 0;
}

}  // namespace axf
