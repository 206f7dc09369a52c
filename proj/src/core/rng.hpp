#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace axf {

// mt19937_64 with hand-rolled draw functions. std::*_distribution output is
// implementation-defined, which would break byte-identical dataset generation
// and checkpoint determinism across standard libraries.
class Rng {
  public:
    explicit Rng(uint64_t seed) : gen_(seed) {}

    uint64_t next_u64() { return gen_(); }

    // uniform in [0, 1) with 53-bit resolution
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // uniform integer in [0, n)
    uint64_t below(uint64_t n);

    int64_t range(int64_t lo, int64_t hi) {  // inclusive lo, exclusive hi
        return lo + static_cast<int64_t>(below(static_cast<uint64_t>(hi - lo)));
    }

    double normal();  // standard normal, Box-Muller
    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    // Poisson draw; inversion for small mean, PTRS-free normal fallback for
    // large mean (fine for the synthetic rates used here).
    int64_t poisson(double mean);

    bool bernoulli(double p) { return uniform() < p; }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    // stable derived stream: mixes the tuple into a fresh seed
    static uint64_t mix(uint64_t a, uint64_t b);

  private:
    std::mt19937_64 gen_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace axf
