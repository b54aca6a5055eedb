#pragma once

#include <cmath>
#include <cstdint>

#include "sadm/tensor.hpp"

namespace sadm {

// Counter-free splitmix64 stream. Chosen over <random> engines so that the
// byte stream is identical across standard libraries and platforms; the
// reproducibility contract is seed + call order -> identical values.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // uniform in [0,1)
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    std::int64_t uniform_int(std::int64_t n) {  // in [0, n)
        return static_cast<std::int64_t>(next_u64() % static_cast<std::uint64_t>(n));
    }

    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        // Box-Muller; u1 shifted away from 0 so log() stays finite.
        double u1 = uniform();
        double u2 = uniform();
        u1 = u1 + 0x1.0p-54;
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    bool bernoulli(double p) { return uniform() < p; }

    Tensor normal_tensor(Shape shape) {
        Tensor t = Tensor::zeros(std::move(shape));
        for (auto& v : t.data) v = normal();
        return t;
    }

    // Independent derived stream; mixing the key through one splitmix step
    // keeps sibling streams uncorrelated.
    Rng split(std::uint64_t key) {
        Rng r(state_ ^ (0x632be59bd9b4e019ULL * (key + 1)));
        r.next_u64();
        return r;
    }

private:
    std::uint64_t state_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace sadm
