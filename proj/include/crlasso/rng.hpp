#pragma once

#include <cstdint>
#include <random>

namespace crlasso {

/// splitmix64 finalizer applied to (base, stream); used to derive independent
/// seeds for sub-streams of one replicate.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

/// Seedable generator with platform-independent variates.
///
/// std::mt19937_64 is fully specified by the standard, but the standard
/// distributions are not, so every variate is computed here from raw 64-bit
/// draws.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Uniform on the open interval (0, 1).
    double uniform();
    /// Standard normal (Marsaglia polar method).
    double normal();
    /// Chi-square with an even number of degrees of freedom.
    double chi_square_even(unsigned dof);
    /// Standard Cauchy.
    double cauchy();
    bool bernoulli(double p) { return uniform() < p; }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace crlasso
