#include "crlasso/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace crlasso {

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
    std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

double Rng::uniform() {
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
}

double Rng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u = 0.0;
    double v = 0.0;
    double s = 0.0;
    do {
        u = 2.0 * uniform() - 1.0;
        v = 2.0 * uniform() - 1.0;
        s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double factor = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * factor;
    has_spare_ = true;
    return u * factor;
}

double Rng::chi_square_even(unsigned dof) {
    if (dof == 0 || dof % 2 != 0) throw std::invalid_argument("chi_square_even: dof must be a positive even number");
    double product = 1.0;
    for (unsigned k = 0; k < dof / 2; ++k) product *= uniform();
    return -2.0 * std::log(product);
}

double Rng::cauchy() {
    return std::tan(std::numbers::pi * (uniform() - 0.5));
}

}  // namespace crlasso
