#include "snapcluster/rng.hpp"

#include <cmath>
#include <numbers>

namespace snapcluster {

double SplitMix64::normal() {
    double u1 = uniform();
    double u2 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace snapcluster
