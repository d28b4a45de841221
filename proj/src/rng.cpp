#include "ecoattn/rng.hpp"

#include <cmath>
#include <numbers>

#include "ecoattn/errors.hpp"

namespace ecoattn {

std::size_t SeededRng::next_index(std::size_t bound) {
    if (bound == 0) {
        throw ParamError("SeededRng::next_index: bound must be positive");
    }
    return static_cast<std::size_t>(next_u64() % bound);
}

double SeededRng::next_normal() {
    // u1 in (0, 1] so the log is finite.
    const double u1 = 1.0 - next_uniform();
    const double u2 = next_uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    return radius * std::cos(2.0 * std::numbers::pi * u2);
}

} // namespace ecoattn
