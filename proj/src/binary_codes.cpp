#include "ecoattn/binary_codes.hpp"

#include <cmath>
#include <string>

#include "ecoattn/errors.hpp"

namespace ecoattn {

BinaryCodeMatrix::BinaryCodeMatrix(std::size_t n, std::size_t bits)
    : n_(n), bits_(bits), data_(n * bits, std::int8_t{1}) {}

void BinaryCodeMatrix::set(std::size_t i, std::size_t j, std::int8_t value) {
    if (value != 1 && value != -1) {
        throw ParamError("BinaryCodeMatrix::set: entries must be -1 or +1, got " +
                         std::to_string(static_cast<int>(value)));
    }
    data_[i * bits_ + j] = value;
}

BinaryCodeMatrix BinaryCodeMatrix::random(std::size_t n, std::size_t bits, SeededRng& rng) {
    BinaryCodeMatrix codes(n, bits);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < bits; ++j) {
            codes.set(i, j, (rng.next_u64() & 1u) ? std::int8_t{1} : std::int8_t{-1});
        }
    }
    return codes;
}

int hamming_distance(std::span<const std::int8_t> a, std::span<const std::int8_t> b) {
    if (a.size() != b.size()) {
        throw ShapeError("hamming_distance: code widths " + std::to_string(a.size()) +
                         " and " + std::to_string(b.size()) + " differ");
    }
    int dist = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dist += (a[i] != b[i]) ? 1 : 0;
    }
    return dist;
}

int hamming_affinity(std::span<const std::int8_t> a, std::span<const std::int8_t> b) {
    const int width = static_cast<int>(a.size());
    return width - 2 * hamming_distance(a, b);
}

BinarizeResult binarize_sign_scale(const RealMatrix& u) {
    u.check_finite("binarize_sign_scale input");
    if (u.rows() > 0 && u.cols() == 0) {
        throw ShapeError("binarize_sign_scale: rows must be non-empty");
    }

    BinarizeResult result;
    result.codes = BinaryCodeMatrix(u.rows(), u.cols());
    result.scales.resize(u.rows());
    for (std::size_t i = 0; i < u.rows(); ++i) {
        float abs_sum = 0.0f;
        for (std::size_t j = 0; j < u.cols(); ++j) {
            const float x = u.at(i, j);
            abs_sum += std::fabs(x);
            result.codes.set(i, j, x < 0.0f ? std::int8_t{-1} : std::int8_t{1});
        }
        result.scales[i] = abs_sum / static_cast<float>(u.cols());
    }
    return result;
}

} // namespace ecoattn
