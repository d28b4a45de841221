#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ecoattn/matrix.hpp"
#include "ecoattn/rng.hpp"

namespace ecoattn {

/// n x bits matrix over {-1, +1}, stored as int8.
class BinaryCodeMatrix {
public:
    BinaryCodeMatrix() = default;

    /// All-(+1) matrix.
    BinaryCodeMatrix(std::size_t n, std::size_t bits);

    std::size_t n() const { return n_; }
    std::size_t bits() const { return bits_; }

    std::int8_t at(std::size_t i, std::size_t j) const { return data_[i * bits_ + j]; }

    /// `value` must be -1 or +1.
    void set(std::size_t i, std::size_t j, std::int8_t value);

    std::span<const std::int8_t> row(std::size_t i) const {
        return {data_.data() + i * bits_, bits_};
    }

    static BinaryCodeMatrix random(std::size_t n, std::size_t bits, SeededRng& rng);

    bool operator==(const BinaryCodeMatrix&) const = default;

private:
    std::size_t n_ = 0;
    std::size_t bits_ = 0;
    std::vector<std::int8_t> data_;
};

/// Number of positions where the codes differ.  Widths must match.
int hamming_distance(std::span<const std::int8_t> a, std::span<const std::int8_t> b);

/// Inner product of two sign codes via the exact integer identity
/// a.b = width - 2 * hamming_distance(a, b).  Never touches floats.
int hamming_affinity(std::span<const std::int8_t> a, std::span<const std::int8_t> b);

struct BinarizeResult {
    BinaryCodeMatrix codes;        ///< sign of each entry, sign(0) := +1
    std::vector<float> scales;     ///< per-row mean absolute value
};

/// Row-wise sign/scale quantization: each row u becomes (mean|u|, sign(u)),
/// the closest rank-one binary approximation of the row under L2.
BinarizeResult binarize_sign_scale(const RealMatrix& u);

} // namespace ecoattn
