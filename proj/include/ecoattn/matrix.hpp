#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace ecoattn {

/// Dense row-major matrix of 32-bit floats.
///
/// All numeric state in the library is stored and accumulated in float;
/// double appears only in clearly marked diagnostic paths.  Exported
/// operations reject non-finite entries.
class RealMatrix {
public:
    RealMatrix() = default;

    /// Zero-filled rows x cols matrix.
    RealMatrix(std::size_t rows, std::size_t cols);

    /// Takes ownership of `data`, which must hold exactly rows*cols values.
    RealMatrix(std::size_t rows, std::size_t cols, std::vector<float> data);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    float& at(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    float at(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<float> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const float> row(std::size_t r) const {
        return {data_.data() + r * cols_, cols_};
    }

    std::vector<float>& data() { return data_; }
    const std::vector<float>& data() const { return data_; }

    /// Throws NumericError naming `context` if any entry is NaN or infinite.
    void check_finite(const char* context) const;

    /// Exact elementwise equality (used by determinism tests).
    bool operator==(const RealMatrix&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<float> data_;
};

} // namespace ecoattn
