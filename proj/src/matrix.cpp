#include "ecoattn/matrix.hpp"

#include <cmath>
#include <string>

#include "ecoattn/errors.hpp"

namespace ecoattn {

RealMatrix::RealMatrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), data_(rows * cols, 0.0f) {}

RealMatrix::RealMatrix(std::size_t rows, std::size_t cols, std::vector<float> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
        throw ShapeError("RealMatrix: data size " + std::to_string(data_.size()) +
                         " does not match " + std::to_string(rows_) + "x" +
                         std::to_string(cols_));
    }
}

void RealMatrix::check_finite(const char* context) const {
    for (std::size_t i = 0; i < data_.size(); ++i) {
        if (!std::isfinite(data_[i])) {
            throw NumericError(std::string(context) + ": non-finite entry at flat index " +
                               std::to_string(i));
        }
    }
}

} // namespace ecoattn
