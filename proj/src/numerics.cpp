#include "ecoattn/numerics.hpp"

#include <cmath>
#include <string>

#include "ecoattn/errors.hpp"

namespace ecoattn {

RealMatrix matmul(const RealMatrix& a, const RealMatrix& b, OpLedger& ledger) {
    if (a.cols() != b.rows()) {
        throw ShapeError("matmul: inner dimensions " + std::to_string(a.cols()) +
                         " and " + std::to_string(b.rows()) + " differ");
    }
    if (a.cols() == 0) {
        throw ShapeError("matmul: inner dimension must be positive");
    }
    a.check_finite("matmul lhs");
    b.check_finite("matmul rhs");

    RealMatrix out(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < b.cols(); ++j) {
            float acc = a.at(i, 0) * b.at(0, j);
            ledger.mul += 1;
            for (std::size_t k = 1; k < a.cols(); ++k) {
                acc += a.at(i, k) * b.at(k, j);
                ledger.mul += 1;
                ledger.add += 1;
            }
            out.at(i, j) = acc;
        }
    }
    out.check_finite("matmul result");
    return out;
}

RowNormalizeResult row_l2_normalize(const RealMatrix& m, float eps) {
    m.check_finite("row_l2_normalize input");
    RowNormalizeResult result;
    result.matrix = m;
    for (std::size_t i = 0; i < m.rows(); ++i) {
        float sumsq = 0.0f;
        for (std::size_t j = 0; j < m.cols(); ++j) {
            sumsq += m.at(i, j) * m.at(i, j);
        }
        const float norm = std::sqrt(sumsq);
        if (norm < eps) {
            result.degenerate_rows.push_back(static_cast<std::uint32_t>(i));
            continue;
        }
        const float inv = 1.0f / norm;
        for (std::size_t j = 0; j < m.cols(); ++j) {
            result.matrix.at(i, j) = m.at(i, j) * inv;
        }
    }
    return result;
}

RealMatrix stable_softmax_rows(const RealMatrix& scores, float temperature) {
    if (!(temperature > 0.0f)) {
        throw ParamError("stable_softmax_rows: temperature must be positive");
    }
    if (scores.rows() > 0 && scores.cols() == 0) {
        throw ShapeError("stable_softmax_rows: rows must be non-empty");
    }
    scores.check_finite("stable_softmax_rows input");

    const float inv_tau = 1.0f / temperature;
    RealMatrix out(scores.rows(), scores.cols());
    for (std::size_t i = 0; i < scores.rows(); ++i) {
        float row_max = scores.at(i, 0) * inv_tau;
        for (std::size_t j = 1; j < scores.cols(); ++j) {
            row_max = std::max(row_max, scores.at(i, j) * inv_tau);
        }
        float denom = 0.0f;
        for (std::size_t j = 0; j < scores.cols(); ++j) {
            const float e = std::exp(scores.at(i, j) * inv_tau - row_max);
            out.at(i, j) = e;
            denom += e;
        }
        for (std::size_t j = 0; j < scores.cols(); ++j) {
            out.at(i, j) /= denom;
        }
    }
    return out;
}

} // namespace ecoattn
