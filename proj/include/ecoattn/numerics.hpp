#pragma once

#include <cstdint>
#include <vector>

#include "ecoattn/matrix.hpp"
#include "ecoattn/op_ledger.hpp"

namespace ecoattn {

/// Instrumented dense product a * b.
///
/// Plain triple loop, float accumulation.  The ledger is charged exactly
/// rows_a*cols_a*cols_b multiplications and rows_a*(cols_a-1)*cols_b
/// additions: each output entry is a dot product of cols_a terms, which
/// takes cols_a products and cols_a-1 merging additions.
RealMatrix matmul(const RealMatrix& a, const RealMatrix& b, OpLedger& ledger);

struct RowNormalizeResult {
    RealMatrix matrix;
    /// Rows whose L2 norm fell below eps; they are passed through unchanged.
    std::vector<std::uint32_t> degenerate_rows;
};

/// Scales every row of `m` to unit L2 norm.  Near-zero rows (norm < eps)
/// are left as-is and reported instead of dividing by ~0.
RowNormalizeResult row_l2_normalize(const RealMatrix& m, float eps = 1e-12f);

/// Row-wise softmax of scores/temperature with max-subtraction for
/// stability.  Uninstrumented: this is the plain numeric utility; the
/// attention kernels carry their own counting.
RealMatrix stable_softmax_rows(const RealMatrix& scores, float temperature);

} // namespace ecoattn
