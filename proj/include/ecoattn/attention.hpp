#pragma once

#include <cstdint>
#include <cstddef>

#include "ecoattn/binary_codes.hpp"
#include "ecoattn/matrix.hpp"
#include "ecoattn/op_ledger.hpp"
#include "ecoattn/random_features.hpp"

namespace ecoattn {

/// Per-head attention configuration.
struct AttentionConfig {
    std::size_t seq_len = 0;             ///< N
    std::size_t head_dim = 0;            ///< D_p
    float temperature = 1.0f;            ///< tau, must be positive
    std::size_t num_random_features = 64;
    std::size_t code_bits = 16;          ///< b
    bool tie_qk = true;                  ///< required by the hashed variant

    /// Throws ParamError on an invalid field; `hashed` additionally enforces
    /// the tied-projection requirement.
    void validate(bool hashed) const;
};

struct QkvProjection {
    RealMatrix q;
    RealMatrix k;
    RealMatrix v;
};

/// Linear projections of the common input; billed as three dense products.
QkvProjection project_qkv(const RealMatrix& x,
                          const RealMatrix& w_q,
                          const RealMatrix& w_k,
                          const RealMatrix& w_v,
                          OpLedger& ledger);

/// Exact attention: softmax(Q K^T / tau) V.
///
/// Billing per query row t against N keys of width d and values of width dv:
/// scores cost N*(d MACs + 1 temperature multiply); the softmax costs N
/// max-shift subtractions (adds), N exponentials, N accumulating adds and
/// N normalizing divisions; the value mix costs N*dv MACs.
///
/// When `weights_out` is non-null it receives the N x N weight matrix.
RealMatrix softmax_attention(const RealMatrix& q,
                             const RealMatrix& k,
                             const RealMatrix& v,
                             float temperature,
                             OpLedger& ledger,
                             RealMatrix* weights_out = nullptr);

/// Linearized random-feature attention.
///
/// Computes phi(Q) [phi(K)^T V] / (phi(Q) [phi(K)^T 1]) with the shared
/// key/value summaries formed once, so cost is linear in sequence length.
/// Q and K rows must be unit L2 (checked to 1e-4); a denominator smaller
/// than 1e-9 in magnitude raises NumericError naming the query row.
RealMatrix kernel_linear_attention(const RealMatrix& q,
                                   const RealMatrix& k,
                                   const RealMatrix& v,
                                   const RandomFeatureMap& map,
                                   OpLedger& ledger);

/// Smallest power-of-two exponent c with 2^c > bits, i.e. c = ceil(log2(bits+1)).
/// Adding 2^c to a width-`bits` code inner product makes it strictly positive.
int bias_exponent(std::size_t bits);

/// Binary-code attention, linearized.
///
/// Affinities between sign codes are integer inner products; per query the
/// numerator is code_q . [sum_i code_k_i (x) v_i] plus 2^c * sum_i v_i and
/// the denominator is code_q . [sum_j code_k_j] + 2^c * N, which is at
/// least N by construction.  Sign-conditional accumulates are billed as
/// adds, the power-of-two scaling of the value sum as shifts, and the final
/// scaling of each numerator row by the reciprocal denominator as divisions.
/// No multiplications are billed at all.
///
/// When `min_denominator_out` is non-null it receives the smallest
/// denominator encountered (always positive).
RealMatrix hashed_attention(const BinaryCodeMatrix& codes_q,
                            const BinaryCodeMatrix& codes_k,
                            const RealMatrix& v,
                            OpLedger& ledger,
                            std::int64_t* min_denominator_out = nullptr);

} // namespace ecoattn
