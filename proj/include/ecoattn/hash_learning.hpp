#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ecoattn/binary_codes.hpp"
#include "ecoattn/matrix.hpp"
#include "ecoattn/rng.hpp"

namespace ecoattn {

/// Gaussian kernel exp(-||x - y||^2 / (2 sigma^2)).  Widths must match.
float rbf_kernel(std::span<const float> x, std::span<const float> y, float sigma);

/// How the kernel bandwidth is chosen when fitting the embedding.
enum class SigmaMode {
    median,  ///< median pairwise distance over a deterministic subsample
    fixed,   ///< caller-supplied positive value
};

/// Learned (or learnable) binary hash functions over a kernelized embedding.
///
/// An input x is embedded as g(x)_j = k(s_j, x) - mu_j against m support
/// samples s_j, then hashed as sign(g(x) . a_r) for each of `bits` weight
/// columns.  `a` stays empty until the weights are learned.
struct HashFunctionSet {
    RealMatrix support_samples;  ///< m x dim
    std::vector<float> mu;       ///< m centering offsets
    RealMatrix a;                ///< m x bits weight matrix; empty = not learned
    float bandwidth = 1.0f;      ///< sigma
    std::size_t bits = 0;

    std::size_t m() const { return support_samples.rows(); }
    std::size_t dim() const { return support_samples.cols(); }
    bool has_weights() const { return !a.empty(); }
};

/// Chooses support samples (without replacement), the bandwidth and the
/// centering offsets from `queries` (n x dim).  Weights are left unlearned.
/// m must not exceed the number of rows.
HashFunctionSet fit_embedding(const RealMatrix& queries,
                              std::size_t m,
                              SigmaMode sigma_mode,
                              float fixed_sigma,
                              std::size_t bits,
                              SeededRng& rng);

/// Centered kernel embedding of each row of x: out is x.rows() x m.
RealMatrix embed(const HashFunctionSet& hfs, const RealMatrix& x);

/// sign(embed(x) . a); requires learned weights (StateError otherwise).
/// sign(0) := +1.
BinaryCodeMatrix hash_codes(const HashFunctionSet& hfs, const RealMatrix& x);

/// Ternary pairwise affinity targets derived from an attention-score matrix.
struct AffinityLabels {
    std::size_t n = 0;
    std::size_t pairs_per_row = 0;           ///< l
    std::vector<std::int8_t> y;              ///< n x n over {-1, 0, +1}

    std::int8_t at(std::size_t i, std::size_t j) const { return y[i * n + j]; }
};

/// Per row i, the l largest off-diagonal scores mark similar pairs (+1) and
/// the l smallest mark dissimilar pairs (-1); ties break toward the lower
/// column index, and a column already marked similar is never also marked
/// dissimilar.  The row-wise marks are then symmetrized with +1 winning any
/// conflict, and the diagonal is set to +1.  Requires 2l < n.
AffinityLabels build_pairwise_labels(const RealMatrix& scores, std::size_t l);

struct LearnBitResult {
    std::vector<float> weights;     ///< learned column a_r (length m)
    std::vector<std::int8_t> code;  ///< h_r = sign(G a_r)
    double objective;               ///< h_r^T Y_hat h_r at the returned weights
};

/// Learns one hash-weight column by straight-through gradient ascent on
/// h^T Y_hat h with h = sign(G a).
///
/// The straight-through estimator passes gradient only where |G a| <= 1;
/// each step moves along the normalized gradient by the current rate
/// (halved after steps 100 and 150).  The best iterate ever seen, including
/// the N(0, 1/m) initialization, is returned, so the reported objective
/// never falls below the initialization's.
///
/// y_hat must be symmetric within 1e-5 (DataError otherwise).
LearnBitResult learn_bit(const RealMatrix& y_hat,
                         const RealMatrix& g,
                         SeededRng& rng,
                         std::size_t steps = 200,
                         float lr = 0.05f);

struct HashLearningConfig {
    std::size_t m = 25;           ///< support-sample count
    std::size_t bits = 16;        ///< b
    std::size_t pairs_per_row = 10;  ///< l
    std::size_t steps = 200;
    float lr = 0.05f;
    SigmaMode sigma_mode = SigmaMode::median;
    float sigma = 1.0f;           ///< used when sigma_mode == fixed
};

struct LearnReport {
    HashFunctionSet hfs;
    std::vector<double> bit_objectives;        ///< one per learned bit
    std::vector<double> reconstruction_errors; ///< ||residual||_F^2 before any
                                               ///< bit and after each bit
    RealMatrix residual;                       ///< final residual target
};

/// Full pipeline: fit the embedding on `queries`, derive labels from
/// `scores`, then learn the bits sequentially against the residual target
/// Y_hat_0 = bits * Y, Y_hat_r = Y_hat_{r-1} - h_r h_r^T.
///
/// The Frobenius reconstruction error is non-increasing across bits
/// whenever the bit objective reaches n^2 / 2 (the exact step identity is
/// err_r - err_{r-1} = n^2 - 2 * objective_r).
LearnReport learn_hash_functions(const RealMatrix& queries,
                                 const RealMatrix& scores,
                                 const HashLearningConfig& cfg,
                                 SeededRng& rng);

/// True exactly when the hash functions must be (re)learned: at epoch 0 and
/// every `interval` epochs thereafter.
bool refresh_schedule(std::size_t epoch, std::size_t interval);

/// Smooth relaxation of the per-bit objective for gradient checking:
/// f(a) = u^T Y_hat u with u = tanh(G a), evaluated in double.  When
/// grad_out is non-null it receives the analytic gradient
/// G^T [(2 Y_hat u) . (1 - u^2)].
double relaxed_bit_objective(const RealMatrix& g,
                             const RealMatrix& y_hat,
                             std::span<const double> a,
                             std::vector<double>* grad_out = nullptr);

/// Binary serialization of a learned set (little-endian, float32 payload).
/// Saving an unlearned set is a StateError; malformed files raise IoError.
void save_hash_function_set(const HashFunctionSet& hfs, const std::string& path);
HashFunctionSet load_hash_function_set(const std::string& path);

} // namespace ecoattn
