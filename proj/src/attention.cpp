#include "ecoattn/attention.hpp"

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "ecoattn/errors.hpp"
#include "ecoattn/numerics.hpp"

namespace ecoattn {

void AttentionConfig::validate(bool hashed) const {
    if (seq_len == 0) {
        throw ParamError("AttentionConfig: seq_len must be positive");
    }
    if (head_dim == 0) {
        throw ParamError("AttentionConfig: head_dim must be positive");
    }
    if (!(temperature > 0.0f)) {
        throw ParamError("AttentionConfig: temperature must be positive");
    }
    if (num_random_features == 0) {
        throw ParamError("AttentionConfig: num_random_features must be positive");
    }
    if (code_bits == 0) {
        throw ParamError("AttentionConfig: code_bits must be positive");
    }
    if (hashed && !tie_qk) {
        throw ParamError("AttentionConfig: the hashed variant requires tied "
                         "query/key projections (tie_qk)");
    }
}

QkvProjection project_qkv(const RealMatrix& x,
                          const RealMatrix& w_q,
                          const RealMatrix& w_k,
                          const RealMatrix& w_v,
                          OpLedger& ledger) {
    QkvProjection proj;
    proj.q = matmul(x, w_q, ledger);
    proj.k = matmul(x, w_k, ledger);
    proj.v = matmul(x, w_v, ledger);
    return proj;
}

RealMatrix softmax_attention(const RealMatrix& q,
                             const RealMatrix& k,
                             const RealMatrix& v,
                             float temperature,
                             OpLedger& ledger,
                             RealMatrix* weights_out) {
    if (q.cols() != k.cols()) {
        throw ShapeError("softmax_attention: query width " + std::to_string(q.cols()) +
                         " and key width " + std::to_string(k.cols()) + " differ");
    }
    if (k.rows() != v.rows()) {
        throw ShapeError("softmax_attention: key count " + std::to_string(k.rows()) +
                         " and value count " + std::to_string(v.rows()) + " differ");
    }
    if (k.rows() == 0 || q.cols() == 0) {
        throw ShapeError("softmax_attention: empty operands");
    }
    if (!(temperature > 0.0f)) {
        throw ParamError("softmax_attention: temperature must be positive");
    }
    q.check_finite("softmax_attention q");
    k.check_finite("softmax_attention k");
    v.check_finite("softmax_attention v");

    const std::size_t n_q = q.rows();
    const std::size_t n_k = k.rows();
    const std::size_t d = q.cols();
    const std::size_t d_v = v.cols();
    const float inv_tau = 1.0f / temperature;  // config constant, folded once

    RealMatrix weights(n_q, n_k);
    for (std::size_t t = 0; t < n_q; ++t) {
        for (std::size_t i = 0; i < n_k; ++i) {
            float score = 0.0f;
            for (std::size_t c = 0; c < d; ++c) {
                score += q.at(t, c) * k.at(i, c);
                ledger.mul += 1;
                ledger.add += 1;
            }
            score *= inv_tau;
            ledger.mul += 1;
            weights.at(t, i) = score;
        }

        // Stable softmax over the row.  The running max is bookkeeping, not
        // arithmetic on the data path, so it is not billed.
        float row_max = weights.at(t, 0);
        for (std::size_t i = 1; i < n_k; ++i) {
            row_max = std::max(row_max, weights.at(t, i));
        }
        float denom = 0.0f;
        for (std::size_t i = 0; i < n_k; ++i) {
            const float shifted = weights.at(t, i) - row_max;
            ledger.add += 1;
            const float e = std::exp(shifted);
            ledger.exp += 1;
            weights.at(t, i) = e;
            denom += e;
            ledger.add += 1;
        }
        for (std::size_t i = 0; i < n_k; ++i) {
            weights.at(t, i) /= denom;
            ledger.div += 1;
        }
    }

    RealMatrix out(n_q, d_v);
    for (std::size_t t = 0; t < n_q; ++t) {
        for (std::size_t c = 0; c < d_v; ++c) {
            float acc = 0.0f;
            for (std::size_t i = 0; i < n_k; ++i) {
                acc += weights.at(t, i) * v.at(i, c);
                ledger.mul += 1;
                ledger.add += 1;
            }
            out.at(t, c) = acc;
        }
    }
    out.check_finite("softmax_attention output");
    if (weights_out) {
        *weights_out = std::move(weights);
    }
    return out;
}

namespace {

void require_unit_rows(const RealMatrix& m, const char* which) {
    constexpr float kTol = 1e-4f;
    for (std::size_t i = 0; i < m.rows(); ++i) {
        float sumsq = 0.0f;
        for (std::size_t j = 0; j < m.cols(); ++j) {
            sumsq += m.at(i, j) * m.at(i, j);
        }
        if (std::fabs(std::sqrt(sumsq) - 1.0f) > kTol) {
            throw ParamError(std::string("kernel_linear_attention: ") + which + " row " +
                             std::to_string(i) + " is not unit L2");
        }
    }
}

} // namespace

RealMatrix kernel_linear_attention(const RealMatrix& q,
                                   const RealMatrix& k,
                                   const RealMatrix& v,
                                   const RandomFeatureMap& map,
                                   OpLedger& ledger) {
    if (q.cols() != k.cols() || q.cols() != map.head_dim()) {
        throw ShapeError("kernel_linear_attention: q/k width must match the feature map");
    }
    if (k.rows() != v.rows()) {
        throw ShapeError("kernel_linear_attention: key count " + std::to_string(k.rows()) +
                         " and value count " + std::to_string(v.rows()) + " differ");
    }
    if (k.rows() == 0) {
        throw ShapeError("kernel_linear_attention: empty operands");
    }
    q.check_finite("kernel_linear_attention q");
    k.check_finite("kernel_linear_attention k");
    v.check_finite("kernel_linear_attention v");
    require_unit_rows(q, "q");  // validation arithmetic is not billed
    require_unit_rows(k, "k");

    const std::size_t n_q = q.rows();
    const std::size_t n_k = k.rows();
    const std::size_t f = map.num_features();
    const std::size_t d_v = v.cols();

    const RealMatrix phi_q = apply_random_features(q, map, &ledger);
    const RealMatrix phi_k = apply_random_features(k, map, &ledger);

    // Shared key/value summaries, formed once for all queries.
    RealMatrix kv_summary(f, d_v);
    for (std::size_t i = 0; i < n_k; ++i) {
        for (std::size_t j = 0; j < f; ++j) {
            const float w = phi_k.at(i, j);
            for (std::size_t c = 0; c < d_v; ++c) {
                kv_summary.at(j, c) += w * v.at(i, c);
                ledger.mul += 1;
                ledger.add += 1;
            }
        }
    }
    std::vector<float> key_summary(f, 0.0f);
    for (std::size_t i = 0; i < n_k; ++i) {
        for (std::size_t j = 0; j < f; ++j) {
            key_summary[j] += phi_k.at(i, j);
            ledger.add += 1;
        }
    }

    RealMatrix out(n_q, d_v);
    std::vector<float> numerator(d_v);
    for (std::size_t t = 0; t < n_q; ++t) {
        for (std::size_t c = 0; c < d_v; ++c) {
            float acc = 0.0f;
            for (std::size_t j = 0; j < f; ++j) {
                acc += phi_q.at(t, j) * kv_summary.at(j, c);
                ledger.mul += 1;
                ledger.add += 1;
            }
            numerator[c] = acc;
        }
        float denom = 0.0f;
        for (std::size_t j = 0; j < f; ++j) {
            denom += phi_q.at(t, j) * key_summary[j];
            ledger.mul += 1;
            ledger.add += 1;
        }
        if (std::fabs(denom) < 1e-9f) {
            throw NumericError("kernel_linear_attention: denominator vanished at query row " +
                               std::to_string(t));
        }
        // Elementwise division of the numerator row, billed per convention as
        // one reciprocal plus one scaling per entry, all under div.
        const float inv = 1.0f / denom;
        ledger.div += 1;
        for (std::size_t c = 0; c < d_v; ++c) {
            out.at(t, c) = numerator[c] * inv;
            ledger.div += 1;
        }
    }
    out.check_finite("kernel_linear_attention output");
    return out;
}

int bias_exponent(std::size_t bits) {
    if (bits == 0) {
        throw ParamError("bias_exponent: code width must be positive");
    }
    int c = 0;
    while (c < 62 && (std::uint64_t{1} << c) <= bits) {
        ++c;
    }
    if ((std::uint64_t{1} << c) <= bits) {
        throw ParamError("bias_exponent: code width " + std::to_string(bits) +
                         " overflows the shift width");
    }
    return c;
}

RealMatrix hashed_attention(const BinaryCodeMatrix& codes_q,
                            const BinaryCodeMatrix& codes_k,
                            const RealMatrix& v,
                            OpLedger& ledger,
                            std::int64_t* min_denominator_out) {
    if (codes_q.bits() != codes_k.bits()) {
        throw ShapeError("hashed_attention: code widths " + std::to_string(codes_q.bits()) +
                         " and " + std::to_string(codes_k.bits()) + " differ");
    }
    if (codes_k.n() != v.rows()) {
        throw ShapeError("hashed_attention: key count " + std::to_string(codes_k.n()) +
                         " and value count " + std::to_string(v.rows()) + " differ");
    }
    if (codes_k.n() == 0 || codes_q.bits() == 0) {
        throw ShapeError("hashed_attention: empty operands");
    }
    v.check_finite("hashed_attention v");

    const std::size_t n_q = codes_q.n();
    const std::size_t n_k = codes_k.n();
    const std::size_t b = codes_q.bits();
    const std::size_t d_v = v.cols();
    const int c_exp = bias_exponent(b);
    const std::int64_t bias = std::int64_t{1} << c_exp;

    // Key/value summaries.  Code x real products are sign-conditional
    // accumulates: one add each.
    RealMatrix kv_summary(b, d_v);
    for (std::size_t i = 0; i < n_k; ++i) {
        for (std::size_t r = 0; r < b; ++r) {
            const bool positive = codes_k.at(i, r) > 0;
            for (std::size_t c = 0; c < d_v; ++c) {
                const float x = v.at(i, c);
                kv_summary.at(r, c) += positive ? x : -x;
                ledger.add += 1;
            }
        }
    }
    std::vector<std::int64_t> key_summary(b, 0);
    for (std::size_t i = 0; i < n_k; ++i) {
        for (std::size_t r = 0; r < b; ++r) {
            key_summary[r] += codes_k.at(i, r);
            ledger.add += 1;
        }
    }
    std::vector<float> value_sum(d_v, 0.0f);
    for (std::size_t i = 0; i < n_k; ++i) {
        for (std::size_t c = 0; c < d_v; ++c) {
            value_sum[c] += v.at(i, c);
            ledger.add += 1;
        }
    }
    // Power-of-two scaling of the value sum: exact in binary floating point.
    std::vector<float> shifted_value_sum(d_v);
    for (std::size_t c = 0; c < d_v; ++c) {
        shifted_value_sum[c] = std::ldexp(value_sum[c], c_exp);
        ledger.shift += 1;
    }
    // bias * n_k folds two configuration constants; not billed.
    const std::int64_t bias_total = bias * static_cast<std::int64_t>(n_k);

    RealMatrix out(n_q, d_v);
    std::vector<float> numerator(d_v);
    std::int64_t min_denominator = std::numeric_limits<std::int64_t>::max();
    for (std::size_t t = 0; t < n_q; ++t) {
        for (std::size_t c = 0; c < d_v; ++c) {
            float acc = 0.0f;
            for (std::size_t r = 0; r < b; ++r) {
                const float x = kv_summary.at(r, c);
                acc += (codes_q.at(t, r) > 0) ? x : -x;
                ledger.add += 1;
            }
            acc += shifted_value_sum[c];
            ledger.add += 1;
            numerator[c] = acc;
        }
        std::int64_t denom = 0;
        for (std::size_t r = 0; r < b; ++r) {
            denom += (codes_q.at(t, r) > 0) ? key_summary[r] : -key_summary[r];
            ledger.add += 1;
        }
        denom += bias_total;
        ledger.add += 1;
        if (denom <= 0) {
            // Unreachable: each key contributes at least -b + 2^c >= 1.
            throw NumericError("hashed_attention: non-positive denominator at query row " +
                               std::to_string(t));
        }
        min_denominator = std::min(min_denominator, denom);

        const float inv = 1.0f / static_cast<float>(denom);
        ledger.div += 1;
        for (std::size_t c = 0; c < d_v; ++c) {
            out.at(t, c) = numerator[c] * inv;
            ledger.div += 1;
        }
    }
    out.check_finite("hashed_attention output");
    if (min_denominator_out) {
        *min_denominator_out = min_denominator;
    }
    return out;
}

} // namespace ecoattn
