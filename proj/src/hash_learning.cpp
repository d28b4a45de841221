#include "ecoattn/hash_learning.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <string>

#include "ecoattn/errors.hpp"

namespace ecoattn {

float rbf_kernel(std::span<const float> x, std::span<const float> y, float sigma) {
    if (x.size() != y.size()) {
        throw ShapeError("rbf_kernel: operand widths " + std::to_string(x.size()) +
                         " and " + std::to_string(y.size()) + " differ");
    }
    if (!(sigma > 0.0f)) {
        throw ParamError("rbf_kernel: sigma must be positive");
    }
    float sumsq = 0.0f;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const float d = x[i] - y[i];
        sumsq += d * d;
    }
    return std::exp(-sumsq / (2.0f * sigma * sigma));
}

namespace {

/// Deterministic sample of `count` distinct indices from [0, n).
std::vector<std::size_t> sample_without_replacement(std::size_t n,
                                                    std::size_t count,
                                                    SeededRng& rng) {
    std::vector<std::size_t> pool(n);
    std::iota(pool.begin(), pool.end(), std::size_t{0});
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t j = i + rng.next_index(n - i);
        std::swap(pool[i], pool[j]);
    }
    pool.resize(count);
    return pool;
}

/// Median pairwise Euclidean distance over at most 256 rows (deterministic
/// subsample).  Upper median for an even count; falls back to 1 when the
/// median degenerates to zero.
float median_heuristic_sigma(const RealMatrix& rows, SeededRng& rng) {
    const std::size_t limit = 256;
    std::vector<std::size_t> picked;
    if (rows.rows() <= limit) {
        picked.resize(rows.rows());
        std::iota(picked.begin(), picked.end(), std::size_t{0});
    } else {
        picked = sample_without_replacement(rows.rows(), limit, rng);
        std::sort(picked.begin(), picked.end());
    }
    std::vector<float> dists;
    dists.reserve(picked.size() * (picked.size() - 1) / 2);
    for (std::size_t i = 0; i < picked.size(); ++i) {
        for (std::size_t j = i + 1; j < picked.size(); ++j) {
            float sumsq = 0.0f;
            for (std::size_t c = 0; c < rows.cols(); ++c) {
                const float d = rows.at(picked[i], c) - rows.at(picked[j], c);
                sumsq += d * d;
            }
            dists.push_back(std::sqrt(sumsq));
        }
    }
    if (dists.empty()) {
        return 1.0f;
    }
    auto mid = dists.begin() + static_cast<std::ptrdiff_t>(dists.size() / 2);
    std::nth_element(dists.begin(), mid, dists.end());
    const float med = *mid;
    return med > 0.0f ? med : 1.0f;
}

} // namespace

HashFunctionSet fit_embedding(const RealMatrix& queries,
                              std::size_t m,
                              SigmaMode sigma_mode,
                              float fixed_sigma,
                              std::size_t bits,
                              SeededRng& rng) {
    if (queries.rows() == 0 || queries.cols() == 0) {
        throw ShapeError("fit_embedding: queries must be non-empty");
    }
    if (m == 0) {
        throw ParamError("fit_embedding: support-sample count must be positive");
    }
    if (m > queries.rows()) {
        throw ParamError("fit_embedding: support-sample count " + std::to_string(m) +
                         " exceeds the " + std::to_string(queries.rows()) +
                         " available rows");
    }
    if (bits == 0) {
        throw ParamError("fit_embedding: bits must be positive");
    }
    queries.check_finite("fit_embedding queries");

    HashFunctionSet hfs;
    hfs.bits = bits;

    if (sigma_mode == SigmaMode::fixed) {
        if (!(fixed_sigma > 0.0f)) {
            throw ParamError("fit_embedding: fixed sigma must be positive");
        }
        hfs.bandwidth = fixed_sigma;
    } else {
        hfs.bandwidth = median_heuristic_sigma(queries, rng);
    }

    const auto support = sample_without_replacement(queries.rows(), m, rng);
    hfs.support_samples = RealMatrix(m, queries.cols());
    for (std::size_t j = 0; j < m; ++j) {
        for (std::size_t c = 0; c < queries.cols(); ++c) {
            hfs.support_samples.at(j, c) = queries.at(support[j], c);
        }
    }

    // Centering offsets: mean kernel response over the full fit set.
    hfs.mu.assign(m, 0.0f);
    for (std::size_t j = 0; j < m; ++j) {
        double acc = 0.0;
        for (std::size_t i = 0; i < queries.rows(); ++i) {
            acc += rbf_kernel(hfs.support_samples.row(j), queries.row(i), hfs.bandwidth);
        }
        hfs.mu[j] = static_cast<float>(acc / static_cast<double>(queries.rows()));
    }
    return hfs;
}

RealMatrix embed(const HashFunctionSet& hfs, const RealMatrix& x) {
    if (x.cols() != hfs.dim()) {
        throw ShapeError("embed: input width " + std::to_string(x.cols()) +
                         " does not match the fitted dimension " +
                         std::to_string(hfs.dim()));
    }
    x.check_finite("embed input");
    RealMatrix g(x.rows(), hfs.m());
    for (std::size_t i = 0; i < x.rows(); ++i) {
        for (std::size_t j = 0; j < hfs.m(); ++j) {
            g.at(i, j) = rbf_kernel(hfs.support_samples.row(j), x.row(i), hfs.bandwidth) -
                         hfs.mu[j];
        }
    }
    return g;
}

BinaryCodeMatrix hash_codes(const HashFunctionSet& hfs, const RealMatrix& x) {
    if (!hfs.has_weights()) {
        throw StateError("hash_codes: weights have not been learned");
    }
    const RealMatrix g = embed(hfs, x);
    BinaryCodeMatrix codes(x.rows(), hfs.bits);
    for (std::size_t i = 0; i < x.rows(); ++i) {
        for (std::size_t r = 0; r < hfs.bits; ++r) {
            float z = 0.0f;
            for (std::size_t j = 0; j < hfs.m(); ++j) {
                z += g.at(i, j) * hfs.a.at(j, r);
            }
            codes.set(i, r, z < 0.0f ? std::int8_t{-1} : std::int8_t{1});
        }
    }
    return codes;
}

AffinityLabels build_pairwise_labels(const RealMatrix& scores, std::size_t l) {
    if (scores.rows() != scores.cols()) {
        throw ShapeError("build_pairwise_labels: score matrix must be square");
    }
    const std::size_t n = scores.rows();
    if (l == 0) {
        throw ParamError("build_pairwise_labels: pairs_per_row must be positive");
    }
    if (2 * l >= n) {
        throw ParamError("build_pairwise_labels: need 2 * pairs_per_row < n, got l=" +
                         std::to_string(l) + " with n=" + std::to_string(n));
    }
    scores.check_finite("build_pairwise_labels scores");

    // Row-wise marks before symmetrization.
    std::vector<std::int8_t> raw(n * n, 0);
    std::vector<std::size_t> order(n - 1);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t w = 0;
        for (std::size_t j = 0; j < n; ++j) {
            if (j != i) {
                order[w++] = j;
            }
        }
        // Largest l scores -> +1; ties prefer the lower column index.
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            const float sa = scores.at(i, a);
            const float sb = scores.at(i, b);
            return sa != sb ? sa > sb : a < b;
        });
        for (std::size_t t = 0; t < l; ++t) {
            raw[i * n + order[t]] = 1;
        }
        // Smallest l scores -> -1, never overriding a +1 mark in this row.
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            const float sa = scores.at(i, a);
            const float sb = scores.at(i, b);
            return sa != sb ? sa < sb : a < b;
        });
        std::size_t marked = 0;
        for (std::size_t t = 0; t < order.size() && marked < l; ++t) {
            if (raw[i * n + order[t]] == 0) {
                raw[i * n + order[t]] = -1;
                ++marked;
            }
        }
    }

    AffinityLabels labels;
    labels.n = n;
    labels.pairs_per_row = l;
    labels.y.assign(n * n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) {
                labels.y[i * n + j] = 1;
                continue;
            }
            const std::int8_t a = raw[i * n + j];
            const std::int8_t b = raw[j * n + i];
            // Symmetrize; a similar mark from either side wins any conflict.
            if (a == 1 || b == 1) {
                labels.y[i * n + j] = 1;
            } else if (a == -1 || b == -1) {
                labels.y[i * n + j] = -1;
            }
        }
    }
    return labels;
}

namespace {

void require_symmetric(const RealMatrix& y_hat) {
    if (y_hat.rows() != y_hat.cols()) {
        throw DataError("learn_bit: target matrix must be square");
    }
    for (std::size_t i = 0; i < y_hat.rows(); ++i) {
        for (std::size_t j = i + 1; j < y_hat.cols(); ++j) {
            if (std::fabs(y_hat.at(i, j) - y_hat.at(j, i)) > 1e-5f) {
                throw DataError("learn_bit: target matrix is not symmetric at (" +
                                std::to_string(i) + ", " + std::to_string(j) + ")");
            }
        }
    }
}

std::vector<std::int8_t> sign_of(const std::vector<float>& z) {
    std::vector<std::int8_t> h(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) {
        h[i] = z[i] < 0.0f ? std::int8_t{-1} : std::int8_t{1};
    }
    return h;
}

std::vector<float> apply_embedding(const RealMatrix& g, const std::vector<float>& a) {
    std::vector<float> z(g.rows(), 0.0f);
    for (std::size_t i = 0; i < g.rows(); ++i) {
        float acc = 0.0f;
        for (std::size_t j = 0; j < g.cols(); ++j) {
            acc += g.at(i, j) * a[j];
        }
        z[i] = acc;
    }
    return z;
}

double code_objective(const RealMatrix& y_hat, const std::vector<std::int8_t>& h) {
    double obj = 0.0;
    const std::size_t n = y_hat.rows();
    for (std::size_t i = 0; i < n; ++i) {
        double row = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            row += static_cast<double>(y_hat.at(i, j)) * static_cast<double>(h[j]);
        }
        obj += row * static_cast<double>(h[i]);
    }
    return obj;
}

} // namespace

LearnBitResult learn_bit(const RealMatrix& y_hat,
                         const RealMatrix& g,
                         SeededRng& rng,
                         std::size_t steps,
                         float lr) {
    require_symmetric(y_hat);
    if (g.rows() != y_hat.rows()) {
        throw ShapeError("learn_bit: embedding rows " + std::to_string(g.rows()) +
                         " do not match target size " + std::to_string(y_hat.rows()));
    }
    if (g.cols() == 0) {
        throw ShapeError("learn_bit: embedding must have at least one column");
    }
    if (!(lr > 0.0f)) {
        throw ParamError("learn_bit: learning rate must be positive");
    }
    g.check_finite("learn_bit embedding");
    y_hat.check_finite("learn_bit target");

    const std::size_t n = g.rows();
    const std::size_t m = g.cols();

    std::vector<float> a(m);
    const float init_scale = 1.0f / std::sqrt(static_cast<float>(m));
    for (std::size_t j = 0; j < m; ++j) {
        a[j] = static_cast<float>(rng.next_normal()) * init_scale;
    }

    LearnBitResult best;
    best.weights = a;
    best.code = sign_of(apply_embedding(g, a));
    best.objective = code_objective(y_hat, best.code);

    std::vector<float> z(n);
    std::vector<float> masked(n);
    std::vector<double> grad(m);
    for (std::size_t step = 0; step < steps; ++step) {
        float rate = lr;
        if (step >= 150) {
            rate = lr * 0.25f;
        } else if (step >= 100) {
            rate = lr * 0.5f;
        }

        z = apply_embedding(g, a);
        const std::vector<std::int8_t> h = sign_of(z);

        // Ascent direction of h^T Y h through the straight-through
        // estimator: d/dz passes only where |z| <= 1, and dObj/dh = 2 Y h
        // by symmetry of Y.
        for (std::size_t i = 0; i < n; ++i) {
            double p = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                p += static_cast<double>(y_hat.at(i, j)) * static_cast<double>(h[j]);
            }
            masked[i] = (std::fabs(z[i]) <= 1.0f) ? static_cast<float>(2.0 * p) : 0.0f;
        }
        double norm_sq = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
            double acc = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                acc += static_cast<double>(g.at(i, j)) * static_cast<double>(masked[i]);
            }
            grad[j] = acc;
            norm_sq += acc * acc;
        }
        const double norm = std::sqrt(norm_sq);
        if (norm < 1e-12) {
            break;  // fully clipped or zero residual: nothing left to ascend
        }
        const double scale = static_cast<double>(rate) / norm;
        for (std::size_t j = 0; j < m; ++j) {
            a[j] += static_cast<float>(grad[j] * scale);
        }

        const std::vector<std::int8_t> h_new = sign_of(apply_embedding(g, a));
        const double obj = code_objective(y_hat, h_new);
        if (obj > best.objective) {
            best.objective = obj;
            best.weights = a;
            best.code = h_new;
        }
    }
    return best;
}

LearnReport learn_hash_functions(const RealMatrix& queries,
                                 const RealMatrix& scores,
                                 const HashLearningConfig& cfg,
                                 SeededRng& rng) {
    if (scores.rows() != queries.rows()) {
        throw ShapeError("learn_hash_functions: score rows " + std::to_string(scores.rows()) +
                         " do not match query rows " + std::to_string(queries.rows()));
    }
    if (cfg.steps == 0) {
        throw ParamError("learn_hash_functions: steps must be positive");
    }

    LearnReport report;
    report.hfs = fit_embedding(queries, cfg.m, cfg.sigma_mode, cfg.sigma, cfg.bits, rng);
    const RealMatrix g = embed(report.hfs, queries);
    const AffinityLabels labels = build_pairwise_labels(scores, cfg.pairs_per_row);

    const std::size_t n = queries.rows();
    RealMatrix y_hat(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            y_hat.at(i, j) = static_cast<float>(cfg.bits) *
                             static_cast<float>(labels.at(i, j));
        }
    }

    auto frob_sq = [](const RealMatrix& mtx) {
        double acc = 0.0;
        for (float x : mtx.data()) {
            acc += static_cast<double>(x) * static_cast<double>(x);
        }
        return acc;
    };

    report.hfs.a = RealMatrix(report.hfs.m(), cfg.bits);
    report.reconstruction_errors.push_back(frob_sq(y_hat));
    for (std::size_t r = 0; r < cfg.bits; ++r) {
        LearnBitResult bit = learn_bit(y_hat, g, rng, cfg.steps, cfg.lr);
        for (std::size_t j = 0; j < report.hfs.m(); ++j) {
            report.hfs.a.at(j, r) = bit.weights[j];
        }
        report.bit_objectives.push_back(bit.objective);

        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                y_hat.at(i, j) -= static_cast<float>(bit.code[i]) *
                                  static_cast<float>(bit.code[j]);
            }
        }
        const double err = frob_sq(y_hat);
        const double prev = report.reconstruction_errors.back();
        // Exact step identity: err - prev = n^2 - 2 * objective.  The error
        // can only grow when the bit objective falls short of n^2 / 2.
        const double n_sq = static_cast<double>(n) * static_cast<double>(n);
        if (bit.objective >= n_sq / 2.0 && err > prev + 1e-6 * n_sq) {
            throw StateError("learn_hash_functions: residual error increased despite "
                             "a sufficient bit objective");
        }
        report.reconstruction_errors.push_back(err);
    }
    report.residual = std::move(y_hat);
    return report;
}

bool refresh_schedule(std::size_t epoch, std::size_t interval) {
    if (interval == 0) {
        throw ParamError("refresh_schedule: interval must be positive");
    }
    return epoch % interval == 0;
}

double relaxed_bit_objective(const RealMatrix& g,
                             const RealMatrix& y_hat,
                             std::span<const double> a,
                             std::vector<double>* grad_out) {
    if (a.size() != g.cols()) {
        throw ShapeError("relaxed_bit_objective: weight length " + std::to_string(a.size()) +
                         " does not match embedding width " + std::to_string(g.cols()));
    }
    if (g.rows() != y_hat.rows() || y_hat.rows() != y_hat.cols()) {
        throw ShapeError("relaxed_bit_objective: dimension mismatch");
    }

    const std::size_t n = g.rows();
    const std::size_t m = g.cols();
    std::vector<double> u(n);
    for (std::size_t i = 0; i < n; ++i) {
        double z = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
            z += static_cast<double>(g.at(i, j)) * a[j];
        }
        u[i] = std::tanh(z);
    }
    std::vector<double> yu(n, 0.0);
    double value = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            acc += static_cast<double>(y_hat.at(i, j)) * u[j];
        }
        yu[i] = acc;
        value += u[i] * acc;
    }
    if (grad_out) {
        grad_out->assign(m, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const double factor = 2.0 * yu[i] * (1.0 - u[i] * u[i]);
            for (std::size_t j = 0; j < m; ++j) {
                (*grad_out)[j] += static_cast<double>(g.at(i, j)) * factor;
            }
        }
    }
    return value;
}

namespace {

constexpr char kMagic[4] = {'E', 'C', 'H', 'S'};
constexpr std::uint32_t kFormatVersion = 1;

void put_u32(std::ofstream& out, std::uint32_t v) {
    unsigned char bytes[4] = {
        static_cast<unsigned char>(v & 0xff),
        static_cast<unsigned char>((v >> 8) & 0xff),
        static_cast<unsigned char>((v >> 16) & 0xff),
        static_cast<unsigned char>((v >> 24) & 0xff),
    };
    out.write(reinterpret_cast<const char*>(bytes), 4);
}

void put_f32(std::ofstream& out, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(out, bits);
}

std::uint32_t get_u32(std::ifstream& in, const std::string& path) {
    unsigned char bytes[4];
    if (!in.read(reinterpret_cast<char*>(bytes), 4)) {
        throw IoError("load_hash_function_set: truncated file " + path);
    }
    return static_cast<std::uint32_t>(bytes[0]) |
           (static_cast<std::uint32_t>(bytes[1]) << 8) |
           (static_cast<std::uint32_t>(bytes[2]) << 16) |
           (static_cast<std::uint32_t>(bytes[3]) << 24);
}

float get_f32(std::ifstream& in, const std::string& path) {
    const std::uint32_t bits = get_u32(in, path);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
}

} // namespace

void save_hash_function_set(const HashFunctionSet& hfs, const std::string& path) {
    if (!hfs.has_weights()) {
        throw StateError("save_hash_function_set: weights have not been learned");
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("save_hash_function_set: cannot open " + path);
    }
    out.write(kMagic, 4);
    put_u32(out, kFormatVersion);
    put_u32(out, static_cast<std::uint32_t>(hfs.m()));
    put_u32(out, static_cast<std::uint32_t>(hfs.bits));
    put_u32(out, static_cast<std::uint32_t>(hfs.dim()));
    put_f32(out, hfs.bandwidth);
    for (float x : hfs.support_samples.data()) {
        put_f32(out, x);
    }
    for (float x : hfs.mu) {
        put_f32(out, x);
    }
    for (float x : hfs.a.data()) {
        put_f32(out, x);
    }
    out.flush();
    if (!out) {
        throw IoError("save_hash_function_set: write failed for " + path);
    }
}

HashFunctionSet load_hash_function_set(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("load_hash_function_set: cannot open " + path);
    }
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
        throw IoError("load_hash_function_set: bad magic in " + path);
    }
    const std::uint32_t version = get_u32(in, path);
    if (version != kFormatVersion) {
        throw IoError("load_hash_function_set: unsupported format version " +
                      std::to_string(version) + " in " + path);
    }
    const std::uint32_t m = get_u32(in, path);
    const std::uint32_t bits = get_u32(in, path);
    const std::uint32_t dim = get_u32(in, path);
    constexpr std::uint32_t kDimLimit = 1u << 20;
    if (m == 0 || bits == 0 || dim == 0 || m > kDimLimit || bits > kDimLimit ||
        dim > kDimLimit) {
        throw IoError("load_hash_function_set: implausible dimensions in " + path);
    }

    HashFunctionSet hfs;
    hfs.bits = bits;
    hfs.bandwidth = get_f32(in, path);
    hfs.support_samples = RealMatrix(m, dim);
    for (float& x : hfs.support_samples.data()) {
        x = get_f32(in, path);
    }
    hfs.mu.resize(m);
    for (float& x : hfs.mu) {
        x = get_f32(in, path);
    }
    hfs.a = RealMatrix(m, bits);
    for (float& x : hfs.a.data()) {
        x = get_f32(in, path);
    }
    if (in.peek() != std::ifstream::traits_type::eof()) {
        throw IoError("load_hash_function_set: trailing bytes in " + path);
    }
    return hfs;
}

} // namespace ecoattn
