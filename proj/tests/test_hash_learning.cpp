#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <vector>

#include "ecoattn/attention.hpp"
#include "ecoattn/errors.hpp"
#include "ecoattn/hash_learning.hpp"
#include "ecoattn/numerics.hpp"
#include "ecoattn/rng.hpp"
#include "oracles.hpp"

using namespace ecoattn;

namespace {

RealMatrix random_matrix(std::size_t rows, std::size_t cols, SeededRng& rng) {
    RealMatrix m(rows, cols);
    for (float& x : m.data()) {
        x = static_cast<float>(rng.next_normal());
    }
    return m;
}

RealMatrix random_unit_rows(std::size_t rows, std::size_t cols, SeededRng& rng) {
    return row_l2_normalize(random_matrix(rows, cols, rng)).matrix;
}

RealMatrix random_symmetric(std::size_t n, SeededRng& rng) {
    RealMatrix s(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i; j < n; ++j) {
            const float v = static_cast<float>(rng.next_normal());
            s.at(i, j) = v;
            s.at(j, i) = v;
        }
    }
    return s;
}

/// Unit rows drawn around +/- separation/2 along the first axis, alternating
/// cluster by row parity.
RealMatrix two_cluster_rows(std::size_t n, std::size_t dim, float separation,
                            float noise, SeededRng& rng) {
    RealMatrix x(n, dim);
    for (std::size_t i = 0; i < n; ++i) {
        const float side = (i % 2 == 0) ? 0.5f : -0.5f;
        x.at(i, 0) = side * separation;
        for (std::size_t c = 0; c < dim; ++c) {
            x.at(i, c) += noise * static_cast<float>(rng.next_normal());
        }
    }
    return row_l2_normalize(x).matrix;
}

/// Independent re-derivation of the pairwise labels using stable sorts.
std::vector<std::int8_t> labels_oracle(const RealMatrix& scores, std::size_t l) {
    const std::size_t n = scores.rows();
    std::vector<std::int8_t> raw(n * n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<std::size_t> cols;
        for (std::size_t j = 0; j < n; ++j) {
            if (j != i) {
                cols.push_back(j);
            }
        }
        std::stable_sort(cols.begin(), cols.end(), [&](std::size_t a, std::size_t b) {
            return scores.at(i, a) > scores.at(i, b);
        });
        for (std::size_t t = 0; t < l; ++t) {
            raw[i * n + cols[t]] = 1;
        }
        std::stable_sort(cols.begin(), cols.end(), [&](std::size_t a, std::size_t b) {
            return scores.at(i, a) < scores.at(i, b);
        });
        std::size_t marked = 0;
        for (std::size_t t = 0; t < cols.size() && marked < l; ++t) {
            if (raw[i * n + cols[t]] == 0) {
                raw[i * n + cols[t]] = -1;
                ++marked;
            }
        }
    }
    std::vector<std::int8_t> y(n * n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) {
                y[i * n + j] = 1;
            } else if (raw[i * n + j] == 1 || raw[j * n + i] == 1) {
                y[i * n + j] = 1;
            } else if (raw[i * n + j] == -1 || raw[j * n + i] == -1) {
                y[i * n + j] = -1;
            }
        }
    }
    return y;
}

/// Replays the documented N(0, 1/m) weight initialization.
std::vector<float> replay_init(std::size_t m, std::uint64_t seed) {
    SeededRng rng(seed);
    std::vector<float> a(m);
    const float scale = 1.0f / std::sqrt(static_cast<float>(m));
    for (float& w : a) {
        w = static_cast<float>(rng.next_normal()) * scale;
    }
    return a;
}

double code_objective_oracle(const RealMatrix& y_hat, const std::vector<std::int8_t>& h) {
    double obj = 0.0;
    for (std::size_t i = 0; i < y_hat.rows(); ++i) {
        for (std::size_t j = 0; j < y_hat.cols(); ++j) {
            obj += static_cast<double>(y_hat.at(i, j)) * h[i] * h[j];
        }
    }
    return obj;
}

std::filesystem::path temp_file(const char* name) {
    return std::filesystem::temp_directory_path() / name;
}

} // namespace

TEST_CASE("gaussian kernel hits its landmark values") {
    const std::vector<float> origin{0.0f, 0.0f};
    CHECK(rbf_kernel(origin, origin, 1.0f) == 1.0f);

    // Squared distance equal to 2 sigma^2 lands exactly on 1/e.
    const std::vector<float> x{0.0f};
    const std::vector<float> y{2.0f};
    CHECK(std::fabs(rbf_kernel(x, y, std::sqrt(2.0f)) - std::exp(-1.0f)) < 1e-6f);

    const std::vector<float> far{10.0f};
    CHECK(rbf_kernel(x, far, 1.0f) < 1e-6f);

    CHECK_THROWS_AS(rbf_kernel(origin, x, 1.0f), ShapeError);
    CHECK_THROWS_AS(rbf_kernel(x, y, 0.0f), ParamError);
}

TEST_CASE("embedding fit validates its sample budget") {
    SeededRng rng(60);
    const RealMatrix queries = random_unit_rows(8, 4, rng);
    CHECK_THROWS_AS(fit_embedding(queries, 9, SigmaMode::fixed, 1.0f, 4, rng), ParamError);
    CHECK_THROWS_AS(fit_embedding(queries, 0, SigmaMode::fixed, 1.0f, 4, rng), ParamError);
    CHECK_THROWS_AS(fit_embedding(queries, 4, SigmaMode::fixed, 1.0f, 0, rng), ParamError);
    CHECK_THROWS_AS(fit_embedding(queries, 4, SigmaMode::fixed, 0.0f, 4, rng), ParamError);

    const HashFunctionSet hfs = fit_embedding(queries, 4, SigmaMode::fixed, 2.5f, 4, rng);
    CHECK(hfs.bandwidth == 2.5f);
    CHECK(hfs.m() == 4);
    CHECK(hfs.dim() == 4);
    CHECK_FALSE(hfs.has_weights());

    const HashFunctionSet med = fit_embedding(queries, 4, SigmaMode::median, 0.0f, 4, rng);
    CHECK(med.bandwidth > 0.0f);
}

TEST_CASE("using every row as support yields a permutation of the rows") {
    SeededRng rng(61);
    const RealMatrix queries = random_unit_rows(6, 3, rng);
    const HashFunctionSet hfs = fit_embedding(queries, 6, SigmaMode::fixed, 1.0f, 4, rng);

    auto sorted_rows = [](const RealMatrix& m) {
        std::vector<std::vector<float>> rows;
        for (std::size_t i = 0; i < m.rows(); ++i) {
            rows.emplace_back(m.row(i).begin(), m.row(i).end());
        }
        std::sort(rows.begin(), rows.end());
        return rows;
    };
    CHECK(sorted_rows(hfs.support_samples) == sorted_rows(queries));
}

TEST_CASE("constant inputs embed to exactly zero") {
    RealMatrix queries(8, 3);
    for (std::size_t i = 0; i < 8; ++i) {
        queries.at(i, 0) = 0.25f;
        queries.at(i, 1) = -1.0f;
        queries.at(i, 2) = 0.5f;
    }
    SeededRng rng(62);
    const HashFunctionSet hfs = fit_embedding(queries, 3, SigmaMode::median, 0.0f, 2, rng);
    CHECK(hfs.bandwidth == 1.0f);  // degenerate median falls back to 1
    const RealMatrix g = embed(hfs, queries);
    for (const float v : g.data()) {
        CHECK(v == 0.0f);
    }
}

TEST_CASE("embedding columns are centered over the fit set") {
    SeededRng rng(63);
    const RealMatrix queries = random_unit_rows(32, 8, rng);
    const HashFunctionSet hfs = fit_embedding(queries, 8, SigmaMode::median, 0.0f, 4, rng);
    const RealMatrix g = embed(hfs, queries);
    for (std::size_t j = 0; j < g.cols(); ++j) {
        double mean = 0.0;
        for (std::size_t i = 0; i < g.rows(); ++i) {
            mean += g.at(i, j);
        }
        mean /= static_cast<double>(g.rows());
        CHECK(std::fabs(mean) < 1e-6);
    }
}

TEST_CASE("embedding a support sample isolates its centering offset") {
    SeededRng rng(64);
    const RealMatrix queries = random_unit_rows(10, 4, rng);
    const HashFunctionSet hfs = fit_embedding(queries, 5, SigmaMode::fixed, 1.0f, 4, rng);
    const RealMatrix g = embed(hfs, hfs.support_samples);
    for (std::size_t j = 0; j < hfs.m(); ++j) {
        CHECK(g.at(j, j) == 1.0f - hfs.mu[j]);
    }
    CHECK_THROWS_AS(embed(hfs, RealMatrix(2, 5)), ShapeError);
}

TEST_CASE("batch embedding equals row-by-row embedding") {
    SeededRng rng(65);
    const RealMatrix queries = random_unit_rows(12, 6, rng);
    const HashFunctionSet hfs = fit_embedding(queries, 4, SigmaMode::fixed, 0.7f, 4, rng);
    const RealMatrix x = random_unit_rows(7, 6, rng);
    const RealMatrix batch = embed(hfs, x);
    for (std::size_t i = 0; i < x.rows(); ++i) {
        RealMatrix single(1, 6);
        for (std::size_t c = 0; c < 6; ++c) {
            single.at(0, c) = x.at(i, c);
        }
        const RealMatrix one = embed(hfs, single);
        for (std::size_t j = 0; j < hfs.m(); ++j) {
            CHECK(batch.at(i, j) == one.at(0, j));
        }
    }
}

TEST_CASE("hashing requires learned weights and flips with them") {
    SeededRng rng(66);
    const RealMatrix queries = random_unit_rows(16, 8, rng);
    HashFunctionSet hfs = fit_embedding(queries, 4, SigmaMode::fixed, 1.0f, 8, rng);
    CHECK_THROWS_AS(hash_codes(hfs, queries), StateError);

    hfs.a = random_matrix(4, 8, rng);
    const BinaryCodeMatrix codes = hash_codes(hfs, queries);

    HashFunctionSet negated = hfs;
    for (float& w : negated.a.data()) {
        w = -w;
    }
    const BinaryCodeMatrix flipped = hash_codes(negated, queries);
    for (std::size_t i = 0; i < 16; ++i) {
        for (std::size_t r = 0; r < 8; ++r) {
            CHECK(static_cast<int>(flipped.row(i)[r]) == -static_cast<int>(codes.row(i)[r]));
        }
    }
}

TEST_CASE("hash codes match a scalar re-derivation") {
    SeededRng rng(67);
    const RealMatrix queries = random_unit_rows(16, 6, rng);
    HashFunctionSet hfs = fit_embedding(queries, 4, SigmaMode::fixed, 1.2f, 8, rng);
    hfs.a = random_matrix(4, 8, rng);
    const BinaryCodeMatrix codes = hash_codes(hfs, queries);

    for (std::size_t i = 0; i < queries.rows(); ++i) {
        for (std::size_t r = 0; r < hfs.bits; ++r) {
            double z = 0.0;
            for (std::size_t j = 0; j < hfs.m(); ++j) {
                double sumsq = 0.0;
                for (std::size_t c = 0; c < queries.cols(); ++c) {
                    const double d = hfs.support_samples.at(j, c) - queries.at(i, c);
                    sumsq += d * d;
                }
                const double kernel =
                    std::exp(-sumsq / (2.0 * hfs.bandwidth * hfs.bandwidth));
                z += (kernel - hfs.mu[j]) * hfs.a.at(j, r);
            }
            const int want = z < 0.0 ? -1 : 1;
            CHECK(static_cast<int>(codes.row(i)[r]) == want);
        }
    }
}

TEST_CASE("the three-token label example marks one similar and one dissimilar pair") {
    RealMatrix scores(3, 3, {1.0f, 0.9f, 0.1f,
                             0.9f, 1.0f, 0.2f,
                             0.1f, 0.2f, 1.0f});
    const AffinityLabels labels = build_pairwise_labels(scores, 1);
    CHECK(labels.at(0, 1) == 1);
    CHECK(labels.at(0, 2) == -1);
    CHECK(labels.at(1, 2) == 1);  // row 2's top pick wins over row 1's bottom mark
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(labels.at(i, i) == 1);
    }
}

TEST_CASE("labels match an independent oracle on random instances") {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        SeededRng rng(seed);
        const std::size_t n = 5 + rng.next_index(8);
        const std::size_t l = 1 + rng.next_index((n - 1) / 2);
        const RealMatrix scores = random_matrix(n, n, rng);
        const AffinityLabels labels = build_pairwise_labels(scores, l);
        const std::vector<std::int8_t> want = labels_oracle(scores, l);
        REQUIRE(labels.y.size() == want.size());
        for (std::size_t i = 0; i < want.size(); ++i) {
            CHECK(labels.y[i] == want[i]);
        }
        // Symmetric with a +1 diagonal, values restricted to {-1, 0, +1}.
        for (std::size_t i = 0; i < n; ++i) {
            CHECK(labels.at(i, i) == 1);
            for (std::size_t j = 0; j < n; ++j) {
                CHECK(labels.at(i, j) == labels.at(j, i));
                CHECK(std::abs(static_cast<int>(labels.at(i, j))) <= 1);
            }
        }
    }
}

TEST_CASE("tied scores resolve deterministically toward lower columns") {
    RealMatrix scores(5, 5);
    for (float& v : scores.data()) {
        v = 0.5f;
    }
    const AffinityLabels a = build_pairwise_labels(scores, 1);
    const AffinityLabels b = build_pairwise_labels(scores, 1);
    CHECK(a.y == b.y);
    // Row 0 prefers the lowest off-diagonal column for both marks.
    CHECK(a.at(0, 1) == 1);
    CHECK(a.at(1, 2) == -1);
}

TEST_CASE("label parameters are validated") {
    RealMatrix scores(6, 6);
    CHECK_THROWS_AS(build_pairwise_labels(scores, 0), ParamError);
    CHECK_THROWS_AS(build_pairwise_labels(scores, 3), ParamError);
    CHECK_THROWS_AS(build_pairwise_labels(RealMatrix(3, 4), 1), ShapeError);
}

TEST_CASE("a zero target leaves the initial weights untouched") {
    SeededRng rng(70);
    const RealMatrix g = random_matrix(8, 4, rng);
    const RealMatrix y_hat(8, 8);

    SeededRng learner(123);
    const LearnBitResult result = learn_bit(y_hat, g, learner);
    CHECK(result.objective == 0.0);
    CHECK(result.weights == replay_init(4, 123));
}

TEST_CASE("the returned objective never falls below the initialization") {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        SeededRng data_rng(seed);
        const RealMatrix g = random_matrix(10, 5, data_rng);
        const RealMatrix y_hat = random_symmetric(10, data_rng);

        const std::vector<float> init = replay_init(5, seed + 500);
        std::vector<std::int8_t> h0(10);
        for (std::size_t i = 0; i < 10; ++i) {
            float z = 0.0f;
            for (std::size_t j = 0; j < 5; ++j) {
                z += g.at(i, j) * init[j];
            }
            h0[i] = z < 0.0f ? std::int8_t{-1} : std::int8_t{1};
        }
        const double init_objective = code_objective_oracle(y_hat, h0);

        SeededRng learner(seed + 500);
        const LearnBitResult result = learn_bit(y_hat, g, learner);
        CHECK(result.objective >= init_objective);
        // The reported objective matches the returned code.
        CHECK(result.objective == doctest::Approx(code_objective_oracle(y_hat, result.code))
                                      .epsilon(1e-12));
    }
}

TEST_CASE("a planted rank-one target is recovered through an identity embedding") {
    // With g = I the code is sign(a) directly, and the masked gradient on a
    // rank-one target 16 * h h^T always points along +-h, so every
    // misaligned coordinate of the weight vector gets pushed across zero.
    // An odd length keeps the initial correlation with h away from zero,
    // which would otherwise stall the ascent at a flat point.
    const std::size_t n = 15;
    double total_ratio = 0.0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        SeededRng rng(seed);
        std::vector<std::int8_t> planted(n);
        for (std::size_t i = 0; i < n; ++i) {
            planted[i] = rng.next_normal() < 0.0 ? std::int8_t{-1} : std::int8_t{1};
        }
        RealMatrix identity(n, n);
        for (std::size_t i = 0; i < n; ++i) {
            identity.at(i, i) = 1.0f;
        }
        RealMatrix y_hat(n, n);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                y_hat.at(i, j) =
                    16.0f * static_cast<float>(planted[i] * planted[j]);
            }
        }
        SeededRng learner(seed + 900);
        const LearnBitResult result = learn_bit(y_hat, identity, learner);
        const double optimum = 16.0 * static_cast<double>(n) * static_cast<double>(n);
        total_ratio += result.objective / optimum;
    }
    CHECK(total_ratio / 20.0 >= 0.9);
}

TEST_CASE("learned bits reach most of the exhaustive optimum on small instances") {
    const std::size_t n = 8;
    double total_ratio = 0.0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        SeededRng rng(seed);
        const RealMatrix q = random_unit_rows(n, 8, rng);
        const RealMatrix v = random_matrix(n, 8, rng);
        OpLedger ledger;
        RealMatrix weights;
        softmax_attention(q, q, v, 0.5f, ledger, &weights);
        const AffinityLabels labels = build_pairwise_labels(weights, 2);

        RealMatrix y_hat(n, n);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                y_hat.at(i, j) = 16.0f * static_cast<float>(labels.at(i, j));
            }
        }
        const HashFunctionSet hfs = fit_embedding(q, n, SigmaMode::median, 0.0f, 1, rng);
        const RealMatrix g = embed(hfs, q);

        double best = -1e300;
        for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
            std::vector<std::int8_t> h(n);
            for (std::size_t i = 0; i < n; ++i) {
                h[i] = (mask >> i) & 1u ? std::int8_t{1} : std::int8_t{-1};
            }
            best = std::max(best, code_objective_oracle(y_hat, h));
        }

        SeededRng learner(seed + 300);
        const LearnBitResult result = learn_bit(y_hat, g, learner);
        REQUIRE(best > 0.0);
        total_ratio += result.objective / best;
    }
    CHECK(total_ratio / 20.0 >= 0.8);
}

TEST_CASE("asymmetric targets are rejected") {
    SeededRng rng(71);
    const RealMatrix g = random_matrix(4, 3, rng);
    RealMatrix y_hat(4, 4);
    y_hat.at(0, 1) = 1.0f;
    y_hat.at(1, 0) = -1.0f;
    CHECK_THROWS_AS(learn_bit(y_hat, g, rng), DataError);
}

TEST_CASE("the residual recursion obeys its exact step identity") {
    SeededRng rng(72);
    const std::size_t n = 16;
    const RealMatrix q = random_unit_rows(n, 8, rng);
    const RealMatrix v = random_matrix(n, 8, rng);
    OpLedger ledger;
    RealMatrix weights;
    softmax_attention(q, q, v, 0.5f, ledger, &weights);

    HashLearningConfig cfg;
    cfg.m = 8;
    cfg.bits = 8;
    cfg.pairs_per_row = 3;
    SeededRng learn_rng(72);
    const LearnReport report = learn_hash_functions(q, weights, cfg, learn_rng);

    REQUIRE(report.bit_objectives.size() == cfg.bits);
    REQUIRE(report.reconstruction_errors.size() == cfg.bits + 1);
    const double n_sq = static_cast<double>(n) * static_cast<double>(n);
    for (std::size_t r = 0; r < cfg.bits; ++r) {
        const double step = report.reconstruction_errors[r + 1] -
                            report.reconstruction_errors[r];
        CHECK(std::fabs(step - (n_sq - 2.0 * report.bit_objectives[r])) <= 1e-4);
    }
}

TEST_CASE("the final residual equals the target minus the learned code outer products") {
    SeededRng rng(73);
    const std::size_t n = 16;
    const RealMatrix q = random_unit_rows(n, 8, rng);
    const RealMatrix v = random_matrix(n, 8, rng);
    OpLedger ledger;
    RealMatrix weights;
    softmax_attention(q, q, v, 0.5f, ledger, &weights);

    HashLearningConfig cfg;
    cfg.m = 8;
    cfg.bits = 8;
    cfg.pairs_per_row = 3;
    SeededRng learn_rng(73);
    const LearnReport report = learn_hash_functions(q, weights, cfg, learn_rng);

    const AffinityLabels labels = build_pairwise_labels(weights, cfg.pairs_per_row);
    const BinaryCodeMatrix codes = hash_codes(report.hfs, q);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double want = static_cast<double>(cfg.bits) * labels.at(i, j);
            for (std::size_t r = 0; r < cfg.bits; ++r) {
                want -= static_cast<double>(codes.row(i)[r]) *
                        static_cast<double>(codes.row(j)[r]);
            }
            CHECK(std::fabs(report.residual.at(i, j) - want) <= 1e-4);
        }
    }
}

TEST_CASE("learning is reproducible from the seed") {
    SeededRng rng(74);
    const RealMatrix q = random_unit_rows(12, 6, rng);
    const RealMatrix v = random_matrix(12, 6, rng);
    OpLedger ledger;
    RealMatrix weights;
    softmax_attention(q, q, v, 0.5f, ledger, &weights);

    HashLearningConfig cfg;
    cfg.m = 6;
    cfg.bits = 4;
    cfg.pairs_per_row = 2;
    SeededRng first(99);
    SeededRng second(99);
    const LearnReport a = learn_hash_functions(q, weights, cfg, first);
    const LearnReport b = learn_hash_functions(q, weights, cfg, second);
    CHECK(a.hfs.a == b.hfs.a);
    CHECK(a.hfs.support_samples == b.hfs.support_samples);
    CHECK(a.bit_objectives == b.bit_objectives);
    CHECK(a.reconstruction_errors == b.reconstruction_errors);
}

TEST_CASE("learning configuration errors are reported") {
    SeededRng rng(75);
    const RealMatrix q = random_unit_rows(8, 4, rng);
    const RealMatrix scores = random_symmetric(8, rng);
    HashLearningConfig cfg;
    cfg.m = 4;
    cfg.bits = 0;
    cfg.pairs_per_row = 2;
    CHECK_THROWS_AS(learn_hash_functions(q, scores, cfg, rng), ParamError);
    cfg.bits = 4;
    cfg.steps = 0;
    CHECK_THROWS_AS(learn_hash_functions(q, scores, cfg, rng), ParamError);
    cfg.steps = 200;
    CHECK_THROWS_AS(learn_hash_functions(q, RealMatrix(7, 7), cfg, rng), ShapeError);
}

TEST_CASE("clustered inputs hash closer within clusters than across them") {
    const std::size_t n = 64;
    const std::size_t dim = 32;
    std::size_t successes = 0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        SeededRng rng(seed);
        const RealMatrix q = two_cluster_rows(n, dim, 4.0f, 1.0f, rng);
        const RealMatrix v = random_matrix(n, dim, rng);
        OpLedger ledger;
        RealMatrix weights;
        softmax_attention(q, q, v, 0.5f, ledger, &weights);

        HashLearningConfig cfg;
        cfg.m = 25;
        cfg.bits = 16;
        cfg.pairs_per_row = 10;
        const LearnReport report = learn_hash_functions(q, weights, cfg, rng);
        const BinaryCodeMatrix codes = hash_codes(report.hfs, q);

        double intra = 0.0;
        double inter = 0.0;
        std::size_t intra_count = 0;
        std::size_t inter_count = 0;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = i + 1; j < n; ++j) {
                const double d = static_cast<double>(
                    hamming_distance(codes.row(i), codes.row(j)));
                if (i % 2 == j % 2) {
                    intra += d;
                    ++intra_count;
                } else {
                    inter += d;
                    ++inter_count;
                }
            }
        }
        intra /= static_cast<double>(intra_count);
        inter /= static_cast<double>(inter_count);
        if (intra < inter) {
            ++successes;
        }
    }
    CHECK(successes >= 19);  // at least 95% of 20 seeds
}

TEST_CASE("refresh schedule fires at epoch zero and every interval") {
    CHECK(refresh_schedule(0, 30));
    CHECK_FALSE(refresh_schedule(29, 30));
    CHECK(refresh_schedule(30, 30));
    CHECK(refresh_schedule(60, 30));
    CHECK_FALSE(refresh_schedule(31, 30));
    CHECK_THROWS_AS(refresh_schedule(5, 0), ParamError);
}

TEST_CASE("the relaxed objective gradient matches central differences") {
    std::size_t checked = 0;
    for (std::uint64_t seed = 1; seed <= 50; ++seed) {
        SeededRng rng(seed);
        const std::size_t n = 4 + rng.next_index(9);   // up to 12
        const std::size_t m = 2 + rng.next_index(5);   // up to 6
        const RealMatrix g = random_matrix(n, m, rng);
        const RealMatrix y_hat = random_symmetric(n, rng);
        std::vector<double> a(m);
        for (double& w : a) {
            w = rng.next_normal() * 0.5;
        }

        std::vector<double> analytic;
        relaxed_bit_objective(g, y_hat, a, &analytic);
        const std::vector<double> numeric = oracles::finite_difference_gradient(
            [&](const std::vector<double>& point) {
                return relaxed_bit_objective(g, y_hat, point);
            },
            a, 1e-5);

        double max_diff = 0.0;
        double max_mag = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
            max_diff = std::max(max_diff, std::fabs(analytic[j] - numeric[j]));
            max_mag = std::max(max_mag, std::fabs(analytic[j]));
        }
        CHECK(max_diff <= 1e-4 * std::max(max_mag, 1.0));
        ++checked;
    }
    CHECK(checked == 50);
}

TEST_CASE("learned sets survive a byte-exact round trip") {
    SeededRng rng(76);
    const RealMatrix q = random_unit_rows(12, 6, rng);
    HashFunctionSet hfs = fit_embedding(q, 5, SigmaMode::median, 0.0f, 8, rng);

    const auto path = temp_file("ecoattn_test_hash_set.bin");
    CHECK_THROWS_AS(save_hash_function_set(hfs, path.string()), StateError);

    hfs.a = random_matrix(5, 8, rng);
    save_hash_function_set(hfs, path.string());
    const HashFunctionSet loaded = load_hash_function_set(path.string());
    CHECK(loaded.support_samples == hfs.support_samples);
    CHECK(loaded.mu == hfs.mu);
    CHECK(loaded.a == hfs.a);
    CHECK(loaded.bandwidth == hfs.bandwidth);
    CHECK(loaded.bits == hfs.bits);

    // Loaded sets hash identically.
    const BinaryCodeMatrix original = hash_codes(hfs, q);
    const BinaryCodeMatrix reloaded = hash_codes(loaded, q);
    CHECK(original == reloaded);
    std::filesystem::remove(path);
}

TEST_CASE("malformed serialized sets are rejected") {
    SeededRng rng(77);
    const RealMatrix q = random_unit_rows(8, 4, rng);
    HashFunctionSet hfs = fit_embedding(q, 3, SigmaMode::fixed, 1.0f, 4, rng);
    hfs.a = random_matrix(3, 4, rng);

    const auto path = temp_file("ecoattn_test_hash_bad.bin");
    save_hash_function_set(hfs, path.string());

    auto read_bytes = [&]() {
        std::ifstream in(path, std::ios::binary);
        return std::vector<char>((std::istreambuf_iterator<char>(in)),
                                 std::istreambuf_iterator<char>());
    };
    auto write_bytes = [&](const std::vector<char>& bytes) {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    };

    const std::vector<char> good = read_bytes();

    std::vector<char> bad_magic = good;
    bad_magic[0] = 'X';
    write_bytes(bad_magic);
    CHECK_THROWS_AS(load_hash_function_set(path.string()), IoError);

    std::vector<char> bad_version = good;
    bad_version[4] = 9;
    write_bytes(bad_version);
    CHECK_THROWS_AS(load_hash_function_set(path.string()), IoError);

    std::vector<char> truncated(good.begin(), good.begin() + 20);
    write_bytes(truncated);
    CHECK_THROWS_AS(load_hash_function_set(path.string()), IoError);

    std::vector<char> trailing = good;
    trailing.push_back('\0');
    write_bytes(trailing);
    CHECK_THROWS_AS(load_hash_function_set(path.string()), IoError);

    std::filesystem::remove(path);
    CHECK_THROWS_AS(load_hash_function_set(path.string()), IoError);
}
