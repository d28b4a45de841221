#include "ecoattn/random_features.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "ecoattn/errors.hpp"

namespace ecoattn {

RandomFeatureMap make_random_feature_map(std::size_t head_dim,
                                         std::size_t num_features,
                                         float sigma,
                                         SeededRng& rng) {
    if (head_dim == 0 || num_features == 0) {
        throw ParamError("make_random_feature_map: head_dim and num_features must be positive");
    }
    if (!(sigma > 0.0f)) {
        throw ParamError("make_random_feature_map: sigma must be positive");
    }

    RandomFeatureMap map;
    map.bandwidth = sigma;
    map.scale = std::sqrt(2.0f / static_cast<float>(num_features));
    map.projection = RealMatrix(head_dim, num_features);
    const double inv_sigma = 1.0 / static_cast<double>(sigma);
    for (std::size_t d = 0; d < head_dim; ++d) {
        for (std::size_t j = 0; j < num_features; ++j) {
            map.projection.at(d, j) = static_cast<float>(rng.next_normal() * inv_sigma);
        }
    }
    map.offsets.resize(num_features);
    for (std::size_t j = 0; j < num_features; ++j) {
        map.offsets[j] = static_cast<float>(rng.next_uniform() * 2.0 * std::numbers::pi);
    }
    return map;
}

RealMatrix apply_random_features(const RealMatrix& x,
                                 const RandomFeatureMap& map,
                                 OpLedger* ledger) {
    if (x.cols() != map.head_dim()) {
        throw ShapeError("apply_random_features: input width " + std::to_string(x.cols()) +
                         " does not match map dimension " + std::to_string(map.head_dim()));
    }
    x.check_finite("apply_random_features input");

    const std::size_t f = map.num_features();
    RealMatrix out(x.rows(), f);
    for (std::size_t i = 0; i < x.rows(); ++i) {
        for (std::size_t j = 0; j < f; ++j) {
            // Projection: head_dim multiply-accumulates into a zeroed phase.
            float phase = 0.0f;
            for (std::size_t d = 0; d < x.cols(); ++d) {
                phase += x.at(i, d) * map.projection.at(d, j);
                if (ledger) {
                    ledger->mul += 1;
                    ledger->add += 1;
                }
            }
            phase += map.offsets[j];
            if (ledger) {
                ledger->add += 1;
            }
            out.at(i, j) = map.scale * std::cos(phase);
            if (ledger) {
                ledger->exp += 1;  // transcendental evaluation
                ledger->mul += 1;  // scale application
            }
        }
    }
    return out;
}

} // namespace ecoattn
