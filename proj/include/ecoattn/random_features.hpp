#pragma once

#include <vector>

#include "ecoattn/matrix.hpp"
#include "ecoattn/op_ledger.hpp"
#include "ecoattn/rng.hpp"

namespace ecoattn {

/// Cosine random-feature map for the Gaussian kernel
/// k(x, y) = exp(-||x - y||^2 / (2 sigma^2)).
///
/// phi(x)_j = scale * cos(x . w_j + offset_j), with w_j ~ N(0, 1/sigma^2)
/// i.i.d., offset_j ~ U[0, 2pi), scale = sqrt(2 / num_features).  Then
/// E[phi(x) . phi(y)] = k(x, y).
struct RandomFeatureMap {
    RealMatrix projection;       ///< head_dim x num_features
    std::vector<float> offsets;  ///< num_features
    float bandwidth = 1.0f;      ///< sigma
    float scale = 0.0f;          ///< sqrt(2 / num_features)

    std::size_t head_dim() const { return projection.rows(); }
    std::size_t num_features() const { return projection.cols(); }
};

RandomFeatureMap make_random_feature_map(std::size_t head_dim,
                                         std::size_t num_features,
                                         float sigma,
                                         SeededRng& rng);

/// Applies the map row-wise: out is x.rows() x num_features.  When a ledger
/// is supplied, the projection is billed as multiply-accumulates, the offset
/// as one add, the cosine as one transcendental and the scale as one
/// multiply per feature.
RealMatrix apply_random_features(const RealMatrix& x,
                                 const RandomFeatureMap& map,
                                 OpLedger* ledger = nullptr);

} // namespace ecoattn
