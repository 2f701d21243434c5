// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include "fipp/common.hpp"
#include "fipp/objective.hpp"

#include <algorithm>
#include <limits>
#include <optional>
#include <string>

namespace fipp {

/// Output of an alignment run on the seed dictionary and the full vocabulary.
struct AlignmentResult {
    Matrix seed_aligned;  // c x d2, before rotation
    Matrix rotation;      // d2 x d2 orthogonal (d1 x d2 row-orthonormal for the linear baseline)
    Vector weights;       // per seed pair, max 1
    Matrix full_aligned;  // n x d2, rotated into the target basis
    std::optional<LossBreakdown> losses;
    std::optional<double> ortho_deviation; // only when d1 == d2
};

struct ProjectionInfo {
    double condition_number = 0.0; // sigma_max / sigma_min over retained singular values
    Index rank = 0;
};

/// Least-squares extension of a seed alignment to every source row: finds M
/// (n x d2) minimizing || seed_aligned M^T - seed_src full_src^T ||_F. Singular
/// values of seed_aligned below 1e-10 sigma_max are dropped, giving the
/// minimum-norm solution when seed_aligned is rank deficient.
inline Matrix least_squares_project(const Matrix& seed_aligned, const Matrix& seed_src, const Matrix& full_src,
                                    ProjectionInfo* info = nullptr) {
    detail::require(seed_aligned.rows() == seed_src.rows(), "least_squares_project: seed row counts differ");
    detail::require(seed_src.cols() == full_src.cols(), "least_squares_project: source dimensions differ");
    constexpr double kRelativeCutoff = 1e-10;

    Eigen::BDCSVD<Matrix> svd(seed_aligned, Eigen::ComputeThinU | Eigen::ComputeThinV);
    if (svd.info() != Eigen::Success) {
        throw NumericalError("least_squares_project: SVD failed");
    }
    svd.setThreshold(kRelativeCutoff);
    // The right-hand side seed_src * full_src^T is c x n; solve against seed_src
    // alone and apply full_src afterwards so it is never formed.
    const Matrix coeffs = svd.solve(seed_src); // d2 x d1

    if (info) {
        const Vector& s = svd.singularValues();
        info->rank = svd.rank();
        info->condition_number = info->rank > 0 ? s(0) / s(info->rank - 1)
                                                : std::numeric_limits<double>::infinity();
    }
    return full_src * coeffs.transpose();
}

/// Per-pair inverse transfer residual, floored and rescaled to a maximum of 1.
/// The residual of pair i is || seed_aligned[i] seed_aligned^T - tgt[i] tgt^T ||^2.
inline Vector residual_weights(const Matrix& seed_aligned, const Matrix& tgt_seed, double floor) {
    detail::require(floor > 0.0, "residual_weights: floor must be > 0");
    detail::require(seed_aligned.rows() == tgt_seed.rows(), "residual_weights: row counts differ");
    const Matrix diff = gram(seed_aligned).entries - gram(tgt_seed).entries;
    Vector w = diff.rowwise().squaredNorm().cwiseMax(floor).cwiseInverse();
    return w / w.maxCoeff();
}

/// As residual_weights, with the residual taken against the source seed Gram:
/// || seed_aligned[i] seed_src^T - tgt[i] tgt^T ||^2. Needs d1 == d2.
inline Vector residual_weights_literal(const Matrix& seed_aligned, const Matrix& seed_src, const Matrix& tgt_seed,
                                       double floor) {
    detail::require(floor > 0.0, "residual_weights: floor must be > 0");
    detail::require_same_shape(seed_aligned, seed_src, "residual_weights_literal");
    detail::require(seed_aligned.rows() == tgt_seed.rows(), "residual_weights: row counts differ");
    const Matrix diff = seed_aligned * seed_src.transpose() - gram(tgt_seed).entries;
    Vector w = diff.rowwise().squaredNorm().cwiseMax(floor).cwiseInverse();
    return w / w.maxCoeff();
}

/// argmin over orthogonal Omega of || W (a Omega - b) ||_F with W = diag(weights):
/// Omega = U V^T from the SVD of (W a)^T (W b).
inline Matrix weighted_procrustes(const Matrix& a, const Matrix& b, const Vector& weights) {
    detail::require_same_shape(a, b, "weighted_procrustes");
    detail::require(weights.size() == a.rows(), "weighted_procrustes: weights length != row count");
    const Vector w2 = weights.cwiseAbs2();
    const Matrix cross = a.transpose() * w2.asDiagonal() * b;
    Eigen::JacobiSVD<Matrix> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
    if (svd.info() != Eigen::Success) {
        throw NumericalError("weighted_procrustes: SVD failed");
    }
    return svd.matrixU() * svd.matrixV().transpose();
}

inline Matrix procrustes(const Matrix& a, const Matrix& b) {
    return weighted_procrustes(a, b, Vector::Ones(a.rows()));
}

/// argmin of || src Omega - tgt ||_F over d1 x d2 matrices with Omega Omega^T = I.
inline Matrix orthonormal_linear_map(const Matrix& src_seed, const Matrix& tgt_seed) {
    detail::require(src_seed.rows() == tgt_seed.rows(), "orthonormal_linear_map: row counts differ");
    if (src_seed.cols() > tgt_seed.cols()) {
        throw ConfigError("orthonormal_linear_map: needs d1 <= d2 (got d1=" + std::to_string(src_seed.cols()) +
                          ", d2=" + std::to_string(tgt_seed.cols()) + ")");
    }
    const Matrix cross = src_seed.transpose() * tgt_seed; // d1 x d2
    Eigen::JacobiSVD<Matrix> svd(cross, Eigen::ComputeThinU | Eigen::ComputeThinV);
    if (svd.info() != Eigen::Success) {
        throw NumericalError("orthonormal_linear_map: SVD failed");
    }
    return svd.matrixU() * svd.matrixV().transpose();
}

/// || seed_aligned - seed_src Omega* ||_F / || seed_src ||_F with Omega* the
/// Procrustes rotation of seed_src onto seed_aligned.
inline double orthogonal_deviation(const Matrix& seed_aligned, const Matrix& seed_src) {
    detail::require_same_shape(seed_aligned, seed_src, "orthogonal_deviation");
    const double norm = seed_src.norm();
    if (norm == 0.0) {
        throw ConfigError("orthogonal_deviation: source seed matrix has zero norm");
    }
    const Matrix omega = procrustes(seed_src, seed_aligned);
    return (seed_aligned - seed_src * omega).norm() / norm;
}

/// || E E^T - F F^T ||_F, accumulated over row blocks so the n x n products
/// are never held at once.
inline double pip_distance(const Matrix& e, const Matrix& f) {
    detail::require(e.rows() == f.rows(), "pip_distance: row counts differ");
    constexpr Index kBlock = 1024;
    const Index n = e.rows();
    double sum = 0.0;
    for (Index start = 0; start < n; start += kBlock) {
        const Index len = std::min(kBlock, n - start);
        const Matrix block = e.middleRows(start, len) * e.transpose() - f.middleRows(start, len) * f.transpose();
        sum += block.squaredNorm();
    }
    return std::sqrt(sum);
}

} // namespace fipp
