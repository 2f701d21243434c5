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

#include <algorithm>
#include <cstdint>
#include <random>
#include <string>

namespace fipp {

struct EigenOptions {
    /// Matrices up to this order use a full dense decomposition.
    Index dense_limit = 2048;
    /// Ritz residual tolerance, relative to the spectral radius.
    double tolerance = 1e-10;
    /// 0 means 10 * order.
    Index max_iterations = 0;
    /// Extra block columns beyond k; 0 means max(16, k / 4).
    Index oversample = 0;
    std::uint64_t seed = 0x9e3779b97f4a7c15ULL;
};

/// The k algebraically largest eigenpairs, values descending. Every vector's
/// largest-magnitude component is positive.
struct EigenPairs {
    Vector values;
    Matrix vectors;
    Index iterations = 0; // 0 for the dense path
};

namespace detail {

inline Matrix orthonormal_basis(const Matrix& w) {
    Eigen::HouseholderQR<Matrix> qr(w);
    return qr.householderQ() * Matrix::Identity(w.rows(), w.cols());
}

inline Matrix random_block(Index rows, Index cols, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix m(rows, cols);
    for (Index j = 0; j < cols; ++j)
        for (Index i = 0; i < rows; ++i) m(i, j) = normal(rng);
    return m;
}

/// Rayleigh quotient after `steps` power iterations on (sign * A + shift * I).
inline double power_estimate(const Matrix& a, double shift, double sign, int steps, std::uint64_t seed) {
    Vector v = random_block(a.rows(), 1, seed).col(0);
    v.normalize();
    double est = 0.0;
    for (int s = 0; s < steps; ++s) {
        Vector w = sign * (a * v) + shift * v;
        const double norm = w.norm();
        if (norm == 0.0) return 0.0;
        est = v.dot(w);
        v = w / norm;
    }
    return est;
}

inline EigenPairs dense_top_eigenpairs(const Matrix& a, Index k) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(a);
    if (es.info() != Eigen::Success) {
        throw NumericalError("dense symmetric eigensolver failed to converge");
    }
    const Index n = a.rows();
    EigenPairs out;
    out.values.resize(k);
    out.vectors.resize(n, k);
    for (Index j = 0; j < k; ++j) {
        out.values(j) = es.eigenvalues()(n - 1 - j);
        out.vectors.col(j) = es.eigenvectors().col(n - 1 - j);
    }
    return out;
}

/// Block power iteration with Rayleigh-Ritz extraction. Negative eigenvalues
/// are shifted out of the dominant set so the block converges to the
/// algebraically largest part of the spectrum.
inline EigenPairs block_power_top_eigenpairs(const Matrix& a, Index k, const EigenOptions& opt) {
    const Index n = a.rows();
    const Index extra = opt.oversample > 0 ? opt.oversample : std::max<Index>(16, k / 4);
    const Index p = std::min(n, k + extra);
    const Index max_iter = opt.max_iterations > 0 ? opt.max_iterations : 10 * n;

    // Rough lambda_min by shifted power iteration. An underestimate of its
    // magnitude is harmless: it only has to make negative eigenvalues small
    // relative to the k largest.
    const double dominant = power_estimate(a, 0.0, 1.0, 20, opt.seed ^ 0x1ULL);
    const double lambda_min =
        dominant > 0.0 ? dominant + power_estimate(a, -dominant, 1.0, 40, opt.seed ^ 0x2ULL) : dominant;
    const double shift = lambda_min < 0.0 ? -1.1 * lambda_min : 0.0;

    Matrix v = orthonormal_basis(random_block(n, p, opt.seed));
    Matrix av(n, p);
    Eigen::SelfAdjointEigenSolver<Matrix> small;

    for (Index it = 1; it <= max_iter; ++it) {
        av.noalias() = a * v;
        Matrix h = v.transpose() * av;
        h = 0.5 * (h + h.transpose()).eval();
        small.compute(h);
        if (small.info() != Eigen::Success) {
            throw NumericalError("Rayleigh-Ritz eigensolver failed at iteration " + std::to_string(it));
        }
        // Ritz values come ascending; reverse to descending.
        const Matrix s = small.eigenvectors().rowwise().reverse();
        const Vector theta = small.eigenvalues().reverse();
        v = (v * s).eval();
        av = (av * s).eval();

        const double scale = std::max(theta.cwiseAbs().maxCoeff(), 1e-300);
        bool converged = true;
        for (Index j = 0; j < k && converged; ++j) {
            if (theta(j) <= opt.tolerance * scale) break; // the rest are dropped as non-positive
            const double r = (av.col(j) - theta(j) * v.col(j)).norm();
            converged = r <= opt.tolerance * scale;
        }
        if (converged) {
            EigenPairs out;
            out.values = theta.head(k);
            out.vectors = v.leftCols(k);
            out.iterations = it;
            return out;
        }
        v = orthonormal_basis(av + shift * v);
    }
    throw NumericalError("block power iteration did not converge after " + std::to_string(max_iter) +
                         " iterations (order " + std::to_string(n) + ", k=" + std::to_string(k) + ")");
}

} // namespace detail

/// The k algebraically largest eigenpairs of the symmetric matrix `a`.
/// Orders up to `opt.dense_limit` use a full decomposition; larger ones use
/// block power iteration, O(k n^2) per sweep.
inline EigenPairs top_eigenpairs(const Matrix& a, Index k, const EigenOptions& opt = {}) {
    if (a.rows() != a.cols()) {
        throw ConfigError("top_eigenpairs: matrix is not square");
    }
    if (k < 1) {
        throw ConfigError("top_eigenpairs: k must be >= 1");
    }
    k = std::min(k, a.rows());
    EigenPairs out = (a.rows() <= opt.dense_limit || k == a.rows()) ? detail::dense_top_eigenpairs(a, k)
                                                                      : detail::block_power_top_eigenpairs(a, k, opt);
    detail::fix_column_signs(out.vectors);
    return out;
}

} // namespace fipp
