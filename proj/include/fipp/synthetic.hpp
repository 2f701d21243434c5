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
#include "fipp/embio.hpp"

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace fipp {

/// Embedding pair with known ground truth: source row i translates to target row i.
struct SyntheticPair {
    Embedding src;
    Embedding tgt;
};

namespace synthetic {

inline Matrix gaussian(Index rows, Index cols, std::mt19937_64& rng, double sigma = 1.0) {
    std::normal_distribution<double> normal(0.0, sigma);
    Matrix m(rows, cols);
    for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j < cols; ++j) m(i, j) = normal(rng);
    return m;
}

inline Matrix unit_rows(Index rows, Index cols, std::mt19937_64& rng) {
    Matrix m = gaussian(rows, cols, rng);
    m.rowwise().normalize();
    return m;
}

/// Haar-distributed rows x cols matrix with orthonormal columns (rows >= cols).
inline Matrix orthonormal_columns(Index rows, Index cols, std::mt19937_64& rng) {
    const Matrix g = gaussian(rows, cols, rng);
    Eigen::HouseholderQR<Matrix> qr(g);
    Matrix q = qr.householderQ() * Matrix::Identity(rows, cols);
    const Matrix r = qr.matrixQR().topRows(cols).triangularView<Eigen::Upper>();
    for (Index j = 0; j < cols; ++j) {
        if (r(j, j) < 0.0) q.col(j) = -q.col(j);
    }
    return q;
}

inline std::vector<std::string> vocab(const std::string& prefix, Index n) {
    std::vector<std::string> v;
    v.reserve(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) v.push_back(prefix + std::to_string(i));
    return v;
}

} // namespace synthetic

/// n random unit vectors and their image in another space.
///
/// d1 == d2: target = source * R + noise with R a random orthogonal map.
/// d1 <  d2: target rows are random unit vectors in d2; source rows are their
///           projection onto a random d1-dimensional subspace (plus noise).
/// d1 >  d2: the mirror image of the previous case.
/// Noise is i.i.d. Gaussian with standard deviation `noise` per entry.
inline SyntheticPair make_synthetic_pair(Index n, Index d1, Index d2, double noise, std::uint64_t seed) {
    detail::require(n >= 1 && d1 >= 1 && d2 >= 1, "make_synthetic_pair: sizes must be positive");
    std::mt19937_64 rng(seed);
    SyntheticPair out;
    out.src.vocab = synthetic::vocab("s", n);
    out.tgt.vocab = synthetic::vocab("t", n);
    if (d1 == d2) {
        out.src.matrix = synthetic::unit_rows(n, d1, rng);
        const Matrix rot = synthetic::orthonormal_columns(d1, d1, rng);
        out.tgt.matrix = out.src.matrix * rot;
        if (noise > 0.0) out.tgt.matrix += synthetic::gaussian(n, d2, rng, noise);
    } else if (d1 < d2) {
        out.tgt.matrix = synthetic::unit_rows(n, d2, rng);
        const Matrix proj = synthetic::orthonormal_columns(d2, d1, rng);
        out.src.matrix = out.tgt.matrix * proj;
        if (noise > 0.0) out.src.matrix += synthetic::gaussian(n, d1, rng, noise);
    } else {
        out.src.matrix = synthetic::unit_rows(n, d1, rng);
        const Matrix proj = synthetic::orthonormal_columns(d1, d2, rng);
        out.tgt.matrix = out.src.matrix * proj;
        if (noise > 0.0) out.tgt.matrix += synthetic::gaussian(n, d2, rng, noise);
    }
    return out;
}

/// Identity pairs (i, i) for the given rows.
inline SeedDictionary identity_dictionary(Index first, Index count) {
    SeedDictionary d;
    for (Index i = first; i < first + count; ++i) d.pairs.push_back({i, i});
    return d;
}

} // namespace fipp
