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

// Filtered inner product projection on the seed dictionary: the objective
//
//   || Xs~ Xs~^T - Gs ||_F^2 + lambda || mask o (Xs~ Xs~^T - Gt) ||_F^2
//
// is minimized over Gram matrices in closed form (entrywise), then the
// minimizer is mapped back to c x d2 coordinates by a rank-d2 PSD truncation.

#pragma once

#include "fipp/common.hpp"
#include "fipp/eigen_solver.hpp"

#include <algorithm>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

namespace fipp {

/// Symmetric c x c matrix of pairwise inner products.
struct GramMatrix {
    Matrix entries;

    Index size() const { return entries.rows(); }
};

using MaskMatrix = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>;

/// Marks the pairs whose inner products agree across the two spaces.
struct FilterMask {
    MaskMatrix bits;
    double epsilon = 0.0;
    Index nnz = 0;

    Index size() const { return bits.rows(); }
};

enum class Solver { eigen, sgd };

inline const char* to_string(Solver s) { return s == Solver::eigen ? "eigen" : "sgd"; }

struct FippConfig {
    double epsilon = 0.05;
    double lambda = 1.0;
    bool gamma_scaling = true;
    Solver solver = Solver::eigen;
    int sgd_epochs = 5000;
    double sgd_learning_rate = 1e-3;
    std::uint64_t rng_seed = 0;
    EigenOptions eigen;
};

struct LossBreakdown {
    double reconstruction = 0.0;
    double transfer = 0.0;
    double total = 0.0;
    double effective_lambda = 0.0;
};

/// Gram matrix of the rows of `rows`; only the lower triangle is computed and
/// then mirrored, so the result is exactly symmetric.
inline GramMatrix gram(const Matrix& rows) {
    detail::require(rows.rows() >= 1, "gram: need at least one row");
    const Index c = rows.rows();
    GramMatrix g{Matrix::Zero(c, c)};
    g.entries.selfadjointView<Eigen::Lower>().rankUpdate(rows);
    g.entries.triangularView<Eigen::StrictlyUpper>() = g.entries.transpose();
    return g;
}

inline FilterMask filter_mask(const GramMatrix& gs, const GramMatrix& gt, double epsilon) {
    detail::require_same_shape(gs.entries, gt.entries, "filter_mask");
    detail::require(epsilon > 0.0, "filter_mask: epsilon must be > 0");
    FilterMask m;
    m.epsilon = epsilon;
    m.bits = ((gs.entries - gt.entries).array().abs() < epsilon).cast<std::uint8_t>();
    m.nnz = m.bits.cast<Index>().sum();
    return m;
}

/// lambda * c^2 / nnz with gamma scaling on, lambda otherwise.
inline double effective_lambda(double lambda, const FilterMask& mask, bool gamma_scaling = true) {
    detail::require(lambda >= 0.0, "effective_lambda: lambda must be >= 0");
    if (!gamma_scaling || lambda == 0.0) {
        return lambda;
    }
    if (mask.nnz == 0) {
        throw ConfigError("empty filter; raise epsilon (epsilon=" + std::to_string(mask.epsilon) + ")");
    }
    const double c = static_cast<double>(mask.size());
    return lambda * c * c / static_cast<double>(mask.nnz);
}

/// Entrywise minimizer of the objective over symmetric matrices: the
/// lambda-weighted mean of gs and gt where the mask is set, gs elsewhere.
inline GramMatrix closed_form_gstar(const GramMatrix& gs, const GramMatrix& gt, const FilterMask& mask,
                                    double lambda_eff) {
    detail::require_same_shape(gs.entries, gt.entries, "closed_form_gstar");
    detail::require(mask.size() == gs.size(), "closed_form_gstar: mask shape mismatch");
    detail::require(lambda_eff >= 0.0, "closed_form_gstar: lambda must be >= 0");
    const auto blended = (gs.entries + lambda_eff * gt.entries) / (1.0 + lambda_eff);
    GramMatrix out{(mask.bits.array() != 0).select(blended.array(), gs.entries.array()).matrix()};
    return out;
}

/// Rank-d2 positive semidefinite factor of `gstar`: column i is sqrt(lambda_i) q_i
/// for the d2 largest eigenvalues; columns for negative eigenvalues (or beyond
/// the order of gstar) are zero. Eigenvalues within the solver's rounding
/// floor, 10 c eps lambda_max, count as zero.
inline Matrix low_rank_psd_factor(const GramMatrix& gstar, Index d2, const EigenOptions& opt = {}) {
    detail::require(d2 >= 1, "low_rank_psd_factor: target dimension must be >= 1");
    const Index c = gstar.size();
    const EigenPairs eig = top_eigenpairs(gstar.entries, std::min(d2, c), opt);
    const double floor = 10.0 * static_cast<double>(c) * std::numeric_limits<double>::epsilon() *
                         std::max(eig.values(0), 0.0);
    Matrix x = Matrix::Zero(c, d2);
    for (Index j = 0; j < eig.values.size(); ++j) {
        if (eig.values(j) > floor) {
            x.col(j) = std::sqrt(eig.values(j)) * eig.vectors.col(j);
        }
    }
    return x;
}

inline LossBreakdown fipp_loss(const Matrix& xtilde, const GramMatrix& gs, const GramMatrix& gt,
                               const FilterMask& mask, double lambda_eff) {
    detail::require_same_shape(gs.entries, gt.entries, "fipp_loss");
    detail::require(xtilde.rows() == gs.size() && mask.size() == gs.size(), "fipp_loss: row count mismatch");
    const Matrix g = gram(xtilde).entries;
    LossBreakdown l;
    l.effective_lambda = lambda_eff;
    l.reconstruction = (g - gs.entries).squaredNorm();
    l.transfer = (mask.bits.array() != 0).select((g - gt.entries).array(), 0.0).matrix().squaredNorm();
    l.total = l.reconstruction + lambda_eff * l.transfer;
    return l;
}

struct SgdResult {
    Matrix solution;               // the iterate with the lowest recorded loss
    std::vector<double> loss_trace; // loss before each update, then the final iterate
    Index best_epoch = 0;
    double best_loss = 0.0;
};

/// Full-batch gradient descent on the objective in c x d2 coordinates.
/// Columns of `init` that are identically zero get a small random start drawn
/// from `seed`; the gradient of an all-zero column is zero.
inline SgdResult sgd_solve(const Matrix& init, const GramMatrix& gs, const GramMatrix& gt, const FilterMask& mask,
                           double lambda_eff, int epochs, double lr, std::uint64_t seed) {
    detail::require(epochs >= 1, "sgd_solve: epochs must be >= 1");
    detail::require(lr > 0.0, "sgd_solve: learning rate must be > 0");
    detail::require(init.rows() == gs.size(), "sgd_solve: init row count mismatch");
    detail::require_same_shape(gs.entries, gt.entries, "sgd_solve");

    Matrix x = init;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1e-2);
    for (Index j = 0; j < x.cols(); ++j) {
        if (x.col(j).cwiseAbs().maxCoeff() == 0.0) {
            for (Index i = 0; i < x.rows(); ++i) x(i, j) = normal(rng);
        }
    }

    const auto keep = (mask.bits.array() != 0);
    SgdResult out;
    out.loss_trace.reserve(static_cast<std::size_t>(epochs) + 1);
    out.best_loss = std::numeric_limits<double>::infinity();
    Matrix resid(x.rows(), x.rows());
    for (int epoch = 0; epoch <= epochs; ++epoch) {
        const Matrix g = gram(x).entries;
        const Matrix recon = g - gs.entries;
        const Matrix transfer = keep.select((g - gt.entries).array(), 0.0).matrix();
        const double loss = recon.squaredNorm() + lambda_eff * transfer.squaredNorm();
        if (!std::isfinite(loss)) {
            throw NumericalError("gradient descent diverged at epoch " + std::to_string(epoch) +
                                 "; use a smaller learning rate (currently " + std::to_string(lr) + ")");
        }
        out.loss_trace.push_back(loss);
        if (loss < out.best_loss) {
            out.best_loss = loss;
            out.best_epoch = epoch;
            out.solution = x;
        }
        if (epoch == epochs) break;
        resid = recon + lambda_eff * transfer;
        x -= (4.0 * lr) * (resid * x);
    }
    return out;
}

/// Fraction of zero bits in each row of the mask.
inline Vector filter_stats(const FilterMask& mask) {
    const Index c = mask.size();
    Vector out(c);
    for (Index i = 0; i < c; ++i) {
        const Index ones = mask.bits.row(i).cast<Index>().sum();
        out(i) = c == 0 ? 0.0 : static_cast<double>(c - ones) / static_cast<double>(c);
    }
    return out;
}

struct Histogram {
    double lo = 0.0;
    double hi = 0.0;
    std::vector<std::size_t> counts;

    double bin_width() const { return counts.empty() ? 0.0 : (hi - lo) / static_cast<double>(counts.size()); }
};

/// Equal-width histogram of the off-diagonal entries over [min, max]. When all
/// entries coincide everything lands in the first bin.
inline Histogram inner_product_histogram(const GramMatrix& g, Index bins) {
    detail::require(bins >= 1, "inner_product_histogram: bins must be >= 1");
    const Index c = g.size();
    Histogram h;
    h.counts.assign(static_cast<std::size_t>(bins), 0);
    bool any = false;
    for (Index j = 0; j < c; ++j) {
        for (Index i = 0; i < c; ++i) {
            if (i == j) continue;
            const double v = g.entries(i, j);
            if (!any) {
                h.lo = h.hi = v;
                any = true;
            }
            h.lo = std::min(h.lo, v);
            h.hi = std::max(h.hi, v);
        }
    }
    if (!any) return h;
    const double width = (h.hi - h.lo) / static_cast<double>(bins);
    for (Index j = 0; j < c; ++j) {
        for (Index i = 0; i < c; ++i) {
            if (i == j) continue;
            Index b = width > 0.0 ? static_cast<Index>((g.entries(i, j) - h.lo) / width) : 0;
            b = std::clamp<Index>(b, 0, bins - 1);
            ++h.counts[static_cast<std::size_t>(b)];
        }
    }
    return h;
}

} // namespace fipp
