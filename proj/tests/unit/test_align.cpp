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


#include "oracles.hpp"

#include <gtest/gtest.h>

#include <random>

namespace {

using fipp::Index;
using fipp::Matrix;
using fipp::Vector;

double orthogonality_error(const Matrix& r) {
    return (r.transpose() * r - Matrix::Identity(r.cols(), r.cols())).norm();
}

// ---- least_squares_project

TEST(LeastSquaresProject, IdentityAlignmentReproducesSource) {
    std::mt19937_64 rng(1);
    const Matrix seed = oracle::random_matrix(20, 5, rng);
    const Matrix full = oracle::random_matrix(50, 5, rng);
    EXPECT_LE((fipp::least_squares_project(seed, seed, full) - full).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(LeastSquaresProject, ResidualMatchesColumnwiseQr) {
    std::mt19937_64 rng(2);
    for (int t = 0; t < 10; ++t) {
        const Matrix aligned = oracle::random_matrix(15, 4, rng);
        const Matrix seed_src = oracle::random_matrix(15, 3, rng);
        const Matrix full = oracle::random_matrix(25, 3, rng);
        fipp::ProjectionInfo info;
        const Matrix m = fipp::least_squares_project(aligned, seed_src, full, &info);
        const Matrix rhs = oracle::naive_product(seed_src, full.transpose());
        const Matrix oracle_m = oracle::qr_least_squares(aligned, rhs).transpose();
        EXPECT_LE((m - oracle_m).cwiseAbs().maxCoeff(), 1e-8);
        const double got = (aligned * m.transpose() - rhs).norm();
        const double want = (aligned * oracle_m.transpose() - rhs).norm();
        EXPECT_NEAR(got, want, 1e-8);
        EXPECT_EQ(info.rank, 4);
        EXPECT_GE(info.condition_number, 1.0);
    }
}

TEST(LeastSquaresProject, ZeroColumnGetsZeroWeight) {
    std::mt19937_64 rng(3);
    Matrix aligned = oracle::random_matrix(12, 4, rng);
    aligned.col(2).setZero();
    const Matrix seed_src = oracle::random_matrix(12, 3, rng);
    const Matrix full = oracle::random_matrix(9, 3, rng);
    fipp::ProjectionInfo info;
    const Matrix m = fipp::least_squares_project(aligned, seed_src, full, &info);
    EXPECT_LE(m.col(2).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_EQ(info.rank, 3);
}

TEST(LeastSquaresProject, NoPerturbationDoesBetter) {
    std::mt19937_64 rng(4);
    const Matrix aligned = oracle::random_matrix(20, 4, rng);
    const Matrix seed_src = oracle::random_matrix(20, 4, rng);
    const Matrix full = oracle::random_matrix(30, 4, rng);
    const Matrix m = fipp::least_squares_project(aligned, seed_src, full);
    const Matrix rhs = seed_src * full.transpose();
    const double best = (aligned * m.transpose() - rhs).norm();
    for (int p = 0; p < 100; ++p) {
        const Matrix other = m + oracle::random_matrix(30, 4, rng, 1e-3);
        EXPECT_LE(best, (aligned * other.transpose() - rhs).norm());
    }
}

// ---- residual_weights

TEST(ResidualWeights, PerfectAgreementGivesUnitWeights) {
    std::mt19937_64 rng(5);
    const Matrix x = oracle::random_matrix(8, 3, rng);
    const Matrix q = oracle::random_orthogonal(3, rng);
    EXPECT_LE((fipp::residual_weights(x, x * q, 1e-6) - Vector::Ones(8)).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(ResidualWeights, ReciprocalOfResidual) {
    // Diagonal Grams give residual r_i = (a_i - b_i)^2 per pair.
    Matrix a = Matrix::Zero(3, 3);
    Matrix b = Matrix::Zero(3, 3);
    a.diagonal() << 1.0, 1.0, 1.0;
    b.diagonal() << std::sqrt(2.0), std::sqrt(2.0), std::sqrt(1.0 + std::sqrt(10.0));
    const Vector w = fipp::residual_weights(a, b, 1e-9);
    EXPECT_NEAR(w(0), 1.0, 1e-12);
    EXPECT_NEAR(w(1), 1.0, 1e-12);
    EXPECT_NEAR(w(0) / w(2), 10.0, 1e-9);
}

TEST(ResidualWeights, MatchesDoubleLoop) {
    std::mt19937_64 rng(6);
    for (int t = 0; t < 10; ++t) {
        const Matrix x = oracle::random_matrix(9, 4, rng);
        const Matrix y = oracle::random_matrix(9, 4, rng);
        const Matrix s = oracle::random_matrix(9, 4, rng);
        const Vector w = fipp::residual_weights(x, y, 1e-6);
        const Vector wl = fipp::residual_weights_literal(x, s, y, 1e-6);
        Vector expect(9), expect_literal(9);
        for (Index i = 0; i < 9; ++i) {
            double r = 0.0, rl = 0.0;
            for (Index j = 0; j < 9; ++j) {
                double xx = 0.0, yy = 0.0, xs = 0.0;
                for (Index k = 0; k < 4; ++k) {
                    xx += x(i, k) * x(j, k);
                    yy += y(i, k) * y(j, k);
                    xs += x(i, k) * s(j, k);
                }
                r += (xx - yy) * (xx - yy);
                rl += (xs - yy) * (xs - yy);
            }
            expect(i) = 1.0 / std::max(r, 1e-6);
            expect_literal(i) = 1.0 / std::max(rl, 1e-6);
        }
        expect /= expect.maxCoeff();
        expect_literal /= expect_literal.maxCoeff();
        EXPECT_LE((w - expect).cwiseAbs().maxCoeff(), 1e-10);
        EXPECT_LE((wl - expect_literal).cwiseAbs().maxCoeff(), 1e-10);
        EXPECT_GT(w.minCoeff(), 0.0);
        EXPECT_DOUBLE_EQ(w.maxCoeff(), 1.0);
    }
}

// ---- procrustes

TEST(WeightedProcrustes, RecoversRotation) {
    std::mt19937_64 rng(7);
    const Matrix a = oracle::random_matrix(12, 4, rng);
    const Matrix r = oracle::random_orthogonal(4, rng);
    const Matrix omega = fipp::weighted_procrustes(a, a * r, Vector::Ones(12));
    EXPECT_LE((omega - r).norm(), 1e-8);
    EXPECT_LE((a * omega - a * r).norm(), 1e-8);
}

TEST(WeightedProcrustes, ScalarCaseIsSign) {
    std::mt19937_64 rng(8);
    for (int t = 0; t < 20; ++t) {
        const Matrix a = oracle::random_matrix(5, 1, rng);
        const Matrix b = oracle::random_matrix(5, 1, rng);
        Vector w = oracle::random_matrix(5, 1, rng).col(0).cwiseAbs();
        double s = 0.0;
        for (Index i = 0; i < 5; ++i) s += w(i) * w(i) * a(i, 0) * b(i, 0);
        const Matrix omega = fipp::weighted_procrustes(a, b, w);
        EXPECT_EQ(omega(0, 0), s >= 0 ? 1.0 : -1.0);
    }
}

TEST(WeightedProcrustes, BeatsSampledRotations) {
    std::mt19937_64 rng(9);
    for (int t = 0; t < 5; ++t) {
        const Matrix a = oracle::random_matrix(10, 3, rng);
        const Matrix b = a * oracle::random_orthogonal(3, rng) + oracle::random_matrix(10, 3, rng, 0.5);
        Vector w(10);
        for (Index i = 0; i < 10; ++i) w(i) = std::uniform_real_distribution<>(0.05, 1.0)(rng);
        const Matrix omega = fipp::weighted_procrustes(a, b, w);
        EXPECT_LE(orthogonality_error(omega), 1e-8);
        const double best = oracle::weighted_residual(a, b, w, omega);
        EXPECT_LE(best, oracle::weighted_residual(a, b, w, fipp::procrustes(a, b)) + 1e-12);
        for (int s = 0; s < 500; ++s) {
            EXPECT_LE(best, oracle::weighted_residual(a, b, w, oracle::random_orthogonal(3, rng)) + 1e-12);
        }
    }
}

TEST(Procrustes, Examples) {
    std::mt19937_64 rng(10);
    const Matrix a = oracle::random_matrix(10, 4, rng);
    EXPECT_LE((fipp::procrustes(a, a) - Matrix::Identity(4, 4)).norm(), 1e-10);
    const Matrix r = oracle::random_orthogonal(4, rng);
    EXPECT_LE((fipp::procrustes(a, a * r) - r).norm(), 1e-10);
    const Matrix b = oracle::random_matrix(10, 4, rng);
    const Matrix omega = fipp::procrustes(a, b);
    const double best = (a * omega - b).norm();
    for (int s = 0; s < 500; ++s) {
        EXPECT_LE(best, (a * oracle::random_orthogonal(4, rng) - b).norm() + 1e-12);
    }
}

TEST(Procrustes, UnitWeightsSameAsPlain) {
    std::mt19937_64 rng(11);
    const Matrix a = oracle::random_matrix(10, 5, rng);
    const Matrix b = oracle::random_matrix(10, 5, rng);
    EXPECT_EQ(fipp::procrustes(a, b), fipp::weighted_procrustes(a, b, Vector::Ones(10)));
}

TEST(Procrustes, AlwaysOrthogonal) {
    std::mt19937_64 rng(12);
    for (int t = 0; t < 50; ++t) {
        const Index d = 1 + t % 8;
        const Matrix a = oracle::random_matrix(3 + t % 11, d, rng);
        const Matrix b = oracle::random_matrix(a.rows(), d, rng);
        EXPECT_LE(orthogonality_error(fipp::procrustes(a, b)), 1e-8);
    }
}

// ---- orthonormal_linear_map

TEST(OrthonormalLinearMap, SquareCaseIsProcrustes) {
    std::mt19937_64 rng(13);
    const Matrix a = oracle::random_matrix(20, 4, rng);
    const Matrix r = oracle::random_orthogonal(4, rng);
    EXPECT_LE((fipp::orthonormal_linear_map(a, a * r) - r).norm(), 1e-10);
}

TEST(OrthonormalLinearMap, EmbedsLeadingBlock) {
    std::mt19937_64 rng(14);
    const Matrix tgt = oracle::random_orthonormal_columns(30, 5, rng) * 3.0;
    const Matrix src = tgt.leftCols(3);
    const Matrix omega = fipp::orthonormal_linear_map(src, tgt);
    Matrix expect = Matrix::Zero(3, 5);
    expect.leftCols(3).setIdentity();
    EXPECT_LE((omega - expect).norm(), 1e-10);
    EXPECT_NEAR((src * omega - tgt).norm(), tgt.rightCols(2).norm(), 1e-10);
}

TEST(OrthonormalLinearMap, BeatsSampledRowOrthonormalMaps) {
    std::mt19937_64 rng(15);
    const Matrix src = oracle::random_matrix(40, 3, rng);
    const Matrix tgt = oracle::random_matrix(40, 5, rng);
    const Matrix omega = fipp::orthonormal_linear_map(src, tgt);
    EXPECT_LE((omega * omega.transpose() - Matrix::Identity(3, 3)).norm(), 1e-8);
    const double best = (src * omega - tgt).norm();
    for (int s = 0; s < 500; ++s) {
        const Matrix sample = oracle::random_orthonormal_columns(5, 3, rng).transpose();
        EXPECT_LE(best, (src * sample - tgt).norm() + 1e-12);
    }
}

TEST(OrthonormalLinearMap, RejectsWiderSource) {
    EXPECT_THROW(fipp::orthonormal_linear_map(Matrix::Ones(4, 3), Matrix::Ones(4, 2)), fipp::ConfigError);
}

// ---- orthogonal_deviation

TEST(OrthogonalDeviation, Examples) {
    std::mt19937_64 rng(16);
    const Matrix x = oracle::random_matrix(10, 4, rng);
    EXPECT_LE(fipp::orthogonal_deviation(x * oracle::random_orthogonal(4, rng), x), 1e-8);
    const Matrix i2 = Matrix::Identity(2, 2);
    EXPECT_NEAR(fipp::orthogonal_deviation(2.0 * i2, i2), 1.0, 1e-12);
    EXPECT_THROW(fipp::orthogonal_deviation(i2, Matrix::Zero(2, 2)), fipp::ConfigError);
}

TEST(OrthogonalDeviation, BoundedByPerturbation) {
    std::mt19937_64 rng(17);
    for (int t = 0; t < 30; ++t) {
        const Matrix x = oracle::random_matrix(12, 4, rng);
        const Matrix r = oracle::random_orthogonal(4, rng);
        const double delta = 0.01 * (1 + t);
        Matrix e = oracle::random_matrix(12, 4, rng);
        e *= delta * x.norm() / e.norm();
        EXPECT_LE(fipp::orthogonal_deviation(x * r + e, x), delta * (1 + 1e-6));
    }
}

// ---- pip_distance

TEST(PipDistance, InvariantsAndBlocking) {
    std::mt19937_64 rng(18);
    const Matrix e = oracle::random_matrix(9, 3, rng);
    EXPECT_EQ(fipp::pip_distance(e, e), 0.0);
    EXPECT_LE(fipp::pip_distance(e * oracle::random_orthogonal(3, rng), e), 1e-12);

    const Matrix big_e = oracle::random_matrix(2100, 3, rng);
    const Matrix big_f = oracle::random_matrix(2100, 3, rng);
    const double direct = (big_e * big_e.transpose() - big_f * big_f.transpose()).norm();
    EXPECT_NEAR(fipp::pip_distance(big_e, big_f), direct, 1e-9 * direct);
}

TEST(PipDistance, SandwichesProcrustesResidual) {
    std::mt19937_64 rng(19);
    for (int t = 0; t < 100; ++t) {
        const Matrix e = oracle::random_orthonormal_columns(10, 3, rng);
        const Matrix f = oracle::random_orthonormal_columns(10, 3, rng);
        const double resid = (e * fipp::procrustes(e, f) - f).norm();
        const double pip = fipp::pip_distance(e, f);
        EXPECT_GE(pip - resid, -1e-9);
        EXPECT_GE(std::sqrt(2.0) * resid - pip, -1e-9);
    }
}

} // namespace
