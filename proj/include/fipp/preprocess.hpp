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

#include <string>
#include <utility>

namespace fipp {

enum class PreprocessKind { none, isotropic, iterative_norm };

inline const char* to_string(PreprocessKind k) {
    switch (k) {
    case PreprocessKind::none: return "none";
    case PreprocessKind::isotropic: return "isotropic";
    case PreprocessKind::iterative_norm: return "iternorm";
    }
    return "?";
}

struct PreprocessMode {
    PreprocessKind kind = PreprocessKind::isotropic;
    int iterations = 5;         // iterative_norm only
    Index components_removed = 1; // isotropic only
};

/// Counters for conditions that are tolerated rather than raised.
struct PreprocessLog {
    Index zero_rows = 0;     // rows left at zero by unit normalization
    bool collapsed = false;  // iterative normalization reached an all-zero matrix
};

/// Scales every nonzero row to unit l2 norm; zero rows stay zero and are counted.
inline void unit_normalize_rows(Matrix& m, PreprocessLog* log = nullptr) {
    for (Index i = 0; i < m.rows(); ++i) {
        const double norm = m.row(i).norm();
        if (norm > 0.0) {
            m.row(i) /= norm;
        } else if (log) {
            ++log->zero_rows;
        }
    }
}

inline void center_columns_inplace(Matrix& m) {
    if (m.rows() == 0) return;
    const Eigen::RowVectorXd mean = m.colwise().mean();
    m.rowwise() -= mean;
}

inline Embedding unit_normalize(Embedding emb, PreprocessLog* log = nullptr) {
    unit_normalize_rows(emb.matrix, log);
    return emb;
}

inline Embedding center_columns(Embedding emb) {
    center_columns_inplace(emb.matrix);
    return emb;
}

/// Top-k right singular vectors of `m` (d x k, descending singular value),
/// from the eigendecomposition of the d x d scatter matrix.
inline Matrix top_right_singular_vectors(const Matrix& m, Index k) {
    const Index d = m.cols();
    Matrix scatter = Matrix::Zero(d, d);
    scatter.selfadjointView<Eigen::Lower>().rankUpdate(m.transpose());
    scatter.triangularView<Eigen::StrictlyUpper>() = scatter.transpose();
    Eigen::SelfAdjointEigenSolver<Matrix> es(scatter);
    if (es.info() != Eigen::Success) {
        throw NumericalError("principal component eigensolver failed");
    }
    Matrix out(d, k);
    for (Index j = 0; j < k; ++j) {
        out.col(j) = es.eigenvectors().col(d - 1 - j);
    }
    detail::fix_column_signs(out);
    return out;
}

/// X <- X - X U U^T for the top-k principal directions U of a centered X.
inline void remove_top_components_inplace(Matrix& m, Index k) {
    if (k < 0 || k >= m.cols()) {
        throw ConfigError("remove_top_components: need 0 <= k < d, got k=" + std::to_string(k) +
                          " with d=" + std::to_string(m.cols()));
    }
    if (k == 0) return;
    const Matrix u = top_right_singular_vectors(m, k);
    m -= (m * u) * u.transpose();
}

inline Embedding remove_top_components(Embedding emb, Index k) {
    remove_top_components_inplace(emb.matrix, k);
    return emb;
}

/// Alternates unit normalization and column centering `iterations` times.
inline Embedding iterative_normalize(Embedding emb, int iterations, PreprocessLog* log = nullptr) {
    if (iterations < 1) {
        throw ConfigError("iterative_normalize: iterations must be >= 1");
    }
    for (int it = 0; it < iterations; ++it) {
        PreprocessLog step;
        unit_normalize_rows(emb.matrix, &step);
        center_columns_inplace(emb.matrix);
        if (log) log->zero_rows = step.zero_rows;
        if (emb.matrix.size() > 0 && emb.matrix.cwiseAbs().maxCoeff() <= 1e-12) {
            emb.matrix.setZero();
            if (log) {
                log->collapsed = true;
                log->zero_rows = emb.matrix.rows();
            }
            break;
        }
    }
    return emb;
}

inline Embedding preprocess(Embedding emb, const PreprocessMode& mode, PreprocessLog* log = nullptr) {
    switch (mode.kind) {
    case PreprocessKind::none:
        return emb;
    case PreprocessKind::isotropic:
        if (mode.components_removed < 0 || mode.components_removed >= emb.dim()) {
            throw ConfigError("isotropic preprocessing: components_removed must be in [0, d)");
        }
        unit_normalize_rows(emb.matrix, log);
        center_columns_inplace(emb.matrix);
        remove_top_components_inplace(emb.matrix, mode.components_removed);
        return emb;
    case PreprocessKind::iterative_norm:
        return iterative_normalize(std::move(emb), mode.iterations, log);
    }
    return emb;
}

/// Preprocesses source and target independently with the same mode.
inline std::pair<Embedding, Embedding> preprocess_pair(Embedding src, Embedding tgt, const PreprocessMode& mode,
                                                       PreprocessLog* src_log = nullptr,
                                                       PreprocessLog* tgt_log = nullptr) {
    Embedding s = preprocess(std::move(src), mode, src_log);
    Embedding t = preprocess(std::move(tgt), mode, tgt_log);
    return {std::move(s), std::move(t)};
}

} // namespace fipp
