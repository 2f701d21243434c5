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
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace fipp {

enum class RetrievalMethod { nn, csls };

inline const char* to_string(RetrievalMethod m) { return m == RetrievalMethod::nn ? "nn" : "csls"; }

/// Candidate indices per query, best first.
using RankedLists = std::vector<std::vector<Index>>;

struct QueryOutcome {
    Index query = 0;
    std::optional<Index> best_gold_rank; // 1-based; empty when no gold is in the list
};

struct EvalReport {
    std::vector<QueryOutcome> per_query;
    double map = 0.0;
    double p_at_1 = 0.0;
    double p_at_5 = 0.0;
    Index n_queries = 0;
    RetrievalMethod retrieval = RetrievalMethod::nn;
    Index csls_k = 0;
    Index topk = 0;
};

namespace detail {

inline Matrix row_normalized(const Matrix& m) {
    Matrix out = m;
    for (Index i = 0; i < out.rows(); ++i) {
        const double n = out.row(i).norm();
        if (n > 0.0) out.row(i) /= n;
    }
    return out;
}

/// Number of rows per block so a block x cols score matrix stays near 16M entries.
inline Index block_rows(Index cols) {
    constexpr Index kEntries = Index{1} << 24;
    return std::max<Index>(1, kEntries / std::max<Index>(cols, 1));
}

/// Indices of the k largest values, descending; ties go to the lower index.
template <class Row>
std::vector<Index> top_k(const Row& scores, Index k, std::vector<Index>& scratch) {
    const Index m = scores.size();
    k = std::min(k, m);
    scratch.resize(static_cast<std::size_t>(m));
    std::iota(scratch.begin(), scratch.end(), Index{0});
    auto better = [&](Index a, Index b) {
        const double sa = scores(a);
        const double sb = scores(b);
        return sa > sb || (sa == sb && a < b);
    };
    std::partial_sort(scratch.begin(), scratch.begin() + k, scratch.end(), better);
    return {scratch.begin(), scratch.begin() + k};
}

/// Mean of the k largest values of `v` (summed largest first).
inline double mean_top_k(std::vector<double>& v, Index k) {
    k = std::min<Index>(k, static_cast<Index>(v.size()));
    if (k <= 0) return 0.0;
    std::partial_sort(v.begin(), v.begin() + k, v.end(), std::greater<>());
    double sum = 0.0;
    for (Index i = 0; i < k; ++i) sum += v[static_cast<std::size_t>(i)];
    return sum / static_cast<double>(k);
}

} // namespace detail

/// Top-k candidates by cosine similarity for each query.
inline RankedLists nn_retrieve(const Matrix& queries, const Matrix& candidates, Index k) {
    detail::require(queries.cols() == candidates.cols(), "nn_retrieve: dimension mismatch");
    detail::require(candidates.rows() > 0, "nn_retrieve: empty candidate set");
    const Index q = queries.rows();
    const Matrix qn = detail::row_normalized(queries);
    const Matrix cn = detail::row_normalized(candidates);
    RankedLists out(static_cast<std::size_t>(q));
    std::vector<Index> scratch;
    const Index step = detail::block_rows(cn.rows());
    for (Index start = 0; start < q; start += step) {
        const Index len = std::min(step, q - start);
        const Matrix s = qn.middleRows(start, len) * cn.transpose();
        for (Index i = 0; i < len; ++i) {
            out[static_cast<std::size_t>(start + i)] = detail::top_k(s.row(i), k, scratch);
        }
    }
    return out;
}

/// Cross-domain similarity local scaling:
///   score(x, y) = 2 cos(x, y) - r_C(x) - r_Q(y)
/// with r_C(x) the mean cosine of x to its `neighborhood` nearest candidates and
/// r_Q(y) the mean cosine of y to its `neighborhood` nearest queries. The
/// neighborhood is clamped to the size of each side.
inline RankedLists csls_retrieve(const Matrix& queries, const Matrix& candidates, Index neighborhood, Index topk) {
    detail::require(queries.cols() == candidates.cols(), "csls_retrieve: dimension mismatch");
    detail::require(candidates.rows() > 0, "csls_retrieve: empty candidate set");
    detail::require(neighborhood >= 1, "csls_retrieve: neighborhood must be >= 1");
    const Index q = queries.rows();
    const Index m = candidates.rows();
    const Matrix qn = detail::row_normalized(queries);
    const Matrix cn = detail::row_normalized(candidates);

    // Pass 1: neighborhood terms. Each query keeps its best `neighborhood`
    // cosines in a min-heap across candidate blocks.
    Vector r_query(q);
    Vector r_cand(m);
    const Index kc = std::min(neighborhood, m);
    std::vector<std::vector<double>> heaps(static_cast<std::size_t>(q));
    std::vector<double> column;
    const Index cstep = detail::block_rows(std::max<Index>(q, 1));
    for (Index start = 0; start < m; start += cstep) {
        const Index len = std::min(cstep, m - start);
        const Matrix s = qn * cn.middleRows(start, len).transpose(); // q x len
        for (Index j = 0; j < len; ++j) {
            column.assign(s.col(j).data(), s.col(j).data() + q);
            r_cand(start + j) = detail::mean_top_k(column, neighborhood);
        }
        for (Index i = 0; i < q; ++i) {
            auto& h = heaps[static_cast<std::size_t>(i)];
            for (Index j = 0; j < len; ++j) {
                const double v = s(i, j);
                if (static_cast<Index>(h.size()) < kc) {
                    h.push_back(v);
                    std::push_heap(h.begin(), h.end(), std::greater<>());
                } else if (v > h.front()) {
                    std::pop_heap(h.begin(), h.end(), std::greater<>());
                    h.back() = v;
                    std::push_heap(h.begin(), h.end(), std::greater<>());
                }
            }
        }
    }
    for (Index i = 0; i < q; ++i) {
        r_query(i) = detail::mean_top_k(heaps[static_cast<std::size_t>(i)], kc);
    }

    // Pass 2: scores and ranking.
    RankedLists out(static_cast<std::size_t>(q));
    std::vector<Index> scratch;
    const Index qstep = detail::block_rows(m);
    for (Index start = 0; start < q; start += qstep) {
        const Index len = std::min(qstep, q - start);
        Matrix s = 2.0 * (qn.middleRows(start, len) * cn.transpose());
        s.rowwise() -= r_cand.transpose();
        s.colwise() -= r_query.segment(start, len);
        for (Index i = 0; i < len; ++i) {
            out[static_cast<std::size_t>(start + i)] = detail::top_k(s.row(i), topk, scratch);
        }
    }
    return out;
}

/// Scores ranked lists against gold translations. `queries[i]` names the
/// query whose list is `rankings[i]`; it must have an entry in `gold`.
inline EvalReport evaluate(const std::vector<Index>& queries, const RankedLists& rankings,
                           const std::map<Index, std::set<Index>>& gold) {
    detail::require(queries.size() == rankings.size(), "evaluate: one ranked list per query expected");
    EvalReport r;
    r.n_queries = static_cast<Index>(queries.size());
    std::size_t hits1 = 0;
    std::size_t hits5 = 0;
    double rr = 0.0;
    for (std::size_t i = 0; i < queries.size(); ++i) {
        const auto g = gold.find(queries[i]);
        if (g == gold.end() || g->second.empty()) {
            throw ConfigError("evaluate: query " + std::to_string(queries[i]) + " has no gold translation");
        }
        QueryOutcome o{queries[i], std::nullopt};
        const auto& list = rankings[i];
        for (std::size_t pos = 0; pos < list.size(); ++pos) {
            if (g->second.contains(list[pos])) {
                o.best_gold_rank = static_cast<Index>(pos) + 1;
                break;
            }
        }
        if (o.best_gold_rank) {
            rr += 1.0 / static_cast<double>(*o.best_gold_rank);
            hits1 += *o.best_gold_rank <= 1;
            hits5 += *o.best_gold_rank <= 5;
        }
        r.per_query.push_back(o);
    }
    if (r.n_queries > 0) {
        const double n = static_cast<double>(r.n_queries);
        r.map = rr / n;
        r.p_at_1 = static_cast<double>(hits1) / n;
        r.p_at_5 = static_cast<double>(hits5) / n;
    }
    return r;
}

} // namespace fipp
