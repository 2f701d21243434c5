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
#include "fipp/retrieval.hpp"

#include <algorithm>
#include <set>
#include <vector>

namespace fipp {

struct AugmentationConfig {
    Index n_pairs = 14000;
    bool exclude_seed = true;
};

struct Augmentation {
    SeedDictionary dictionary;       // seed pairs first, then additions
    std::vector<IndexPair> added;    // additions, best first
    std::vector<double> similarity;  // one per addition
    Index collisions = 0;            // additions sharing a target with an earlier addition
    Index available = 0;             // candidate pairs before truncation to n_pairs
};

/// Adds high-confidence pairs found by comparing words through their inner
/// products with the seed words of their own language.
///
/// Source word i is described by A_s[i] = src[i] Xs^T and target word j by
/// A_t[j] = tgt[j] Xt^T, both c-dimensional. Each source word is paired with
/// the target of highest cosine between these rows; the n_pairs best pairs
/// (pairs already in the seed skipped if requested) are appended.
///
/// The cosine is evaluated as src[i] (Xs^T Xt) tgt[j]^T / (|A_s[i]| |A_t[j]|),
/// which keeps memory at O((n + m) d) instead of O((n + m) c).
inline Augmentation augment_dictionary(const Embedding& full_src, const Embedding& full_tgt,
                                       const SeedDictionary& seed, const AugmentationConfig& cfg) {
    detail::require(cfg.n_pairs >= 0, "augment_dictionary: n_pairs must be >= 0");
    detail::require(seed.size() >= 1, "augment_dictionary: empty seed dictionary");
    Augmentation out;
    out.dictionary = seed;
    if (cfg.n_pairs == 0) {
        return out;
    }

    const Matrix xs = gather_rows(full_src.matrix, seed.src_indices());
    const Matrix xt = gather_rows(full_tgt.matrix, seed.tgt_indices());
    const Matrix cross = xs.transpose() * xt; // d1 x d2
    const Matrix src_scatter = xs.transpose() * xs;
    const Matrix tgt_scatter = xt.transpose() * xt;

    // |A_s[i]|^2 = src[i] Xs^T Xs src[i]^T, likewise for targets.
    const Vector src_norm =
        ((full_src.matrix * src_scatter).array() * full_src.matrix.array()).rowwise().sum().max(0.0).sqrt();
    const Vector tgt_norm =
        ((full_tgt.matrix * tgt_scatter).array() * full_tgt.matrix.array()).rowwise().sum().max(0.0).sqrt();
    const Vector tgt_inv = (tgt_norm.array() > 0.0).select(tgt_norm.array().inverse(), 0.0).matrix();
    const Matrix tgt_scaled = tgt_inv.asDiagonal() * full_tgt.matrix;

    const Index n = full_src.size();
    const Index m = full_tgt.size();
    std::set<IndexPair> in_seed(seed.pairs.begin(), seed.pairs.end());

    struct Candidate {
        double sim;
        IndexPair pair;
    };
    std::vector<Candidate> candidates;
    candidates.reserve(static_cast<std::size_t>(n));
    const Index step = detail::block_rows(m);
    for (Index start = 0; start < n; start += step) {
        const Index len = std::min(step, n - start);
        const Matrix s = (full_src.matrix.middleRows(start, len) * cross) * tgt_scaled.transpose();
        for (Index r = 0; r < len; ++r) {
            const Index i = start + r;
            Index best = 0;
            for (Index j = 1; j < m; ++j) {
                if (s(r, j) > s(r, best)) best = j;
            }
            const double sim = src_norm(i) > 0.0 ? s(r, best) / src_norm(i) : 0.0;
            const IndexPair p{i, best};
            if (cfg.exclude_seed && in_seed.contains(p)) continue;
            candidates.push_back({sim, p});
        }
    }

    std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
        if (a.sim != b.sim) return a.sim > b.sim;
        return a.pair < b.pair;
    });
    out.available = static_cast<Index>(candidates.size());
    const std::size_t take = std::min<std::size_t>(candidates.size(), static_cast<std::size_t>(cfg.n_pairs));

    std::set<Index> targets;
    for (std::size_t k = 0; k < take; ++k) {
        const auto& c = candidates[k];
        out.added.push_back(c.pair);
        out.similarity.push_back(c.sim);
        if (!targets.insert(c.pair.tgt).second) ++out.collisions;
        if (!in_seed.contains(c.pair)) out.dictionary.pairs.push_back(c.pair);
    }
    return out;
}

} // namespace fipp
