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

#include "fipp/align.hpp"
#include "fipp/common.hpp"
#include "fipp/embio.hpp"
#include "fipp/objective.hpp"
#include "fipp/preprocess.hpp"
#include "fipp/retrieval.hpp"
#include "fipp/selflearn.hpp"

#include <chrono>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace fipp {

enum class Method { fipp, procrustes, linear };
enum class RotationMode { weighted, plain, none };
enum class WeightResidual { transfer, literal };

inline const char* to_string(Method m) {
    switch (m) {
    case Method::fipp: return "fipp";
    case Method::procrustes: return "procrustes";
    case Method::linear: return "linear";
    }
    return "?";
}

inline const char* to_string(RotationMode r) {
    switch (r) {
    case RotationMode::weighted: return "weighted";
    case RotationMode::plain: return "plain";
    case RotationMode::none: return "none";
    }
    return "?";
}

inline const char* to_string(WeightResidual w) { return w == WeightResidual::transfer ? "transfer" : "literal"; }

struct AlignConfig {
    Method method = Method::fipp;
    PreprocessMode preprocess;
    FippConfig fipp;
    RotationMode rotation = RotationMode::weighted;
    double weight_floor = 1e-6;
    WeightResidual weight_residual = WeightResidual::transfer;
    AugmentationConfig self_learning{0, true};
    Index histogram_bins = 50;
};

/// Wall-clock seconds per stage, in execution order.
using StageTimes = std::vector<std::pair<std::string, double>>;

struct AlignRun {
    AlignmentResult result;
    Embedding src;                 // preprocessed source
    Embedding tgt;                 // preprocessed target
    SeedDictionary dictionary;     // the dictionary actually fitted (after augmentation)
    std::optional<Augmentation> augmentation;
    PreprocessLog src_log;
    PreprocessLog tgt_log;

    // Seed-level diagnostics (fipp method only).
    std::optional<FilterMask> mask;
    Histogram src_histogram;
    Histogram tgt_histogram;
    std::vector<double> loss_trace;
    double lambda_eff = 0.0;

    ProjectionInfo projection;
    double rotation_orthogonality_error = 0.0; // || R^T R - I ||_F (R R^T for the linear map)
    StageTimes timings;
};

namespace detail {

class StageClock {
public:
    explicit StageClock(StageTimes& sink) : sink_(sink), last_(std::chrono::steady_clock::now()) {}

    void lap(const char* stage) {
        const auto now = std::chrono::steady_clock::now();
        sink_.emplace_back(stage, std::chrono::duration<double>(now - last_).count());
        last_ = now;
    }

private:
    StageTimes& sink_;
    std::chrono::steady_clock::time_point last_;
};

inline void check_dictionary(const SeedDictionary& dict, const Embedding& src, const Embedding& tgt) {
    require(!dict.pairs.empty(), "alignment needs at least one seed pair");
    for (const auto& p : dict.pairs) {
        require(p.src >= 0 && p.src < src.size() && p.tgt >= 0 && p.tgt < tgt.size(),
                "seed pair index out of range");
    }
}

/// Initial point for gradient descent: the source seed rows, truncated or
/// zero-padded to d2 columns.
inline Matrix sgd_init(const Matrix& seed_src, Index d2) {
    Matrix init = Matrix::Zero(seed_src.rows(), d2);
    const Index k = std::min(d2, seed_src.cols());
    init.leftCols(k) = seed_src.leftCols(k);
    return init;
}

} // namespace detail

/// Preprocess, optionally self-learn, fit on the seed dictionary, extend to the
/// full source vocabulary and rotate into the target basis.
inline AlignRun align_embeddings(Embedding src, Embedding tgt, const SeedDictionary& seed, const AlignConfig& cfg) {
    validate(src);
    validate(tgt);
    detail::check_dictionary(seed, src, tgt);

    AlignRun run;
    detail::StageClock clock(run.timings);

    auto [ps, pt] = preprocess_pair(std::move(src), std::move(tgt), cfg.preprocess, &run.src_log, &run.tgt_log);
    run.src = std::move(ps);
    run.tgt = std::move(pt);
    clock.lap("preprocess");

    run.dictionary = seed;
    if (cfg.self_learning.n_pairs > 0) {
        run.augmentation = augment_dictionary(run.src, run.tgt, seed, cfg.self_learning);
        run.dictionary = run.augmentation->dictionary;
        clock.lap("self_learning");
    }

    const Matrix xs = gather_rows(run.src.matrix, run.dictionary.src_indices());
    const Matrix xt = gather_rows(run.tgt.matrix, run.dictionary.tgt_indices());
    const Index d1 = xs.cols();
    const Index d2 = xt.cols();
    AlignmentResult& res = run.result;

    if (cfg.method == Method::procrustes || cfg.method == Method::linear) {
        if (cfg.method == Method::procrustes) {
            if (d1 != d2) {
                throw ConfigError("procrustes baseline needs equal dimensions (d1=" + std::to_string(d1) +
                                  ", d2=" + std::to_string(d2) + "); use --method linear");
            }
            res.rotation = procrustes(xs, xt);
            res.seed_aligned = xs;
            res.ortho_deviation = 0.0;
            run.rotation_orthogonality_error =
                (res.rotation.transpose() * res.rotation - Matrix::Identity(d2, d2)).norm();
        } else {
            res.rotation = orthonormal_linear_map(xs, xt);
            res.seed_aligned = xs * res.rotation;
            run.rotation_orthogonality_error =
                (res.rotation * res.rotation.transpose() - Matrix::Identity(d1, d1)).norm();
        }
        clock.lap("rotation");
        res.weights = Vector::Ones(xs.rows());
        res.full_aligned = run.src.matrix * res.rotation;
        clock.lap("projection");
        return run;
    }

    const GramMatrix gs = gram(xs);
    const GramMatrix gt = gram(xt);
    FilterMask mask = filter_mask(gs, gt, cfg.fipp.epsilon);
    run.lambda_eff = effective_lambda(cfg.fipp.lambda, mask, cfg.fipp.gamma_scaling);
    clock.lap("gram");

    const GramMatrix gstar = closed_form_gstar(gs, gt, mask, run.lambda_eff);
    clock.lap("gstar");

    if (cfg.fipp.solver == Solver::eigen) {
        res.seed_aligned = low_rank_psd_factor(gstar, d2, cfg.fipp.eigen);
    } else {
        SgdResult sgd = sgd_solve(detail::sgd_init(xs, d2), gs, gt, mask, run.lambda_eff, cfg.fipp.sgd_epochs,
                                  cfg.fipp.sgd_learning_rate, cfg.fipp.rng_seed);
        res.seed_aligned = std::move(sgd.solution);
        run.loss_trace = std::move(sgd.loss_trace);
    }
    clock.lap("factorization");

    const Matrix projected = least_squares_project(res.seed_aligned, xs, run.src.matrix, &run.projection);
    clock.lap("projection");

    switch (cfg.rotation) {
    case RotationMode::weighted:
        res.weights = cfg.weight_residual == WeightResidual::transfer
                          ? residual_weights(res.seed_aligned, xt, cfg.weight_floor)
                          : residual_weights_literal(res.seed_aligned, xs, xt, cfg.weight_floor);
        res.rotation = weighted_procrustes(res.seed_aligned, xt, res.weights);
        break;
    case RotationMode::plain:
        res.weights = Vector::Ones(xs.rows());
        res.rotation = procrustes(res.seed_aligned, xt);
        break;
    case RotationMode::none:
        res.weights = Vector::Ones(xs.rows());
        res.rotation = Matrix::Identity(d2, d2);
        break;
    }
    res.full_aligned = projected * res.rotation;
    run.rotation_orthogonality_error = (res.rotation.transpose() * res.rotation - Matrix::Identity(d2, d2)).norm();
    clock.lap("rotation");

    res.losses = fipp_loss(res.seed_aligned, gs, gt, mask, run.lambda_eff);
    if (d1 == d2) {
        res.ortho_deviation = orthogonal_deviation(res.seed_aligned, xs);
    }
    run.src_histogram = inner_product_histogram(gs, cfg.histogram_bins);
    run.tgt_histogram = inner_product_histogram(gt, cfg.histogram_bins);
    run.mask = std::move(mask);
    return run;
}

struct RetrievalConfig {
    RetrievalMethod method = RetrievalMethod::nn;
    Index csls_k = 10;
    Index topk = 10;
    bool exact = false; // rank every candidate (exact MAP)
};

/// Groups pairs by source index; queries keep first-appearance order.
inline std::pair<std::vector<Index>, std::map<Index, std::set<Index>>> group_gold(std::span<const IndexPair> pairs) {
    std::vector<Index> queries;
    std::map<Index, std::set<Index>> gold;
    for (const auto& p : pairs) {
        auto [it, fresh] = gold.try_emplace(p.src);
        if (fresh) queries.push_back(p.src);
        it->second.insert(p.tgt);
    }
    return {std::move(queries), std::move(gold)};
}

/// Retrieves translations of the test source words from `tgt` and scores them.
inline EvalReport evaluate_pairs(const Matrix& aligned_src, const Matrix& tgt, std::span<const IndexPair> test,
                                 const RetrievalConfig& cfg) {
    detail::require(!test.empty(), "evaluation needs at least one test pair");
    detail::require(aligned_src.cols() == tgt.cols(), "aligned source and target dimensions differ (" +
                                                          std::to_string(aligned_src.cols()) + " vs " +
                                                          std::to_string(tgt.cols()) + ")");
    auto [queries, gold] = group_gold(test);
    const Matrix q = gather_rows(aligned_src, queries);
    const Index k = cfg.exact ? tgt.rows() : cfg.topk;
    const RankedLists lists = cfg.method == RetrievalMethod::nn ? nn_retrieve(q, tgt, k)
                                                                : csls_retrieve(q, tgt, cfg.csls_k, k);
    EvalReport report = evaluate(queries, lists, gold);
    report.retrieval = cfg.method;
    report.csls_k = cfg.method == RetrievalMethod::csls ? cfg.csls_k : 0;
    report.topk = k;
    return report;
}

} // namespace fipp
