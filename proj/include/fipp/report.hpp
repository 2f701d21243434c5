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

// JSON and CSV writers for run reports. Key order is fixed by insertion, so
// identical runs produce byte-identical reports apart from "timing".

#pragma once

#include "fipp/pipeline.hpp"

#include <json.hpp>

#include <fstream>
#include <string>

namespace fipp {

using Json = nlohmann::ordered_json;

inline Json to_json(const PreprocessMode& m) {
    Json j;
    j["kind"] = to_string(m.kind);
    j["components_removed"] = m.components_removed;
    j["iterations"] = m.iterations;
    return j;
}

inline Json to_json(const FippConfig& c) {
    Json j;
    j["epsilon"] = c.epsilon;
    j["lambda"] = c.lambda;
    j["gamma_scaling"] = c.gamma_scaling;
    j["solver"] = to_string(c.solver);
    j["sgd_epochs"] = c.sgd_epochs;
    j["sgd_learning_rate"] = c.sgd_learning_rate;
    j["seed"] = c.rng_seed;
    j["eigen_dense_limit"] = c.eigen.dense_limit;
    j["eigen_tolerance"] = c.eigen.tolerance;
    return j;
}

inline Json to_json(const AlignConfig& c) {
    Json j;
    j["method"] = to_string(c.method);
    j["preprocess"] = to_json(c.preprocess);
    j["fipp"] = to_json(c.fipp);
    j["rotation"] = to_string(c.rotation);
    j["weight_floor"] = c.weight_floor;
    j["weight_residual"] = to_string(c.weight_residual);
    j["self_learning"] = {{"n_pairs", c.self_learning.n_pairs}, {"exclude_seed", c.self_learning.exclude_seed}};
    j["histogram_bins"] = c.histogram_bins;
    return j;
}

inline Json to_json(const LossBreakdown& l) {
    Json j;
    j["reconstruction"] = l.reconstruction;
    j["transfer"] = l.transfer;
    j["total"] = l.total;
    j["effective_lambda"] = l.effective_lambda;
    return j;
}

inline Json to_json(const StageTimes& t) {
    Json j = Json::object();
    for (const auto& [stage, seconds] : t) j[stage] = seconds;
    return j;
}

inline Json to_json(const Matrix& m) {
    Json rows = Json::array();
    for (Index i = 0; i < m.rows(); ++i) {
        Json row = Json::array();
        for (Index k = 0; k < m.cols(); ++k) row.push_back(m(i, k));
        rows.push_back(std::move(row));
    }
    return rows;
}

/// Summary of an alignment run. Everything except "timing" is a function of
/// the inputs and the configuration.
inline Json align_report(const AlignRun& run, const AlignConfig& cfg) {
    const AlignmentResult& r = run.result;
    Json j;
    j["config"] = to_json(cfg);
    j["sizes"] = {{"source_rows", run.src.size()},   {"source_dim", run.src.dim()},
                  {"target_rows", run.tgt.size()},   {"target_dim", run.tgt.dim()},
                  {"seed_pairs", run.dictionary.size()}, {"dictionary_skipped", run.dictionary.skipped}};
    j["preprocess"] = {{"source_zero_rows", run.src_log.zero_rows}, {"target_zero_rows", run.tgt_log.zero_rows},
                       {"source_collapsed", run.src_log.collapsed}, {"target_collapsed", run.tgt_log.collapsed}};
    if (run.augmentation) {
        j["self_learning"] = {{"added", run.augmentation->added.size()},
                              {"available", run.augmentation->available},
                              {"target_collisions", run.augmentation->collisions}};
    }
    if (run.mask) {
        j["filter"] = {{"epsilon", run.mask->epsilon},
                       {"nnz", run.mask->nnz},
                       {"density", static_cast<double>(run.mask->nnz) /
                                       static_cast<double>(run.mask->size() * run.mask->size())}};
    }
    j["losses"] = r.losses ? to_json(*r.losses) : Json(nullptr);
    j["ortho_deviation"] = r.ortho_deviation ? Json(*r.ortho_deviation) : Json(nullptr);
    if (run.mask) {
        j["projection"] = {{"rank", run.projection.rank}, {"condition_number", run.projection.condition_number}};
    }
    j["weights"] = {{"min", r.weights.minCoeff()}, {"max", r.weights.maxCoeff()}, {"mean", r.weights.mean()}};
    j["rotation_orthogonality_error"] = run.rotation_orthogonality_error;
    j["rotation"] = to_json(r.rotation);
    j["timing"] = to_json(run.timings);
    return j;
}

inline Json to_json(const EvalReport& r) {
    Json j;
    j["retrieval"] = to_string(r.retrieval);
    j["csls_k"] = r.csls_k;
    j["topk"] = r.topk;
    j["n_queries"] = r.n_queries;
    j["map"] = r.map;
    j["p_at_1"] = r.p_at_1;
    j["p_at_5"] = r.p_at_5;
    Json per = Json::array();
    for (const auto& q : r.per_query) {
        per.push_back({{"query", q.query}, {"best_gold_rank", q.best_gold_rank ? Json(*q.best_gold_rank) : Json(nullptr)}});
    }
    j["per_query"] = std::move(per);
    return j;
}

inline void write_json(const Json& j, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << j.dump(2) << '\n';
    if (!out) throw IoError("write failed for '" + path + "'");
}

namespace detail {

inline std::ofstream open_csv(const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out.precision(17);
    return out;
}

} // namespace detail

inline void write_histogram_csv(const Histogram& h, const std::string& path) {
    auto out = detail::open_csv(path);
    out << "bin,lo,hi,count\n";
    const double w = h.bin_width();
    for (std::size_t b = 0; b < h.counts.size(); ++b) {
        out << b << ',' << h.lo + w * static_cast<double>(b) << ',' << h.lo + w * static_cast<double>(b + 1) << ','
            << h.counts[b] << '\n';
    }
}

/// One row per seed pair: words and the fraction of its mask row that is zero.
inline void write_filter_stats_csv(const FilterMask& mask, const SeedDictionary& dict, const Embedding& src,
                                   const Embedding& tgt, const std::string& path) {
    auto out = detail::open_csv(path);
    out << "pair,source,target,fraction_filtered\n";
    const Vector frac = filter_stats(mask);
    for (Index i = 0; i < frac.size(); ++i) {
        const auto& p = dict.pairs[static_cast<std::size_t>(i)];
        out << i << ',' << src.vocab[static_cast<std::size_t>(p.src)] << ','
            << tgt.vocab[static_cast<std::size_t>(p.tgt)] << ',' << frac(i) << '\n';
    }
}

inline void write_loss_trace_csv(const std::vector<double>& trace, const std::string& path) {
    auto out = detail::open_csv(path);
    out << "epoch,loss\n";
    for (std::size_t e = 0; e < trace.size(); ++e) out << e << ',' << trace[e] << '\n';
}

} // namespace fipp
