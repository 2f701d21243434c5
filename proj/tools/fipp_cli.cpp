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

// fipp: align, evaluate, self-learn, diagnose and benchmark embedding alignments.
//
// Exit status: 0 on success, 2 on configuration or file errors, 1 on
// numerical failure.

#include "fipp/fipp.hpp"
#include "fipp/report.hpp"

#include <CLI11.hpp>

#include <sys/utsname.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace {

namespace fs = std::filesystem;

struct InputOptions {
    std::string src;
    std::string tgt;
    std::string dict;
    long long max_vocab = 0;

    std::optional<fipp::Index> limit() const {
        return max_vocab > 0 ? std::optional<fipp::Index>(max_vocab) : std::nullopt;
    }
};

struct Options {
    InputOptions in;
    fipp::AlignConfig align;
    std::string preprocess = "isotropic";
    std::string solver = "eigen";
    std::string rotation = "weighted";
    std::string method = "fipp";
    std::string weight_residual = "transfer";
    bool no_gamma = false;
    std::uint64_t seed = 0;
    std::string out;
    bool dump_augmented = false;

    // eval
    std::string aligned;
    std::string test_dict;
    std::string retrieval = "nn";
    fipp::RetrievalConfig eval;

    // selflearn
    long long n_pairs = 14000;
    bool include_seed = false;

    // bench
    long long bench_c = 1000;
    long long bench_dim = 300;
    long long bench_vocab = 50000;
    int bench_runs = 3;
    double bench_noise = 0.01;
};

void add_inputs(CLI::App* app, InputOptions& in) {
    app->add_option("--src", in.src, "Source embedding (word2vec text format)")->required()->check(CLI::ExistingFile);
    app->add_option("--tgt", in.tgt, "Target embedding (word2vec text format)")->required()->check(CLI::ExistingFile);
    app->add_option("--dict", in.dict, "Seed dictionary, one \"src<TAB>tgt\" pair per line")
        ->required()
        ->check(CLI::ExistingFile);
    app->add_option("--max-vocab", in.max_vocab, "Read only the first N rows of each embedding (0 = all)");
}

void add_preprocess(CLI::App* app, Options& o) {
    app->add_option("--preprocess", o.preprocess, "Preprocessing")
        ->check(CLI::IsMember({"none", "isotropic", "iternorm"}))
        ->capture_default_str();
    app->add_option("--pca-k", o.align.preprocess.components_removed, "Principal components removed (isotropic)")
        ->capture_default_str();
    app->add_option("--in-iters", o.align.preprocess.iterations, "Iterations (iternorm)")->capture_default_str();
}

void add_fipp(CLI::App* app, Options& o) {
    auto& f = o.align.fipp;
    app->add_option("--eps", f.epsilon, "Inner product filter threshold")->capture_default_str();
    app->add_option("--lambda", f.lambda, "Transfer loss weight (before gamma scaling)")->capture_default_str();
    app->add_flag("--no-gamma", o.no_gamma, "Do not scale lambda by c^2 / nnz(filter)");
    app->add_option("--solver", o.solver, "Seed alignment solver")
        ->check(CLI::IsMember({"eigen", "sgd"}))
        ->capture_default_str();
    app->add_option("--sgd-epochs", f.sgd_epochs, "Gradient descent epochs")->capture_default_str();
    app->add_option("--sgd-lr", f.sgd_learning_rate, "Gradient descent learning rate")->capture_default_str();
    app->add_option("--seed", o.seed, "Random seed")->capture_default_str();
    app->add_option("--dense-limit", f.eigen.dense_limit, "Largest seed count solved by a dense eigendecomposition")
        ->capture_default_str();
}

void add_rotation(CLI::App* app, Options& o) {
    app->add_option("--method", o.method, "Alignment method")
        ->check(CLI::IsMember({"fipp", "procrustes", "linear"}))
        ->capture_default_str();
    app->add_option("--rotation", o.rotation, "Rotation into the target basis")
        ->check(CLI::IsMember({"weighted", "plain", "none"}))
        ->capture_default_str();
    app->add_option("--weight-floor", o.align.weight_floor, "Residual floor for Procrustes weights")
        ->capture_default_str();
    app->add_option("--weight-residual", o.weight_residual,
                    "Per-pair residual: transfer (aligned vs aligned Gram) or literal (aligned vs source Gram)")
        ->check(CLI::IsMember({"transfer", "literal"}))
        ->capture_default_str();
}

void finalize(Options& o) {
    auto& a = o.align;
    a.preprocess.kind = o.preprocess == "none"       ? fipp::PreprocessKind::none
                        : o.preprocess == "iternorm" ? fipp::PreprocessKind::iterative_norm
                                                     : fipp::PreprocessKind::isotropic;
    a.fipp.gamma_scaling = !o.no_gamma;
    a.fipp.solver = o.solver == "sgd" ? fipp::Solver::sgd : fipp::Solver::eigen;
    a.fipp.rng_seed = o.seed;
    a.rotation = o.rotation == "plain"  ? fipp::RotationMode::plain
                 : o.rotation == "none" ? fipp::RotationMode::none
                                        : fipp::RotationMode::weighted;
    a.method = o.method == "procrustes" ? fipp::Method::procrustes
               : o.method == "linear"   ? fipp::Method::linear
                                        : fipp::Method::fipp;
    a.weight_residual = o.weight_residual == "literal" ? fipp::WeightResidual::literal
                                                       : fipp::WeightResidual::transfer;
    o.eval.method = o.retrieval == "csls" ? fipp::RetrievalMethod::csls : fipp::RetrievalMethod::nn;
}

struct Inputs {
    fipp::Embedding src;
    fipp::Embedding tgt;
    fipp::SeedDictionary dict;
};

Inputs load_inputs(const InputOptions& in) {
    Inputs x;
    x.src = fipp::load_embeddings(in.src, in.limit());
    x.tgt = fipp::load_embeddings(in.tgt, in.limit());
    x.dict = fipp::load_dictionary(in.dict, x.src, x.tgt);
    return x;
}

fs::path ensure_dir(const std::string& dir) {
    fs::path p(dir);
    std::error_code ec;
    fs::create_directories(p, ec);
    if (ec) throw fipp::IoError("cannot create output directory '" + dir + "': " + ec.message());
    return p;
}

fipp::Json input_echo(const InputOptions& in) {
    return {{"src", in.src}, {"tgt", in.tgt}, {"dict", in.dict}, {"max_vocab", in.max_vocab}};
}

int run_align(Options& o) {
    Inputs x = load_inputs(o.in);
    const fs::path dir = ensure_dir(o.out);
    fipp::AlignRun run = fipp::align_embeddings(x.src, x.tgt, x.dict, o.align);
    run.dictionary.skipped = x.dict.skipped;

    fipp::Embedding aligned{x.src.vocab, run.result.full_aligned};
    fipp::save_embeddings(aligned, (dir / "aligned_source.vec").string());
    fipp::save_embeddings(run.tgt, (dir / "target.vec").string());

    fipp::Json report;
    report["command"] = "align";
    report["inputs"] = input_echo(o.in);
    report.update(fipp::align_report(run, o.align));
    fipp::write_json(report, (dir / "report.json").string());

    if (run.mask) {
        fipp::write_histogram_csv(run.src_histogram, (dir / "histogram_source.csv").string());
        fipp::write_histogram_csv(run.tgt_histogram, (dir / "histogram_target.csv").string());
        fipp::write_filter_stats_csv(*run.mask, run.dictionary, run.src, run.tgt, (dir / "filter_stats.csv").string());
    }
    if (!run.loss_trace.empty()) {
        fipp::write_loss_trace_csv(run.loss_trace, (dir / "loss_trace.csv").string());
    }
    if (run.augmentation && o.dump_augmented) {
        fipp::save_dictionary((dir / "augmented_dictionary.tsv").string(), run.src, run.tgt,
                              run.augmentation->added, run.augmentation->similarity);
    }
    std::cerr << "aligned " << aligned.size() << " words into " << aligned.dim() << " dimensions; wrote "
              << dir.string() << "\n";
    return 0;
}

int run_eval(Options& o) {
    const auto limit = o.in.max_vocab > 0 ? std::optional<fipp::Index>(o.in.max_vocab) : std::nullopt;
    const fipp::Embedding aligned = fipp::load_embeddings(o.aligned, limit);
    const fipp::Embedding tgt = fipp::load_embeddings(o.in.tgt, limit);
    const auto words = fipp::read_word_pairs(o.test_dict);
    const fipp::SeedDictionary test = fipp::resolve_dictionary(words, aligned, tgt);
    if (test.pairs.empty()) {
        throw fipp::ConfigError("test dictionary '" + o.test_dict + "' has no pair with both words in vocabulary");
    }
    const fipp::EvalReport r = fipp::evaluate_pairs(aligned.matrix, tgt.matrix, test.pairs, o.eval);

    fipp::Json report;
    report["command"] = "eval";
    report["inputs"] = {{"aligned", o.aligned}, {"tgt", o.in.tgt}, {"test_dict", o.test_dict},
                        {"max_vocab", o.in.max_vocab}};
    report["config"] = {{"retrieval", to_string(o.eval.method)},
                        {"csls_k", o.eval.csls_k},
                        {"topk", o.eval.topk},
                        {"exact_map", o.eval.exact}};
    report["test_pairs"] = test.pairs.size();
    report["test_skipped"] = test.skipped;
    report.update(fipp::to_json(r));
    if (o.out.empty()) {
        std::cout << report.dump(2) << "\n";
    } else {
        fipp::write_json(report, o.out);
    }
    std::cerr << "MAP " << r.map << "  P@1 " << r.p_at_1 << "  P@5 " << r.p_at_5 << "  (" << r.n_queries
              << " queries)\n";
    return 0;
}

int run_selflearn(Options& o) {
    Inputs x = load_inputs(o.in);
    auto [src, tgt] = fipp::preprocess_pair(std::move(x.src), std::move(x.tgt), o.align.preprocess);
    const fipp::AugmentationConfig cfg{o.n_pairs, !o.include_seed};
    const fipp::Augmentation aug = fipp::augment_dictionary(src, tgt, x.dict, cfg);
    if (aug.available < cfg.n_pairs) {
        std::cerr << "warning: only " << aug.available << " candidate pairs available (asked for " << cfg.n_pairs
                  << ")\n";
    }
    fipp::save_dictionary(o.out, src, tgt, aug.added, aug.similarity);
    std::cerr << "added " << aug.added.size() << " pairs (" << aug.collisions << " target collisions); wrote "
              << o.out << "\n";
    return 0;
}

int run_diag(Options& o) {
    Inputs x = load_inputs(o.in);
    const fs::path dir = ensure_dir(o.out);

    // Seed Gram distributions before any preprocessing.
    const auto raw_src = fipp::gram(fipp::gather_rows(x.src.matrix, x.dict.src_indices()));
    const auto raw_tgt = fipp::gram(fipp::gather_rows(x.tgt.matrix, x.dict.tgt_indices()));
    fipp::write_histogram_csv(fipp::inner_product_histogram(raw_src, o.align.histogram_bins),
                              (dir / "histogram_source_raw.csv").string());
    fipp::write_histogram_csv(fipp::inner_product_histogram(raw_tgt, o.align.histogram_bins),
                              (dir / "histogram_target_raw.csv").string());

    o.align.method = fipp::Method::fipp;
    const fipp::AlignRun run = fipp::align_embeddings(std::move(x.src), std::move(x.tgt), x.dict, o.align);
    fipp::write_histogram_csv(run.src_histogram, (dir / "histogram_source_preprocessed.csv").string());
    fipp::write_histogram_csv(run.tgt_histogram, (dir / "histogram_target_preprocessed.csv").string());
    fipp::write_filter_stats_csv(*run.mask, run.dictionary, run.src, run.tgt, (dir / "filter_stats.csv").string());

    const fipp::Vector frac = fipp::filter_stats(*run.mask);
    fipp::Json report;
    report["command"] = "diag";
    report["inputs"] = input_echo(o.in);
    report["config"] = fipp::to_json(o.align);
    report["filter"] = {{"epsilon", run.mask->epsilon},
                        {"nnz", run.mask->nnz},
                        {"mean_fraction_filtered", frac.mean()},
                        {"max_fraction_filtered", frac.maxCoeff()},
                        {"min_fraction_filtered", frac.minCoeff()}};
    report["losses"] = fipp::to_json(*run.result.losses);
    report["ortho_deviation"] =
        run.result.ortho_deviation ? fipp::Json(*run.result.ortho_deviation) : fipp::Json(nullptr);
    report["raw_pip_distance_seed"] =
        (raw_src.size() > 0) ? fipp::Json((raw_src.entries - raw_tgt.entries).norm()) : fipp::Json(nullptr);
    fipp::write_json(report, (dir / "diag.json").string());
    std::cerr << "wrote diagnostics to " << dir.string() << "\n";
    return 0;
}

fipp::Json machine_info() {
    fipp::Json m;
    utsname u{};
    if (uname(&u) == 0) {
        m["system"] = u.sysname;
        m["release"] = u.release;
        m["machine"] = u.machine;
    }
    m["hardware_threads"] = std::thread::hardware_concurrency();
    m["eigen_threads"] = Eigen::nbThreads();
#if defined(__VERSION__)
    m["compiler"] = __VERSION__;
#endif
    return m;
}

int run_bench(Options& o) {
    const fipp::Index c = o.bench_c;
    const fipp::Index d = o.bench_dim;
    const fipp::Index n = std::max<fipp::Index>(o.bench_vocab, c);
    if (c < 1 || d < 2 || o.bench_runs < 1) {
        throw fipp::ConfigError("bench: need c >= 1, dim >= 2, runs >= 1");
    }
    const fipp::SyntheticPair pair = fipp::make_synthetic_pair(n, d, d, o.bench_noise, o.seed);
    const fipp::SeedDictionary dict = fipp::identity_dictionary(0, c);

    std::vector<fipp::StageTimes> runs;
    for (int r = 0; r < o.bench_runs; ++r) {
        runs.push_back(fipp::align_embeddings(pair.src, pair.tgt, dict, o.align).timings);
        double total = 0.0;
        for (const auto& [stage, s] : runs.back()) total += s;
        std::cerr << "run " << r + 1 << ": " << total << " s\n";
    }

    std::map<std::string, std::vector<double>> by_stage;
    std::vector<std::string> order;
    std::vector<double> totals;
    for (const auto& t : runs) {
        double total = 0.0;
        for (const auto& [stage, s] : t) {
            if (!by_stage.contains(stage)) order.push_back(stage);
            by_stage[stage].push_back(s);
            total += s;
        }
        totals.push_back(total);
    }
    auto stats = [](const std::vector<double>& v) {
        double mean = 0.0;
        for (double x : v) mean += x;
        mean /= static_cast<double>(v.size());
        double var = 0.0;
        for (double x : v) var += (x - mean) * (x - mean);
        var = v.size() > 1 ? var / static_cast<double>(v.size() - 1) : 0.0;
        return fipp::Json{{"mean", mean}, {"stddev", std::sqrt(var)}, {"runs", v}};
    };

    fipp::Json report;
    report["command"] = "bench";
    report["workload"] = {{"seed_pairs", c}, {"dim", d}, {"vocab", n}, {"noise", o.bench_noise}, {"seed", o.seed}};
    report["config"] = fipp::to_json(o.align);
    report["machine"] = machine_info();
    fipp::Json stages = fipp::Json::object();
    for (const auto& s : order) stages[s] = stats(by_stage[s]);
    report["stages"] = std::move(stages);
    report["total"] = stats(totals);
    if (o.out.empty()) {
        std::cout << report.dump(2) << "\n";
    } else {
        fipp::write_json(report, o.out);
    }
    return 0;
}

void honor_thread_env() {
    if (const char* env = std::getenv("FIPP_NUM_THREADS")) {
        const int n = std::atoi(env);
        if (n > 0) Eigen::setNbThreads(n);
    }
}

} // namespace

int main(int argc, char** argv) {
    honor_thread_env();
    CLI::App app{"Filtered inner product projection: align two embedding spaces and evaluate translation retrieval"};
    app.require_subcommand(1);
    Options o;

    auto* align = app.add_subcommand("align", "Fit an alignment and write the aligned source embedding");
    add_inputs(align, o.in);
    add_preprocess(align, o);
    add_fipp(align, o);
    add_rotation(align, o);
    align->add_option("--self-learning", o.align.self_learning.n_pairs, "Induced pairs added to the seed (0 = off)")
        ->capture_default_str();
    align->add_flag("--dump-augmented", o.dump_augmented, "Write augmented_dictionary.tsv when self-learning");
    align->add_option("--bins", o.align.histogram_bins, "Histogram bins")->capture_default_str();
    align->add_option("--out", o.out, "Output directory")->required();

    auto* eval = app.add_subcommand("eval", "Score translation retrieval from an aligned source embedding");
    eval->add_option("--aligned", o.aligned, "Aligned source embedding")->required()->check(CLI::ExistingFile);
    eval->add_option("--tgt", o.in.tgt, "Target embedding in the same space")->required()->check(CLI::ExistingFile);
    eval->add_option("--test-dict", o.test_dict, "Test dictionary")->required()->check(CLI::ExistingFile);
    eval->add_option("--retrieval", o.retrieval, "Retrieval criterion")
        ->check(CLI::IsMember({"nn", "csls"}))
        ->capture_default_str();
    eval->add_option("--csls-k", o.eval.csls_k, "CSLS neighborhood size")->capture_default_str();
    eval->add_option("--topk", o.eval.topk, "Ranked list length")->capture_default_str();
    eval->add_flag("--exact-map", o.eval.exact, "Rank every candidate (exact MAP)");
    eval->add_option("--max-vocab", o.in.max_vocab, "Read only the first N rows of each embedding (0 = all)");
    eval->add_option("--out", o.out, "Report path (default: stdout)");

    auto* selflearn = app.add_subcommand("selflearn", "Write a seed dictionary augmented with induced pairs");
    add_inputs(selflearn, o.in);
    add_preprocess(selflearn, o);
    selflearn->add_option("--n", o.n_pairs, "Pairs to add")->capture_default_str();
    selflearn->add_flag("--include-seed", o.include_seed, "Allow pairs already in the seed");
    selflearn->add_option("--out", o.out, "Output TSV (src, tgt, similarity)")->required();

    auto* diag = app.add_subcommand("diag", "Inner product histograms, filter statistics and loss diagnostics");
    add_inputs(diag, o.in);
    add_preprocess(diag, o);
    add_fipp(diag, o);
    diag->add_option("--bins", o.align.histogram_bins, "Histogram bins")->capture_default_str();
    diag->add_option("--out", o.out, "Output directory")->required();

    auto* bench = app.add_subcommand("bench", "Time the alignment stages on synthetic data");
    bench->add_option("--c", o.bench_c, "Seed pairs")->capture_default_str();
    bench->add_option("--dim", o.bench_dim, "Embedding dimension")->capture_default_str();
    bench->add_option("--vocab", o.bench_vocab, "Source vocabulary size")->capture_default_str();
    bench->add_option("--runs", o.bench_runs, "Repetitions")->capture_default_str();
    bench->add_option("--noise", o.bench_noise, "Target noise per entry")->capture_default_str();
    add_preprocess(bench, o);
    add_fipp(bench, o);
    add_rotation(bench, o);
    bench->add_option("--out", o.out, "Report path (default: stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    finalize(o);
    try {
        if (*align) return run_align(o);
        if (*eval) return run_eval(o);
        if (*selflearn) return run_selflearn(o);
        if (*diag) return run_diag(o);
        if (*bench) return run_bench(o);
    } catch (const fipp::NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return 1;
    } catch (const fipp::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}
