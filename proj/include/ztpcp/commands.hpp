#pragma once

// Drivers behind the command-line tool. Each command reads and writes files
// under a directory with fixed names so runs can be scripted and diffed.

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "ztpcp/cdf.hpp"
#include "ztpcp/chain.hpp"
#include "ztpcp/checkpoint.hpp"
#include "ztpcp/config.hpp"
#include "ztpcp/eval.hpp"
#include "ztpcp/io.hpp"
#include "ztpcp/split.hpp"
#include "ztpcp/synth.hpp"

namespace ztpcp {

namespace files {
inline constexpr const char* kCheckpoint = "checkpoint.txt";
inline constexpr const char* kMeanCheckpoint = "mean_checkpoint.txt";
inline constexpr const char* kSamples = "samples.txt";
inline constexpr const char* kRankReport = "rank_report.txt";
inline constexpr const char* kProgress = "progress.log";
inline constexpr const char* kConfig = "config.txt";
inline constexpr const char* kTrain = "train.txt";
inline constexpr const char* kTest = "test.txt";
inline constexpr const char* kPredictions = "predictions.txt";
inline constexpr const char* kMetrics = "metrics.txt";
inline constexpr const char* kRoc = "roc.dat";
inline constexpr const char* kPr = "pr.dat";
inline constexpr const char* kTensor = "tensor.txt";
inline constexpr const char* kTruth = "truth.txt";
inline constexpr const char* kSynthSummary = "synth.txt";

inline std::string network(std::size_t mode) { return "network_" + std::to_string(mode + 1) + ".txt"; }
}  // namespace files

/// 0 success, 2 configuration error, 3 data error, 4 numerical failure.
inline int exit_code_for(const Error& e) {
    if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const ContractError*>(&e)) return 2;
    if (dynamic_cast<const DataError*>(&e) || dynamic_cast<const MetricError*>(&e)) return 3;
    return 4;
}

inline std::string path_in(const std::string& dir, const std::string& name) {
    return (std::filesystem::path(dir) / name).string();
}

inline void ensure_dir(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw DataError("cannot create directory " + dir + ": " + ec.message());
}

inline std::string format_rank_report(std::span<const RankEntry> report) {
    std::ostringstream os;
    os << "# factor mean_lambda active\n";
    for (const auto& e : report) {
        os << e.factor << ' ' << io::format_double(e.mean_lambda) << ' ' << (e.active ? 1 : 0) << '\n';
    }
    os << "# active " << active_count(report) << " of " << report.size() << '\n';
    return os.str();
}

struct FitResult {
    ChainOutput chain;
    Dataset data;
    std::vector<TestEntry> test;
    std::optional<Metrics> metrics;
};

inline FitResult cmd_fit(const RunConfig& config) {
    config.validate();
    ensure_dir(config.out);
    FitResult res;

    SparseBinaryTensor full = load_tensor(config.tensor, config.shape);
    const auto holdout = config.holdout_spec();
    if (holdout.enabled) {
        auto split = split_holdout(full, holdout.split, config.zeros_per_one);
        res.data.tensor = std::move(split.train);
        res.test = std::move(split.test);
        write_tensor(path_in(config.out, files::kTrain), res.data.tensor);
        write_test_file(path_in(config.out, files::kTest), res.test);
    } else {
        res.data.tensor = std::move(full);
    }
    if (res.data.tensor.nnz() == 0) throw DataError("training tensor has no ones");
    for (const auto& src : config.networks) {
        res.data.networks.push_back(load_network(src.path, src.mode, config.shape[src.mode]));
    }
    {
        std::ofstream cfg_out = io::open_out(path_in(config.out, files::kConfig));
        cfg_out << config.to_text();
    }

    std::ofstream progress = io::open_out(path_in(config.out, files::kProgress));
    ChainConfig cc;
    cc.iters = config.iters;
    cc.burnin = config.burnin;
    cc.thin = config.thin;
    cc.threads = config.threads;
    cc.keep_samples = config.keep_samples;
    cc.log_every = config.log_every;
    cc.prune_tau = config.prune_tau;
    cc.progress = [&progress](const ProgressRecord& rec) { progress << rec << '\n'; };

    const Hyperparams hyper = config.hyperparams();
    const RngHandle master(config.seed);
    if (config.inference == "batch") {
        res.chain = run_chain(master, res.data, hyper, cc);
    } else {
        MinibatchSpec spec = MinibatchSpec::from_fraction(res.data, config.minibatch_fraction);
        if (config.minibatch > 0) spec.tensor_batch = config.minibatch;
        if (config.network_minibatch > 0) {
            for (std::size_t n = 0; n < res.data.networks.size(); ++n) {
                spec.network_batch[n] = std::min(config.network_minibatch, res.data.networks[n].nnz());
            }
        }
        spec.reweight = config.reweight;
        spec.samples_per_refresh = config.samples_per_refresh;
        spec.summary = config.summary == "average" ? MinibatchSpec::Summary::SampleAverage
                                                   : MinibatchSpec::Summary::AnalyticMean;
        spec.decay = config.decay;
        res.chain = run_online_chain(master, res.data, hyper, spec, cc);
    }
    progress.close();

    const auto& chain = res.chain;
    write_checkpoint_file(path_in(config.out, files::kCheckpoint), to_checkpoint(chain.final_state));
    write_checkpoint_file(path_in(config.out, files::kMeanCheckpoint),
                          Checkpoint{chain.final_state.iteration, config.seed, chain.mean, std::nullopt});
    if (config.keep_samples) {
        std::vector<Checkpoint> cks;
        const std::uint64_t first = chain.burnin + 1;
        for (std::size_t s = 0; s < chain.samples.size(); ++s) {
            cks.push_back({first + s * chain.thin, config.seed, chain.samples[s], std::nullopt});
        }
        write_checkpoint_file(path_in(config.out, files::kSamples), cks);
    }
    {
        auto out = io::open_out(path_in(config.out, files::kRankReport));
        out << format_rank_report(rank_report(chain, config.prune_tau));
    }
    if (holdout.enabled && !res.test.empty()) {
        const auto mode = config.keep_samples ? PredictionMode::Average : PredictionMode::PlugIn;
        const auto preds = predict(chain, res.test, mode);
        write_predictions(path_in(config.out, files::kPredictions), preds);
        try {
            res.metrics = evaluate(preds);
            write_metrics(path_in(config.out, files::kMetrics), *res.metrics);
        } catch (const MetricError&) {
            // single-class test set; predictions are still written
        }
    }
    return res;
}

/// Averages predictions over every checkpoint in the file (one checkpoint
/// gives plug-in predictions).
inline PredictionSet cmd_predict(const std::string& checkpoint_path, const std::string& test_path,
                                 const std::string& out_dir) {
    const auto cks = read_checkpoint_file(checkpoint_path);
    std::vector<Parameters> samples;
    for (const auto& ck : cks) samples.push_back(ck.params);
    const Shape shape = samples.front().shape();
    for (const auto& s : samples) {
        if (s.shape() != shape) throw DataError(checkpoint_path + ": checkpoints disagree on shape");
    }
    const auto test = load_test_file(test_path, shape);
    auto preds = predict(std::span<const Parameters>(samples), test);
    ensure_dir(out_dir);
    write_predictions(path_in(out_dir, files::kPredictions), preds);
    return preds;
}

inline Metrics cmd_eval(const PredictionSet& preds, const std::string& out_dir) {
    const Metrics m = evaluate(preds);
    ensure_dir(out_dir);
    write_metrics(path_in(out_dir, files::kMetrics), m);
    write_curve(path_in(out_dir, files::kRoc), roc_curve(preds));
    write_curve(path_in(out_dir, files::kPr), pr_curve(preds));
    return m;
}

inline Metrics cmd_eval(const std::string& predictions_path, const std::string& out_dir) {
    return cmd_eval(load_predictions(predictions_path, predictions_order(predictions_path)), out_dir);
}

inline std::string format_metrics_table(const Metrics& m) {
    std::ostringstream os;
    os << std::left << std::setw(10) << "metric" << "value\n";
    os << std::setw(10) << "auc_roc" << io::format_double(m.auc_roc) << '\n';
    os << std::setw(10) << "auc_pr" << io::format_double(m.auc_pr) << '\n';
    os << std::setw(10) << "log_loss" << io::format_double(m.log_loss) << '\n';
    os << std::setw(10) << "positives" << m.positives << '\n';
    os << std::setw(10) << "negatives" << m.negatives << '\n';
    return os.str();
}

/// Synthetic-data spec keys: shape, rank, lambda, beta, networks (1-based
/// modes), a, c, epsilon, g, d, alpha, f, seed, max_expected_nnz.
inline SynthSpec synth_spec_from_key_values(const KeyValues& kv) {
    cfg::Reader rd(kv);
    const auto* shape = rd.get("shape");
    if (!shape) throw ConfigError("synth spec needs a shape");
    SynthSpec spec;
    spec.shape = cfg::to_shape("shape", *shape);
    if (auto v = rd.get("rank")) spec.rank = cfg::to_int<std::size_t>("rank", *v);
    spec.hyper = Hyperparams::defaults(spec.shape.size(), spec.rank);
    if (auto v = rd.get("seed")) spec.seed = cfg::to_int<std::uint64_t>("seed", *v);
    if (auto v = rd.get("lambda")) spec.lambda = cfg::to_doubles("lambda", *v);
    if (auto v = rd.get("beta")) spec.beta = cfg::to_doubles("beta", *v);
    if (auto v = rd.get("networks")) {
        for (const auto& t : cfg::split_list(*v, ", \t")) spec.network_modes.push_back(cfg::to_mode("networks", t));
    }
    if (auto v = rd.get("a")) spec.hyper.a.assign(spec.shape.size(), cfg::to_double("a", *v));
    if (auto v = rd.get("c")) spec.hyper.c = cfg::to_double("c", *v);
    if (auto v = rd.get("epsilon")) spec.hyper.epsilon = cfg::to_double("epsilon", *v);
    if (auto v = rd.get("g")) spec.hyper.g.assign(spec.rank, cfg::to_double("g", *v));
    if (auto v = rd.get("d")) spec.hyper.d = cfg::to_double("d", *v);
    if (auto v = rd.get("alpha")) spec.hyper.alpha = cfg::to_double("alpha", *v);
    if (auto v = rd.get("f")) spec.hyper.f.assign(spec.rank, cfg::to_double("f", *v));
    if (auto v = rd.get("max_expected_nnz")) spec.max_expected_nnz = cfg::to_double("max_expected_nnz", *v);
    rd.reject_unknown();
    return spec;
}

inline SynthResult cmd_synth(const SynthSpec& spec, const std::string& out_dir) {
    auto res = generate(spec);
    ensure_dir(out_dir);
    write_tensor(path_in(out_dir, files::kTensor), res.tensor);
    for (const auto& net : res.networks) write_network(path_in(out_dir, files::network(net.mode())), net);
    write_checkpoint_file(path_in(out_dir, files::kTruth), Checkpoint{0, spec.seed, res.truth, std::nullopt});
    auto out = io::open_out(path_in(out_dir, files::kSynthSummary));
    out << "shape";
    for (auto n : spec.shape) out << ' ' << n;
    out << "\nnnz " << res.tensor.nnz() << "\nexpected_nnz " << io::format_double(res.expected_nnz) << '\n';
    for (const auto& net : res.networks) out << "network " << net.mode() + 1 << " edges " << net.nnz() << '\n';
    return res;
}

inline std::vector<std::string> load_labels(const std::string& path) {
    std::vector<std::string> labels;
    auto in = io::open_in(path);
    std::string line;
    while (std::getline(in, line)) labels.push_back(trim(line));
    return labels;
}

/// Top-n entities of `mode` for every active factor of the (last) checkpoint.
inline std::string cmd_report(const std::string& checkpoint_path, std::size_t mode, std::size_t n, double tau,
                              const std::vector<std::string>& labels = {}) {
    const auto cks = read_checkpoint_file(checkpoint_path);
    const auto& params = cks.back().params;
    if (mode >= params.order()) throw ConfigError(mode_name(mode) + " does not exist in the checkpoint");
    std::ostringstream os;
    const auto report = rank_report(params.weights.lambda, tau);
    for (const auto& e : report) {
        if (!e.active) continue;
        os << "factor " << e.factor << " lambda " << io::format_double(e.mean_lambda) << '\n';
        for (const auto& t : top_entities(params, mode, e.factor, n)) {
            os << "  " << t.entity;
            if (t.entity < labels.size()) os << ' ' << labels[t.entity];
            os << ' ' << io::format_double(t.score) << '\n';
        }
    }
    return os.str();
}

}  // namespace ztpcp
