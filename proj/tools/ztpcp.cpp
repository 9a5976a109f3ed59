// Command-line front end: fit, predict, eval, synth, report.

#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ztpcp/commands.hpp"

namespace {

int run(int argc, char** argv) {
    CLI::App app{"Bayesian CP factorization of sparse binary tensors (zero-truncated Poisson)"};
    app.require_subcommand(1);

    // fit: every config key is also a flag that overrides the config file.
    auto* fit = app.add_subcommand("fit", "run a batch or online chain");
    std::string config_path;
    fit->add_option("--config", config_path, "key = value config file");
    std::map<std::string, std::vector<std::string>> flag_values;
    for (const auto& key : ztpcp::run_config_keys()) {
        auto* opt = fit->add_option("--" + key, flag_values[key]);
        if (key != "network") opt->expected(1);
    }
    bool verbose = false;
    fit->add_flag("-v,--verbose", verbose, "echo the effective config and rank report");

    auto* predict = app.add_subcommand("predict", "predict held-out probabilities");
    std::string ck_path, test_path, out_dir = "out";
    predict->add_option("--checkpoint", ck_path, "checkpoint or samples file")->required();
    predict->add_option("--test", test_path, "test file (coords + label)")->required();
    predict->add_option("--out", out_dir, "output directory");

    auto* eval = app.add_subcommand("eval", "AUC-ROC, AUC-PR and log-loss");
    std::string preds_path;
    eval->add_option("--predictions", preds_path, "predictions file");
    eval->add_option("--checkpoint", ck_path, "checkpoint or samples file (with --test)");
    eval->add_option("--test", test_path, "test file (with --checkpoint)");
    eval->add_option("--out", out_dir, "output directory");

    auto* synth = app.add_subcommand("synth", "simulate a tensor and mode networks");
    std::string spec_path;
    synth->add_option("--spec", spec_path, "key = value synthetic spec")->required();
    synth->add_option("--out", out_dir, "output directory");

    auto* report = app.add_subcommand("report", "top entities per active factor");
    std::size_t mode = 1, top_n = 10;
    double tau = 1e-3;
    std::string labels_path;
    report->add_option("--checkpoint", ck_path, "checkpoint file")->required();
    report->add_option("--mode", mode, "mode number (1-based)");
    report->add_option("--n", top_n, "entities per factor");
    report->add_option("--tau", tau, "relative activity threshold");
    report->add_option("--labels", labels_path, "entity names, one per line");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (*fit) {
            ztpcp::KeyValues file_kv;
            if (!config_path.empty()) file_kv = ztpcp::load_key_values(config_path);
            ztpcp::KeyValues cli_kv;
            for (auto& [k, v] : flag_values) {
                if (!v.empty()) cli_kv[k] = v;
            }
            const auto config = ztpcp::RunConfig::from_key_values(ztpcp::merge(file_kv, cli_kv));
            const auto res = ztpcp::cmd_fit(config);
            if (verbose) {
                std::cout << config.to_text() << ztpcp::format_rank_report(ztpcp::rank_report(res.chain, config.prune_tau));
            }
            std::cout << "fit: " << res.data.tensor.nnz() << " training ones, "
                      << ztpcp::active_count(ztpcp::rank_report(res.chain, config.prune_tau)) << " active factors, output in "
                      << config.out << '\n';
            if (res.metrics) std::cout << ztpcp::format_metrics_table(*res.metrics);
        } else if (*predict) {
            const auto preds = ztpcp::cmd_predict(ck_path, test_path, out_dir);
            std::cout << "predict: " << preds.size() << " predictions written to "
                      << ztpcp::path_in(out_dir, ztpcp::files::kPredictions) << '\n';
        } else if (*eval) {
            ztpcp::Metrics m;
            if (!preds_path.empty()) {
                m = ztpcp::cmd_eval(preds_path, out_dir);
            } else if (!ck_path.empty() && !test_path.empty()) {
                m = ztpcp::cmd_eval(ztpcp::cmd_predict(ck_path, test_path, out_dir), out_dir);
            } else {
                throw ztpcp::ConfigError("eval needs --predictions, or --checkpoint with --test");
            }
            std::cout << ztpcp::format_metrics_table(m);
        } else if (*synth) {
            const auto spec = ztpcp::synth_spec_from_key_values(ztpcp::load_key_values(spec_path));
            const auto res = ztpcp::cmd_synth(spec, out_dir);
            std::cout << "synth: " << res.tensor.nnz() << " ones (expected " << res.expected_nnz << ")";
            for (const auto& net : res.networks) std::cout << ", mode " << net.mode() + 1 << " network " << net.nnz() << " edges";
            std::cout << '\n';
        } else if (*report) {
            if (mode == 0) throw ztpcp::ConfigError("modes are numbered from 1");
            std::vector<std::string> labels;
            if (!labels_path.empty()) labels = ztpcp::load_labels(labels_path);
            std::cout << ztpcp::cmd_report(ck_path, mode - 1, top_n, tau, labels);
        }
    } catch (const ztpcp::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return ztpcp::exit_code_for(e);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) { return run(argc, argv); }
