// Acceptance suite: one PASS/FAIL line per criterion. With no arguments every
// criterion runs; otherwise only the listed numbers (e.g. `acceptance 4 9`).
// Criterion 8 needs external data and reports SKIP when it is absent.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "ztpcp/ztpcp.hpp"

using namespace ztpcp;

namespace {

enum class Status { Pass, Fail, Skip };

struct Outcome {
    Status status = Status::Fail;
    std::string detail;
};

Outcome pass_if(bool ok, std::string detail) { return {ok ? Status::Pass : Status::Fail, std::move(detail)}; }

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double x, int prec = 4) {
    std::ostringstream os;
    os.precision(prec);
    os << x;
    return os.str();
}

// Mean and batch-means standard error of a chain of draws.
std::pair<double, double> batch_means(const std::vector<double>& xs, std::size_t batches) {
    const std::size_t len = xs.size() / batches;
    std::vector<double> means(batches, 0.0);
    for (std::size_t b = 0; b < batches; ++b) {
        for (std::size_t i = 0; i < len; ++i) means[b] += xs[b * len + i];
        means[b] /= static_cast<double>(len);
    }
    const double m = std::accumulate(means.begin(), means.end(), 0.0) / static_cast<double>(batches);
    double v = 0.0;
    for (double x : means) v += (x - m) * (x - m);
    v /= static_cast<double>(batches - 1);
    return {m, std::sqrt(v / static_cast<double>(batches))};
}

std::pair<double, double> iid_mean(const std::vector<double>& xs) {
    const double n = static_cast<double>(xs.size());
    const double m = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
    double v = 0.0;
    for (double x : xs) v += (x - m) * (x - m);
    return {m, std::sqrt(v / (n - 1) / n)};
}

// ---------------------------------------------------------------------------

Outcome criterion_1() {
    const auto t0 = std::chrono::steady_clock::now();
    RngHandle rng(101);
    std::ostringstream detail;
    bool ok = true;
    for (double rate : {0.1, 1.0, 5.0, 10.0}) {
        double sum = 0.0;
        std::uint64_t zeros = 0;
        for (int i = 0; i < 1'000'000; ++i) {
            const auto y = ztp_sample(rng, rate);
            zeros += y == 0;
            sum += static_cast<double>(y);
        }
        const double expect = rate / (1.0 - std::exp(-rate));
        const double rel = std::fabs(sum / 1e6 - expect) / expect;
        ok &= rel < 0.01 && zeros == 0;
        detail << "rate " << rate << " rel.err " << fmt(rel, 2) << " zeros " << zeros << "; ";
    }
    const double secs = seconds_since(t0);
    ok &= secs < 10.0;
    detail << fmt(secs, 3) << " s";
    return pass_if(ok, detail.str());
}

Outcome criterion_2() {
    RngHandle rng(202);
    std::ostringstream detail;
    bool ok = true;
    const int n = 1'000'000;
    for (double rate : {0.1, 1.0, 3.0}) {
        int hits = 0;
        for (int i = 0; i < n; ++i) hits += poisson_sample(rng, rate) >= 1;
        const double p = bernoulli_prob(rate);
        const double se = std::sqrt(p * (1 - p) / n);
        const double z = (static_cast<double>(hits) / n - p) / se;
        ok &= std::fabs(z) <= 3.0;
        detail << "rate " << rate << " z " << fmt(z, 3) << "; ";
    }
    return pass_if(ok, detail.str());
}

// Hand-fixed allocations on a 2x2x2 tensor; dyadic hyperparameters keep the
// hand-computed parameters exactly representable.
Outcome criterion_3() {
    const Shape shape{2, 2, 2};
    SparseBinaryTensor t(shape);
    t.insert(TensorIndex{0, 0, 0});
    t.insert(TensorIndex{1, 1, 0});
    t.insert(TensorIndex{0, 1, 1});
    Matrix alloc(3, 2);
    alloc(0, 0) = 2;
    alloc(0, 1) = 1;
    alloc(1, 1) = 3;
    alloc(2, 0) = 1;
    Hyperparams h = Hyperparams::defaults(3, 2);
    h.a = {0.5, 0.5, 0.5};
    h.c = 2.0;
    h.epsilon = 0.25;
    h.g = {0.25, 0.75};
    const auto suff = accumulate_allocations(t, alloc);

    // Hand computation: s_total = (3, 4); per-mode rows listed per factor.
    const std::vector<std::vector<std::vector<double>>> dir_expect{
        {{3.5, 0.5}, {1.5, 3.5}},
        {{2.5, 1.5}, {1.5, 3.5}},
        {{2.5, 1.5}, {4.5, 0.5}},
    };
    const std::vector<BetaParams> p_expect{{3.5, 1.75}, {4.5, 2.25}};
    const std::vector<double> p_fixed{0.375, 0.625};
    const std::vector<GammaParams> l_expect{{3.25, 0.375}, {4.75, 0.625}};

    bool ok = true;
    for (std::size_t k = 0; k < 3; ++k)
        for (std::size_t r = 0; r < 2; ++r) ok &= factor_column_posterior(suff, h, k, r) == dir_expect[k][r];
    for (std::size_t r = 0; r < 2; ++r) {
        ok &= pr_posterior(suff, h, r) == p_expect[r];
        ok &= lambda_posterior(suff, h, r, p_fixed[r]) == l_expect[r];
    }

    // The full parameter sweep must draw from exactly these distributions:
    // replaying the same stream through the hand parameters gives the same draws.
    RngHandle init(303);
    auto st = init_state(init, h, shape);
    Parameters swept = st.params;
    RngHandle a(404), b(404);
    sample_parameters(a, suff, h, swept);
    bool same_draws = true;
    for (std::size_t k = 0; k < 3; ++k) {
        for (std::size_t r = 0; r < 2; ++r) {
            const auto col = dirichlet_sample(b, dir_expect[k][r]);
            same_draws &= swept.factors[k].column(r) == col;
        }
    }
    for (std::size_t r = 0; r < 2; ++r) {
        const double p = beta_sample(b, p_expect[r]);
        const double lambda = gamma_sample(b, GammaParams{l_expect[r].shape, p});
        same_draws &= swept.weights.p[r] == p && swept.weights.lambda[r] == lambda;
    }
    return pass_if(ok && same_draws, std::string("parameters ") + (ok ? "equal" : "differ") + ", sweep draws " +
                                         (same_draws ? "match" : "differ"));
}

// Geweke joint-distribution test. Finite lambda moments need c(1 - eps) > 2.
Outcome criterion_4() {
    const auto t0 = std::chrono::steady_clock::now();
    const Shape shape{2, 2, 2};
    Hyperparams h = Hyperparams::defaults(3, 2);
    h.c = 10.0;
    h.epsilon = 0.3;
    h.g = {2.0, 2.0};
    const std::size_t rounds = 50'000;

    std::vector<double> f_l0, f_l1, f_u;
    RngHandle fwd(505);
    for (std::size_t i = 0; i < rounds; ++i) {
        auto st = init_state(fwd, h, shape);
        f_l0.push_back(st.params.weights.lambda[0]);
        f_l1.push_back(st.params.weights.lambda[1]);
        f_u.push_back(st.params.factors[0](0, 0));
    }

    std::vector<double> g_l0, g_l1, g_u;
    RngHandle rng(606);
    auto st = init_state(rng, h, shape);
    Dataset data{simulate_tensor(rng(), shape, st.params), {}};
    for (std::size_t i = 0; i < rounds; ++i) {
        gibbs_iteration(rng, data, st);
        data.tensor = simulate_tensor(rng(), shape, st.params);
        g_l0.push_back(st.params.weights.lambda[0]);
        g_l1.push_back(st.params.weights.lambda[1]);
        g_u.push_back(st.params.factors[0](0, 0));
    }

    std::ostringstream detail;
    bool ok = true;
    auto compare = [&](const char* name, const std::vector<double>& f, const std::vector<double>& g) {
        const auto [fm, fse] = iid_mean(f);
        const auto [gm, gse] = batch_means(g, 50);
        const double z = (fm - gm) / std::sqrt(fse * fse + gse * gse);
        ok &= std::fabs(z) <= 3.0;
        detail << name << " fwd " << fmt(fm) << " gibbs " << fmt(gm) << " z " << fmt(z, 3) << "; ";
    };
    compare("lambda1", f_l0, g_l0);
    compare("lambda2", f_l1, g_l1);
    compare("u1[1,1]", f_u, g_u);
    const double secs = seconds_since(t0);
    ok &= secs < 300.0;
    detail << fmt(secs, 3) << " s";
    return pass_if(ok, detail.str());
}

// ---------------------------------------------------------------------------
// Synthetic recovery data shared by criteria 5 and 6.

struct Prepared {
    Dataset data;
    std::vector<TestEntry> test;
};

Prepared recovery_data(std::uint64_t seed) {
    auto spec = SynthSpec::with_defaults({50, 50, 20}, 3, seed);
    spec.hyper.a.assign(3, 0.2);
    spec.lambda = std::vector<double>{1500.0, 1000.0, 700.0};
    auto truth = generate(spec);
    auto split = split_holdout(truth.tensor, SplitSpec::random_entry(0.1, seed), 1.0);
    return {{std::move(split.train), {}}, std::move(split.test)};
}

ChainConfig standard_chain() {
    ChainConfig cfg;
    cfg.iters = 1000;
    cfg.burnin = 500;
    return cfg;
}

struct FitSummary {
    double auc = 0.0;
    std::size_t active = 0;
    double secs = 0.0;
};

FitSummary batch_fit(const Prepared& p, std::size_t rank, std::uint64_t seed) {
    const auto t0 = std::chrono::steady_clock::now();
    auto chain = run_chain(RngHandle(seed), p.data, Hyperparams::defaults(p.data.tensor.order(), rank), standard_chain());
    FitSummary s;
    s.auc = auc_roc(predict(chain, p.test));
    s.active = active_count(rank_report(chain));
    s.secs = seconds_since(t0);
    return s;
}

FitSummary online_fit(const Prepared& p, std::size_t rank, std::uint64_t seed, double decay) {
    const auto t0 = std::chrono::steady_clock::now();
    auto spec = MinibatchSpec::from_fraction(p.data, 0.1);
    spec.reweight = true;
    spec.decay = decay;
    auto chain = run_online_chain(RngHandle(seed), p.data, Hyperparams::defaults(p.data.tensor.order(), rank), spec,
                                  standard_chain());
    FitSummary s;
    s.auc = auc_roc(predict(chain, p.test));
    s.active = active_count(rank_report(chain));
    s.secs = seconds_since(t0);
    return s;
}

std::optional<FitSummary> seed1_batch;

Outcome criterion_5() {
    std::ostringstream detail;
    std::size_t rank_hits = 0;
    bool auc_ok = true;
    bool time_ok = true;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const auto p = recovery_data(seed);
        const auto fit = batch_fit(p, 10, seed);
        if (seed == 1) seed1_batch = fit;
        rank_hits += fit.active == 3;
        auc_ok &= fit.auc >= 0.90;
        time_ok &= fit.secs < 300.0;
        detail << "seed " << seed << " auc " << fmt(fit.auc) << " active " << fit.active << " (" << fmt(fit.secs, 2)
               << " s); ";
    }
    detail << "rank 3 in " << rank_hits << "/10";
    return pass_if(auc_ok && time_ok && rank_hits >= 8, detail.str());
}

Outcome criterion_6() {
    const auto p = recovery_data(1);
    if (!seed1_batch) seed1_batch = batch_fit(p, 10, 1);
    // Without decay the re-added minibatch statistics grow geometrically; the
    // undecayed run is reported for reference only.
    const auto online = online_fit(p, 10, 1, 0.1);
    const auto undecayed = online_fit(p, 10, 1, 1.0);
    const double gap = std::fabs(online.auc - seed1_batch->auc);
    return pass_if(gap <= 0.02, "batch auc " + fmt(seed1_batch->auc) + " online auc (decay 0.1) " + fmt(online.auc) +
                                    " gap " + fmt(gap, 3) + " (" + fmt(online.secs, 2) + " s); decay 1 auc " +
                                    fmt(undecayed.auc));
}

// Cold start: the last 30% of mode-1 entities lose every tensor entry. The
// truth parameters, with and without the cold rows blanked, bound the gain.
Outcome criterion_7() {
    constexpr std::size_t rank = 5;
    auto spec = SynthSpec::with_defaults({50, 50, 20}, rank, 707);
    spec.hyper.a.assign(3, 0.1);
    spec.lambda = std::vector<double>(rank, 1000.0);
    spec.beta = std::vector<double>(rank, 1000.0);
    spec.network_modes = {0};
    auto truth = generate(spec);
    auto split = split_holdout(truth.tensor, SplitSpec::cold_start(0, 35, 50, 707), 1.0);

    std::vector<Parameters> oracle{truth.truth};
    std::vector<Parameters> blind{truth.truth};
    for (std::size_t i = 35; i < 50; ++i)
        for (std::size_t r = 0; r < rank; ++r) blind[0].factors[0](i, r) = 1.0 / 50.0;
    const double auc_oracle = auc_roc(predict(std::span<const Parameters>(oracle), split.test));
    const double auc_blind = auc_roc(predict(std::span<const Parameters>(blind), split.test));

    Dataset without{split.train, {}};
    Dataset with{split.train, {truth.networks[0]}};
    const auto hyper = Hyperparams::defaults(3, 10);
    auto a = run_chain(RngHandle(77), without, hyper, standard_chain());
    auto b = run_chain(RngHandle(77), with, hyper, standard_chain());
    const double auc_without = auc_roc(predict(a, split.test));
    const double auc_with = auc_roc(predict(b, split.test));
    return pass_if(auc_with - auc_without >= 0.05,
                   "without network " + fmt(auc_without) + " with network " + fmt(auc_with) + " gain " +
                       fmt(auc_with - auc_without, 3) + "; truth " + fmt(auc_oracle) + " truth with cold rows blanked " +
                       fmt(auc_blind) + " (" + std::to_string(split.test.size()) + " test entries, " +
                       std::to_string(truth.networks[0].nnz()) + " edges)");
}

// Kinship / UMLS when their tensor files are supplied through the environment.
Outcome criterion_8() {
    struct Bench {
        const char* name;
        const char* env;
        Shape shape;
        double threshold;
        double published;
    };
    const std::vector<Bench> benches{{"Kinship", "ZTPCP_KINSHIP_TENSOR", {104, 104, 26}, 0.95, 0.9674},
                                     {"UMLS", "ZTPCP_UMLS_TENSOR", {135, 135, 49}, 0.98, 0.9938}};
    std::ostringstream detail;
    bool any = false;
    bool ok = true;
    for (const auto& b : benches) {
        const char* path = std::getenv(b.env);
        if (!path || !std::filesystem::exists(path)) {
            detail << b.name << " not supplied (" << b.env << "); ";
            continue;
        }
        any = true;
        const auto t0 = std::chrono::steady_clock::now();
        const auto full = load_tensor(path, b.shape);
        auto split = split_holdout(full, SplitSpec::random_entry(0.1, 1), 1.0);
        Dataset data{std::move(split.train), {}};
        auto chain = run_chain(RngHandle(1), data, Hyperparams::defaults(3, 20), standard_chain());
        const double auc = auc_roc(predict(chain, split.test));
        const double secs = seconds_since(t0);
        ok &= auc >= b.threshold && secs < 1800.0;
        detail << b.name << " auc " << fmt(auc) << " (published " << b.published << ", need >= " << b.threshold << ", "
               << fmt(secs, 3) << " s); ";
    }
    if (!any) return {Status::Skip, detail.str() + "no benchmark tensors supplied"};
    return pass_if(ok, detail.str());
}

// Median per-iteration time of the batch sweep.
double time_per_iteration(const Shape& shape, std::size_t nnz, std::size_t rank, std::uint64_t seed) {
    RngHandle g(seed);
    Dataset data{SparseBinaryTensor(shape), {}};
    std::vector<Coord> c(shape.size());
    while (data.tensor.nnz() < nnz) {
        for (std::size_t k = 0; k < shape.size(); ++k) c[k] = static_cast<Coord>(g.below(shape[k]));
        data.tensor.insert(c);
    }
    auto st = init_state(g, Hyperparams::defaults(shape.size(), rank), shape);
    for (int i = 0; i < 5; ++i) gibbs_iteration(g, data, st);
    std::vector<double> times;
    for (int i = 0; i < 15; ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        gibbs_iteration(g, data, st);
        times.push_back(seconds_since(t0));
    }
    std::nth_element(times.begin(), times.begin() + 7, times.end());
    return times[7];
}

Outcome criterion_9() {
    const Shape shape{100, 100, 100};
    std::ostringstream detail;
    bool ok = true;
    auto check = [&](const char* what, const std::vector<double>& t) {
        detail << what << " ms";
        for (double x : t) detail << ' ' << fmt(1e3 * x, 3);
        for (std::size_t i = 1; i < t.size(); ++i) {
            const double ratio = t[i] / t[i - 1];
            ok &= ratio <= 2.5;
            detail << (i == 1 ? " ratios " : " ") << fmt(ratio, 3);
        }
        detail << "; ";
    };
    std::vector<double> by_nnz;
    for (std::size_t nnz : {10'000u, 20'000u, 40'000u}) by_nnz.push_back(time_per_iteration(shape, nnz, 20, 9));
    check("nnz 1e4/2e4/4e4 at R=20:", by_nnz);
    std::vector<double> by_rank;
    for (std::size_t r : {10u, 20u, 40u}) by_rank.push_back(time_per_iteration(shape, 20'000, r, 9));
    check("R 10/20/40 at nnz=2e4:", by_rank);
    return pass_if(ok, detail.str());
}

// Two single-threaded CLI runs with one config must write identical bytes.
Outcome criterion_10() {
    const auto root = std::filesystem::temp_directory_path() / "ztpcp_acceptance_10";
    std::filesystem::remove_all(root);
    std::filesystem::create_directories(root);
    auto spec = SynthSpec::with_defaults({30, 25, 10}, 3, 1010);
    spec.hyper.a.assign(3, 0.3);
    spec.lambda = std::vector<double>{300.0, 200.0, 100.0};
    spec.beta = std::vector<double>{200.0, 200.0, 200.0};
    spec.network_modes = {0};
    cmd_synth(spec, root.string());

    const auto cfg_path = (root / "run.cfg").string();
    {
        std::ofstream cfg(cfg_path);
        cfg << "tensor = " << (root / files::kTensor).string() << "\nshape = 30,25,10\nnetwork = 1:"
            << (root / files::network(0)).string()
            << "\nrank = 6\niters = 200\nburnin = 100\nseed = 42\nholdout = random:0.1\nthreads = 1\n";
    }
    std::vector<std::string> outs;
    for (const char* run : {"run_a", "run_b"}) {
        const auto out = (root / run).string();
        const std::string cmd = std::string(ZTPCP_CLI_PATH) + " fit --config " + cfg_path + " --out " + out + " > /dev/null 2>&1";
        if (std::system(cmd.c_str()) != 0) return {Status::Fail, "fit command failed"};
        outs.push_back(out);
    }
    auto slurp = [](const std::filesystem::path& p) {
        std::ifstream in(p, std::ios::binary);
        return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    };
    bool ok = true;
    std::ostringstream detail;
    for (const char* f : {files::kCheckpoint, files::kMeanCheckpoint, files::kSamples, files::kMetrics,
                          files::kPredictions}) {
        const auto a = slurp(std::filesystem::path(outs[0]) / f);
        const auto b = slurp(std::filesystem::path(outs[1]) / f);
        const bool same = !a.empty() && a == b;
        ok &= same;
        detail << f << (same ? " identical" : " DIFFERS") << "; ";
    }
    return pass_if(ok, detail.str());
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
        {"sampler correctness", criterion_1},
        {"likelihood augmentation equivalence", criterion_2},
        {"conjugacy oracle", criterion_3},
        {"Geweke joint test", criterion_4},
        {"synthetic recovery", criterion_5},
        {"online close to batch", criterion_6},
        {"cold-start benefit", criterion_7},
        {"benchmark AUC", criterion_8},
        {"scaling law", criterion_9},
        {"determinism", criterion_10},
    };
    std::set<int> selected;
    for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i) + 1;
        if (!selected.empty() && !selected.contains(id)) continue;
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {Status::Fail, std::string("exception: ") + e.what()};
        }
        const char* tag = o.status == Status::Pass ? "PASS" : o.status == Status::Skip ? "SKIP" : "FAIL";
        failures += o.status == Status::Fail;
        std::cout << "criterion " << id << " " << tag << " " << criteria[i].first << ": " << o.detail << std::endl;
    }
    return failures == 0 ? 0 : 1;
}
