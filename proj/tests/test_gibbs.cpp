#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "ztpcp/chain.hpp"
#include "ztpcp/gibbs.hpp"

using namespace ztpcp;

namespace {

Parameters flat_params(const Shape& shape, std::vector<double> lambda) {
    Parameters p;
    const std::size_t R = lambda.size();
    for (auto n : shape) p.factors.emplace_back(n, R, 1.0 / static_cast<double>(n));
    p.weights.lambda = std::move(lambda);
    p.weights.p.assign(R, 0.5);
    return p;
}

SparseBinaryTensor full_tensor(const Shape& shape) {
    SparseBinaryTensor t(shape);
    std::vector<Coord> c(shape.size());
    for (std::uint64_t lin = 0; lin < volume_of(shape); ++lin) {
        delinearize(shape, lin, c);
        t.insert(c);
    }
    return t;
}

}  // namespace

TEST(Conditionals, FactorColumnParameterForm) {
    auto h = Hyperparams::defaults(2, 1);
    h.a = {0.1, 0.1};
    auto s = SuffStats::zeros({3, 1}, 1);
    s.s_mode[0](0, 0) = 2;
    s.s_mode[0](2, 0) = 1;
    EXPECT_EQ(factor_column_posterior(s, h, 0, 0), (std::vector<double>{2.1, 0.1, 1.1}));
    auto zero = SuffStats::zeros({3, 1}, 1);
    EXPECT_EQ(factor_column_posterior(zero, h, 0, 0), (std::vector<double>{0.1, 0.1, 0.1}));
}

TEST(Conditionals, FactorColumnIncludesNetworkCounts) {
    auto h = Hyperparams::defaults(2, 1);
    h.a = {0.1, 0.1};
    std::vector<std::size_t> modes{0};
    auto s = SuffStats::zeros({3, 2}, 1, modes);
    s.s_mode[0](0, 0) = 2;
    s.networks[0].v_node(0, 0) = 1;
    s.networks[0].v_node(1, 0) = 1;
    EXPECT_EQ(factor_column_posterior(s, h, 0, 0), (std::vector<double>{3.1, 1.1, 0.1}));
    EXPECT_EQ(factor_column_posterior(s, h, 1, 0), (std::vector<double>{0.1, 0.1}));
}

TEST(Conditionals, FactorColumnPosteriorMean) {
    auto h = Hyperparams::defaults(2, 1);
    h.a = {0.1, 0.1};
    auto s = SuffStats::zeros({3, 1}, 1);
    s.s_mode[0](0, 0) = 2;
    s.s_mode[0](2, 0) = 1;
    RngHandle rng(31);
    std::vector<double> m(3, 0.0);
    for (int i = 0; i < 100'000; ++i) {
        auto x = sample_factor_column(rng, 0, 0, s, h);
        for (int j = 0; j < 3; ++j) m[j] += x[j];
    }
    EXPECT_NEAR(m[0] / 1e5, 2.1 / 3.3, 0.01);
    EXPECT_NEAR(m[1] / 1e5, 0.1 / 3.3, 0.01);
    EXPECT_NEAR(m[2] / 1e5, 1.1 / 3.3, 0.01);
}

TEST(Conditionals, PrPosterior) {
    auto h = Hyperparams::defaults(2, 1);
    h.c = 1.0;
    h.epsilon = 0.05;
    h.g = {0.1};
    auto s = SuffStats::zeros({2, 2}, 1);
    auto prior = pr_posterior(s, h, 0);
    // With s_r = 0 the NB likelihood (1-p)^g still shifts the second parameter.
    EXPECT_DOUBLE_EQ(prior.a, 0.05);
    EXPECT_DOUBLE_EQ(prior.b, 1.05);
    s.s_total[0] = 7;
    auto post = pr_posterior(s, h, 0);
    EXPECT_DOUBLE_EQ(post.a, 7.05);
    EXPECT_DOUBLE_EQ(post.b, 1.05);
    RngHandle rng(32);
    double m = 0.0;
    for (int i = 0; i < 100'000; ++i) m += sample_pr(rng, 0, s, h);
    EXPECT_NEAR(m / 1e5, 0.8704, 0.01);
}

TEST(Conditionals, LambdaPosterior) {
    auto h = Hyperparams::defaults(2, 1);
    h.g = {0.1};
    auto s = SuffStats::zeros({2, 2}, 1);
    auto prior = lambda_posterior(s, h, 0, 0.5);
    EXPECT_DOUBLE_EQ(prior.shape, 0.1);
    EXPECT_DOUBLE_EQ(prior.scale, 0.5);
    RngHandle rng(33);
    double m = 0.0;
    for (int i = 0; i < 1'000'000; ++i) m += sample_lambda(rng, 0, s, h, 0.5);
    EXPECT_NEAR(m / 1e6, 0.05, 0.05 * 0.05);
    double prev = 0.0;
    for (double sr : {1.0, 10.0, 100.0}) {
        s.s_total[0] = sr;
        const double mean = lambda_posterior(s, h, 0, 0.5).mean();
        EXPECT_GT(mean, prev);
        prev = mean;
    }
    RngHandle a(5), b(5);
    EXPECT_EQ(sample_lambda(a, 0, s, h, 0.3), sample_lambda(b, 0, s, h, 0.3));
}

TEST(Conditionals, NetworkPosteriors) {
    auto h = Hyperparams::defaults(2, 1);
    h.d = 1.0;
    h.alpha = 0.05;
    h.f = {0.1};
    NetworkSuffStats v{0, Matrix(3, 1), {4.0}};
    auto hp = hr_posterior(v, h, 0);
    EXPECT_DOUBLE_EQ(hp.a, 4.05);
    EXPECT_DOUBLE_EQ(hp.b, 1.05);
    auto bp = beta_posterior(v, h, 0, 0.25);
    EXPECT_DOUBLE_EQ(bp.shape, 4.1);
    EXPECT_DOUBLE_EQ(bp.scale, 0.25);
    RngHandle rng(34);
    double m = 0.0;
    for (int i = 0; i < 200'000; ++i) m += sample_beta(rng, 0, v, h, 0.25);
    EXPECT_NEAR(m / 2e5, 4.1 * 0.25, 0.02 * 4.1 * 0.25);
    NetworkSuffStats empty{0, Matrix(3, 1), {0.0}};
    EXPECT_DOUBLE_EQ(hr_posterior(empty, h, 0).a, 0.05);
}

TEST(TensorLatents, EmptyTensorGivesZeroStats) {
    const Shape shape{3, 4, 2};
    auto p = flat_params(shape, {1.0, 2.0});
    SparseBinaryTensor t(shape);
    auto suff = SuffStats::zeros(shape, 2);
    suff.s_total[0] = 9;
    LatentState lat;
    RngHandle rng(35);
    sample_tensor_latents(rng, t, p, lat, suff);
    EXPECT_EQ(suff, SuffStats::zeros(shape, 2));
    EXPECT_TRUE(lat.y.empty());
}

TEST(TensorLatents, SingleFactorTakesEverything) {
    const Shape shape{4, 4};
    auto p = flat_params(shape, {30.0});
    auto t = full_tensor(shape);
    auto suff = SuffStats::zeros(shape, 1);
    LatentState lat;
    RngHandle rng(36);
    sample_tensor_latents(rng, t, p, lat, suff);
    const double total = std::accumulate(lat.y.begin(), lat.y.end(), 0.0);
    EXPECT_EQ(suff.s_total[0], total);
    for (std::size_t i = 0; i < t.nnz(); ++i) EXPECT_GE(lat.y[i], 1u);
    EXPECT_EQ(suff.mode_consistency_error(), 0.0);
}

TEST(TensorLatents, AllocationFollowsWeights) {
    const Shape shape{40, 40};
    auto p = flat_params(shape, {1600.0, 4800.0});
    auto t = full_tensor(shape);
    auto suff = SuffStats::zeros(shape, 2);
    LatentState lat;
    RngHandle rng(37);
    double s0 = 0.0, s1 = 0.0;
    for (int sweep = 0; sweep < 20; ++sweep) {
        sample_tensor_latents(rng, t, p, lat, suff);
        s0 += suff.s_total[0];
        s1 += suff.s_total[1];
    }
    const double n = s0 + s1;
    EXPECT_NEAR(s0 / n, 0.25, 3 * std::sqrt(0.25 * 0.75 / n));
}

TEST(TensorLatents, InvariantsAfterSweep) {
    RngHandle rng(38);
    const Shape shape{6, 5, 4};
    auto h = Hyperparams::defaults(3, 5);
    auto st = init_state(rng, h, shape);
    SparseBinaryTensor t(shape);
    for (int i = 0; i < 40; ++i) t.insert(TensorIndex{Coord(rng.below(6)), Coord(rng.below(5)), Coord(rng.below(4))});
    sample_tensor_latents(rng, t, st.params, st.latent, st.suff);
    EXPECT_LE(st.suff.mode_consistency_error(), 0.0);
    for (auto y : st.latent.y) EXPECT_GE(y, 1u);
    // Cells that are not ones never receive counts.
    for (std::size_t k = 0; k < 3; ++k) {
        for (std::size_t j = 0; j < shape[k]; ++j) {
            bool seen = false;
            for (std::size_t i = 0; i < t.nnz(); ++i) seen |= t.entry(i)[k] == j;
            if (!seen) {
                for (std::size_t r = 0; r < 5; ++r) EXPECT_EQ(st.suff.s_mode[k](j, r), 0.0);
            }
        }
    }
}

TEST(TensorLatents, ZeroRateIsFlooredAndCounted) {
    const Shape shape{2, 2};
    auto p = flat_params(shape, {0.0, 0.0});
    SparseBinaryTensor t(shape);
    t.insert(TensorIndex{0, 1});
    auto suff = SuffStats::zeros(shape, 2);
    LatentState lat;
    RngHandle rng(39);
    auto stats = sample_tensor_latents(rng, t, p, lat, suff);
    EXPECT_EQ(stats.floored, 1u);
    EXPECT_EQ(lat.y[0], 1u);
    EXPECT_EQ(suff.s_total[0] + suff.s_total[1], 1.0);
}

TEST(TensorLatents, EntryOrderDoesNotMatter) {
    RngHandle init(40);
    const Shape shape{8, 7, 6};
    auto st = init_state(init, Hyperparams::defaults(3, 4), shape);
    std::vector<TensorIndex> idx;
    for (int i = 0; i < 60; ++i) idx.push_back({Coord(init.below(8)), Coord(init.below(7)), Coord(init.below(6))});
    auto a = SparseBinaryTensor::from_indices(shape, idx);
    std::reverse(idx.begin(), idx.end());
    std::rotate(idx.begin(), idx.begin() + 17, idx.end());
    auto b = SparseBinaryTensor::from_indices(shape, idx);
    auto sa = SuffStats::zeros(shape, 4), sb = sa;
    LatentState la, lb;
    RngHandle ra(41), rb(41);
    sample_tensor_latents(ra, a, st.params, la, sa);
    sample_tensor_latents(rb, b, st.params, lb, sb);
    EXPECT_EQ(sa, sb);
}

TEST(TensorLatents, ThreadCountDoesNotMatter) {
    RngHandle init(42);
    const Shape shape{10, 9, 8};
    auto st = init_state(init, Hyperparams::defaults(3, 6), shape);
    SparseBinaryTensor t(shape);
    for (int i = 0; i < 200; ++i) t.insert(TensorIndex{Coord(init.below(10)), Coord(init.below(9)), Coord(init.below(8))});
    auto s1 = SuffStats::zeros(shape, 6), s3 = s1;
    LatentState l1, l3;
    RngHandle r1(43), r3(43);
    sample_tensor_latents(r1, t, st.params, l1, s1, {1});
    sample_tensor_latents(r3, t, st.params, l3, s3, {3});
    EXPECT_EQ(s1, s3);
    EXPECT_EQ(l1.y, l3.y);
}

TEST(NetworkLatents, EmptyNetwork) {
    const Shape shape{4, 3};
    auto p = flat_params(shape, {1.0});
    p.networks.push_back({0, {2.0}, {0.5}});
    std::vector<std::size_t> modes{0};
    auto suff = SuffStats::zeros(shape, 1, modes);
    LatentState lat;
    RngHandle rng(44);
    sample_network_latents(rng, ModeNetwork(0, 4), 0, p, lat, suff);
    EXPECT_EQ(suff, SuffStats::zeros(shape, 1, modes));
}

TEST(NetworkLatents, SingleEdgeBookkeeping) {
    const Shape shape{4, 3};
    auto p = flat_params(shape, {1.0});
    p.networks.push_back({0, {5.0}, {0.5}});
    std::vector<std::size_t> modes{0};
    auto suff = SuffStats::zeros(shape, 1, modes);
    LatentState lat;
    ModeNetwork net(0, 4);
    net.insert(1, 0);
    RngHandle rng(45);
    sample_network_latents(rng, net, 0, p, lat, suff);
    const double x = lat.x[0][0];
    EXPECT_GE(x, 1.0);
    const auto& v = suff.networks[0];
    EXPECT_EQ(v.v_node(0, 0), x);
    EXPECT_EQ(v.v_node(1, 0), x);
    EXPECT_EQ(v.v_total[0], x);
    EXPECT_EQ(v.v_node(2, 0) + v.v_node(3, 0), 0.0);
}

TEST(NetworkLatents, SymmetricStateAllocatesUniformly) {
    const Shape shape{30, 2};
    auto p = flat_params(shape, {1.0, 1.0, 1.0});
    p.networks.push_back({0, {300.0, 300.0, 300.0}, {0.5, 0.5, 0.5}});
    std::vector<std::size_t> modes{0};
    auto suff = SuffStats::zeros(shape, 3, modes);
    LatentState lat;
    ModeNetwork net(0, 30);
    for (Coord i = 0; i < 30; ++i)
        for (Coord j = i + 1; j < 30; ++j) net.insert(i, j);
    RngHandle rng(46);
    std::vector<double> tot(3, 0.0);
    for (int sweep = 0; sweep < 10; ++sweep) {
        sample_network_latents(rng, net, 0, p, lat, suff);
        for (int r = 0; r < 3; ++r) tot[r] += suff.networks[0].v_total[r];
    }
    const double n = tot[0] + tot[1] + tot[2];
    for (int r = 0; r < 3; ++r) EXPECT_NEAR(tot[r] / n, 1.0 / 3.0, 3 * std::sqrt((2.0 / 9.0) / n));
}

TEST(Iteration, PreservesInvariants) {
    RngHandle rng(47);
    const Shape shape{6, 5, 4};
    auto h = Hyperparams::defaults(3, 5);
    std::vector<std::size_t> modes{1};
    Dataset data{SparseBinaryTensor(shape), {ModeNetwork(1, 5)}};
    for (int i = 0; i < 30; ++i) data.tensor.insert(TensorIndex{Coord(rng.below(6)), Coord(rng.below(5)), Coord(rng.below(4))});
    data.networks[0].insert(0, 3);
    data.networks[0].insert(2, 4);
    auto st = init_state(rng, h, shape, modes);
    for (int it = 0; it < 20; ++it) {
        gibbs_iteration(rng, data, st);
        EXPECT_EQ(st.suff.mode_consistency_error(), 0.0);
        for (const auto& u : st.params.factors) {
            for (std::size_t r = 0; r < 5; ++r) EXPECT_NEAR(u.column_sum(r), 1.0, 1e-9);
        }
        for (std::size_t r = 0; r < 5; ++r) {
            EXPECT_GT(st.params.weights.lambda[r], 0.0);
            EXPECT_GT(st.params.weights.p[r], 0.0);
            EXPECT_LT(st.params.weights.p[r], 1.0);
            EXPECT_GT(st.params.networks[0].beta[r], 0.0);
        }
        for (auto y : st.latent.y) EXPECT_GE(y, 1u);
        for (auto x : st.latent.x[0]) EXPECT_GE(x, 1u);
        double vsum = 0.0;
        for (std::size_t r = 0; r < 5; ++r) vsum += st.suff.networks[0].v_total[r];
        double xsum = std::accumulate(st.latent.x[0].begin(), st.latent.x[0].end(), 0.0);
        EXPECT_EQ(vsum, xsum);
    }
    EXPECT_EQ(st.iteration, 20u);
}

TEST(Iteration, AllZeroDataGivesClosedFormPosterior) {
    RngHandle rng(48);
    const Shape shape{4, 3};
    auto h = Hyperparams::defaults(2, 2);
    h.c = 1.0;
    h.d = 1.0;
    h.epsilon = 0.3;
    h.alpha = 0.6;
    std::vector<std::size_t> modes{0};
    Dataset data{SparseBinaryTensor(shape), {ModeNetwork(0, 4)}};
    auto st = init_state(rng, h, shape, modes);
    const int iters = 20'000;
    double p = 0.0, hh = 0.0, u = 0.0;
    for (int it = 0; it < iters; ++it) {
        gibbs_iteration(rng, data, st);
        p += st.params.weights.p[0];
        hh += st.params.networks[0].h[1];
        u += st.params.factors[1](2, 0);
    }
    // All counts stay zero, so every draw is independent: p ~ Beta(0.3, 0.8),
    // h ~ Beta(0.6, 0.5), and factor columns keep their Dir(1,1,1) prior.
    EXPECT_NEAR(p / iters, 0.3 / 1.1, 4 * 0.31 / std::sqrt(iters));
    EXPECT_NEAR(hh / iters, 0.6 / 1.1, 4 * 0.34 / std::sqrt(iters));
    EXPECT_NEAR(u / iters, 1.0 / 3.0, 4 * 0.24 / std::sqrt(iters));
}

TEST(Iteration, DeterministicUnderSeed) {
    const Shape shape{5, 4, 3};
    Dataset data{SparseBinaryTensor(shape), {}};
    RngHandle g(49);
    for (int i = 0; i < 25; ++i) data.tensor.insert(TensorIndex{Coord(g.below(5)), Coord(g.below(4)), Coord(g.below(3))});
    auto h = Hyperparams::defaults(3, 3);
    ChainConfig cfg;
    cfg.iters = 30;
    cfg.burnin = 10;
    auto a = run_chain(RngHandle(9), data, h, cfg);
    auto b = run_chain(RngHandle(9), data, h, cfg);
    EXPECT_EQ(a.mean, b.mean);
    EXPECT_EQ(a.final_state.params, b.final_state.params);
}

TEST(Chain, SamplesAndMeans) {
    const Shape shape{5, 4};
    Dataset data{SparseBinaryTensor(shape), {}};
    data.tensor.insert(TensorIndex{1, 2});
    data.tensor.insert(TensorIndex{3, 0});
    auto h = Hyperparams::defaults(2, 3);
    ChainConfig cfg;
    cfg.iters = 25;
    cfg.burnin = 5;
    cfg.thin = 3;
    std::size_t records = 0;
    cfg.progress = [&](const ProgressRecord&) { ++records; };
    auto out = run_chain(RngHandle(3), data, h, cfg);
    EXPECT_EQ(records, 25u);
    EXPECT_EQ(out.mean_count, 20u);
    EXPECT_EQ(out.samples.size(), 7u);
    std::vector<double> mean(3, 0.0);
    // The running mean equals the plain average of the kept samples when thin = 1.
    cfg.thin = 1;
    auto full = run_chain(RngHandle(3), data, h, cfg);
    for (const auto& s : full.samples)
        for (std::size_t r = 0; r < 3; ++r) mean[r] += s.weights.lambda[r] / full.samples.size();
    for (std::size_t r = 0; r < 3; ++r) EXPECT_NEAR(full.mean.weights.lambda[r], mean[r], 1e-9 * (1 + mean[r]));
}

TEST(Chain, ItersMustExceedBurnin) {
    Dataset data{SparseBinaryTensor({2, 2}), {}};
    ChainConfig cfg;
    cfg.iters = 10;
    cfg.burnin = 10;
    EXPECT_THROW(run_chain(RngHandle(1), data, Hyperparams::defaults(2, 2), cfg), ConfigError);
}

TEST(Chain, NetworkSizeMustMatchMode) {
    Dataset data{SparseBinaryTensor({3, 2}), {ModeNetwork(0, 4)}};
    ChainConfig cfg;
    cfg.iters = 2;
    cfg.burnin = 1;
    EXPECT_THROW(run_chain(RngHandle(1), data, Hyperparams::defaults(2, 2), cfg), ConfigError);
}
