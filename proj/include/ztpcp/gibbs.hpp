#pragma once

// Batch Gibbs sampler. Every sweep touches only the ones of the tensor and
// the edges of the mode networks: zero cells force y = 0 and add nothing to
// any sufficient statistic.
//
// Latent sweeps give each entry its own RNG stream keyed by (sweep key,
// linear cell index), so results do not depend on entry order or on how the
// entries are sharded across threads.

#include <algorithm>
#include <cstdint>
#include <span>
#include <thread>
#include <vector>

#include "ztpcp/model.hpp"
#include "ztpcp/rng.hpp"
#include "ztpcp/samplers.hpp"
#include "ztpcp/tensor.hpp"

namespace ztpcp {

/// Rates that underflow to zero at an observed one are floored here before
/// the zero-truncated draw (which then returns 1 with probability -> 1).
inline constexpr double kRateFloor = 1e-300;

struct SamplerOptions {
    std::size_t threads = 1;
};

struct SweepStats {
    std::size_t floored = 0;  // one-entries or edges whose rate hit kRateFloor

    SweepStats& operator+=(const SweepStats& o) {
        floored += o.floored;
        return *this;
    }
};

// ---------------------------------------------------------------------------
// Conjugate conditionals. Kept separate from the draws so the batch and online
// samplers share one definition and tests can compare parameters directly.

/// Dirichlet parameters for column r of mode k: a_k + s_{j,r} (+ v_{j,r} for
/// every network attached to mode k).
inline std::vector<double> factor_column_posterior(const SuffStats& suff, const Hyperparams& hyper, std::size_t k,
                                                   std::size_t r) {
    const auto& s = suff.s_mode.at(k);
    std::vector<double> alphas(s.rows());
    for (std::size_t j = 0; j < s.rows(); ++j) alphas[j] = hyper.a[k] + s(j, r);
    for (const auto& net : suff.networks) {
        if (net.mode != k) continue;
        for (std::size_t j = 0; j < s.rows(); ++j) alphas[j] += net.v_node(j, r);
    }
    return alphas;
}

inline BetaParams pr_posterior(const SuffStats& suff, const Hyperparams& hyper, std::size_t r) {
    return {hyper.c * hyper.epsilon + suff.s_total[r], hyper.c * (1.0 - hyper.epsilon) + hyper.g[r]};
}

inline GammaParams lambda_posterior(const SuffStats& suff, const Hyperparams& hyper, std::size_t r, double p_r) {
    return {hyper.g[r] + suff.s_total[r], p_r};
}

inline BetaParams hr_posterior(const NetworkSuffStats& v, const Hyperparams& hyper, std::size_t r) {
    return {hyper.d * hyper.alpha + v.v_total[r], hyper.d * (1.0 - hyper.alpha) + hyper.f[r]};
}

inline GammaParams beta_posterior(const NetworkSuffStats& v, const Hyperparams& hyper, std::size_t r, double h_r) {
    return {hyper.f[r] + v.v_total[r], h_r};
}

inline std::vector<double> sample_factor_column(RngHandle& rng, std::size_t k, std::size_t r, const SuffStats& suff,
                                                const Hyperparams& hyper) {
    const auto alphas = factor_column_posterior(suff, hyper, k, r);
    return dirichlet_sample(rng, alphas);
}

inline double sample_pr(RngHandle& rng, std::size_t r, const SuffStats& suff, const Hyperparams& hyper) {
    return beta_sample(rng, pr_posterior(suff, hyper, r));
}

inline double sample_lambda(RngHandle& rng, std::size_t r, const SuffStats& suff, const Hyperparams& hyper, double p_r) {
    return gamma_sample(rng, lambda_posterior(suff, hyper, r, p_r));
}

inline double sample_hr(RngHandle& rng, std::size_t r, const NetworkSuffStats& v, const Hyperparams& hyper) {
    return beta_sample(rng, hr_posterior(v, hyper, r));
}

inline double sample_beta(RngHandle& rng, std::size_t r, const NetworkSuffStats& v, const Hyperparams& hyper,
                          double h_r) {
    return gamma_sample(rng, beta_posterior(v, hyper, r, h_r));
}

// ---------------------------------------------------------------------------
// Latent counts.

namespace detail {

// Draws y ~ ZTP(rate) and its allocation over components for one one-entry.
// `weights` holds the per-component rates; `alloc` receives the counts.
inline std::uint32_t draw_allocation(RngHandle& rng, std::span<const double> weights, double total,
                                     std::span<std::uint32_t> alloc, bool& floored) {
    floored = total < kRateFloor;
    const auto y = static_cast<std::uint32_t>(ztp_sample(rng, std::max(total, kRateFloor)));
    if (total > 0.0) {
        multinomial_weights_into<std::uint32_t>(rng, y, weights, total, alloc);
    } else {
        // Every component rate is exactly zero: no preferred component.
        std::fill(alloc.begin(), alloc.end(), 0u);
        for (std::uint32_t t = 0; t < y; ++t) alloc[rng.below(alloc.size())] += 1;
    }
    return y;
}

template <typename Fn>
void parallel_chunks(std::size_t n, std::size_t threads, Fn&& fn) {
    threads = std::max<std::size_t>(1, std::min(threads, n));
    if (threads == 1) {
        fn(std::size_t{0}, std::size_t{0}, n);
        return;
    }
    std::vector<std::thread> pool;
    const std::size_t chunk = (n + threads - 1) / threads;
    for (std::size_t t = 0; t < threads; ++t) {
        const std::size_t lo = t * chunk;
        const std::size_t hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([&fn, t, lo, hi] { fn(t, lo, hi); });
    }
    for (auto& th : pool) th.join();
}

// Sweeps the given tensor entries, adding allocations into suff.s_mode and
// suff.s_total (which must be sized but need not be zero). Entries outside
// `subset` are untouched; an empty subset pointer means all entries.
inline SweepStats tensor_sweep(std::uint64_t key, const SparseBinaryTensor& tensor, const Parameters& params,
                               const std::vector<std::size_t>* subset, std::vector<std::uint32_t>* y_out,
                               SuffStats& suff, std::size_t threads) {
    const std::size_t R = params.rank();
    const std::size_t K = tensor.order();
    const std::size_t n = subset ? subset->size() : tensor.nnz();
    threads = std::max<std::size_t>(1, std::min(threads, n));

    // One private shard per extra worker; worker 0 writes straight into suff.
    std::vector<SuffStats> shards(threads > 1 ? threads - 1 : 0);
    for (auto& s : shards) s = SuffStats::zeros(tensor.shape(), R);
    std::vector<SweepStats> stats(threads);

    parallel_chunks(n, threads, [&](std::size_t t, std::size_t lo, std::size_t hi) {
        SuffStats& out = t == 0 ? suff : shards[t - 1];
        std::vector<double> weights(R);
        std::vector<std::uint32_t> alloc(R);
        for (std::size_t q = lo; q < hi; ++q) {
            const std::size_t i = subset ? (*subset)[q] : q;
            auto coords = tensor.entry(i);
            RngHandle rng(key, tensor.linear(i));
            const double total = component_rates(coords, params.factors, params.weights.lambda, weights);
            bool floored = false;
            const auto y = draw_allocation(rng, weights, total, alloc, floored);
            stats[t].floored += floored;
            if (y_out) (*y_out)[i] = y;
            for (std::size_t r = 0; r < R; ++r) {
                if (alloc[r] == 0) continue;
                const double c = alloc[r];
                out.s_total[r] += c;
                for (std::size_t k = 0; k < K; ++k) out.s_mode[k](coords[k], r) += c;
            }
        }
    });
    SweepStats total;
    for (auto& s : stats) total += s;
    for (auto& s : shards) {
        for (std::size_t k = 0; k < K; ++k) {
            auto dst = suff.s_mode[k].data();
            auto src = s.s_mode[k].data();
            for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
        }
        for (std::size_t r = 0; r < R; ++r) suff.s_total[r] += s.s_total[r];
    }
    return total;
}

inline SweepStats network_sweep(std::uint64_t key, const ModeNetwork& net, const FactorMatrix& u,
                                std::span<const double> beta, const std::vector<std::size_t>* subset,
                                std::vector<std::uint32_t>* x_out, NetworkSuffStats& v) {
    const std::size_t R = beta.size();
    const std::size_t n = subset ? subset->size() : net.nnz();
    std::vector<double> weights(R);
    std::vector<std::uint32_t> alloc(R);
    SweepStats stats;
    const auto& edges = net.edges();
    for (std::size_t q = 0; q < n; ++q) {
        const std::size_t e = subset ? (*subset)[q] : q;
        const auto [i, j] = edges[e];
        RngHandle rng(key, static_cast<std::uint64_t>(i) * net.size() + j);
        const double total = edge_rates(i, j, u, beta, weights);
        bool floored = false;
        const auto x = draw_allocation(rng, weights, total, alloc, floored);
        stats.floored += floored;
        if (x_out) (*x_out)[e] = x;
        for (std::size_t r = 0; r < R; ++r) {
            if (alloc[r] == 0) continue;
            const double c = alloc[r];
            v.v_node(i, r) += c;
            v.v_node(j, r) += c;
            v.v_total[r] += c;
        }
    }
    return stats;
}

}  // namespace detail

/// Resamples y and its allocation at every training one and rebuilds the
/// tensor statistics (s_mode, s_total) from scratch.
inline SweepStats sample_tensor_latents(RngHandle& rng, const SparseBinaryTensor& train, const Parameters& params,
                                        LatentState& latent, SuffStats& suff, const SamplerOptions& opts = {}) {
    const std::uint64_t key = rng();
    for (auto& m : suff.s_mode) m.fill(0.0);
    std::fill(suff.s_total.begin(), suff.s_total.end(), 0.0);
    latent.y.resize(train.nnz());
    return detail::tensor_sweep(key, train, params, nullptr, &latent.y, suff, opts.threads);
}

/// Same for network n: resamples X on every stored edge and rebuilds v.
/// Each undirected edge adds its allocation to both endpoints' rows.
inline SweepStats sample_network_latents(RngHandle& rng, const ModeNetwork& net, std::size_t n,
                                         const Parameters& params, LatentState& latent, SuffStats& suff) {
    const std::uint64_t key = rng();
    auto& v = suff.networks.at(n);
    v.v_node.fill(0.0);
    std::fill(v.v_total.begin(), v.v_total.end(), 0.0);
    if (latent.x.size() <= n) latent.x.resize(n + 1);
    latent.x[n].resize(net.nnz());
    return detail::network_sweep(key, net, params.factors[net.mode()], params.networks[n].beta, nullptr,
                                 &latent.x[n], v);
}

/// Sufficient statistics from explicit per-entry allocations (nnz x R).
inline SuffStats accumulate_allocations(const SparseBinaryTensor& tensor, const Matrix& allocations) {
    if (allocations.rows() != tensor.nnz()) throw ContractError("one allocation row per one-entry required");
    const std::size_t R = allocations.cols();
    auto suff = SuffStats::zeros(tensor.shape(), R);
    for (std::size_t i = 0; i < tensor.nnz(); ++i) {
        auto coords = tensor.entry(i);
        for (std::size_t r = 0; r < R; ++r) {
            const double c = allocations(i, r);
            suff.s_total[r] += c;
            for (std::size_t k = 0; k < coords.size(); ++k) suff.s_mode[k](coords[k], r) += c;
        }
    }
    return suff;
}

/// Draws every factor column, then (p, lambda), then (h, beta) per network,
/// from the conditionals implied by `suff`.
inline void sample_parameters(RngHandle& rng, const SuffStats& suff, const Hyperparams& hyper, Parameters& params) {
    const std::size_t R = params.rank();
    std::vector<double> column;
    for (std::size_t k = 0; k < params.order(); ++k) {
        auto& u = params.factors[k];
        column.resize(u.rows());
        for (std::size_t r = 0; r < R; ++r) {
            const auto alphas = factor_column_posterior(suff, hyper, k, r);
            dirichlet_sample_into(rng, alphas, column);
            u.set_column(r, column);
        }
    }
    auto& w = params.weights;
    for (std::size_t r = 0; r < R; ++r) {
        w.p[r] = sample_pr(rng, r, suff, hyper);
        w.lambda[r] = sample_lambda(rng, r, suff, hyper, w.p[r]);
    }
    for (std::size_t n = 0; n < params.networks.size(); ++n) {
        auto& nw = params.networks[n];
        for (std::size_t r = 0; r < R; ++r) {
            nw.h[r] = sample_hr(rng, r, suff.networks[n], hyper);
            nw.beta[r] = sample_beta(rng, r, suff.networks[n], hyper, nw.h[r]);
        }
    }
}

/// One full sweep: tensor latents, network latents, factor columns, (p, lambda),
/// (h, beta). Cost is O(nnz(B) R K + sum nnz(A) R + R sum n_k).
inline SweepStats gibbs_iteration(RngHandle& rng, const Dataset& data, ModelState& state,
                                  const SamplerOptions& opts = {}) {
    SweepStats stats = sample_tensor_latents(rng, data.tensor, state.params, state.latent, state.suff, opts);
    for (std::size_t n = 0; n < data.networks.size(); ++n) {
        stats += sample_network_latents(rng, data.networks[n], n, state.params, state.latent, state.suff);
    }
    sample_parameters(rng, state.suff, state.hyper, state.params);
    ++state.iteration;
    return stats;
}

}  // namespace ztpcp
