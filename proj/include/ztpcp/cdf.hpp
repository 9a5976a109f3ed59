#pragma once

// Online MCMC by conditional density filtering. Each iteration samples latent
// counts on a minibatch of ones (and edges), folds the reweighted minibatch
// counts into streaming sufficient statistics, and refreshes the parameters
// from the conditionals those statistics imply.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <unordered_set>
#include <vector>

#include "ztpcp/chain.hpp"
#include "ztpcp/gibbs.hpp"
#include "ztpcp/model.hpp"

namespace ztpcp {

struct MinibatchSpec {
    enum class Summary { AnalyticMean, SampleAverage };

    std::size_t tensor_batch = 1;              // |I_t|, counted in one-entries
    std::vector<std::size_t> network_batch;    // |J_t| per network
    bool reweight = true;
    std::size_t samples_per_refresh = 1;       // M
    Summary summary = Summary::AnalyticMean;
    double decay = 1.0;                        // rho; 1 keeps the plain additive update

    /// Batch sizes as a fraction of each nonzero count (at least one entry).
    static MinibatchSpec from_fraction(const Dataset& data, double fraction) {
        auto size_for = [fraction](std::size_t nnz) -> std::size_t {
            if (nnz == 0) return 0;
            auto b = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(nnz)));
            return std::clamp<std::size_t>(b, 1, nnz);
        };
        MinibatchSpec s;
        s.tensor_batch = size_for(data.tensor.nnz());
        for (const auto& net : data.networks) s.network_batch.push_back(size_for(net.nnz()));
        return s;
    }

    void validate(const Dataset& data) const {
        auto check = [](std::size_t b, std::size_t nnz, const std::string& what) {
            if (nnz == 0) return;
            if (b < 1 || b > nnz) {
                throw ConfigError(what + " minibatch size " + std::to_string(b) + " must lie in [1, " + std::to_string(nnz) + "]");
            }
        };
        check(tensor_batch, data.tensor.nnz(), "tensor");
        if (network_batch.size() != data.networks.size()) throw ConfigError("need one minibatch size per network");
        for (std::size_t n = 0; n < data.networks.size(); ++n) {
            check(network_batch[n], data.networks[n].nnz(), "network");
        }
        if (samples_per_refresh < 1) throw ConfigError("samples per refresh (M) must be >= 1");
        if (!(decay > 0.0 && decay <= 1.0)) throw ConfigError("decay must lie in (0, 1]");
    }
};

struct Minibatch {
    std::vector<std::size_t> entries;
    std::vector<std::vector<std::size_t>> edges;
};

namespace detail {

// Uniform k-subset of [0, n) (Floyd), sorted. A full batch uses no randomness.
inline std::vector<std::size_t> sample_without_replacement(RngHandle& rng, std::size_t n, std::size_t k) {
    std::vector<std::size_t> out;
    if (k >= n) {
        out.resize(n);
        for (std::size_t i = 0; i < n; ++i) out[i] = i;
        return out;
    }
    std::unordered_set<std::size_t> seen;
    seen.reserve(k * 2);
    for (std::size_t j = n - k; j < n; ++j) {
        const auto t = static_cast<std::size_t>(rng.below(j + 1));
        seen.insert(seen.contains(t) ? j : t);
    }
    out.assign(seen.begin(), seen.end());
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace detail

inline Minibatch select_minibatch(RngHandle& rng, const Dataset& data, const MinibatchSpec& spec) {
    Minibatch mb;
    mb.entries = detail::sample_without_replacement(rng, data.tensor.nnz(), spec.tensor_batch);
    for (std::size_t n = 0; n < data.networks.size(); ++n) {
        const std::size_t b = n < spec.network_batch.size() ? spec.network_batch[n] : data.networks[n].nnz();
        mb.edges.push_back(detail::sample_without_replacement(rng, data.networks[n].nnz(), b));
    }
    return mb;
}

inline double tensor_reweight(const MinibatchSpec& spec, std::size_t nnz) {
    if (!spec.reweight || nnz == 0) return 1.0;
    return static_cast<double>(nnz) / static_cast<double>(std::min(spec.tensor_batch, nnz));
}

inline double network_reweight(const MinibatchSpec& spec, std::size_t n, std::size_t nnz) {
    if (!spec.reweight || nnz == 0) return 1.0;
    return static_cast<double>(nnz) / static_cast<double>(std::min(spec.network_batch.at(n), nnz));
}

/// acc <- decay * acc + w * increment, with w = nnz(B)/|I_t| for the tensor
/// statistics and nnz(A)/|J_t| for each network (w = 1 without reweighting).
inline void update_suffstats_streaming(SuffStats& acc, const SuffStats& increment, const MinibatchSpec& spec,
                                       std::size_t tensor_nnz, std::span<const std::size_t> network_nnz) {
    if (spec.decay != 1.0) acc.scale(spec.decay);
    const double w = tensor_reweight(spec, tensor_nnz);
    for (std::size_t k = 0; k < acc.s_mode.size(); ++k) {
        auto dst = acc.s_mode[k].data();
        auto src = increment.s_mode[k].data();
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += w * src[i];
    }
    for (std::size_t r = 0; r < acc.s_total.size(); ++r) acc.s_total[r] += w * increment.s_total[r];
    for (std::size_t n = 0; n < acc.networks.size(); ++n) {
        acc.add_network_scaled(n, increment.networks[n], network_reweight(spec, n, network_nnz[n]));
    }
}

namespace detail {

// Parameter refresh from streaming statistics: either M draws averaged, or
// the analytic means of the conditionals.
inline void refresh_parameters(RngHandle& rng, const SuffStats& suff, const Hyperparams& hyper,
                               const MinibatchSpec& spec, Parameters& params) {
    const std::size_t R = params.rank();
    if (spec.summary == MinibatchSpec::Summary::AnalyticMean) {
        for (std::size_t k = 0; k < params.order(); ++k) {
            for (std::size_t r = 0; r < R; ++r) {
                auto alphas = factor_column_posterior(suff, hyper, k, r);
                double total = 0.0;
                for (double a : alphas) total += a;
                for (double& a : alphas) a /= total;
                params.factors[k].set_column(r, alphas);
            }
        }
        // E[lambda] = E[E[lambda | p]] = (g + s) E[p]; likewise for beta.
        for (std::size_t r = 0; r < R; ++r) {
            const auto pb = pr_posterior(suff, hyper, r);
            params.weights.p[r] = pb.mean();
            params.weights.lambda[r] = lambda_posterior(suff, hyper, r, pb.mean()).mean();
        }
        for (std::size_t n = 0; n < params.networks.size(); ++n) {
            for (std::size_t r = 0; r < R; ++r) {
                const auto hb = hr_posterior(suff.networks[n], hyper, r);
                params.networks[n].h[r] = hb.mean();
                params.networks[n].beta[r] = beta_posterior(suff.networks[n], hyper, r, hb.mean()).mean();
            }
        }
        return;
    }
    const std::size_t M = spec.samples_per_refresh;
    if (M == 1) {
        sample_parameters(rng, suff, hyper, params);
        return;
    }
    Parameters draw = params;
    ChainOutput avg;  // reuse the running-mean arithmetic
    for (std::size_t m = 0; m < M; ++m) {
        sample_parameters(rng, suff, hyper, draw);
        avg.accumulate(draw);
    }
    params = std::move(avg.mean);
}

}  // namespace detail

struct CdfIterationInfo {
    SweepStats stats;
    double reweight = 1.0;
};

/// One online iteration. `state.suff` holds the streaming statistics.
inline CdfIterationInfo cdf_iteration(RngHandle& rng, const Dataset& data, ModelState& state,
                                      const MinibatchSpec& spec) {
    const Minibatch mb = select_minibatch(rng, data, spec);
    const auto modes = network_modes(data);
    const std::size_t R = state.params.rank();
    SuffStats inc = SuffStats::zeros(data.tensor.shape(), R, modes);

    CdfIterationInfo info;
    const std::uint64_t key = rng();
    info.stats += detail::tensor_sweep(key, data.tensor, state.params, &mb.entries, nullptr, inc, 1);
    std::vector<std::size_t> net_nnz;
    for (std::size_t n = 0; n < data.networks.size(); ++n) {
        const std::uint64_t nkey = rng();
        const auto& net = data.networks[n];
        info.stats += detail::network_sweep(nkey, net, state.params.factors[net.mode()], state.params.networks[n].beta,
                                            &mb.edges[n], nullptr, inc.networks[n]);
        net_nnz.push_back(net.nnz());
    }
    update_suffstats_streaming(state.suff, inc, spec, data.tensor.nnz(), net_nnz);
    detail::refresh_parameters(rng, state.suff, state.hyper, spec, state.params);
    info.reweight = tensor_reweight(spec, data.tensor.nnz());
    ++state.iteration;
    return info;
}

inline ChainOutput run_online_chain(const RngHandle& rng, const Dataset& data, const Hyperparams& hyper,
                                    const MinibatchSpec& spec, const ChainConfig& cfg) {
    cfg.validate();
    validate_dataset(data);
    spec.validate(data);
    RngHandle init_rng = rng.child(1);
    RngHandle sweep_rng = rng.child(3);
    ChainOutput out;
    out.iters = cfg.iters;
    out.burnin = cfg.burnin;
    out.thin = cfg.thin;
    out.seed = rng.seed();
    ModelState state = init_state(init_rng, hyper, data.tensor.shape(), network_modes(data));
    state.seed = rng.seed();
    for (std::size_t it = 0; it < cfg.iters; ++it) {
        const auto info = cdf_iteration(sweep_rng, data, state, spec);
        if (cfg.progress) {
            auto rec = detail::progress_for(data, state, cfg, info.stats.floored);
            rec.online = true;
            rec.minibatch = state.iteration;
            rec.reweight = info.reweight;
            cfg.progress(rec);
        }
        detail::record_iteration(out, state, cfg, it);
    }
    out.final_state = std::move(state);
    return out;
}

}  // namespace ztpcp
