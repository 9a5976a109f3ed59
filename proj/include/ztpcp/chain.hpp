#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "ztpcp/gibbs.hpp"
#include "ztpcp/model.hpp"

namespace ztpcp {

struct ProgressRecord {
    std::uint64_t iteration = 0;
    double log_likelihood = std::numeric_limits<double>::quiet_NaN();
    std::size_t active = 0;
    std::size_t floored = 0;
    // Online chains only.
    bool online = false;
    std::uint64_t minibatch = 0;
    double reweight = 1.0;
};

inline std::ostream& operator<<(std::ostream& os, const ProgressRecord& p) {
    os << "iter " << p.iteration << " loglik ";
    if (std::isnan(p.log_likelihood)) {
        os << "-";
    } else {
        os << p.log_likelihood;
    }
    os << " active " << p.active << " floored " << p.floored;
    if (p.online) os << " minibatch " << p.minibatch << " reweight " << p.reweight;
    return os;
}

struct ChainConfig {
    std::size_t iters = 1000;
    std::size_t burnin = 500;
    std::size_t thin = 1;
    std::size_t threads = 1;
    bool keep_samples = true;
    std::size_t log_every = 0;  // 0: never compute the log-likelihood
    double prune_tau = 1e-3;
    std::function<void(const ProgressRecord&)> progress;

    void validate() const {
        if (iters <= burnin) throw ConfigError("iters (" + std::to_string(iters) + ") must exceed burnin (" + std::to_string(burnin) + ")");
        if (thin == 0) throw ConfigError("thin must be >= 1");
        if (!(prune_tau >= 0.0 && prune_tau < 1.0)) throw ConfigError("prune tau must lie in [0, 1)");
    }
};

/// Post-burn-in output of a chain: thinned parameter samples plus running
/// means over every post-burn-in iteration.
struct ChainOutput {
    std::vector<Parameters> samples;
    Parameters mean;
    std::size_t mean_count = 0;
    ModelState final_state;
    std::size_t iters = 0;
    std::size_t burnin = 0;
    std::size_t thin = 1;
    std::uint64_t seed = 0;

    void accumulate(const Parameters& p) {
        ++mean_count;
        if (mean_count == 1) {
            mean = p;
            return;
        }
        const double w = 1.0 / static_cast<double>(mean_count);
        auto blend = [w](std::span<double> dst, std::span<const double> src) {
            for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += (src[i] - dst[i]) * w;
        };
        for (std::size_t k = 0; k < mean.factors.size(); ++k) blend(mean.factors[k].data(), p.factors[k].data());
        blend(mean.weights.lambda, p.weights.lambda);
        blend(mean.weights.p, p.weights.p);
        for (std::size_t n = 0; n < mean.networks.size(); ++n) {
            blend(mean.networks[n].beta, p.networks[n].beta);
            blend(mean.networks[n].h, p.networks[n].h);
        }
    }
};

inline std::size_t active_factor_count(std::span<const double> lambda, double tau) {
    double mx = 0.0;
    for (double l : lambda) mx = std::max(mx, l);
    std::size_t n = 0;
    for (double l : lambda) n += l > tau * mx;
    return n;
}

inline std::vector<std::size_t> network_modes(const Dataset& data) {
    std::vector<std::size_t> modes;
    for (const auto& net : data.networks) modes.push_back(net.mode());
    return modes;
}

inline void validate_dataset(const Dataset& data) {
    for (const auto& net : data.networks) {
        if (net.mode() >= data.tensor.order()) throw ConfigError("network attached to nonexistent " + mode_name(net.mode()));
        if (net.size() != data.tensor.shape()[net.mode()]) {
            throw ConfigError("network on " + mode_name(net.mode()) + " has " + std::to_string(net.size()) +
                              " nodes, the mode has " + std::to_string(data.tensor.shape()[net.mode()]));
        }
    }
}

namespace detail {

inline void record_iteration(ChainOutput& out, const ModelState& state, const ChainConfig& cfg, std::size_t it) {
    if (it < cfg.burnin) return;
    out.accumulate(state.params);
    if (cfg.keep_samples && (it - cfg.burnin) % cfg.thin == 0) out.samples.push_back(state.params);
}

inline ProgressRecord progress_for(const Dataset& data, const ModelState& state, const ChainConfig& cfg,
                                   std::size_t floored) {
    ProgressRecord rec;
    rec.iteration = state.iteration;
    rec.active = active_factor_count(state.params.weights.lambda, cfg.prune_tau);
    rec.floored = floored;
    if (cfg.log_every > 0 && state.iteration % cfg.log_every == 0) rec.log_likelihood = log_likelihood(data, state.params);
    return rec;
}

}  // namespace detail

/// Batch Gibbs chain started from a prior draw. Initialization uses child
/// stream 1 of `rng`, the sweeps use child stream 2.
inline ChainOutput run_chain(const RngHandle& rng, const Dataset& data, const Hyperparams& hyper,
                             const ChainConfig& cfg) {
    cfg.validate();
    validate_dataset(data);
    RngHandle init_rng = rng.child(1);
    RngHandle sweep_rng = rng.child(2);
    const auto modes = network_modes(data);
    ChainOutput out;
    out.iters = cfg.iters;
    out.burnin = cfg.burnin;
    out.thin = cfg.thin;
    out.seed = rng.seed();
    ModelState state = init_state(init_rng, hyper, data.tensor.shape(), modes);
    state.seed = rng.seed();
    const SamplerOptions opts{cfg.threads};
    for (std::size_t it = 0; it < cfg.iters; ++it) {
        const auto stats = gibbs_iteration(sweep_rng, data, state, opts);
        if (cfg.progress) cfg.progress(detail::progress_for(data, state, cfg, stats.floored));
        detail::record_iteration(out, state, cfg, it);
    }
    out.final_state = std::move(state);
    return out;
}

}  // namespace ztpcp
