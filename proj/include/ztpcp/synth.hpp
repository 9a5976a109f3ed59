#pragma once

// Forward simulation of the generative model: ground-truth factors and
// weights, then binary cells b = 1(y >= 1) with y ~ Pois(rate), and mode
// networks that share the tensor's factor matrix for their mode.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ztpcp/error.hpp"
#include "ztpcp/model.hpp"
#include "ztpcp/rng.hpp"
#include "ztpcp/samplers.hpp"
#include "ztpcp/tensor.hpp"

namespace ztpcp {

struct SynthSpec {
    Shape shape;
    std::size_t rank = 3;
    Hyperparams hyper;                          // priors for anything not given explicitly
    std::optional<std::vector<double>> lambda;  // explicit component weights
    std::optional<std::vector<double>> beta;    // explicit network weights (shared by all networks)
    std::vector<std::size_t> network_modes;
    std::uint64_t seed = 0;
    double max_expected_nnz = 5e7;

    static SynthSpec with_defaults(Shape shape, std::size_t rank, std::uint64_t seed) {
        SynthSpec s;
        s.hyper = Hyperparams::defaults(shape.size(), rank);
        s.shape = std::move(shape);
        s.rank = rank;
        s.seed = seed;
        return s;
    }
};

struct SynthResult {
    SparseBinaryTensor tensor;
    std::vector<ModeNetwork> networks;
    Parameters truth;
    double expected_nnz = 0.0;  // exact when the tensor was enumerated, else sum of lambda
};

namespace detail {

inline constexpr std::uint64_t kFullEnumerationCells = 10'000'000;

// Inverse-CDF lookup into a probability column.
class ColumnSampler {
public:
    explicit ColumnSampler(std::span<const double> probs) : cdf_(probs.size()) {
        double acc = 0.0;
        for (std::size_t i = 0; i < probs.size(); ++i) cdf_[i] = (acc += probs[i]);
    }
    Coord operator()(RngHandle& rng) const {
        const double u = rng.uniform() * cdf_.back();
        const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
        return static_cast<Coord>(std::min<std::size_t>(it - cdf_.begin(), cdf_.size() - 1));
    }

private:
    std::vector<double> cdf_;
};

}  // namespace detail

/// Draws every cell of the tensor given parameters. Small tensors are
/// enumerated cell by cell with one RNG stream per cell; large ones use the
/// equivalent Poisson point process (N_r ~ Pois(lambda_r) points per
/// component, coordinates drawn from the factor columns), costing O(sum lambda).
inline SparseBinaryTensor simulate_tensor(std::uint64_t key, const Shape& shape, const Parameters& params) {
    SparseBinaryTensor t(shape);
    const std::size_t R = params.rank();
    const std::uint64_t volume = volume_of(shape);
    std::vector<Coord> coords(shape.size());
    if (volume <= detail::kFullEnumerationCells) {
        std::vector<double> scratch(R);
        for (std::uint64_t lin = 0; lin < volume; ++lin) {
            delinearize(shape, lin, coords);
            const double rate = detail::component_rates(coords, params.factors, params.weights.lambda, scratch);
            if (rate <= 0.0) continue;
            RngHandle rng(key, lin);
            if (rng.uniform() < bernoulli_prob(rate)) t.insert(coords);
        }
        return t;
    }
    RngHandle rng(key, volume);
    for (std::size_t r = 0; r < R; ++r) {
        std::vector<detail::ColumnSampler> cols;
        for (const auto& u : params.factors) cols.emplace_back(u.column(r));
        const auto points = poisson_sample(rng, params.weights.lambda[r]);
        for (std::uint64_t q = 0; q < points; ++q) {
            for (std::size_t k = 0; k < shape.size(); ++k) coords[k] = cols[k](rng);
            t.insert(coords);
        }
    }
    return t;
}

/// Edges i < j of the network on `mode`, each present with probability
/// 1 - exp(-sum_r beta_r u[i,r] u[j,r]).
inline ModeNetwork simulate_network(std::uint64_t key, std::size_t mode, const FactorMatrix& u,
                                    std::span<const double> beta) {
    const std::size_t n = u.rows();
    ModeNetwork net(mode, n);
    const double pairs = 0.5 * static_cast<double>(n) * static_cast<double>(n - 1);
    if (pairs <= static_cast<double>(detail::kFullEnumerationCells)) {
        std::vector<double> scratch(beta.size());
        for (Coord i = 0; i < n; ++i) {
            for (Coord j = i + 1; j < n; ++j) {
                const double rate = detail::edge_rates(i, j, u, beta, scratch);
                if (rate <= 0.0) continue;
                RngHandle rng(key, static_cast<std::uint64_t>(i) * n + j);
                if (rng.uniform() < bernoulli_prob(rate)) net.insert(i, j);
            }
        }
        return net;
    }
    // Ordered pairs carry total mass beta_r; keeping i < j leaves rate beta_r u_i u_j per edge.
    RngHandle rng(key, static_cast<std::uint64_t>(n) * n);
    for (std::size_t r = 0; r < beta.size(); ++r) {
        detail::ColumnSampler col(u.column(r));
        const auto points = poisson_sample(rng, beta[r]);
        for (std::uint64_t q = 0; q < points; ++q) {
            const Coord i = col(rng);
            const Coord j = col(rng);
            if (i < j) net.insert(i, j);
        }
    }
    return net;
}

/// Expected number of ones, sum over cells of 1 - exp(-rate). Exact for
/// enumerable tensors; otherwise the upper bound sum_r lambda_r.
inline double expected_nnz(const Shape& shape, const Parameters& params) {
    const std::uint64_t volume = volume_of(shape);
    if (volume > detail::kFullEnumerationCells) {
        double s = 0.0;
        for (double l : params.weights.lambda) s += l;
        return s;
    }
    std::vector<Coord> coords(shape.size());
    std::vector<double> scratch(params.rank());
    double s = 0.0;
    for (std::uint64_t lin = 0; lin < volume; ++lin) {
        delinearize(shape, lin, coords);
        s += bernoulli_prob(detail::component_rates(coords, params.factors, params.weights.lambda, scratch));
    }
    return s;
}

/// Ground truth from the priors (or explicit weights) followed by forward
/// simulation. A pure function of spec.seed.
inline SynthResult generate(const SynthSpec& spec) {
    validate_shape(spec.shape);
    if (spec.rank == 0) throw ConfigError("synthetic rank must be >= 1");
    Hyperparams hyper = spec.hyper;
    if (hyper.rank != spec.rank || hyper.a.size() != spec.shape.size()) {
        throw ConfigError("synthetic hyperparameters do not match shape and rank");
    }
    hyper.validate(spec.shape.size());
    if (spec.lambda && spec.lambda->size() != spec.rank) throw ConfigError("need one lambda per component");
    if (spec.beta && spec.beta->size() != spec.rank) throw ConfigError("need one beta per component");
    for (auto m : spec.network_modes) {
        if (m >= spec.shape.size()) throw ConfigError("network on nonexistent " + mode_name(m));
    }

    RngHandle rng(spec.seed, 0x5eed);
    ModelState prior = init_state(rng, hyper, spec.shape, spec.network_modes);
    SynthResult out;
    out.truth = std::move(prior.params);
    if (spec.lambda) out.truth.weights.lambda = *spec.lambda;
    for (double l : out.truth.weights.lambda) {
        if (!(l >= 0.0) || !std::isfinite(l)) throw ConfigError("lambda must be finite and >= 0");
    }
    for (auto& nw : out.truth.networks) {
        if (spec.beta) nw.beta = *spec.beta;
    }

    out.expected_nnz = expected_nnz(spec.shape, out.truth);
    if (out.expected_nnz > spec.max_expected_nnz) {
        throw ConfigError("expected " + std::to_string(static_cast<long long>(out.expected_nnz)) +
                          " ones exceeds the budget of " + std::to_string(static_cast<long long>(spec.max_expected_nnz)));
    }
    out.tensor = simulate_tensor(rng(), spec.shape, out.truth);
    for (std::size_t n = 0; n < out.truth.networks.size(); ++n) {
        const auto& nw = out.truth.networks[n];
        out.networks.push_back(simulate_network(rng(), nw.mode, out.truth.factors[nw.mode], nw.beta));
    }
    return out;
}

}  // namespace ztpcp
