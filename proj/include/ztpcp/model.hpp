#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "ztpcp/error.hpp"
#include "ztpcp/rng.hpp"
#include "ztpcp/samplers.hpp"
#include "ztpcp/tensor.hpp"

namespace ztpcp {

/// Dense row-major matrix of doubles.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0) : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }

    double& operator()(std::size_t i, std::size_t j) noexcept { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const noexcept { return data_[i * cols_ + j]; }

    std::span<double> row(std::size_t i) noexcept { return {data_.data() + i * cols_, cols_}; }
    std::span<const double> row(std::size_t i) const noexcept { return {data_.data() + i * cols_, cols_}; }

    std::vector<double> column(std::size_t j) const {
        std::vector<double> c(rows_);
        for (std::size_t i = 0; i < rows_; ++i) c[i] = (*this)(i, j);
        return c;
    }
    void set_column(std::size_t j, std::span<const double> values) {
        for (std::size_t i = 0; i < rows_; ++i) (*this)(i, j) = values[i];
    }
    double column_sum(std::size_t j) const {
        double s = 0.0;
        for (std::size_t i = 0; i < rows_; ++i) s += (*this)(i, j);
        return s;
    }

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }
    void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// n_k x R; column r is the Dirichlet-distributed factor u_r for one mode.
using FactorMatrix = Matrix;

struct Hyperparams {
    std::size_t rank = 20;
    std::vector<double> a;  // per-mode Dirichlet concentration
    double c = 10.0;
    double epsilon = 0.05;
    std::vector<double> g;  // per-factor gamma shape for lambda
    double d = 10.0;
    double alpha = 0.05;
    std::vector<double> f;  // per-factor gamma shape for beta

    // g = f = 0.1, epsilon = alpha = 1/R (1/2 when R = 1); a = 1; c = d = 10.
    static Hyperparams defaults(std::size_t order, std::size_t rank) {
        Hyperparams h;
        h.rank = rank;
        h.a.assign(order, 1.0);
        h.epsilon = h.alpha = rank > 1 ? 1.0 / static_cast<double>(rank) : 0.5;
        h.g.assign(rank, 0.1);
        h.f.assign(rank, 0.1);
        return h;
    }

    void validate(std::size_t order) const {
        auto positive = [](double x) { return x > 0.0 && std::isfinite(x); };
        if (rank == 0) throw ConfigError("rank must be >= 1");
        if (a.size() != order) throw ConfigError("need one Dirichlet concentration per mode");
        if (g.size() != rank || f.size() != rank) throw ConfigError("need one g and one f per factor");
        if (!std::all_of(a.begin(), a.end(), positive)) throw ConfigError("a must be positive");
        if (!std::all_of(g.begin(), g.end(), positive)) throw ConfigError("g must be positive");
        if (!std::all_of(f.begin(), f.end(), positive)) throw ConfigError("f must be positive");
        if (!positive(c) || !positive(d)) throw ConfigError("c and d must be positive");
        if (!(epsilon > 0.0 && epsilon < 1.0)) throw ConfigError("epsilon must lie in (0, 1)");
        if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
    }
};

struct GlobalWeights {
    std::vector<double> lambda;
    std::vector<double> p;

    friend bool operator==(const GlobalWeights&, const GlobalWeights&) = default;
};

struct NetworkWeights {
    std::size_t mode = 0;
    std::vector<double> beta;
    std::vector<double> h;

    friend bool operator==(const NetworkWeights&, const NetworkWeights&) = default;
};

/// Everything a prediction needs: factor matrices and component weights.
struct Parameters {
    std::vector<FactorMatrix> factors;
    GlobalWeights weights;
    std::vector<NetworkWeights> networks;

    std::size_t order() const noexcept { return factors.size(); }
    std::size_t rank() const noexcept { return weights.lambda.size(); }
    Shape shape() const {
        Shape s;
        for (const auto& u : factors) s.push_back(u.rows());
        return s;
    }

    friend bool operator==(const Parameters&, const Parameters&) = default;
};

struct NetworkSuffStats {
    std::size_t mode = 0;
    Matrix v_node;  // n_k x R
    std::vector<double> v_total;

    friend bool operator==(const NetworkSuffStats&, const NetworkSuffStats&) = default;
};

/// Aggregated allocation counts. Counts are integers stored as doubles (exact
/// below 2^53) so that streaming reweighting can use the same container.
struct SuffStats {
    std::vector<Matrix> s_mode;  // per mode, n_k x R
    std::vector<double> s_total;
    std::vector<NetworkSuffStats> networks;

    static SuffStats zeros(const Shape& shape, std::size_t rank, std::span<const std::size_t> network_modes = {}) {
        SuffStats s;
        for (auto n : shape) s.s_mode.emplace_back(n, rank);
        s.s_total.assign(rank, 0.0);
        for (auto m : network_modes) s.networks.push_back({m, Matrix(shape[m], rank), std::vector<double>(rank, 0.0)});
        return s;
    }

    void clear() {
        for (auto& m : s_mode) m.fill(0.0);
        std::fill(s_total.begin(), s_total.end(), 0.0);
        for (auto& n : networks) {
            n.v_node.fill(0.0);
            std::fill(n.v_total.begin(), n.v_total.end(), 0.0);
        }
    }

    // this += w * other
    void add_scaled(const SuffStats& other, double w) {
        for (std::size_t k = 0; k < s_mode.size(); ++k) {
            auto dst = s_mode[k].data();
            auto src = other.s_mode[k].data();
            for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += w * src[i];
        }
        for (std::size_t r = 0; r < s_total.size(); ++r) s_total[r] += w * other.s_total[r];
        for (std::size_t n = 0; n < networks.size(); ++n) add_network_scaled(n, other.networks[n], w);
    }

    void add_network_scaled(std::size_t n, const NetworkSuffStats& other, double w) {
        auto dst = networks[n].v_node.data();
        auto src = other.v_node.data();
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += w * src[i];
        for (std::size_t r = 0; r < networks[n].v_total.size(); ++r) networks[n].v_total[r] += w * other.v_total[r];
    }

    void scale(double rho) {
        for (auto& m : s_mode)
            for (double& x : m.data()) x *= rho;
        for (double& x : s_total) x *= rho;
        for (auto& n : networks) scale_network(n, rho);
    }
    static void scale_network(NetworkSuffStats& n, double rho) {
        for (double& x : n.v_node.data()) x *= rho;
        for (double& x : n.v_total) x *= rho;
    }

    // Largest |sum_j s_mode[k](j, r) - s_total[r]| over modes and factors.
    double mode_consistency_error() const {
        double worst = 0.0;
        for (const auto& m : s_mode) {
            for (std::size_t r = 0; r < s_total.size(); ++r) {
                worst = std::max(worst, std::fabs(m.column_sum(r) - s_total[r]));
            }
        }
        return worst;
    }

    friend bool operator==(const SuffStats&, const SuffStats&) = default;
};

/// Latent counts at observed ones: y per training one-entry, X per network edge.
struct LatentState {
    std::vector<std::uint32_t> y;
    std::vector<std::vector<std::uint32_t>> x;
};

struct ModelState {
    Hyperparams hyper;
    Parameters params;
    SuffStats suff;
    LatentState latent;
    std::uint64_t iteration = 0;
    std::uint64_t seed = 0;

    Shape shape() const { return params.shape(); }
};

namespace detail {

inline constexpr std::size_t kLogSpaceOrder = 4;

// Per-component rates lambda_r * prod_k u^(k)[i_k, r] into out; returns their sum.
// Orders above 4 multiply in log space since every u entry is <= 1.
inline double component_rates(std::span<const Coord> index, const std::vector<FactorMatrix>& factors,
                              std::span<const double> lambda, std::span<double> out) noexcept {
    const std::size_t R = lambda.size();
    const std::size_t K = factors.size();
    double total = 0.0;
    if (K <= kLogSpaceOrder) {
        for (std::size_t r = 0; r < R; ++r) out[r] = lambda[r];
        for (std::size_t k = 0; k < K; ++k) {
            auto row = factors[k].row(index[k]);
            for (std::size_t r = 0; r < R; ++r) out[r] *= row[r];
        }
    } else {
        for (std::size_t r = 0; r < R; ++r) out[r] = 0.0;
        for (std::size_t k = 0; k < K; ++k) {
            auto row = factors[k].row(index[k]);
            for (std::size_t r = 0; r < R; ++r) out[r] += std::log(row[r]);
        }
        for (std::size_t r = 0; r < R; ++r) out[r] = lambda[r] * std::exp(out[r]);
    }
    for (std::size_t r = 0; r < R; ++r) total += out[r];
    return total;
}

inline double edge_rates(Coord i, Coord j, const FactorMatrix& u, std::span<const double> beta,
                         std::span<double> out) noexcept {
    auto ui = u.row(i);
    auto uj = u.row(j);
    double total = 0.0;
    for (std::size_t r = 0; r < beta.size(); ++r) {
        out[r] = beta[r] * ui[r] * uj[r];
        total += out[r];
    }
    return total;
}

inline void check_factors(const std::vector<FactorMatrix>& factors, std::size_t rank) {
    for (const auto& u : factors) {
        if (u.cols() != rank) throw ContractError("factor matrix has " + std::to_string(u.cols()) + " columns, rank is " + std::to_string(rank));
    }
}

}  // namespace detail

/// sum_r lambda_r prod_k u^(k)[i_k, r]
inline double cp_rate(std::span<const Coord> index, const std::vector<FactorMatrix>& factors,
                      const GlobalWeights& weights) {
    if (index.size() != factors.size()) throw ContractError("index order does not match the number of factor matrices");
    detail::check_factors(factors, weights.lambda.size());
    for (std::size_t k = 0; k < index.size(); ++k) {
        if (index[k] >= factors[k].rows()) throw BoundsError(mode_name(k) + " coordinate out of range");
    }
    std::vector<double> scratch(weights.lambda.size());
    return detail::component_rates(index, factors, weights.lambda, scratch);
}

inline double cp_rate(const TensorIndex& index, const std::vector<FactorMatrix>& factors, const GlobalWeights& weights) {
    return cp_rate(index.coords(), factors, weights);
}

/// P(b = 1) = 1 - exp(-rate)
inline double bernoulli_prob(double rate) {
    if (!(rate >= 0.0)) throw DomainError("rate must be >= 0");
    return -std::expm1(-rate);
}

/// sum_r beta_r u[i, r] u[j, r]
inline double network_rate(Coord i, Coord j, const FactorMatrix& factor, const NetworkWeights& nw) {
    if (factor.cols() != nw.beta.size()) throw ContractError("network weights do not match factor rank");
    if (i >= factor.rows() || j >= factor.rows()) throw BoundsError("network endpoint out of range");
    std::vector<double> scratch(nw.beta.size());
    return detail::edge_rates(i, j, factor, nw.beta, scratch);
}

/// Draws every parameter from its prior. Sufficient statistics start at zero.
inline ModelState init_state(RngHandle& rng, const Hyperparams& hyper, const Shape& shape,
                             std::span<const std::size_t> network_modes = {}) {
    validate_shape(shape);
    hyper.validate(shape.size());
    for (auto m : network_modes) {
        if (m >= shape.size()) throw ConfigError("network attached to nonexistent " + mode_name(m));
    }
    const std::size_t R = hyper.rank;
    ModelState st;
    st.hyper = hyper;
    st.seed = rng.seed();
    std::vector<double> alphas;
    std::vector<double> column;
    for (std::size_t k = 0; k < shape.size(); ++k) {
        FactorMatrix u(shape[k], R);
        alphas.assign(shape[k], hyper.a[k]);
        column.resize(shape[k]);
        for (std::size_t r = 0; r < R; ++r) {
            dirichlet_sample_into(rng, alphas, column);
            u.set_column(r, column);
        }
        st.params.factors.push_back(std::move(u));
    }
    auto& w = st.params.weights;
    w.p.resize(R);
    w.lambda.resize(R);
    for (std::size_t r = 0; r < R; ++r) {
        w.p[r] = beta_sample(rng, hyper.c * hyper.epsilon, hyper.c * (1.0 - hyper.epsilon));
        w.lambda[r] = gamma_sample(rng, hyper.g[r], w.p[r] / (1.0 - w.p[r]));
    }
    for (auto m : network_modes) {
        NetworkWeights nw{m, std::vector<double>(R), std::vector<double>(R)};
        for (std::size_t r = 0; r < R; ++r) {
            nw.h[r] = beta_sample(rng, hyper.d * hyper.alpha, hyper.d * (1.0 - hyper.alpha));
            nw.beta[r] = gamma_sample(rng, hyper.f[r], nw.h[r] / (1.0 - nw.h[r]));
        }
        st.params.networks.push_back(std::move(nw));
    }
    st.suff = SuffStats::zeros(shape, R, network_modes);
    return st;
}

/// Exact log-likelihood of the observed binary data under the marginal
/// Bernoulli model. The zero-cell term uses sum_{all cells} rate = sum_r lambda_r
/// (factor columns sum to one), so the cost is linear in the number of ones
/// plus held-out cells.
inline double log_likelihood(const Dataset& data, const Parameters& params) {
    const auto& t = data.tensor;
    const std::size_t R = params.rank();
    std::vector<double> scratch(R);
    double ll = 0.0;
    double ones_rate = 0.0;
    for (std::size_t i = 0; i < t.nnz(); ++i) {
        const double rate = detail::component_rates(t.entry(i), params.factors, params.weights.lambda, scratch);
        ones_rate += rate;
        ll += std::log(-std::expm1(-std::max(rate, 1e-300)));
    }
    double masked_rate = 0.0;
    std::vector<Coord> coords(t.order());
    for (auto lin : t.holdout_mask()) {
        delinearize(t.shape(), lin, coords);
        masked_rate += detail::component_rates(coords, params.factors, params.weights.lambda, scratch);
    }
    const double total = std::accumulate(params.weights.lambda.begin(), params.weights.lambda.end(), 0.0);
    ll -= std::max(0.0, total - ones_rate - masked_rate);

    for (std::size_t n = 0; n < data.networks.size(); ++n) {
        const auto& net = data.networks[n];
        const auto& u = params.factors[net.mode()];
        const auto& beta = params.networks[n].beta;
        double edge_rate = 0.0;
        for (auto [i, j] : net.edges()) {
            const double rate = detail::edge_rates(i, j, u, beta, scratch);
            if (i != j) edge_rate += rate;
            ll += std::log(-std::expm1(-std::max(rate, 1e-300)));
        }
        // sum_{i<j} u_i u_j = (1 - sum_i u_i^2) / 2 per column
        double pair_total = 0.0;
        for (std::size_t r = 0; r < R; ++r) {
            double sq = 0.0;
            for (std::size_t i = 0; i < u.rows(); ++i) sq += u(i, r) * u(i, r);
            pair_total += beta[r] * 0.5 * (1.0 - sq);
        }
        ll -= std::max(0.0, pair_total - edge_rate);
    }
    return ll;
}

}  // namespace ztpcp
