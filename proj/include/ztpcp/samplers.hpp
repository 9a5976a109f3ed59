#pragma once

// Random variates for every conditional in the model. Gamma distributions
// use the (shape, scale) convention throughout: Gamma(k, theta) has mean k*theta.

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "ztpcp/error.hpp"
#include "ztpcp/rng.hpp"

namespace ztpcp {

struct GammaParams {
    double shape = 1.0;
    double scale = 1.0;

    double mean() const noexcept { return shape * scale; }
    friend bool operator==(const GammaParams&, const GammaParams&) = default;
};

struct BetaParams {
    double a = 1.0;
    double b = 1.0;

    double mean() const noexcept { return a / (a + b); }
    friend bool operator==(const BetaParams&, const BetaParams&) = default;
};

namespace detail {

inline void require_positive(double x, const char* what) {
    if (!(x > 0.0) || !std::isfinite(x)) {
        throw DomainError(std::string(what) + " must be positive and finite, got " + std::to_string(x));
    }
}

// Hormann's PTRS transformed rejection, valid for rate >= 10.
inline std::uint64_t poisson_ptrs(RngHandle& rng, double rate) {
    const double slam = std::sqrt(rate);
    const double loglam = std::log(rate);
    const double b = 0.931 + 2.53 * slam;
    const double a = -0.059 + 0.02483 * b;
    const double invalpha = 1.1239 + 1.1328 / (b - 3.4);
    const double vr = 0.9277 - 3.6224 / (b - 2.0);
    for (;;) {
        const double u = rng.uniform() - 0.5;
        const double v = rng.uniform();
        const double us = 0.5 - std::fabs(u);
        const double k = std::floor((2.0 * a / us + b) * u + rate + 0.43);
        if (us >= 0.07 && v <= vr) return static_cast<std::uint64_t>(k);
        if (k < 0.0 || (us < 0.013 && v > us)) continue;
        if (std::log(v) + std::log(invalpha) - std::log(a / (us * us) + b) <=
            -rate + k * loglam - std::lgamma(k + 1.0)) {
            return static_cast<std::uint64_t>(k);
        }
    }
}

inline std::uint64_t poisson_inversion(RngHandle& rng, double rate) {
    double p = std::exp(-rate);
    double u = rng.uniform();
    std::uint64_t k = 0;
    while (u > p) {
        u -= p;
        ++k;
        p *= rate / static_cast<double>(k);
        if (p <= 0.0) break;  // rounding left u above the pmf tail
    }
    return k;
}

inline std::uint64_t binomial_inversion(RngHandle& rng, std::uint64_t n, double p) {
    const double q = 1.0 - p;
    const double qn = std::exp(static_cast<double>(n) * std::log1p(-p));
    const double np = static_cast<double>(n) * p;
    const double bound = std::min(static_cast<double>(n), np + 10.0 * std::sqrt(np * q + 1.0));
    std::uint64_t x = 0;
    double px = qn;
    double u = rng.uniform();
    while (u > px) {
        ++x;
        if (static_cast<double>(x) > bound) {
            x = 0;
            px = qn;
            u = rng.uniform();
        } else {
            u -= px;
            px = (static_cast<double>(n - x + 1) * p * px) / (static_cast<double>(x) * q);
        }
    }
    return x;
}

}  // namespace detail

inline double normal_sample(RngHandle& rng) {
    for (;;) {
        const double x = 2.0 * rng.uniform() - 1.0;
        const double y = 2.0 * rng.uniform() - 1.0;
        const double s = x * x + y * y;
        if (s < 1.0 && s > 0.0) return x * std::sqrt(-2.0 * std::log(s) / s);
    }
}

/// Log of a Gamma(shape, 1) variate. Working in log space keeps tiny shapes
/// (Dirichlet concentrations well below 1) from underflowing to exact zero.
inline double log_gamma_sample(RngHandle& rng, double shape) {
    detail::require_positive(shape, "gamma shape");
    double boost = 0.0;
    if (shape < 1.0) {
        boost = std::log(rng.uniform()) / shape;
        shape += 1.0;
    }
    // Marsaglia and Tsang.
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        const double x = normal_sample(rng);
        double v = 1.0 + c * x;
        if (v <= 0.0) continue;
        v = v * v * v;
        const double u = rng.uniform();
        if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v)) {
            return std::log(d) + std::log(v) + boost;
        }
    }
}

inline double gamma_sample(RngHandle& rng, double shape, double scale) {
    detail::require_positive(scale, "gamma scale");
    const double x = std::exp(log_gamma_sample(rng, shape)) * scale;
    return std::max(x, DBL_MIN);
}

inline double gamma_sample(RngHandle& rng, const GammaParams& p) { return gamma_sample(rng, p.shape, p.scale); }

/// Beta(a, b) via a ratio of gammas; the result is kept strictly inside (0, 1).
inline double beta_sample(RngHandle& rng, double a, double b) {
    detail::require_positive(a, "beta a");
    detail::require_positive(b, "beta b");
    const double la = log_gamma_sample(rng, a);
    const double lb = log_gamma_sample(rng, b);
    const double x = 1.0 / (1.0 + std::exp(lb - la));
    return std::clamp(x, DBL_MIN, std::nextafter(1.0, 0.0));
}

inline double beta_sample(RngHandle& rng, const BetaParams& p) { return beta_sample(rng, p.a, p.b); }

inline void dirichlet_sample_into(RngHandle& rng, std::span<const double> alphas, std::span<double> out) {
    if (alphas.size() != out.size()) throw ContractError("dirichlet: output size mismatch");
    if (alphas.empty()) throw DomainError("dirichlet: empty parameter vector");
    for (double a : alphas) detail::require_positive(a, "dirichlet alpha");
    if (alphas.size() == 1) {
        out[0] = 1.0;
        return;
    }
    double max_log = -INFINITY;
    for (std::size_t i = 0; i < alphas.size(); ++i) {
        out[i] = log_gamma_sample(rng, alphas[i]);
        max_log = std::max(max_log, out[i]);
    }
    double total = 0.0;
    for (double& x : out) {
        x = std::exp(x - max_log);
        total += x;
    }
    for (double& x : out) x /= total;
}

inline std::vector<double> dirichlet_sample(RngHandle& rng, std::span<const double> alphas) {
    std::vector<double> out(alphas.size());
    dirichlet_sample_into(rng, alphas, out);
    return out;
}

inline std::uint64_t poisson_sample(RngHandle& rng, double rate) {
    if (!(rate >= 0.0) || !std::isfinite(rate)) throw DomainError("poisson rate must be finite and >= 0");
    if (rate == 0.0) return 0;
    return rate < 10.0 ? detail::poisson_inversion(rng, rate) : detail::poisson_ptrs(rng, rate);
}

/// Poisson(rate) conditioned on being >= 1. Rates >= 1 reject zero draws
/// (acceptance >= 1 - 1/e); smaller rates invert the truncated pmf directly
/// so tiny rates cost O(1).
inline std::uint64_t ztp_sample(RngHandle& rng, double rate) {
    detail::require_positive(rate, "zero-truncated poisson rate");
    if (rate >= 1.0) {
        for (;;) {
            const std::uint64_t k = poisson_sample(rng, rate);
            if (k > 0) return k;
        }
    }
    double pk = rate / std::expm1(rate);  // P(k = 1 | k >= 1)
    double u = rng.uniform();
    std::uint64_t k = 1;
    while (u > pk) {
        u -= pk;
        ++k;
        pk *= rate / static_cast<double>(k);
        if (pk <= 0.0) break;
    }
    return k;
}

inline std::uint64_t binomial_sample(RngHandle& rng, std::uint64_t n, double p) {
    if (!(p >= 0.0 && p <= 1.0)) throw DomainError("binomial p must lie in [0, 1]");
    if (n == 0 || p == 0.0) return 0;
    if (p == 1.0) return n;
    if (p > 0.5) return n - binomial_sample(rng, n, 1.0 - p);
    if (static_cast<double>(n) * p < 10.0) return detail::binomial_inversion(rng, n, p);
    std::binomial_distribution<std::uint64_t> dist(n, p);
    return dist(rng);
}

/// Multinomial allocation of n trials over unnormalized nonnegative weights
/// summing to `total`. Writes counts into `out` (same length as weights).
template <typename Count>
void multinomial_weights_into(RngHandle& rng, std::uint64_t n, std::span<const double> weights, double total,
                              std::span<Count> out) {
    std::fill(out.begin(), out.end(), Count{0});
    if (n == 0 || weights.empty()) return;
    const std::size_t last = weights.size() - 1;
    if (n <= 8) {
        // Few trials: independent categorical draws.
        for (std::uint64_t t = 0; t < n; ++t) {
            double u = rng.uniform() * total;
            std::size_t r = 0;
            for (; r < last; ++r) {
                if (u < weights[r]) break;
                u -= weights[r];
            }
            // Skip trailing zero-weight categories the rounding may land on.
            while (r > 0 && weights[r] <= 0.0) --r;
            out[r] += 1;
        }
        return;
    }
    double remaining_mass = total;
    std::uint64_t remaining = n;
    for (std::size_t r = 0; r < last && remaining > 0; ++r) {
        if (remaining_mass <= 0.0) break;
        const double p = std::clamp(weights[r] / remaining_mass, 0.0, 1.0);
        const std::uint64_t x = binomial_sample(rng, remaining, p);
        out[r] = static_cast<Count>(x);
        remaining -= x;
        remaining_mass -= weights[r];
    }
    if (remaining > 0) {
        std::size_t r = last;
        while (r > 0 && weights[r] <= 0.0) --r;
        out[r] += static_cast<Count>(remaining);
    }
}

inline std::vector<std::uint64_t> multinomial_sample(RngHandle& rng, std::uint64_t n, std::span<const double> probs) {
    if (probs.empty()) throw DomainError("multinomial: empty probability vector");
    double total = 0.0;
    for (double p : probs) {
        if (!(p >= 0.0) || !std::isfinite(p)) throw DomainError("multinomial: probabilities must be >= 0");
        total += p;
    }
    if (std::fabs(total - 1.0) > 1e-9) throw DomainError("multinomial: probabilities must sum to 1");
    std::vector<std::uint64_t> out(probs.size());
    multinomial_weights_into<std::uint64_t>(rng, n, probs, total, out);
    return out;
}

}  // namespace ztpcp
