#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ztpcp/chain.hpp"
#include "ztpcp/error.hpp"
#include "ztpcp/io.hpp"
#include "ztpcp/model.hpp"
#include "ztpcp/tensor.hpp"

namespace ztpcp {

enum class PredictionMode {
    Average,  // posterior predictive: mean of 1 - exp(-rate) over stored samples
    PlugIn,   // 1 - exp(-rate) at the posterior-mean parameters
};

struct Prediction {
    TensorIndex index;
    int label = 0;
    double prob = 0.0;
};

using PredictionSet = std::vector<Prediction>;

/// Mean of 1 - exp(-cp_rate(index)) over the given parameter samples.
inline double predict_prob(std::span<const Parameters> samples, const TensorIndex& index) {
    if (samples.empty()) throw ContractError("cannot predict from an empty chain");
    double sum = 0.0;
    for (const auto& s : samples) sum += bernoulli_prob(cp_rate(index, s.factors, s.weights));
    return sum / static_cast<double>(samples.size());
}

inline double predict_prob(const ChainOutput& chain, const TensorIndex& index,
                           PredictionMode mode = PredictionMode::Average) {
    if (mode == PredictionMode::PlugIn) {
        if (chain.mean_count == 0) throw ContractError("cannot predict from an empty chain");
        return bernoulli_prob(cp_rate(index, chain.mean.factors, chain.mean.weights));
    }
    return predict_prob(std::span<const Parameters>(chain.samples), index);
}

inline PredictionSet predict(std::span<const Parameters> samples, std::span<const TestEntry> test) {
    PredictionSet out;
    out.reserve(test.size());
    for (const auto& e : test) out.push_back({e.index, e.label, predict_prob(samples, e.index)});
    return out;
}

inline PredictionSet predict(const ChainOutput& chain, std::span<const TestEntry> test,
                             PredictionMode mode = PredictionMode::Average) {
    if (mode == PredictionMode::PlugIn) {
        const Parameters* mean = &chain.mean;
        if (chain.mean_count == 0) throw ContractError("cannot predict from an empty chain");
        return predict(std::span<const Parameters>(mean, 1), test);
    }
    return predict(std::span<const Parameters>(chain.samples), test);
}

namespace detail {

// Groups of equal score, visited in descending score order: (positives, negatives).
inline std::vector<std::pair<std::size_t, std::size_t>> tie_groups_desc(std::span<const Prediction> preds) {
    std::vector<std::pair<double, int>> v;
    v.reserve(preds.size());
    for (const auto& p : preds) v.emplace_back(p.prob, p.label);
    std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    std::vector<std::pair<std::size_t, std::size_t>> groups;
    for (std::size_t i = 0; i < v.size();) {
        std::size_t j = i;
        std::pair<std::size_t, std::size_t> g{0, 0};
        while (j < v.size() && v[j].first == v[i].first) {
            (v[j].second == 1 ? g.first : g.second) += 1;
            ++j;
        }
        groups.push_back(g);
        i = j;
    }
    return groups;
}

inline std::pair<std::size_t, std::size_t> class_counts(std::span<const Prediction> preds, const char* metric) {
    std::size_t pos = 0;
    for (const auto& p : preds) pos += p.label == 1;
    const std::size_t neg = preds.size() - pos;
    if (pos == 0 || neg == 0) {
        throw MetricError(std::string(metric) + " is undefined: test set needs at least one positive and one negative");
    }
    return {pos, neg};
}

}  // namespace detail

/// Probability that a random positive outscores a random negative, ties
/// counting one half (Mann-Whitney U / (P N)).
inline double auc_roc(std::span<const Prediction> preds) {
    const auto [P, N] = detail::class_counts(preds, "AUC-ROC");
    double correct = 0.0;
    std::size_t neg_below = N;
    for (auto [gp, gn] : detail::tie_groups_desc(preds)) {
        neg_below -= gn;
        correct += static_cast<double>(gp) * static_cast<double>(neg_below) +
                   0.5 * static_cast<double>(gp) * static_cast<double>(gn);
    }
    return correct / (static_cast<double>(P) * static_cast<double>(N));
}

/// Area under the precision-recall step curve: each distinct score threshold
/// contributes (recall gain) x (precision at that threshold), no interpolation.
inline double auc_pr(std::span<const Prediction> preds) {
    const auto [P, N] = detail::class_counts(preds, "AUC-PR");
    (void)N;
    double area = 0.0;
    std::size_t tp = 0;
    std::size_t seen = 0;
    for (auto [gp, gn] : detail::tie_groups_desc(preds)) {
        tp += gp;
        seen += gp + gn;
        if (gp == 0) continue;
        area += (static_cast<double>(gp) / static_cast<double>(P)) *
                (static_cast<double>(tp) / static_cast<double>(seen));
    }
    return area;
}

inline double log_loss(std::span<const Prediction> preds) {
    if (preds.empty()) throw MetricError("log-loss is undefined on an empty test set");
    constexpr double eps = 1e-15;
    double sum = 0.0;
    for (const auto& p : preds) {
        const double q = std::clamp(p.prob, eps, 1.0 - eps);
        sum -= p.label == 1 ? std::log(q) : std::log1p(-q);
    }
    return sum / static_cast<double>(preds.size());
}

struct CurvePoint {
    double x = 0.0;
    double y = 0.0;
};

/// (false positive rate, true positive rate) per distinct threshold, from (0, 0).
inline std::vector<CurvePoint> roc_curve(std::span<const Prediction> preds) {
    const auto [P, N] = detail::class_counts(preds, "ROC curve");
    std::vector<CurvePoint> pts{{0.0, 0.0}};
    std::size_t tp = 0, fp = 0;
    for (auto [gp, gn] : detail::tie_groups_desc(preds)) {
        tp += gp;
        fp += gn;
        pts.push_back({static_cast<double>(fp) / static_cast<double>(N), static_cast<double>(tp) / static_cast<double>(P)});
    }
    return pts;
}

/// (recall, precision) per distinct threshold.
inline std::vector<CurvePoint> pr_curve(std::span<const Prediction> preds) {
    const auto [P, N] = detail::class_counts(preds, "PR curve");
    (void)N;
    std::vector<CurvePoint> pts;
    std::size_t tp = 0, seen = 0;
    for (auto [gp, gn] : detail::tie_groups_desc(preds)) {
        tp += gp;
        seen += gp + gn;
        pts.push_back({static_cast<double>(tp) / static_cast<double>(P), static_cast<double>(tp) / static_cast<double>(seen)});
    }
    return pts;
}

struct Metrics {
    double auc_roc = 0.0;
    double auc_pr = 0.0;
    double log_loss = 0.0;
    std::size_t positives = 0;
    std::size_t negatives = 0;
};

inline Metrics evaluate(std::span<const Prediction> preds) {
    Metrics m;
    m.auc_roc = auc_roc(preds);
    m.auc_pr = auc_pr(preds);
    m.log_loss = log_loss(preds);
    for (const auto& p : preds) (p.label == 1 ? m.positives : m.negatives) += 1;
    return m;
}

// ---------------------------------------------------------------------------
// Rank shrinkage and interpretability.

struct RankEntry {
    std::size_t factor = 0;
    double mean_lambda = 0.0;
    bool active = false;
};

/// Factors sorted by posterior-mean lambda (descending). A factor is active
/// when its mean lambda exceeds tau times the largest mean lambda.
inline std::vector<RankEntry> rank_report(std::span<const double> mean_lambda, double tau = 1e-3) {
    double mx = 0.0;
    for (double l : mean_lambda) mx = std::max(mx, l);
    std::vector<RankEntry> out;
    for (std::size_t r = 0; r < mean_lambda.size(); ++r) out.push_back({r, mean_lambda[r], mean_lambda[r] > tau * mx});
    std::stable_sort(out.begin(), out.end(), [](const RankEntry& a, const RankEntry& b) { return a.mean_lambda > b.mean_lambda; });
    return out;
}

inline std::vector<RankEntry> rank_report(const ChainOutput& chain, double tau = 1e-3) {
    if (chain.mean_count == 0) throw ContractError("rank report needs a non-empty chain");
    return rank_report(chain.mean.weights.lambda, tau);
}

inline std::size_t active_count(std::span<const RankEntry> report) {
    return static_cast<std::size_t>(std::count_if(report.begin(), report.end(), [](auto& e) { return e.active; }));
}

struct EntityScore {
    std::size_t entity = 0;
    double score = 0.0;
};

/// The n largest entries of column r of mode k, descending; ties go to the
/// smaller entity id. n is clamped to the mode size.
inline std::vector<EntityScore> top_entities(const Parameters& params, std::size_t mode, std::size_t factor,
                                             std::size_t n) {
    if (mode >= params.order()) throw ContractError(mode_name(mode) + " does not exist");
    if (factor >= params.rank()) throw ContractError("factor " + std::to_string(factor) + " does not exist");
    const auto& u = params.factors[mode];
    std::vector<EntityScore> all;
    all.reserve(u.rows());
    for (std::size_t i = 0; i < u.rows(); ++i) all.push_back({i, u(i, factor)});
    n = std::min(n, all.size());
    std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n), all.end(), [](const auto& a, const auto& b) {
        return a.score != b.score ? a.score > b.score : a.entity < b.entity;
    });
    all.resize(n);
    return all;
}

inline std::vector<EntityScore> top_entities(const ChainOutput& chain, std::size_t mode, std::size_t factor,
                                             std::size_t n) {
    if (chain.mean_count == 0) throw ContractError("top entities need a non-empty chain");
    return top_entities(chain.mean, mode, factor, n);
}

// ---------------------------------------------------------------------------
// Output files.

inline void write_predictions(const std::string& path, std::span<const Prediction> preds) {
    auto out = io::open_out(path);
    for (const auto& p : preds) {
        for (auto c : p.index.coords()) out << c << ' ';
        out << p.label << ' ' << io::format_double(p.prob) << '\n';
    }
}

inline PredictionSet load_predictions(const std::string& path, std::size_t order) {
    PredictionSet out;
    auto in = io::open_in(path);
    std::string line;
    std::size_t lineno = 0;
    std::vector<Coord> coords(order);
    while (std::getline(in, line)) {
        ++lineno;
        if (io::skip_line(line)) continue;
        auto toks = io::split_ws(line);
        if (toks.size() != order + 2) throw ParseError(path, lineno, "expected coordinates, label and probability");
        io::parse_coords(path, lineno, toks, coords);
        Prediction p;
        p.index = TensorIndex(coords);
        if (!io::parse_int(toks[order], p.label) || p.label > 1) throw ParseError(path, lineno, "label must be 0 or 1");
        if (!io::parse_double(toks[order + 1], p.prob) || !(p.prob >= 0.0 && p.prob <= 1.0)) {
            throw ParseError(path, lineno, "probability must lie in [0, 1]");
        }
        out.push_back(std::move(p));
    }
    return out;
}

// Order of a predictions file, inferred from its first record.
inline std::size_t predictions_order(const std::string& path) {
    auto in = io::open_in(path);
    std::string line;
    while (std::getline(in, line)) {
        if (io::skip_line(line)) continue;
        const auto n = io::split_ws(line).size();
        if (n < 4) throw ParseError(path, 1, "too few fields for a prediction record");
        return n - 2;
    }
    throw DataError(path + " holds no predictions");
}

inline void write_metrics(const std::string& path, const Metrics& m) {
    auto out = io::open_out(path);
    out << "auc_roc " << io::format_double(m.auc_roc) << '\n'
        << "auc_pr " << io::format_double(m.auc_pr) << '\n'
        << "log_loss " << io::format_double(m.log_loss) << '\n'
        << "positives " << m.positives << '\n'
        << "negatives " << m.negatives << '\n';
}

inline void write_curve(const std::string& path, std::span<const CurvePoint> pts) {
    auto out = io::open_out(path);
    for (const auto& p : pts) out << io::format_double(p.x) << ' ' << io::format_double(p.y) << '\n';
}

}  // namespace ztpcp
