#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <unordered_set>
#include <vector>

#include "ztpcp/error.hpp"
#include "ztpcp/rng.hpp"
#include "ztpcp/tensor.hpp"

namespace ztpcp {

struct SplitSpec {
    enum class Kind { RandomEntry, ColdStartSlice };

    Kind kind = Kind::RandomEntry;
    double fraction = 0.1;    // random-entry: share of ones moved to test
    std::size_t mode = 0;     // cold-start: 0-based mode whose slices are held out
    Coord slice_begin = 0;    // cold-start: held-out coordinates [begin, end)
    Coord slice_end = 0;
    std::uint64_t seed = 0;

    static SplitSpec random_entry(double fraction, std::uint64_t seed) {
        SplitSpec s;
        s.fraction = fraction;
        s.seed = seed;
        return s;
    }
    static SplitSpec cold_start(std::size_t mode, Coord begin, Coord end, std::uint64_t seed) {
        SplitSpec s;
        s.kind = Kind::ColdStartSlice;
        s.mode = mode;
        s.slice_begin = begin;
        s.slice_end = end;
        s.seed = seed;
        return s;
    }
};

struct SplitResult {
    SparseBinaryTensor train;
    std::vector<TestEntry> test;

    std::size_t test_positives() const {
        return static_cast<std::size_t>(std::count_if(test.begin(), test.end(), [](auto& e) { return e.label == 1; }));
    }
};

namespace detail {

inline constexpr std::uint64_t kEnumerateLimit = 10'000'000;

// Cells of the held-out region, described as a linear-index sampler.
struct HoldoutRegion {
    const Shape* shape = nullptr;
    bool slice = false;
    std::size_t mode = 0;
    Coord begin = 0;
    Coord end = 0;

    std::uint64_t volume() const {
        std::uint64_t v = volume_of(*shape);
        if (!slice) return v;
        return v / (*shape)[mode] * (end - begin);
    }

    // Maps r in [0, volume()) onto a cell of the region.
    std::uint64_t cell(std::uint64_t r, std::vector<Coord>& coords) const {
        if (!slice) {
            delinearize(*shape, r, coords);
            return r;
        }
        // Decompose r with the held-out mode's extent replaced by the slice width.
        for (std::size_t k = shape->size(); k-- > 0;) {
            const std::uint64_t n = k == mode ? (end - begin) : (*shape)[k];
            coords[k] = static_cast<Coord>(r % n) + (k == mode ? begin : 0);
            r /= n;
        }
        return linearize(*shape, coords);
    }
};

inline std::vector<TestEntry> sample_negatives(const SparseBinaryTensor& full, const HoldoutRegion& region,
                                               std::size_t positives_in_region, double zeros_per_one,
                                               std::size_t positives, RngHandle& rng) {
    const std::uint64_t region_volume = region.volume();
    const std::uint64_t region_zeros = region_volume - positives_in_region;
    std::vector<Coord> coords(full.order());
    std::vector<TestEntry> out;
    const bool all = zeros_per_one <= 0.0 ||
                     std::llround(zeros_per_one * static_cast<double>(positives)) >= static_cast<long long>(region_zeros);
    if (all) {
        if (region_volume > kEnumerateLimit) {
            throw ConfigError("held-out region has " + std::to_string(region_volume) +
                              " cells; too many to enumerate every zero, set zeros_per_one > 0");
        }
        for (std::uint64_t r = 0; r < region_volume; ++r) {
            const auto lin = region.cell(r, coords);
            if (!full.contains_linear(lin)) out.push_back({TensorIndex(coords), 0});
        }
        return out;
    }
    const auto wanted = static_cast<std::size_t>(std::llround(zeros_per_one * static_cast<double>(positives)));
    std::unordered_set<std::uint64_t> chosen;
    while (chosen.size() < wanted) {
        const auto lin = region.cell(rng.below(region_volume), coords);
        if (full.contains_linear(lin) || !chosen.insert(lin).second) continue;
        out.push_back({TensorIndex(coords), 0});
    }
    return out;
}

}  // namespace detail

/// Splits a tensor into training ones and labelled test cells. Test zeros are
/// sampled uniformly from the held-out region (the whole tensor for random-entry
/// splits, the held-out slices for cold-start), zeros_per_one per test one;
/// zeros_per_one <= 0 takes every zero in the region.
inline SplitResult split_holdout(const SparseBinaryTensor& tensor, const SplitSpec& spec, double zeros_per_one) {
    const Shape& shape = tensor.shape();
    RngHandle rng(spec.seed, 0x5b1);
    SplitResult result{SparseBinaryTensor(shape), {}};
    std::vector<char> held(tensor.nnz(), 0);
    detail::HoldoutRegion region{&shape};

    if (spec.kind == SplitSpec::Kind::RandomEntry) {
        if (!(spec.fraction > 0.0 && spec.fraction < 1.0)) {
            throw ConfigError("random-entry holdout fraction must lie in (0, 1)");
        }
        const auto n_test = static_cast<std::size_t>(std::llround(spec.fraction * static_cast<double>(tensor.nnz())));
        if (n_test >= tensor.nnz()) throw ConfigError("holdout fraction leaves no training ones");
        std::vector<std::size_t> order(tensor.nnz());
        std::iota(order.begin(), order.end(), std::size_t{0});
        for (std::size_t i = 0; i < n_test; ++i) {
            std::swap(order[i], order[i + rng.below(order.size() - i)]);
            held[order[i]] = 1;
        }
    } else {
        if (spec.mode >= shape.size()) throw ConfigError("cold-start mode out of range");
        if (spec.slice_begin >= spec.slice_end || spec.slice_end > shape[spec.mode]) {
            throw ConfigError("cold-start slice range must be nonempty and within " + mode_name(spec.mode));
        }
        region.slice = true;
        region.mode = spec.mode;
        region.begin = spec.slice_begin;
        region.end = spec.slice_end;
        for (std::size_t i = 0; i < tensor.nnz(); ++i) {
            const Coord c = tensor.entry(i)[spec.mode];
            held[i] = c >= spec.slice_begin && c < spec.slice_end;
        }
        if (std::all_of(held.begin(), held.end(), [](char h) { return h != 0; }) && tensor.nnz() > 0) {
            throw ConfigError("cold-start slices cover every training one");
        }
    }

    std::size_t positives = 0;
    for (std::size_t i = 0; i < tensor.nnz(); ++i) {
        if (held[i]) {
            result.test.push_back({tensor.index(i), 1});
            ++positives;
        } else {
            result.train.insert(tensor.entry(i));
        }
    }
    if (positives > 0 || zeros_per_one <= 0.0) {
        const std::size_t ones_in_region = region.slice ? positives : tensor.nnz();
        auto negatives = detail::sample_negatives(tensor, region, ones_in_region, zeros_per_one, positives, rng);
        result.test.insert(result.test.end(), std::make_move_iterator(negatives.begin()),
                           std::make_move_iterator(negatives.end()));
    }
    std::sort(result.test.begin(), result.test.end(),
              [&](const TestEntry& a, const TestEntry& b) { return a.index < b.index; });
    for (const auto& e : result.test) result.train.mask(e.index);
    return result;
}

}  // namespace ztpcp
