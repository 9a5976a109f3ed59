#pragma once

#include <algorithm>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <span>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "ztpcp/error.hpp"

namespace ztpcp {

using Coord = std::uint32_t;
using Shape = std::vector<std::size_t>;

// Mode numbers in user-facing messages are 1-based; entity coordinates are 0-based.
inline std::string mode_name(std::size_t k) { return "mode " + std::to_string(k + 1); }

inline void validate_shape(const Shape& shape) {
    if (shape.size() < 2) throw ContractError("tensor order must be >= 2, got " + std::to_string(shape.size()));
    std::uint64_t volume = 1;
    for (std::size_t k = 0; k < shape.size(); ++k) {
        if (shape[k] == 0) throw ContractError(mode_name(k) + " has size 0");
        if (shape[k] > std::numeric_limits<Coord>::max()) throw ContractError(mode_name(k) + " is too large");
        if (volume > std::numeric_limits<std::uint64_t>::max() / shape[k]) {
            throw ContractError("tensor volume overflows 64-bit linear indexing");
        }
        volume *= shape[k];
    }
}

inline std::uint64_t volume_of(const Shape& shape) {
    std::uint64_t v = 1;
    for (auto n : shape) v *= n;
    return v;
}

// Row-major linearization, last mode fastest.
inline std::uint64_t linearize(const Shape& shape, std::span<const Coord> coords) {
    std::uint64_t lin = 0;
    for (std::size_t k = 0; k < shape.size(); ++k) lin = lin * shape[k] + coords[k];
    return lin;
}

inline void delinearize(const Shape& shape, std::uint64_t lin, std::span<Coord> coords) {
    for (std::size_t k = shape.size(); k-- > 0;) {
        coords[k] = static_cast<Coord>(lin % shape[k]);
        lin /= shape[k];
    }
}

/// K-dimensional cell index.
class TensorIndex {
public:
    TensorIndex() = default;
    TensorIndex(std::initializer_list<Coord> coords) : coords_(coords) {}
    explicit TensorIndex(std::vector<Coord> coords) : coords_(std::move(coords)) {}
    explicit TensorIndex(std::span<const Coord> coords) : coords_(coords.begin(), coords.end()) {}

    std::size_t order() const noexcept { return coords_.size(); }
    Coord operator[](std::size_t k) const { return coords_[k]; }
    std::span<const Coord> coords() const noexcept { return coords_; }

    void validate(const Shape& shape) const {
        if (coords_.size() != shape.size()) {
            throw ContractError("index has " + std::to_string(coords_.size()) + " coordinates, tensor order is " +
                                std::to_string(shape.size()));
        }
        for (std::size_t k = 0; k < shape.size(); ++k) {
            if (coords_[k] >= shape[k]) {
                throw BoundsError(mode_name(k) + " coordinate " + std::to_string(coords_[k]) + " out of range [0, " +
                                  std::to_string(shape[k]) + ")");
            }
        }
    }

    friend bool operator==(const TensorIndex&, const TensorIndex&) = default;
    friend auto operator<=>(const TensorIndex&, const TensorIndex&) = default;

private:
    std::vector<Coord> coords_;
};

/// Binary tensor stored as the set of its one-entries. Zeros are implicit.
/// Coordinates are kept flat (nnz x K) so hot loops can walk them linearly.
class SparseBinaryTensor {
public:
    SparseBinaryTensor() = default;

    explicit SparseBinaryTensor(Shape shape) : shape_(std::move(shape)) { validate_shape(shape_); }

    template <typename Range>
    static SparseBinaryTensor from_indices(Shape shape, const Range& indices) {
        SparseBinaryTensor t(std::move(shape));
        for (const auto& idx : indices) t.insert(idx);
        return t;
    }

    // Adds a one-entry; returns false if already present.
    bool insert(std::span<const Coord> coords) {
        check(coords);
        const std::uint64_t lin = linearize(shape_, coords);
        if (!lookup_.insert(lin).second) return false;
        coords_.insert(coords_.end(), coords.begin(), coords.end());
        linear_.push_back(lin);
        return true;
    }
    bool insert(const TensorIndex& idx) { return insert(idx.coords()); }

    const Shape& shape() const noexcept { return shape_; }
    std::size_t order() const noexcept { return shape_.size(); }
    std::size_t nnz() const noexcept { return linear_.size(); }
    std::uint64_t volume() const noexcept { return volume_of(shape_); }

    std::span<const Coord> entry(std::size_t i) const noexcept {
        return {coords_.data() + i * shape_.size(), shape_.size()};
    }
    TensorIndex index(std::size_t i) const { return TensorIndex(entry(i)); }
    std::uint64_t linear(std::size_t i) const noexcept { return linear_[i]; }
    std::span<const Coord> flat_coords() const noexcept { return coords_; }

    bool contains(std::span<const Coord> coords) const {
        check(coords);
        return lookup_.contains(linearize(shape_, coords));
    }
    bool contains(const TensorIndex& idx) const { return contains(idx.coords()); }
    bool contains_linear(std::uint64_t lin) const { return lookup_.contains(lin); }

    // Cells excluded from training (held-out test cells of either label).
    void mask(const TensorIndex& idx) {
        idx.validate(shape_);
        const auto lin = linearize(shape_, idx.coords());
        if (lookup_.contains(lin)) throw ContractError("cannot mask a training one-entry");
        holdout_.insert(lin);
    }
    bool is_masked(const TensorIndex& idx) const { return holdout_.contains(linearize(shape_, idx.coords())); }
    const std::unordered_set<std::uint64_t>& holdout_mask() const noexcept { return holdout_; }

private:
    void check(std::span<const Coord> coords) const {
        if (coords.size() != shape_.size()) {
            throw ContractError("index has " + std::to_string(coords.size()) + " coordinates, tensor order is " +
                                std::to_string(shape_.size()));
        }
        for (std::size_t k = 0; k < shape_.size(); ++k) {
            if (coords[k] >= shape_[k]) {
                throw BoundsError(mode_name(k) + " coordinate " + std::to_string(coords[k]) + " out of range [0, " +
                                  std::to_string(shape_[k]) + ")");
            }
        }
    }

    Shape shape_;
    std::vector<Coord> coords_;
    std::vector<std::uint64_t> linear_;
    std::unordered_set<std::uint64_t> lookup_;
    std::unordered_set<std::uint64_t> holdout_;
};

/// Symmetric binary adjacency over the entities of one mode, stored as its
/// upper triangle: every edge (i, j) has i <= j.
class ModeNetwork {
public:
    using Edge = std::pair<Coord, Coord>;

    ModeNetwork() = default;
    ModeNetwork(std::size_t mode, std::size_t size) : mode_(mode), size_(size) {}

    // Returns false if the (unordered) edge is already stored.
    bool insert(Coord i, Coord j) {
        if (i >= size_ || j >= size_) {
            throw BoundsError("network on " + mode_name(mode_) + ": endpoint " + std::to_string(std::max(i, j)) +
                              " out of range [0, " + std::to_string(size_) + ")");
        }
        if (i > j) std::swap(i, j);
        const std::uint64_t key = static_cast<std::uint64_t>(i) * size_ + j;
        if (!lookup_.insert(key).second) return false;
        edges_.emplace_back(i, j);
        if (i == j) ++self_loops_;
        return true;
    }

    bool contains(Coord i, Coord j) const {
        if (i > j) std::swap(i, j);
        return lookup_.contains(static_cast<std::uint64_t>(i) * size_ + j);
    }

    std::size_t mode() const noexcept { return mode_; }
    std::size_t size() const noexcept { return size_; }
    std::size_t nnz() const noexcept { return edges_.size(); }
    std::size_t self_loops() const noexcept { return self_loops_; }
    const std::vector<Edge>& edges() const noexcept { return edges_; }

    std::vector<Edge> sorted_edges() const {
        auto e = edges_;
        std::sort(e.begin(), e.end());
        return e;
    }

private:
    std::size_t mode_ = 0;
    std::size_t size_ = 0;
    std::size_t self_loops_ = 0;
    std::vector<Edge> edges_;
    std::unordered_set<std::uint64_t> lookup_;
};

/// Held-out cell with its observed label.
struct TestEntry {
    TensorIndex index;
    int label = 0;

    friend bool operator==(const TestEntry&, const TestEntry&) = default;
};

/// Training data seen by the samplers: the tensor plus any attached mode networks.
struct Dataset {
    SparseBinaryTensor tensor;
    std::vector<ModeNetwork> networks;
};

}  // namespace ztpcp
