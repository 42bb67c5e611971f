#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

#include "knnbandit/core.hpp"

namespace knnbandit {

// k-selection rule: largest k with k^(2+dim) <= n^2, clamped to [1, n].
// Computed by exact integer comparison so boundary cases never depend on
// floating-point rounding of pow().
inline std::size_t default_k(std::size_t n, int dim) {
    if (n < 1) throw validation_error("default_k requires n >= 1");
    if (dim < 1) throw validation_error("default_k requires dim >= 1");
    const unsigned __int128 limit = static_cast<unsigned __int128>(n) * n;
    auto fits = [&](std::uint64_t k) {
        if (k <= 1) return true;
        unsigned __int128 acc = 1;
        for (int e = 0; e < dim + 2; ++e) {
            acc *= k;
            if (acc > limit) return false;
        }
        return true;
    };
    auto guess = static_cast<std::uint64_t>(std::pow(static_cast<double>(n), 2.0 / (2.0 + dim)));
    while (guess > 1 && !fits(guess)) --guess;
    while (fits(guess + 1)) ++guess;
    return std::min<std::uint64_t>(std::max<std::uint64_t>(guess, 1), n);
}

struct KnnEstimate {
    double value = 0.0;          // mean of values over the closed k-NN ball
    double radius = 0.0;         // r_k(x)
    std::size_t neighbor_count = 0;  // >= k; distance ties are all included
};

// Exact nearest-neighbor structure over (context, value) pairs.
//
// Points are appended incrementally; a kd-tree is rebuilt lazily whenever the
// point count has doubled since the last build, and points added in between
// sit in an overflow buffer that every query scans linearly. Queries are
// exact: they return the same neighbor sets as a brute-force scan.
class SpatialIndex {
public:
    SpatialIndex() = default;
    explicit SpatialIndex(int dim) : dim_(dim) {
        if (dim < 1) throw validation_error("SpatialIndex dimension must be >= 1");
    }

    int dim() const { return dim_; }
    std::size_t size() const { return values_.size(); }
    bool empty() const { return values_.empty(); }

    const std::vector<double>& values() const { return values_; }
    double value(std::size_t i) const { return values_[i]; }
    ContextPoint point(std::size_t i) const {
        return ContextPoint(std::vector<double>(coords_.begin() + i * dim_,
                                                coords_.begin() + (i + 1) * dim_));
    }

    void insert(const ContextPoint& x, double value) {
        x.validate();
        if (dim_ == 0) dim_ = x.dim();
        if (x.dim() != dim_) {
            throw validation_error("point dimension " + std::to_string(x.dim()) +
                                   " does not match index dimension " + std::to_string(dim_));
        }
        coords_.insert(coords_.end(), x.coords.begin(), x.coords.end());
        values_.push_back(value);
        if (size() >= 2 * std::max<std::size_t>(built_, 8)) rebuild();
    }

    // Smallest radius whose closed ball around q contains at least k points.
    double knn_radius(const ContextPoint& q, std::size_t k) const {
        return std::sqrt(knn_radius_sq(q, k));
    }

    // Tie-inclusive k-NN regression: the unweighted mean over every stored
    // point within the closed ball of radius r_k(q).
    KnnEstimate regress(const ContextPoint& q, std::size_t k) const {
        const double r2 = knn_radius_sq(q, k);
        thread_local std::vector<std::uint32_t> hits;
        hits.clear();
        collect_within(q, r2, hits);
        // Canonical summation order (distance, coordinates, value) makes the
        // estimate bit-identical regardless of insertion order.
        std::sort(hits.begin(), hits.end(), [&](std::uint32_t a, std::uint32_t b) {
            const double da = dist_sq(a, q), db = dist_sq(b, q);
            if (da != db) return da < db;
            const double* pa = &coords_[a * dim_];
            const double* pb = &coords_[b * dim_];
            for (int j = 0; j < dim_; ++j) {
                if (pa[j] != pb[j]) return pa[j] < pb[j];
            }
            return values_[a] < values_[b];
        });
        double sum = 0.0;
        for (std::uint32_t i : hits) sum += values_[i];
        KnnEstimate est;
        est.value = sum / static_cast<double>(hits.size());
        est.radius = std::sqrt(r2);
        est.neighbor_count = hits.size();
        return est;
    }

    // Indices of all points within the closed ball of the given radius.
    void neighbors_within(const ContextPoint& q, double radius,
                          std::vector<std::uint32_t>& out) const {
        check_query(q, 1);
        out.clear();
        collect_within(q, radius * radius, out);
    }

    void rebuild() const {
        perm_.resize(size());
        std::iota(perm_.begin(), perm_.end(), 0u);
        nodes_.clear();
        nodes_.reserve(size() / kLeafSize * 2 + 2);
        if (!perm_.empty()) build_node(0, static_cast<std::uint32_t>(perm_.size()), 0);
        built_ = size();
    }

private:
    static constexpr std::uint32_t kLeafSize = 16;
    static constexpr std::uint32_t kNoChild = 0xffffffffu;

    struct Node {
        std::uint32_t begin = 0, end = 0;  // leaf range in perm_
        std::uint32_t left = kNoChild, right = kNoChild;
        int axis = 0;
        double split = 0.0;
    };

    int dim_ = 0;
    std::vector<double> coords_;
    std::vector<double> values_;
    mutable std::vector<std::uint32_t> perm_;
    mutable std::vector<Node> nodes_;
    mutable std::size_t built_ = 0;

    double dist_sq(std::uint32_t i, const ContextPoint& q) const {
        const double* p = &coords_[static_cast<std::size_t>(i) * dim_];
        double s = 0.0;
        for (int j = 0; j < dim_; ++j) {
            const double d = p[j] - q.coords[j];
            s += d * d;
        }
        return s;
    }

    void check_query(const ContextPoint& q, std::size_t k) const {
        if (empty()) throw validation_error("query on empty index");
        if (q.dim() != dim_) {
            throw validation_error("query dimension " + std::to_string(q.dim()) +
                                   " does not match index dimension " + std::to_string(dim_));
        }
        if (k < 1 || k > size()) {
            throw validation_error("k=" + std::to_string(k) + " out of range for index of size " +
                                   std::to_string(size()));
        }
    }

    std::uint32_t build_node(std::uint32_t begin, std::uint32_t end, int depth) const {
        const std::uint32_t id = static_cast<std::uint32_t>(nodes_.size());
        nodes_.push_back(Node{begin, end});
        if (end - begin <= kLeafSize) return id;
        // Split on the widest axis at the median.
        int axis = 0;
        double best_spread = -1.0;
        for (int j = 0; j < dim_; ++j) {
            double lo = std::numeric_limits<double>::infinity(), hi = -lo;
            for (std::uint32_t i = begin; i < end; ++i) {
                const double v = coords_[static_cast<std::size_t>(perm_[i]) * dim_ + j];
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
            if (hi - lo > best_spread) {
                best_spread = hi - lo;
                axis = j;
            }
        }
        if (best_spread <= 0.0) return id;  // all points identical: keep as leaf
        const std::uint32_t mid = begin + (end - begin) / 2;
        std::nth_element(perm_.begin() + begin, perm_.begin() + mid, perm_.begin() + end,
                         [&](std::uint32_t a, std::uint32_t b) {
                             return coords_[static_cast<std::size_t>(a) * dim_ + axis] <
                                    coords_[static_cast<std::size_t>(b) * dim_ + axis];
                         });
        nodes_[id].axis = axis;
        nodes_[id].split = coords_[static_cast<std::size_t>(perm_[mid]) * dim_ + axis];
        const std::uint32_t left = build_node(begin, mid, depth + 1);
        const std::uint32_t right = build_node(mid, end, depth + 1);
        nodes_[id].left = left;
        nodes_[id].right = right;
        return id;
    }

    // Max-heap of the k smallest squared distances seen so far.
    struct BoundedHeap {
        std::vector<double>& d;
        std::size_t k;
        void push(double v) {
            if (d.size() < k) {
                d.push_back(v);
                std::push_heap(d.begin(), d.end());
            } else if (v < d.front()) {
                std::pop_heap(d.begin(), d.end());
                d.back() = v;
                std::push_heap(d.begin(), d.end());
            }
        }
        double worst() const {
            return d.size() < k ? std::numeric_limits<double>::infinity() : d.front();
        }
    };

    double knn_radius_sq(const ContextPoint& q, std::size_t k) const {
        check_query(q, k);
        thread_local std::vector<double> heap_storage;
        heap_storage.clear();
        BoundedHeap heap{heap_storage, k};
        if (built_ > 0) search_node(0, q, heap);
        for (std::size_t i = built_; i < size(); ++i) {
            heap.push(dist_sq(static_cast<std::uint32_t>(i), q));
        }
        return heap.worst();
    }

    void search_node(std::uint32_t id, const ContextPoint& q, BoundedHeap& heap) const {
        const Node& node = nodes_[id];
        if (node.left == kNoChild) {
            for (std::uint32_t i = node.begin; i < node.end; ++i) {
                heap.push(dist_sq(perm_[i], q));
            }
            return;
        }
        const double delta = q.coords[node.axis] - node.split;
        const std::uint32_t near = delta < 0.0 ? node.left : node.right;
        const std::uint32_t far = delta < 0.0 ? node.right : node.left;
        search_node(near, q, heap);
        if (delta * delta <= heap.worst()) search_node(far, q, heap);
    }

    void collect_within(const ContextPoint& q, double r2, std::vector<std::uint32_t>& out) const {
        if (built_ > 0) collect_node(0, q, r2, out);
        for (std::size_t i = built_; i < size(); ++i) {
            if (dist_sq(static_cast<std::uint32_t>(i), q) <= r2) {
                out.push_back(static_cast<std::uint32_t>(i));
            }
        }
    }

    void collect_node(std::uint32_t id, const ContextPoint& q, double r2,
                      std::vector<std::uint32_t>& out) const {
        const Node& node = nodes_[id];
        if (node.left == kNoChild) {
            for (std::uint32_t i = node.begin; i < node.end; ++i) {
                if (dist_sq(perm_[i], q) <= r2) out.push_back(perm_[i]);
            }
            return;
        }
        const double delta = q.coords[node.axis] - node.split;
        const std::uint32_t near = delta < 0.0 ? node.left : node.right;
        const std::uint32_t far = delta < 0.0 ? node.right : node.left;
        collect_node(near, q, r2, out);
        if (delta * delta <= r2) collect_node(far, q, r2, out);
    }
};

inline double knn_radius(const SpatialIndex& index, const ContextPoint& x, std::size_t k) {
    return index.knn_radius(x, k);
}

inline KnnEstimate knn_regress(const SpatialIndex& index, const ContextPoint& x, std::size_t k) {
    return index.regress(x, k);
}

}  // namespace knnbandit
