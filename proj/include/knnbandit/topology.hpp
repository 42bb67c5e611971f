#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <functional>
#include <numeric>
#include <vector>

#include "knnbandit/knn.hpp"
#include "knnbandit/policy.hpp"

namespace knnbandit {

// Graph on sample points with an edge between every pair at Euclidean
// distance <= radius (closed threshold). Adjacency lists are symmetric and
// self-loop free.
struct EpsilonGraph {
    std::vector<ContextPoint> vertices;
    double radius = 0.0;
    std::vector<std::vector<std::uint32_t>> adjacency;
};

inline EpsilonGraph build_epsilon_graph(const std::vector<ContextPoint>& points, double radius) {
    if (!(radius > 0.0)) throw validation_error("epsilon graph radius must be positive");
    EpsilonGraph g;
    g.vertices = points;
    g.radius = radius;
    g.adjacency.resize(points.size());
    if (points.empty()) return g;
    // Edges come from per-vertex radius queries on a spatial index rather
    // than an all-pairs scan.
    SpatialIndex index(points.front().dim());
    for (const ContextPoint& p : points) index.insert(p, 0.0);
    index.rebuild();
    std::vector<std::uint32_t> hits;
    for (std::uint32_t i = 0; i < points.size(); ++i) {
        index.neighbors_within(points[i], radius, hits);
        for (std::uint32_t j : hits) {
            if (j > i) {
                g.adjacency[i].push_back(j);
                g.adjacency[j].push_back(i);
            }
        }
    }
    for (auto& nbrs : g.adjacency) std::sort(nbrs.begin(), nbrs.end());
    return g;
}

// Maximal connected regions recovered for one arm. Components partition the
// vertex set and are ordered by their smallest contained vertex index.
struct RegionEstimate {
    int arm = 0;
    std::vector<std::vector<std::uint32_t>> component_indices;
    std::vector<std::vector<ContextPoint>> components;

    std::size_t component_count() const { return components.size(); }
};

namespace detail {

class UnionFind {
public:
    explicit UnionFind(std::size_t n) : parent_(n) {
        std::iota(parent_.begin(), parent_.end(), 0u);
    }

    std::uint32_t find(std::uint32_t a) {
        while (parent_[a] != a) {
            parent_[a] = parent_[parent_[a]];
            a = parent_[a];
        }
        return a;
    }

    void unite(std::uint32_t a, std::uint32_t b) {
        a = find(a);
        b = find(b);
        if (a != b) parent_[std::max(a, b)] = std::min(a, b);
    }

private:
    std::vector<std::uint32_t> parent_;
};

}  // namespace detail

// Contexts where the policy's estimated top arm is the given arm (the
// policy's own tie-break decides membership).
inline std::vector<ContextPoint> select_top_vertices(const Policy& policy,
                                                     const std::vector<ContextPoint>& contexts,
                                                     int arm) {
    if (arm < 0 || arm >= policy.num_arms()) {
        throw validation_error("arm index " + std::to_string(arm) + " out of range [0, " +
                               std::to_string(policy.num_arms()) + ")");
    }
    if (contexts.empty()) throw validation_error("select_top_vertices requires contexts");
    std::vector<ContextPoint> out;
    for (const ContextPoint& x : contexts) {
        if (policy.decide(x) == arm) out.push_back(x);
    }
    return out;
}

inline RegionEstimate connected_components(const std::vector<ContextPoint>& points, double radius,
                                           int arm = 0) {
    if (!(radius > 0.0)) throw validation_error("radius must be positive");
    RegionEstimate est;
    est.arm = arm;
    if (points.empty()) return est;

    SpatialIndex index(points.front().dim());
    for (const ContextPoint& p : points) index.insert(p, 0.0);
    index.rebuild();
    detail::UnionFind uf(points.size());
    std::vector<std::uint32_t> hits;
    for (std::uint32_t i = 0; i < points.size(); ++i) {
        index.neighbors_within(points[i], radius, hits);
        for (std::uint32_t j : hits) uf.unite(i, j);
    }
    // Union by min index makes every root the smallest index it contains, so
    // iterating roots in index order yields the documented component order.
    std::vector<std::int64_t> component_of_root(points.size(), -1);
    for (std::uint32_t i = 0; i < points.size(); ++i) {
        const std::uint32_t root = uf.find(i);
        if (component_of_root[root] < 0) {
            component_of_root[root] = static_cast<std::int64_t>(est.component_indices.size());
            est.component_indices.emplace_back();
            est.components.emplace_back();
        }
        const auto c = static_cast<std::size_t>(component_of_root[root]);
        est.component_indices[c].push_back(i);
        est.components[c].push_back(points[i]);
    }
    return est;
}

// d_H(A, B) = max of the two directed sup-min distances.
inline double hausdorff_distance(const std::vector<ContextPoint>& a,
                                 const std::vector<ContextPoint>& b) {
    if (a.empty() || b.empty()) {
        throw validation_error("hausdorff_distance is undefined for empty sets");
    }
    SpatialIndex ia(a.front().dim()), ib(b.front().dim());
    for (const ContextPoint& p : a) ia.insert(p, 0.0);
    for (const ContextPoint& p : b) ib.insert(p, 0.0);
    ia.rebuild();
    ib.rebuild();
    double sup = 0.0;
    for (const ContextPoint& p : a) sup = std::max(sup, ib.knn_radius(p, 1));
    for (const ContextPoint& p : b) sup = std::max(sup, ia.knn_radius(p, 1));
    return sup;
}

// Greedy largest-first matching of recovered components to ground-truth
// component ids (the concrete stand-in for the existence-of-a-permutation
// claim). Returns, per recovered component, the true id with the largest
// point overlap among ids not yet taken, or -1 when none remain.
inline std::vector<int> match_components_by_overlap(
    const RegionEstimate& estimate, const std::function<int(const ContextPoint&)>& true_id,
    int num_true) {
    std::vector<std::size_t> order(estimate.components.size());
    std::iota(order.begin(), order.end(), 0u);
    std::sort(order.begin(), order.end(), [&](std::size_t l, std::size_t r) {
        return estimate.components[l].size() > estimate.components[r].size();
    });
    std::vector<int> match(estimate.components.size(), -1);
    std::vector<bool> taken(num_true, false);
    for (std::size_t c : order) {
        std::vector<std::size_t> overlap(num_true, 0);
        for (const ContextPoint& p : estimate.components[c]) {
            const int id = true_id(p);
            if (id >= 0 && id < num_true) ++overlap[id];
        }
        int best = -1;
        std::size_t best_overlap = 0;
        for (int id = 0; id < num_true; ++id) {
            if (!taken[id] && overlap[id] > best_overlap) {
                best_overlap = overlap[id];
                best = id;
            }
        }
        if (best >= 0) taken[best] = true;
        match[c] = best;
    }
    return match;
}

// Region dump format: header `component_id,context0,...`, one row per vertex.
inline void write_region_csv(const RegionEstimate& estimate, std::ostream& os) {
    int dim = 0;
    for (const auto& comp : estimate.components) {
        if (!comp.empty()) {
            dim = comp.front().dim();
            break;
        }
    }
    os << "component_id";
    for (int j = 0; j < dim; ++j) os << ",context" << j;
    os << '\n';
    for (std::size_t c = 0; c < estimate.components.size(); ++c) {
        for (const ContextPoint& p : estimate.components[c]) {
            os << c;
            for (int j = 0; j < dim; ++j) os << ',' << detail::format_double(p[j]);
            os << '\n';
        }
    }
}

inline void write_region_csv(const RegionEstimate& estimate, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw data_error("cannot open region file for writing: " + path);
    write_region_csv(estimate, os);
}

}  // namespace knnbandit
