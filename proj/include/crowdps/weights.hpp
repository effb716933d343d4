#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "crowdps/distance.hpp"
#include "crowdps/error.hpp"

namespace crowdps {

/// Neighbor derivation rule: k nearest points, or all points within a
/// distance threshold. k-nearest ties break toward the smallest index.
struct NeighborRule {
    enum class Kind { k_nearest, threshold };
    Kind kind = Kind::k_nearest;
    int k = 5;
    double delta = 0.0;

    static NeighborRule k_nearest_rule(int k) { return NeighborRule{Kind::k_nearest, k, 0.0}; }
    static NeighborRule threshold_rule(double delta) {
        return NeighborRule{Kind::threshold, 0, delta};
    }

    std::string describe() const {
        if (kind == Kind::k_nearest) return "k-nearest(" + std::to_string(k) + ")";
        return "threshold(" + std::to_string(delta) + ")";
    }
};

/// Binary spatial adjacency W over n locations. w[i][i] = 0 always.
/// Rows with no neighbors (possible under the threshold rule) are flagged
/// as isolated; spatial-lag calls on them error unless told to skip.
class WeightMatrix {
public:
    WeightMatrix() = default;
    WeightMatrix(std::vector<std::vector<int>> neighbors, NeighborRule rule)
        : neighbors_(std::move(neighbors)), rule_(rule) {
        for (auto& row : neighbors_) std::sort(row.begin(), row.end());
    }

    std::size_t size() const { return neighbors_.size(); }
    const std::vector<int>& neighbors_of(std::size_t i) const { return neighbors_[i]; }
    int neighbor_count(std::size_t i) const { return static_cast<int>(neighbors_[i].size()); }
    const NeighborRule& rule() const { return rule_; }

    bool weight(std::size_t i, std::size_t j) const {
        if (i == j) return false;
        const auto& row = neighbors_[i];
        return std::binary_search(row.begin(), row.end(), static_cast<int>(j));
    }

    bool isolated(std::size_t i) const { return neighbors_[i].empty(); }

    std::vector<std::size_t> isolated_rows() const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < size(); ++i)
            if (isolated(i)) out.push_back(i);
        return out;
    }

private:
    std::vector<std::vector<int>> neighbors_;
    NeighborRule rule_;
};

inline WeightMatrix build_weight_matrix(const DistanceMatrix& dist, const NeighborRule& rule) {
    const std::size_t n = dist.size();
    std::vector<std::vector<int>> neighbors(n);
    if (rule.kind == NeighborRule::Kind::k_nearest) {
        if (rule.k < 1 || static_cast<std::size_t>(rule.k) >= n)
            throw DataError("k-nearest rule requires 1 <= k < n");
        std::vector<int> order(n);
        for (std::size_t i = 0; i < n; ++i) {
            order.clear();
            for (std::size_t j = 0; j < n; ++j)
                if (j != i) order.push_back(static_cast<int>(j));
            // stable distance sort; equal distances resolve to the smaller index
            std::sort(order.begin(), order.end(), [&](int a, int b) {
                const double da = dist(i, static_cast<std::size_t>(a));
                const double db = dist(i, static_cast<std::size_t>(b));
                if (da != db) return da < db;
                return a < b;
            });
            neighbors[i].assign(order.begin(), order.begin() + rule.k);
        }
    } else {
        if (!(rule.delta > 0.0)) throw DataError("threshold rule requires delta > 0");
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                if (j != i && dist(i, j) <= rule.delta)
                    neighbors[i].push_back(static_cast<int>(j));
    }
    return WeightMatrix(std::move(neighbors), rule);
}

/// Spatially lagged values: lag[i] = mean of values over N(i).
/// Isolated rows yield nullopt when skip_isolated, otherwise they error.
inline std::vector<std::optional<double>> spatial_lag(const std::vector<double>& values,
                                                      const WeightMatrix& w,
                                                      bool skip_isolated = false) {
    if (values.size() != w.size())
        throw DataError("spatial_lag: values length does not match weight matrix size");
    std::vector<std::optional<double>> lag(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        const auto& nb = w.neighbors_of(i);
        if (nb.empty()) {
            if (!skip_isolated)
                throw DataError("spatial_lag: isolated row " + std::to_string(i) +
                                " (no neighbors); enable skip_isolated to pass through");
            lag[i] = std::nullopt;
            continue;
        }
        double sum = 0.0;
        for (int j : nb) sum += values[static_cast<std::size_t>(j)];
        lag[i] = sum / static_cast<double>(nb.size());
    }
    return lag;
}

/// Global Moran's I with binary weights: (n / sum W) * (z' W z) / (z' z).
inline double morans_i(const std::vector<double>& values, const WeightMatrix& w) {
    if (values.size() != w.size()) throw DataError("morans_i: length mismatch");
    const std::size_t n = values.size();
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(n);
    double num = 0.0, denom = 0.0, wsum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double zi = values[i] - mean;
        denom += zi * zi;
        for (int j : w.neighbors_of(i)) {
            num += zi * (values[static_cast<std::size_t>(j)] - mean);
            wsum += 1.0;
        }
    }
    if (denom == 0.0 || wsum == 0.0) throw NumericError("morans_i: degenerate input");
    return (static_cast<double>(n) / wsum) * num / denom;
}

} // namespace crowdps
