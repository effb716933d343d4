#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "crowdps/error.hpp"
#include "crowdps/geo.hpp"
#include "crowdps/rng.hpp"

namespace crowdps {

struct KmeansConfig {
    std::size_t k = 4;
    std::size_t max_iter = 100;
    std::size_t restarts = 10;
    std::uint64_t seed = 1;
};

struct ClusterAssignment {
    std::size_t k = 0;
    std::vector<std::size_t> labels;         // cluster index per input point
    std::vector<double> centroid_x;          // working-plane coordinates
    std::vector<double> centroid_y;
    double inertia = 0.0;                    // sum of squared point-to-centroid distances
    std::vector<double> inertia_trace;       // inertia after each assignment pass (best restart)
    std::size_t iterations = 0;              // assignment passes of the best restart
    std::size_t chosen_restart = 0;
    bool converged = false;
};

namespace detail {

struct KmeansRun {
    std::vector<std::size_t> labels;
    std::vector<double> cx, cy;
    double inertia = std::numeric_limits<double>::infinity();
    std::vector<double> trace;
    std::size_t iterations = 0;
    bool converged = false;
};

inline KmeansRun kmeans_once(const std::vector<double>& px, const std::vector<double>& py,
                             std::size_t k, std::size_t max_iter, Rng& rng) {
    const std::size_t n = px.size();
    KmeansRun run;
    run.cx.resize(k);
    run.cy.resize(k);

    // Forgy start: k distinct points become the first centroids
    const auto start = rng.sample_without_replacement(n, k);
    for (std::size_t c = 0; c < k; ++c) {
        run.cx[c] = px[start[c]];
        run.cy[c] = py[start[c]];
    }

    run.labels.assign(n, 0);
    std::vector<std::size_t> prev(n, k); // k is not a valid label, forces one pass
    for (std::size_t it = 0; it < max_iter; ++it) {
        // assignment pass, ties go to the lower cluster index
        double inertia = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::infinity();
            std::size_t arg = 0;
            for (std::size_t c = 0; c < k; ++c) {
                const double dx = px[i] - run.cx[c];
                const double dy = py[i] - run.cy[c];
                const double d = dx * dx + dy * dy;
                if (d < best) {
                    best = d;
                    arg = c;
                }
            }
            run.labels[i] = arg;
            inertia += best;
        }
        run.trace.push_back(inertia);
        run.inertia = inertia;
        run.iterations = it + 1;
        if (run.labels == prev) {
            run.converged = true;
            break;
        }
        prev = run.labels;

        // update pass
        std::vector<double> sx(k, 0.0), sy(k, 0.0);
        std::vector<std::size_t> cnt(k, 0);
        for (std::size_t i = 0; i < n; ++i) {
            sx[run.labels[i]] += px[i];
            sy[run.labels[i]] += py[i];
            cnt[run.labels[i]] += 1;
        }
        for (std::size_t c = 0; c < k; ++c) {
            if (cnt[c] == 0) continue;
            run.cx[c] = sx[c] / static_cast<double>(cnt[c]);
            run.cy[c] = sy[c] / static_cast<double>(cnt[c]);
        }
        // an empty cluster restarts at the point farthest from its own centroid
        for (std::size_t c = 0; c < k; ++c) {
            if (cnt[c] != 0) continue;
            double far = -1.0;
            std::size_t far_i = 0;
            for (std::size_t i = 0; i < n; ++i) {
                const double dx = px[i] - run.cx[run.labels[i]];
                const double dy = py[i] - run.cy[run.labels[i]];
                const double d = dx * dx + dy * dy;
                if (d > far) {
                    far = d;
                    far_i = i;
                }
            }
            run.cx[c] = px[far_i];
            run.cy[c] = py[far_i];
        }
    }
    return run;
}

} // namespace detail

/// Lloyd's k-means over point coordinates with several independent restarts;
/// the restart with the lowest final inertia wins (first one on ties).
/// Geographic input is projected to a local plane first, so distances and
/// centroids live in meters; labels refer to input order either way.
inline ClusterAssignment kmeans(const std::vector<GeoPoint>& points, const KmeansConfig& cfg) {
    if (cfg.k == 0) throw ConfigError("kmeans: k must be positive");
    if (points.size() < cfg.k)
        throw ConfigError("kmeans: need at least k points, got " + std::to_string(points.size()));
    if (cfg.restarts == 0) throw ConfigError("kmeans: need at least one restart");
    if (cfg.max_iter == 0) throw ConfigError("kmeans: max_iter must be positive");
    for (const auto& p : points)
        if (!p.valid()) throw DataError("kmeans: invalid coordinate");
    for (std::size_t i = 1; i < points.size(); ++i)
        if (points[i].crs != points[0].crs) throw DataError("kmeans: mixed coordinate systems");

    const auto plane = project_local(points);
    std::vector<double> px(plane.size()), py(plane.size());
    for (std::size_t i = 0; i < plane.size(); ++i) {
        px[i] = plane[i].x;
        py[i] = plane[i].y;
    }

    detail::KmeansRun best;
    std::size_t best_r = 0;
    for (std::size_t r = 0; r < cfg.restarts; ++r) {
        Rng rng = Rng::substream(cfg.seed, r);
        auto run = detail::kmeans_once(px, py, cfg.k, cfg.max_iter, rng);
        if (run.inertia < best.inertia) {
            best = std::move(run);
            best_r = r;
        }
    }

    ClusterAssignment out;
    out.k = cfg.k;
    out.labels = std::move(best.labels);
    out.centroid_x = std::move(best.cx);
    out.centroid_y = std::move(best.cy);
    out.inertia = best.inertia;
    out.inertia_trace = std::move(best.trace);
    out.iterations = best.iterations;
    out.chosen_restart = best_r;
    out.converged = best.converged;
    return out;
}

} // namespace crowdps
