#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <limits>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include "crowdps/designs.hpp"
#include "crowdps/distance.hpp"
#include "crowdps/error.hpp"
#include "crowdps/geo.hpp"
#include "crowdps/log.hpp"
#include "crowdps/poststrat.hpp"
#include "crowdps/rng.hpp"
#include "crowdps/stats.hpp"
#include "crowdps/weights.hpp"

namespace crowdps {

struct Rect {
    double xmin = 0.0, xmax = 1.0, ymin = 0.0, ymax = 1.0;

    bool well_formed() const { return xmin < xmax && ymin < ymax; }
    bool contains(double x, double y) const {
        return x >= xmin && x < xmax && y >= ymin && y < ymax;
    }
    bool overlaps(const Rect& o) const {
        return xmin < o.xmax && o.xmin < xmax && ymin < o.ymax && o.ymin < ymax;
    }
};

struct Stratum {
    Rect box;
    std::size_t count = 0;
};

struct PopulationSpec {
    std::vector<Stratum> strata;
    double sar_lambda = 0.7;   // spatial dependence, |lambda| < 1
    std::size_t k_neighbors = 5; // k-nearest rule behind the row-standardized W

    std::size_t total() const {
        std::size_t t = 0;
        for (const auto& s : strata) t += s.count;
        return t;
    }

    void validate() const {
        if (strata.empty()) throw ConfigError("population spec has no strata");
        for (const auto& s : strata) {
            if (!s.box.well_formed()) throw ConfigError("population spec: degenerate rectangle");
            if (s.count == 0) throw ConfigError("population spec: empty stratum");
        }
        for (std::size_t a = 0; a < strata.size(); ++a)
            for (std::size_t b = a + 1; b < strata.size(); ++b)
                if (strata[a].box.overlaps(strata[b].box))
                    throw ConfigError("population spec: strata rectangles overlap");
        if (!(std::abs(sar_lambda) < 1.0))
            throw ConfigError("population spec: |lambda| must be below 1");
        if (k_neighbors < 1 || k_neighbors >= total())
            throw ConfigError("population spec: k_neighbors must be in [1, total)");
    }
};

/// Four quadrants of [-0.5, 0.5]^2 with the given counts,
/// ordered NW, NE, SW, SE.
inline PopulationSpec four_quadrant_population(std::size_t nw, std::size_t ne, std::size_t sw,
                                               std::size_t se, double lambda = 0.7,
                                               std::size_t k_neighbors = 5) {
    PopulationSpec spec;
    spec.strata = {
        Stratum{Rect{-0.5, 0.0, 0.0, 0.5}, nw},
        Stratum{Rect{0.0, 0.5, 0.0, 0.5}, ne},
        Stratum{Rect{-0.5, 0.0, -0.5, 0.0}, sw},
        Stratum{Rect{0.0, 0.5, -0.5, 0.0}, se},
    };
    spec.sar_lambda = lambda;
    spec.k_neighbors = k_neighbors;
    return spec;
}

struct Population {
    std::vector<GeoPoint> points;      // planar coordinates
    std::vector<std::size_t> strata;   // stratum label per point
    std::vector<std::size_t> sizes;    // points per stratum
    std::vector<double> values;        // filled by generate_sar
};

/// Complete spatial randomness: per stratum, the requested number of
/// independent uniform points inside its rectangle. Point order follows
/// stratum order. Draw order is x then y per point.
inline Population generate_csr(const PopulationSpec& spec, Rng& rng) {
    spec.validate();
    Population pop;
    pop.points.reserve(spec.total());
    pop.strata.reserve(spec.total());
    for (std::size_t l = 0; l < spec.strata.size(); ++l) {
        const auto& s = spec.strata[l];
        pop.sizes.push_back(s.count);
        for (std::size_t i = 0; i < s.count; ++i) {
            const double x = rng.uniform(s.box.xmin, s.box.xmax);
            const double y = rng.uniform(s.box.ymin, s.box.ymax);
            pop.points.push_back(GeoPoint{x, y, Crs::planar_unit});
            pop.strata.push_back(l);
        }
    }
    return pop;
}

/// Row-standardized k-nearest-neighbor matrix as a sparse operator.
inline Eigen::SparseMatrix<double> row_standardized_knn(const WeightMatrix& w) {
    const auto n = static_cast<Eigen::Index>(w.size());
    std::vector<Eigen::Triplet<double>> trip;
    for (std::size_t i = 0; i < w.size(); ++i) {
        const auto& nb = w.neighbors_of(i);
        if (nb.empty()) throw DataError("row standardization: isolated unit");
        const double wij = 1.0 / static_cast<double>(nb.size());
        for (int j : nb)
            trip.emplace_back(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j), wij);
    }
    Eigen::SparseMatrix<double> m(n, n);
    m.setFromTriplets(trip.begin(), trip.end());
    return m;
}

/// Simultaneous-autoregressive field: solves (I - lambda*W)Y = eps with
/// standard-normal innovations and a row-standardized k-nearest W built from
/// the point pattern. Verifies the defining equation to 1e-8 before
/// returning. lambda = 0 returns the innovations unchanged. The innovations
/// can be captured through the optional out-parameter.
inline std::vector<double> generate_sar(const std::vector<GeoPoint>& points, double lambda,
                                        std::size_t k_neighbors, Rng& rng,
                                        std::vector<double>* innovations_out = nullptr) {
    if (!(std::abs(lambda) < 1.0)) throw ConfigError("sar: |lambda| must be below 1");
    const std::size_t n = points.size();
    if (n < 2) throw DataError("sar: need at least 2 points");

    std::vector<double> eps(n);
    for (double& e : eps) e = rng.normal();
    if (innovations_out) *innovations_out = eps;
    if (lambda == 0.0) return eps;

    const auto dist = default_distance_matrix(points);
    const auto w = build_weight_matrix(dist, NeighborRule::k_nearest_rule(
                                                 static_cast<int>(k_neighbors)));
    const Eigen::SparseMatrix<double> wm = row_standardized_knn(w);

    Eigen::SparseMatrix<double> system(wm.rows(), wm.cols());
    system.setIdentity();
    system -= lambda * wm;

    Eigen::SparseLU<Eigen::SparseMatrix<double>> solver;
    solver.compute(system);
    if (solver.info() != Eigen::Success)
        throw NumericError("sar: sparse factorization failed");

    Eigen::VectorXd b(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) b[static_cast<Eigen::Index>(i)] = eps[i];
    const Eigen::VectorXd y = solver.solve(b);
    if (solver.info() != Eigen::Success) throw NumericError("sar: sparse solve failed");

    const Eigen::VectorXd residual = y - lambda * (wm * y) - b;
    if (residual.lpNorm<Eigen::Infinity>() >= 1e-8)
        throw NumericError("sar: solution fails the defining equation at 1e-8");

    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = y[static_cast<Eigen::Index>(i)];
    return out;
}

struct McConfig {
    PopulationSpec spec = four_quadrant_population(800, 60, 60, 80);
    std::size_t per_stratum = 20;   // crowd draw inside each stratum
    std::size_t design_size = 80;   // benchmark design size
    std::size_t replications = 1000;
    std::uint64_t seed = 1;
    bool redraw_population = false; // redraw points and field every replication
    std::size_t threads = 0;        // 0 = hardware choice
};

struct StrategySummary {
    double mean = 0.0;
    double variance = 0.0;
    double abs_relative_bias = 0.0; // |mean(estimates) - mean(truth)| / |mean(truth)|
    double efficiency = 1.0;        // Var(strategy 1) / Var(this strategy)
};

struct McResult {
    std::vector<std::vector<double>> traces; // [strategy][replication]
    std::vector<double> truth;               // population mean per replication
    std::vector<StrategySummary> strategies;
    std::size_t replications = 0;
    std::uint64_t seed = 0;
    bool redraw_population = false;
};

namespace detail {

struct RepOutput {
    double s1 = 0.0, s2 = 0.0, s3 = 0.0, truth = 0.0;
};

inline RepOutput run_replication(const McConfig& cfg, const Population* fixed,
                                 const std::vector<std::size_t>& design_counts,
                                 std::uint64_t rep_index) {
    Rng rng = Rng::substream(cfg.seed, rep_index + 1);

    Population local;
    const Population* pop = fixed;
    if (!fixed) {
        local = generate_csr(cfg.spec, rng);
        local.values = generate_sar(local.points, cfg.spec.sar_lambda, cfg.spec.k_neighbors, rng);
        pop = &local;
    }
    const std::size_t n_pop = pop->points.size();
    const std::size_t strata_count = pop->sizes.size();

    std::vector<std::vector<std::size_t>> members(strata_count);
    for (std::size_t i = 0; i < n_pop; ++i) members[pop->strata[i]].push_back(i);

    // crowd mimic: equal-size SRS inside every stratum
    std::vector<double> crowd_values;
    std::vector<std::size_t> crowd_labels;
    crowd_values.reserve(cfg.per_stratum * strata_count);
    for (std::size_t l = 0; l < strata_count; ++l) {
        auto within = rng.sample_without_replacement(members[l].size(), cfg.per_stratum);
        for (std::size_t wi : within) {
            crowd_values.push_back(pop->values[members[l][wi]]);
            crowd_labels.push_back(l);
        }
    }

    RepOutput out;
    out.truth = mean_of(pop->values);
    out.s1 = mean_of(crowd_values);

    std::vector<std::size_t> crowd_counts(strata_count, cfg.per_stratum);
    const auto w2 = post_sampling_ratios(crowd_counts, design_counts);
    out.s2 = weighted_estimate(crowd_values, crowd_labels, w2).corrected;

    const auto pi = equal_inclusion_probabilities(n_pop, cfg.design_size);
    const auto draw = lpm2_sample(pop->points, pi, rng);
    const auto m3 = counts_by_stratum(draw, pop->strata, strata_count);
    const auto w3 = post_sampling_ratios(crowd_counts, m3);
    out.s3 = weighted_estimate(crowd_values, crowd_labels, w3).corrected;
    return out;
}

} // namespace detail

/// Monte Carlo comparison of three ways to read an equal-effort crowd sample:
/// (1) take its plain mean, (2) reweight it against a proportional-allocation
/// benchmark design, (3) reweight it against a spatially balanced benchmark
/// draw. Replications get independent derived RNG streams, so the result is
/// identical for any thread count.
inline McResult run_monte_carlo(const McConfig& cfg) {
    cfg.spec.validate();
    if (cfg.replications < 2) throw ConfigError("monte carlo needs at least 2 replications");
    if (cfg.per_stratum == 0) throw ConfigError("monte carlo: per-stratum draw must be positive");
    for (const auto& s : cfg.spec.strata)
        if (cfg.per_stratum > s.count)
            throw ConfigError("monte carlo: per-stratum draw exceeds a stratum size");
    if (cfg.design_size == 0 || cfg.design_size > cfg.spec.total())
        throw ConfigError("monte carlo: design size must be in [1, population]");

    std::vector<std::size_t> stratum_sizes;
    for (const auto& s : cfg.spec.strata) stratum_sizes.push_back(s.count);
    const auto design_counts = pps_allocation(stratum_sizes, cfg.design_size);

    Population fixed;
    const Population* fixed_ptr = nullptr;
    if (!cfg.redraw_population) {
        Rng rng = Rng::substream(cfg.seed, 0);
        fixed = generate_csr(cfg.spec, rng);
        fixed.values = generate_sar(fixed.points, cfg.spec.sar_lambda, cfg.spec.k_neighbors, rng);
        fixed_ptr = &fixed;
    }

    std::vector<detail::RepOutput> reps(cfg.replications);
    const std::size_t hw = std::max<std::size_t>(1, std::thread::hardware_concurrency());
    const std::size_t workers = std::min(cfg.threads == 0 ? hw : cfg.threads, cfg.replications);
    if (workers <= 1) {
        for (std::size_t r = 0; r < cfg.replications; ++r)
            reps[r] = detail::run_replication(cfg, fixed_ptr, design_counts, r);
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (std::size_t t = 0; t < workers; ++t) {
            pool.emplace_back([&, t]() {
                for (std::size_t r = t; r < cfg.replications; r += workers)
                    reps[r] = detail::run_replication(cfg, fixed_ptr, design_counts, r);
            });
        }
        for (auto& th : pool) th.join();
    }

    McResult res;
    res.replications = cfg.replications;
    res.seed = cfg.seed;
    res.redraw_population = cfg.redraw_population;
    res.traces.assign(3, std::vector<double>(cfg.replications));
    res.truth.resize(cfg.replications);
    for (std::size_t r = 0; r < cfg.replications; ++r) {
        res.traces[0][r] = reps[r].s1;
        res.traces[1][r] = reps[r].s2;
        res.traces[2][r] = reps[r].s3;
        res.truth[r] = reps[r].truth;
    }

    const double truth_mean = mean_of(res.truth);
    const double var1 = sample_variance(res.traces[0]);
    res.strategies.resize(3);
    for (std::size_t s = 0; s < 3; ++s) {
        auto& summary = res.strategies[s];
        summary.mean = mean_of(res.traces[s]);
        summary.variance = sample_variance(res.traces[s]);
        summary.abs_relative_bias = std::abs(summary.mean - truth_mean) / std::abs(truth_mean);
        summary.efficiency = var1 / summary.variance;
    }
    return res;
}

/// Splits the replication traces into consecutive blocks and reports the
/// within-block efficiency of strategies 2 and 3 against strategy 1, one row
/// per (strategy, block). This turns a single long run into a distribution of
/// efficiency ratios. Incomplete trailing blocks are dropped.
inline void emit_efficiency_histogram(const McResult& res, std::ostream& os,
                                      std::size_t block_size = 50) {
    if (block_size < 2) throw ConfigError("efficiency histogram: block size must be >= 2");
    if (res.replications < block_size)
        throw ConfigError("efficiency histogram: fewer replications than one block");
    const std::size_t blocks = res.replications / block_size;
    if (blocks * block_size != res.replications)
        log_warn("efficiency histogram: dropping " +
                 std::to_string(res.replications - blocks * block_size) +
                 " replication(s) past the last full block");

    os << "strategy,block,efficiency\n";
    os.precision(17);
    for (std::size_t s = 1; s <= 2; ++s) {
        for (std::size_t b = 0; b < blocks; ++b) {
            std::vector<double> ref(res.traces[0].begin() + b * block_size,
                                    res.traces[0].begin() + (b + 1) * block_size);
            std::vector<double> alt(res.traces[s].begin() + b * block_size,
                                    res.traces[s].begin() + (b + 1) * block_size);
            const double eff = sample_variance(ref) / sample_variance(alt);
            os << (s + 1) << ',' << b << ',' << eff << '\n';
        }
    }
}

} // namespace crowdps
