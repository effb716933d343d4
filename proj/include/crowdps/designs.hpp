#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "crowdps/error.hpp"
#include "crowdps/geo.hpp"
#include "crowdps/log.hpp"
#include "crowdps/rng.hpp"

namespace crowdps {

/// Equal inclusion probabilities pi_i = n / N.
inline std::vector<double> equal_inclusion_probabilities(std::size_t population,
                                                         std::size_t sample_size) {
    if (population == 0) throw ConfigError("population size must be positive");
    if (sample_size > population)
        throw ConfigError("sample size exceeds population size");
    return std::vector<double>(population,
                              static_cast<double>(sample_size) / static_cast<double>(population));
}

inline void validate_inclusion_probabilities(const std::vector<double>& pi) {
    if (pi.empty()) throw ConfigError("inclusion probabilities are empty");
    double sum = 0.0;
    for (double p : pi) {
        if (!(p >= 0.0 && p <= 1.0))
            throw ConfigError("inclusion probabilities must lie in [0, 1]");
        sum += p;
    }
    const double target = std::round(sum);
    if (std::abs(sum - target) > 1e-9)
        throw ConfigError("inclusion probabilities must sum to an integer sample size");
    if (target < 1.0) throw ConfigError("inclusion probabilities sum to an empty sample");
}

/// Simple random sample without replacement; returns sorted indices.
inline std::vector<std::size_t> srs_sample(std::size_t population, std::size_t sample_size,
                                           Rng& rng) {
    if (sample_size == 0 || sample_size > population)
        throw ConfigError("srs sample size must be in [1, population]");
    auto picked = rng.sample_without_replacement(population, sample_size);
    std::sort(picked.begin(), picked.end());
    return picked;
}

/// Splits a design size across strata proportional to stratum size, using
/// largest-remainder rounding. Remainder ties go to the smallest index.
inline std::vector<std::size_t> pps_allocation(const std::vector<std::size_t>& stratum_sizes,
                                               std::size_t design_size) {
    if (stratum_sizes.empty()) throw ConfigError("pps allocation needs at least one stratum");
    std::size_t total = 0;
    for (std::size_t s : stratum_sizes) {
        if (s == 0) throw ConfigError("pps allocation: empty stratum");
        total += s;
    }
    if (design_size > total) throw ConfigError("design size exceeds population size");

    const std::size_t k = stratum_sizes.size();
    std::vector<std::size_t> counts(k, 0);
    std::vector<std::pair<double, std::size_t>> remainders; // (-frac, index) for stable order
    std::size_t assigned = 0;
    for (std::size_t l = 0; l < k; ++l) {
        const double quota = static_cast<double>(design_size) *
                             static_cast<double>(stratum_sizes[l]) / static_cast<double>(total);
        counts[l] = static_cast<std::size_t>(std::floor(quota));
        assigned += counts[l];
        remainders.emplace_back(-(quota - std::floor(quota)), l);
    }
    std::sort(remainders.begin(), remainders.end());
    for (std::size_t r = 0; assigned < design_size; ++r, ++assigned)
        counts[remainders[r].second] += 1;

    for (std::size_t l = 0; l < k; ++l)
        if (counts[l] > stratum_sizes[l])
            throw ConfigError("pps allocation assigns more units than stratum " +
                              std::to_string(l) + " holds");
    return counts;
}

/// PPS allocation followed by simple random sampling inside each stratum.
/// Returns sorted unit indices of the combined sample.
inline std::vector<std::size_t> stratified_pps_sample(const std::vector<std::size_t>& strata,
                                                      std::size_t design_size, Rng& rng) {
    if (strata.empty()) throw ConfigError("stratified sample needs units");
    const std::size_t k = *std::max_element(strata.begin(), strata.end()) + 1;
    std::vector<std::vector<std::size_t>> members(k);
    for (std::size_t i = 0; i < strata.size(); ++i) members[strata[i]].push_back(i);

    std::vector<std::size_t> sizes(k);
    for (std::size_t l = 0; l < k; ++l) sizes[l] = members[l].size();
    const auto counts = pps_allocation(sizes, design_size);

    std::vector<std::size_t> picked;
    picked.reserve(design_size);
    for (std::size_t l = 0; l < k; ++l) {
        if (counts[l] == 0) continue;
        auto within = rng.sample_without_replacement(members[l].size(), counts[l]);
        for (std::size_t w : within) picked.push_back(members[l][w]);
    }
    std::sort(picked.begin(), picked.end());
    return picked;
}

struct Lpm2Step {
    std::size_t i = 0;
    std::size_t j = 0;
    double pi_i = 0.0; // probabilities after the pairwise update
    double pi_j = 0.0;
    double pi_sum = 0.0; // running total over all units after the update
};

using Lpm2Observer = std::function<void(const Lpm2Step&)>;

/// Local pivotal method: repeatedly resolves a random undecided unit against
/// its nearest undecided neighbor, moving probability mass within the pair
/// until every unit is either in or out. The pairwise update keeps pi_i + pi_j
/// fixed, so the realized sample size equals sum(pi) exactly. Nearby units
/// compete for inclusion, which spreads the sample over the study region.
/// Returns sorted indices of the selected units.
inline std::vector<std::size_t> lpm2_sample(const std::vector<GeoPoint>& points,
                                            const std::vector<double>& pi_in, Rng& rng,
                                            const Lpm2Observer& observer = {}) {
    if (points.size() != pi_in.size())
        throw ConfigError("lpm2: point count does not match probability count");
    validate_inclusion_probabilities(pi_in);
    for (const auto& p : points)
        if (!p.valid()) throw DataError("lpm2: invalid coordinate");
    for (std::size_t i = 1; i < points.size(); ++i)
        if (points[i].crs != points[0].crs)
            throw DataError("lpm2: mixed coordinate systems");

    // geographic coordinates are flattened so neighbor distances are in meters
    const std::vector<GeoPoint> plane = project_local(points);

    const std::size_t n = plane.size();
    {
        bool duplicate = false;
        for (std::size_t i = 0; i < n && !duplicate; ++i)
            for (std::size_t j = i + 1; j < n; ++j)
                if (plane[i].x == plane[j].x && plane[i].y == plane[j].y) {
                    duplicate = true;
                    break;
                }
        if (duplicate)
            log_warn("lpm2: duplicate coordinates present; neighbor ties resolve by index");
    }

    constexpr double kSnap = 1e-12;
    std::vector<double> pi = pi_in;
    std::vector<std::size_t> undecided;
    undecided.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (pi[i] <= kSnap)
            pi[i] = 0.0;
        else if (pi[i] >= 1.0 - kSnap)
            pi[i] = 1.0;
        else
            undecided.push_back(i);
    }

    auto drop_decided = [&](std::size_t pos) {
        undecided[pos] = undecided.back();
        undecided.pop_back();
    };

    while (undecided.size() >= 2) {
        const std::size_t pos_i = rng.uniform_below(undecided.size());
        const std::size_t i = undecided[pos_i];

        // nearest undecided neighbor, ties to the smallest index
        std::size_t pos_j = undecided.size();
        double best = std::numeric_limits<double>::infinity();
        std::size_t best_index = n;
        for (std::size_t p = 0; p < undecided.size(); ++p) {
            if (p == pos_i) continue;
            const std::size_t cand = undecided[p];
            const double d = squared_euclidean(plane[i], plane[cand]);
            if (d < best || (d == best && cand < best_index)) {
                best = d;
                best_index = cand;
                pos_j = p;
            }
        }
        const std::size_t j = undecided[pos_j];

        const double s = pi[i] + pi[j];
        if (s < 1.0) {
            if (rng.uniform01() < pi[j] / s) {
                pi[i] = 0.0;
                pi[j] = s;
            } else {
                pi[i] = s;
                pi[j] = 0.0;
            }
        } else {
            if (rng.uniform01() < (1.0 - pi[j]) / (2.0 - s)) {
                pi[i] = 1.0;
                pi[j] = s - 1.0;
            } else {
                pi[i] = s - 1.0;
                pi[j] = 1.0;
            }
        }
        if (pi[i] > kSnap && pi[i] < 1.0 - kSnap && pi[j] > kSnap && pi[j] < 1.0 - kSnap)
            throw NumericError("lpm2: pairwise update left both units undecided");

        if (observer) {
            Lpm2Step step;
            step.i = i;
            step.j = j;
            step.pi_i = pi[i];
            step.pi_j = pi[j];
            step.pi_sum = 0.0;
            for (double p : pi) step.pi_sum += p;
            observer(step);
        }

        // one of the pair is now decided; snap and remove (larger pos first)
        auto decided = [&](std::size_t u) { return pi[u] <= kSnap || pi[u] >= 1.0 - kSnap; };
        for (std::size_t u : {i, j}) {
            if (pi[u] <= kSnap)
                pi[u] = 0.0;
            else if (pi[u] >= 1.0 - kSnap)
                pi[u] = 1.0;
        }
        const std::size_t hi_pos = std::max(pos_i, pos_j);
        const std::size_t lo_pos = std::min(pos_i, pos_j);
        if (decided(undecided[hi_pos])) drop_decided(hi_pos);
        if (decided(undecided[lo_pos])) drop_decided(lo_pos);
    }

    if (undecided.size() == 1) {
        // total mass is an integer, so the leftover must be 0 or 1 up to rounding
        const std::size_t u = undecided[0];
        if (pi[u] < 1e-9)
            pi[u] = 0.0;
        else if (pi[u] > 1.0 - 1e-9)
            pi[u] = 1.0;
        else
            throw NumericError("lpm2: final unit not resolved, pi = " + std::to_string(pi[u]));
    }

    std::vector<std::size_t> selected;
    for (std::size_t k = 0; k < n; ++k)
        if (pi[k] == 1.0) selected.push_back(k);
    return selected;
}

/// Per-stratum sample counts from a realized sample.
inline std::vector<std::size_t> counts_by_stratum(const std::vector<std::size_t>& sample,
                                                  const std::vector<std::size_t>& strata,
                                                  std::size_t stratum_count) {
    std::vector<std::size_t> m(stratum_count, 0);
    for (std::size_t idx : sample) {
        if (idx >= strata.size()) throw DataError("sample index out of range");
        if (strata[idx] >= stratum_count) throw DataError("stratum label out of range");
        m[strata[idx]] += 1;
    }
    return m;
}

} // namespace crowdps
