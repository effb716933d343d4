#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "crowdps/error.hpp"
#include "crowdps/log.hpp"

namespace crowdps {

struct PostSamplingWeights {
    std::vector<double> ps;                 // m_l / n_l per location (0 where excluded)
    std::vector<std::size_t> crowd_counts;  // n_l
    std::vector<std::size_t> design_counts; // m_l
    std::vector<std::size_t> excluded;      // design wants the location, crowd never visited
    std::vector<std::size_t> zero_weight;   // crowd visited, design assigns nothing
};

/// Ratio of design-implied to realized observation counts per location.
/// A location the crowd never visited cannot carry weight and is excluded;
/// a location the design skips keeps its observations at weight zero.
inline PostSamplingWeights post_sampling_ratios(const std::vector<std::size_t>& crowd_counts,
                                                const std::vector<std::size_t>& design_counts) {
    if (crowd_counts.size() != design_counts.size())
        throw ConfigError("post-sampling ratios: count vectors differ in length");
    if (crowd_counts.empty()) throw ConfigError("post-sampling ratios: no locations");

    PostSamplingWeights w;
    w.crowd_counts = crowd_counts;
    w.design_counts = design_counts;
    w.ps.assign(crowd_counts.size(), 0.0);
    for (std::size_t l = 0; l < crowd_counts.size(); ++l) {
        if (crowd_counts[l] == 0) {
            if (design_counts[l] > 0) w.excluded.push_back(l);
            continue;
        }
        if (design_counts[l] == 0) {
            w.zero_weight.push_back(l);
            continue;
        }
        w.ps[l] = static_cast<double>(design_counts[l]) / static_cast<double>(crowd_counts[l]);
    }
    if (!w.excluded.empty())
        log_warn("post-sampling ratios: " + std::to_string(w.excluded.size()) +
                 " location(s) in the design have no crowd observations and are dropped");
    return w;
}

enum class WeightingMode { observation, cluster_mean };

inline const char* to_string(WeightingMode m) {
    return m == WeightingMode::observation ? "observation" : "cluster_mean";
}

struct EstimateReport {
    double corrected = 0.0;    // reweighted estimate
    double uncorrected = 0.0;  // plain mean over all usable observations
    double relative_change = 0.0; // corrected / uncorrected - 1
    WeightingMode mode = WeightingMode::observation;
    std::size_t used_locations = 0;    // locations with positive weight
    std::size_t used_observations = 0; // observations behind those locations
    std::vector<double> location_means;        // NaN where a location has no data
    std::vector<std::size_t> location_obs;     // observation count per location
};

/// Reweighted mean of a crowdsourced value series. Observation mode weights
/// every observation by its location's ratio; cluster-mean mode collapses each
/// location to its mean first and weights those. Labels index into weights.ps.
inline EstimateReport weighted_estimate(const std::vector<double>& values,
                                        const std::vector<std::size_t>& labels,
                                        const PostSamplingWeights& weights,
                                        WeightingMode mode = WeightingMode::observation) {
    if (values.size() != labels.size())
        throw ConfigError("weighted estimate: values and labels differ in length");
    if (values.empty()) throw DataError("weighted estimate: no observations");

    const std::size_t loc_count = weights.ps.size();
    std::vector<double> sums(loc_count, 0.0);
    std::vector<std::size_t> counts(loc_count, 0);
    double total = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (labels[i] >= loc_count) throw DataError("weighted estimate: label out of range");
        if (!std::isfinite(values[i])) throw DataError("weighted estimate: non-finite value");
        sums[labels[i]] += values[i];
        counts[labels[i]] += 1;
        total += values[i];
    }

    EstimateReport r;
    r.mode = mode;
    r.uncorrected = total / static_cast<double>(values.size());
    r.location_obs = counts;
    r.location_means.assign(loc_count, std::numeric_limits<double>::quiet_NaN());
    for (std::size_t l = 0; l < loc_count; ++l)
        if (counts[l] > 0) r.location_means[l] = sums[l] / static_cast<double>(counts[l]);

    double num = 0.0;
    double den = 0.0;
    for (std::size_t l = 0; l < loc_count; ++l) {
        if (counts[l] == 0 || weights.ps[l] == 0.0) continue;
        if (mode == WeightingMode::observation) {
            num += weights.ps[l] * sums[l];
            den += weights.ps[l] * static_cast<double>(counts[l]);
        } else {
            num += weights.ps[l] * (sums[l] / static_cast<double>(counts[l]));
            den += weights.ps[l];
        }
        r.used_locations += 1;
        r.used_observations += counts[l];
    }
    if (den == 0.0)
        throw NumericError("weighted estimate: every location has zero weight, "
                           "no effective sample remains");
    r.corrected = num / den;
    r.relative_change = r.corrected / r.uncorrected - 1.0;
    return r;
}

/// Horvitz-Thompson mean: inverse-probability-weighted total over the realized
/// sample, scaled by the population size.
inline double ht_estimate(const std::vector<double>& sampled_values,
                          const std::vector<double>& sampled_pi, std::size_t population_size) {
    if (sampled_values.size() != sampled_pi.size())
        throw ConfigError("ht estimate: values and probabilities differ in length");
    if (sampled_values.empty()) throw DataError("ht estimate: empty sample");
    if (population_size == 0) throw ConfigError("ht estimate: population size must be positive");
    double total = 0.0;
    for (std::size_t i = 0; i < sampled_values.size(); ++i) {
        if (!(sampled_pi[i] > 0.0 && sampled_pi[i] <= 1.0))
            throw ConfigError("ht estimate: sampled units need pi in (0, 1]");
        total += sampled_values[i] / sampled_pi[i];
    }
    return total / static_cast<double>(population_size);
}

} // namespace crowdps
