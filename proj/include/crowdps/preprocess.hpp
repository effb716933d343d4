#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "crowdps/error.hpp"
#include "crowdps/log.hpp"
#include "crowdps/rng.hpp"
#include "crowdps/stats.hpp"
#include "crowdps/weights.hpp"

namespace crowdps {

enum class GlobalOutlierMethod { zscore, iqr };

struct GlobalOutlierConfig {
    GlobalOutlierMethod method = GlobalOutlierMethod::zscore;
    double z_threshold = 3.0; // flag when |value - mean| > t * sd
    double iqr_factor = 1.5;  // fences at q1 - c*iqr, q3 + c*iqr
};

/// Flags gross errors against the pooled distribution of a value series.
/// Degenerate spread (sd == 0 or iqr == 0) flags nothing and warns.
inline std::vector<bool> detect_global_outliers(const std::vector<double>& values,
                                                const GlobalOutlierConfig& cfg = {}) {
    if (values.size() < 4)
        throw DataError("global outlier screen needs at least 4 values, got " +
                        std::to_string(values.size()));
    for (double v : values)
        if (!std::isfinite(v)) throw DataError("global outlier screen saw a non-finite value");

    std::vector<bool> flags(values.size(), false);
    if (cfg.method == GlobalOutlierMethod::zscore) {
        if (cfg.z_threshold <= 0.0) throw ConfigError("z-score threshold must be positive");
        const double m = mean_of(values);
        const double sd = sample_sd(values);
        if (sd == 0.0) {
            log_warn("global outlier screen: zero spread, nothing flagged");
            return flags;
        }
        for (std::size_t i = 0; i < values.size(); ++i)
            flags[i] = std::abs(values[i] - m) > cfg.z_threshold * sd;
    } else {
        if (cfg.iqr_factor <= 0.0) throw ConfigError("iqr factor must be positive");
        const double q1 = quantile_type7(values, 0.25);
        const double q3 = quantile_type7(values, 0.75);
        const double iqr = q3 - q1;
        if (iqr == 0.0) {
            log_warn("global outlier screen: zero interquartile range, nothing flagged");
            return flags;
        }
        const double lo = q1 - cfg.iqr_factor * iqr;
        const double hi = q3 + cfg.iqr_factor * iqr;
        for (std::size_t i = 0; i < values.size(); ++i)
            flags[i] = values[i] < lo || values[i] > hi;
    }
    return flags;
}

struct SpatialOutlierResult {
    std::vector<bool> flags;           // true where the local deviation test fired
    std::vector<std::size_t> skipped;  // indices with fewer than 2 neighbors, not tested
    std::vector<double> lags;          // neighborhood means (NaN where skipped)
};

/// Flags units whose value deviates from the mean of their neighbors by more
/// than r neighbor-standard-deviations. Units with fewer than 2 neighbors
/// cannot support the spread estimate and are skipped, never flagged.
/// Zero neighbor spread flags exact disagreement with the neighborhood mean.
inline SpatialOutlierResult detect_spatial_outliers(const std::vector<double>& values,
                                                    const WeightMatrix& w, double r = 3.0) {
    if (r <= 0.0) throw ConfigError("spatial outlier multiplier must be positive");
    if (values.size() != w.size())
        throw DataError("value count does not match weight matrix size");

    SpatialOutlierResult out;
    out.flags.assign(values.size(), false);
    out.lags.assign(values.size(), std::numeric_limits<double>::quiet_NaN());
    for (std::size_t i = 0; i < values.size(); ++i) {
        const auto& nb = w.neighbors_of(i);
        if (nb.size() < 2) {
            out.skipped.push_back(i);
            continue;
        }
        std::vector<double> nv;
        nv.reserve(nb.size());
        for (std::size_t j : nb) nv.push_back(values[j]);
        const double lag = mean_of(nv);
        const double sd = sample_sd(nv);
        out.lags[i] = lag;
        if (sd == 0.0)
            out.flags[i] = values[i] != lag;
        else
            out.flags[i] = std::abs(values[i] - lag) > r * sd;
    }
    if (!out.skipped.empty())
        log_warn("spatial outlier screen skipped " + std::to_string(out.skipped.size()) +
                 " unit(s) with fewer than 2 neighbors");
    return out;
}

/// Replaces flagged values by their neighborhood mean, computed from the
/// ORIGINAL series in a single pass so replacements never feed each other.
inline std::vector<double> replace_spatial_outliers(const std::vector<double>& values,
                                                    const WeightMatrix& w,
                                                    const std::vector<bool>& flags) {
    if (values.size() != w.size() || flags.size() != values.size())
        throw DataError("replace_spatial_outliers: size mismatch");
    std::vector<double> out = values;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!flags[i]) continue;
        const auto& nb = w.neighbors_of(i);
        if (nb.empty()) throw DataError("cannot replace a flagged unit with no neighbors");
        double s = 0.0;
        for (std::size_t j : nb) s += values[j];
        out[i] = s / static_cast<double>(nb.size());
    }
    return out;
}

struct ImputeResult {
    std::vector<double> filled;            // gaps replaced by draws
    std::vector<std::size_t> imputed;      // indices that were filled
    std::vector<std::size_t> left_missing; // indices that could not be filled
};

/// Fills gaps in one series with Normal(mean, sd) draws from the observed
/// part, redrawing any draw that lands at or below the floor (price series
/// cannot be negative). A series with fewer than 2 observed values has no
/// usable moments; its gaps stay missing and are reported.
inline ImputeResult impute_series(const std::vector<std::optional<double>>& series, Rng& rng,
                                  std::optional<double> floor = 0.0) {
    std::vector<double> observed;
    for (const auto& v : series)
        if (v.has_value()) observed.push_back(*v);

    ImputeResult out;
    out.filled.resize(series.size());
    const bool can_fill = observed.size() >= 2;
    const double m = can_fill ? mean_of(observed) : 0.0;
    const double sd = can_fill ? sample_sd(observed) : 0.0;

    for (std::size_t i = 0; i < series.size(); ++i) {
        if (series[i].has_value()) {
            out.filled[i] = *series[i];
            continue;
        }
        if (!can_fill) {
            out.filled[i] = std::numeric_limits<double>::quiet_NaN();
            out.left_missing.push_back(i);
            continue;
        }
        double draw = rng.normal(m, sd);
        if (floor.has_value()) {
            int tries = 0;
            while (draw <= *floor && tries < 1000) {
                draw = rng.normal(m, sd);
                ++tries;
            }
            if (draw <= *floor) draw = m > *floor ? m : *floor + 1e-9;
        }
        out.filled[i] = draw;
        out.imputed.push_back(i);
    }
    if (!out.left_missing.empty())
        log_warn("imputation left " + std::to_string(out.left_missing.size()) +
                 " gap(s) unfilled: series has fewer than 2 observed values");
    return out;
}

} // namespace crowdps
