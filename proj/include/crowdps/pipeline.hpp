#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "crowdps/cluster.hpp"
#include "crowdps/designs.hpp"
#include "crowdps/distance.hpp"
#include "crowdps/error.hpp"
#include "crowdps/hash.hpp"
#include "crowdps/io.hpp"
#include "crowdps/log.hpp"
#include "crowdps/poststrat.hpp"
#include "crowdps/preprocess.hpp"
#include "crowdps/rng.hpp"
#include "crowdps/version.hpp"
#include "crowdps/weights.hpp"

namespace crowdps {

struct PipelineConfig {
    std::filesystem::path input;
    std::filesystem::path out_dir = "out";
    std::uint64_t seed = 0;
    bool seed_set = false; // a seed must be given explicitly, never wall-clock

    bool no_cleaning = false;
    int k_neighbors = 5;     // adjacency for the spatial screen
    double spatial_r = 3.0;
    GlobalOutlierMethod global_method = GlobalOutlierMethod::zscore;
    double z_threshold = 3.0;
    double iqr_factor = 1.5;

    std::size_t clusters = 0; // 0 = every location is its own cluster
    std::size_t kmeans_restarts = 10;

    std::string design = "lpm2"; // srs | stratified-pps | lpm2
    std::size_t design_n = 0;

    WeightingMode mode = WeightingMode::observation;

    void validate() const {
        if (input.empty()) throw ConfigError("config: input path is required");
        if (!std::filesystem::exists(input))
            throw ConfigError("config: input does not exist: " + input.string());
        if (!seed_set) throw ConfigError("config: seed is required");
        if (k_neighbors < 1) throw ConfigError("config: k_neighbors must be >= 1");
        if (spatial_r <= 0.0) throw ConfigError("config: spatial_r must be positive");
        if (z_threshold <= 0.0) throw ConfigError("config: z_threshold must be positive");
        if (iqr_factor <= 0.0) throw ConfigError("config: iqr_factor must be positive");
        if (kmeans_restarts == 0) throw ConfigError("config: kmeans_restarts must be >= 1");
        if (design != "srs" && design != "stratified-pps" && design != "lpm2")
            throw ConfigError("config: design must be srs, stratified-pps, or lpm2");
        if (design_n == 0) throw ConfigError("config: design_n must be >= 1");
    }
};

inline GlobalOutlierMethod global_method_from_string(const std::string& s) {
    if (s == "zscore") return GlobalOutlierMethod::zscore;
    if (s == "iqr") return GlobalOutlierMethod::iqr;
    throw ConfigError("global outlier method must be zscore or iqr, got '" + s + "'");
}

inline WeightingMode weighting_mode_from_string(const std::string& s) {
    if (s == "observation") return WeightingMode::observation;
    if (s == "cluster-mean" || s == "cluster_mean") return WeightingMode::cluster_mean;
    throw ConfigError("mode must be observation or cluster-mean, got '" + s + "'");
}

/// key = value file, one pair per line, full-line # comments. Relative paths
/// resolve against the config file's directory.
inline PipelineConfig load_pipeline_config(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config file " + path.string());
    const auto base = std::filesystem::absolute(path).parent_path();

    auto trim = [](std::string s) {
        const auto a = s.find_first_not_of(" \t\r");
        const auto b = s.find_last_not_of(" \t\r");
        return a == std::string::npos ? std::string{} : s.substr(a, b - a + 1);
    };
    auto as_bool = [](const std::string& v, const std::string& key) {
        if (v == "true" || v == "1") return true;
        if (v == "false" || v == "0") return false;
        throw ConfigError("config: " + key + " must be true or false");
    };
    auto resolve = [&](const std::string& v) {
        std::filesystem::path p(v);
        return p.is_absolute() ? p : base / p;
    };

    PipelineConfig cfg;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError(path.string() + ":" + std::to_string(lineno) +
                              ": expected key = value");
        const std::string key = trim(t.substr(0, eq));
        const std::string val = trim(t.substr(eq + 1));
        try {
            if (key == "input") cfg.input = resolve(val);
            else if (key == "out_dir") cfg.out_dir = resolve(val);
            else if (key == "seed") { cfg.seed = std::stoull(val); cfg.seed_set = true; }
            else if (key == "no_cleaning") cfg.no_cleaning = as_bool(val, key);
            else if (key == "k_neighbors") cfg.k_neighbors = std::stoi(val);
            else if (key == "spatial_r") cfg.spatial_r = std::stod(val);
            else if (key == "global_method") cfg.global_method = global_method_from_string(val);
            else if (key == "z_threshold") cfg.z_threshold = std::stod(val);
            else if (key == "iqr_factor") cfg.iqr_factor = std::stod(val);
            else if (key == "clusters") cfg.clusters = std::stoull(val);
            else if (key == "kmeans_restarts") cfg.kmeans_restarts = std::stoull(val);
            else if (key == "design") cfg.design = val;
            else if (key == "design_n") cfg.design_n = std::stoull(val);
            else if (key == "mode") cfg.mode = weighting_mode_from_string(val);
            else
                throw ConfigError(path.string() + ":" + std::to_string(lineno) +
                                  ": unknown key '" + key + "'");
        } catch (const std::invalid_argument&) {
            throw ConfigError(path.string() + ":" + std::to_string(lineno) +
                              ": cannot parse value for '" + key + "'");
        } catch (const std::out_of_range&) {
            throw ConfigError(path.string() + ":" + std::to_string(lineno) +
                              ": value out of range for '" + key + "'");
        }
    }
    return cfg;
}

struct StageTiming {
    std::string name;
    std::int64_t ms = 0;
};

struct RunManifest {
    std::string version = kVersion;
    std::uint64_t seed = 0;
    std::vector<std::pair<std::string, std::string>> config; // ordered key, value
    std::vector<StageTiming> stages;
    std::vector<std::pair<std::string, std::string>> artifacts; // file name, content hash
    bool ok = false;
    std::string failed_stage;
    std::string error;
};

enum class ObsTag { clean, missing, global_outlier, spatial_outlier };

inline const char* to_string(ObsTag t) {
    switch (t) {
        case ObsTag::clean: return "clean";
        case ObsTag::missing: return "missing";
        case ObsTag::global_outlier: return "global-outlier";
        default: return "spatial-outlier";
    }
}

struct ValueChange {
    std::string obs_id;
    std::optional<double> old_value; // empty when the field was missing
    double new_value = 0.0;
};

struct PipelineResult {
    std::vector<Observation> cleaned;        // final values, input order
    std::vector<ObsTag> tags;                // one tag per observation
    std::vector<bool> usable;                // false = no value even after cleaning
    std::vector<ValueChange> changes;        // imputations and replacements
    std::vector<std::string> markets;        // sorted unique location ids
    std::vector<std::size_t> market_of;      // observation -> market index
    std::vector<GeoPoint> market_points;
    std::vector<std::size_t> market_cluster; // market -> cluster label
    std::vector<std::size_t> selected;       // design-selected market indices
    PostSamplingWeights weights;             // per-cluster, counted in markets
    EstimateReport report;
    RunManifest manifest;
};

/// How far the pipeline runs: the cleaning stages only, through clustering,
/// through design selection, or all the way to the estimate.
enum class PipelineStop { cleaning, clustering, design, estimate };

namespace detail {

inline std::string jstr(const std::string& s) { return nlohmann::json(s).dump(); }

inline std::string jnum(double v) {
    if (std::isnan(v)) return "null";
    return to_fixed(v);
}

class ArtifactWriter {
public:
    ArtifactWriter(std::filesystem::path dir, RunManifest& manifest)
        : dir_(std::move(dir)), manifest_(manifest) {}

    void write(const std::string& name, const std::string& content) {
        write_text_atomic(dir_ / name, content);
        manifest_.artifacts.emplace_back(name, to_hex(fnv1a64(content)));
    }

private:
    std::filesystem::path dir_;
    RunManifest& manifest_;
};

inline std::string render_manifest_json(const RunManifest& m) {
    std::ostringstream os;
    os << "{\n";
    os << "  \"version\": " << jstr(m.version) << ",\n";
    os << "  \"seed\": " << m.seed << ",\n";
    os << "  \"ok\": " << (m.ok ? "true" : "false") << ",\n";
    if (!m.ok) {
        os << "  \"failed_stage\": " << jstr(m.failed_stage) << ",\n";
        os << "  \"error\": " << jstr(m.error) << ",\n";
    }
    os << "  \"config\": {";
    for (std::size_t i = 0; i < m.config.size(); ++i)
        os << (i ? ", " : "") << jstr(m.config[i].first) << ": " << jstr(m.config[i].second);
    os << "},\n";
    os << "  \"stages\": [";
    for (std::size_t i = 0; i < m.stages.size(); ++i)
        os << (i ? ", " : "") << "{\"name\": " << jstr(m.stages[i].name)
           << ", \"ms\": " << m.stages[i].ms << "}";
    os << "],\n";
    os << "  \"artifacts\": {";
    for (std::size_t i = 0; i < m.artifacts.size(); ++i)
        os << (i ? ", " : "") << jstr(m.artifacts[i].first) << ": "
           << jstr(m.artifacts[i].second);
    os << "}\n}\n";
    return os.str();
}

inline void snapshot_config(const PipelineConfig& cfg, RunManifest& m) {
    m.config.emplace_back("input", cfg.input.string());
    m.config.emplace_back("out_dir", cfg.out_dir.string());
    m.config.emplace_back("seed", std::to_string(cfg.seed));
    m.config.emplace_back("no_cleaning", cfg.no_cleaning ? "true" : "false");
    m.config.emplace_back("k_neighbors", std::to_string(cfg.k_neighbors));
    m.config.emplace_back("spatial_r", to_fixed(cfg.spatial_r, 3));
    m.config.emplace_back("global_method",
                          cfg.global_method == GlobalOutlierMethod::zscore ? "zscore" : "iqr");
    m.config.emplace_back("z_threshold", to_fixed(cfg.z_threshold, 3));
    m.config.emplace_back("iqr_factor", to_fixed(cfg.iqr_factor, 3));
    m.config.emplace_back("clusters", std::to_string(cfg.clusters));
    m.config.emplace_back("kmeans_restarts", std::to_string(cfg.kmeans_restarts));
    m.config.emplace_back("design", cfg.design);
    m.config.emplace_back("design_n", std::to_string(cfg.design_n));
    m.config.emplace_back("mode", to_string(cfg.mode));
}

// stage seeds live far from the substream indices used inside kmeans restarts
inline constexpr std::uint64_t kImputeStream = 1001;
inline constexpr std::uint64_t kReimputeStream = 1002;
inline constexpr std::uint64_t kDesignStream = 1003;

struct Panel {
    std::vector<std::string> markets;
    std::vector<std::size_t> market_of; // per observation
    std::vector<GeoPoint> market_points;
    std::vector<std::string> dates;     // sorted unique
    std::vector<std::size_t> date_of;   // per observation
};

inline Panel build_panel(const std::vector<Observation>& obs) {
    Panel p;
    for (const auto& o : obs) p.markets.push_back(o.location_id);
    std::sort(p.markets.begin(), p.markets.end());
    p.markets.erase(std::unique(p.markets.begin(), p.markets.end()), p.markets.end());
    for (const auto& o : obs) p.dates.push_back(o.date);
    std::sort(p.dates.begin(), p.dates.end());
    p.dates.erase(std::unique(p.dates.begin(), p.dates.end()), p.dates.end());

    auto market_index = [&](const std::string& id) {
        return static_cast<std::size_t>(
            std::lower_bound(p.markets.begin(), p.markets.end(), id) - p.markets.begin());
    };
    auto date_index = [&](const std::string& d) {
        return static_cast<std::size_t>(
            std::lower_bound(p.dates.begin(), p.dates.end(), d) - p.dates.begin());
    };

    p.market_points.assign(p.markets.size(), GeoPoint{});
    std::vector<bool> have_point(p.markets.size(), false);
    p.market_of.reserve(obs.size());
    p.date_of.reserve(obs.size());
    for (const auto& o : obs) {
        const std::size_t m = market_index(o.location_id);
        p.market_of.push_back(m);
        p.date_of.push_back(date_index(o.date));
        if (!have_point[m]) {
            p.market_points[m] = o.point;
            have_point[m] = true;
        } else if (p.market_points[m].x != o.point.x || p.market_points[m].y != o.point.y) {
            log_warn("location " + o.location_id +
                     " reports more than one coordinate; using the first");
        }
    }
    return p;
}

} // namespace detail

/// Runs the staged pipeline: ingest, cleaning (imputation, global screen,
/// spatial screen), clustering, benchmark design, post-sampling ratios,
/// estimate. Every stage writes its artifact into out_dir; the manifest goes
/// last. A stage failure persists a partial manifest naming the stage, then
/// rethrows.
inline PipelineResult run_pipeline(const PipelineConfig& cfg,
                                   PipelineStop stop = PipelineStop::estimate) {
    cfg.validate();
    std::filesystem::create_directories(cfg.out_dir);

    PipelineResult res;
    res.manifest.seed = cfg.seed;
    detail::snapshot_config(cfg, res.manifest);
    detail::ArtifactWriter artifacts(cfg.out_dir, res.manifest);

    std::string current_stage;
    auto finish_manifest = [&]() {
        const std::string rendered = detail::render_manifest_json(res.manifest);
        write_text_atomic(cfg.out_dir / "manifest.json", rendered);
    };

    try {
        using clock = std::chrono::steady_clock;
        auto timed = [&](const std::string& name, auto&& fn) {
            current_stage = name;
            const auto t0 = clock::now();
            fn();
            const auto t1 = clock::now();
            res.manifest.stages.push_back(
                {name, std::chrono::duration_cast<std::chrono::milliseconds>(t1 - t0).count()});
        };

        detail::Panel panel;
        std::vector<Observation> obs;
        std::vector<RejectedRow> rejects;

        timed("ingest", [&] {
            auto in = ingest(cfg.input, ingest_format_from_path(cfg.input));
            obs = std::move(in.observations);
            rejects = std::move(in.rejects);
            artifacts.write("rejects.csv", render_rejects_csv(rejects));
            panel = detail::build_panel(obs);
        });

        res.tags.assign(obs.size(), ObsTag::clean);
        res.usable.assign(obs.size(), false);
        for (std::size_t i = 0; i < obs.size(); ++i) res.usable[i] = obs[i].value.has_value();

        std::vector<std::size_t> spatial_skipped_dates;

        if (!cfg.no_cleaning) {
            timed("impute", [&] {
                Rng rng = Rng::substream(cfg.seed, detail::kImputeStream);
                for (std::size_t m = 0; m < panel.markets.size(); ++m) {
                    std::vector<std::size_t> members;
                    for (std::size_t i = 0; i < obs.size(); ++i)
                        if (panel.market_of[i] == m) members.push_back(i);
                    std::sort(members.begin(), members.end(), [&](std::size_t a, std::size_t b) {
                        return std::tie(obs[a].date, obs[a].obs_id) <
                               std::tie(obs[b].date, obs[b].obs_id);
                    });
                    std::vector<std::optional<double>> series;
                    for (std::size_t i : members) series.push_back(obs[i].value);
                    const auto fill = impute_series(series, rng);
                    for (std::size_t k : fill.imputed) {
                        const std::size_t i = members[k];
                        res.changes.push_back({obs[i].obs_id, std::nullopt, fill.filled[k]});
                        obs[i].value = fill.filled[k];
                        res.tags[i] = ObsTag::missing;
                        res.usable[i] = true;
                    }
                    for (std::size_t k : fill.left_missing) res.tags[members[k]] = ObsTag::missing;
                }
            });

            timed("global-outliers", [&] {
                std::vector<std::size_t> idx;
                std::vector<double> vals;
                for (std::size_t i = 0; i < obs.size(); ++i)
                    if (res.usable[i]) {
                        idx.push_back(i);
                        vals.push_back(*obs[i].value);
                    }
                if (vals.size() < 4) {
                    log_warn("global outlier screen skipped: fewer than 4 usable values");
                    return;
                }
                GlobalOutlierConfig gcfg;
                gcfg.method = cfg.global_method;
                gcfg.z_threshold = cfg.z_threshold;
                gcfg.iqr_factor = cfg.iqr_factor;
                const auto flags = detect_global_outliers(vals, gcfg);

                std::vector<std::optional<double>> old_values(obs.size());
                for (std::size_t k = 0; k < idx.size(); ++k) {
                    if (!flags[k]) continue;
                    const std::size_t i = idx[k];
                    old_values[i] = obs[i].value;
                    obs[i].value.reset();
                    res.usable[i] = false;
                    if (res.tags[i] == ObsTag::clean) res.tags[i] = ObsTag::global_outlier;
                }

                Rng rng = Rng::substream(cfg.seed, detail::kReimputeStream);
                for (std::size_t m = 0; m < panel.markets.size(); ++m) {
                    std::vector<std::size_t> members;
                    for (std::size_t i = 0; i < obs.size(); ++i)
                        if (panel.market_of[i] == m && (res.usable[i] || old_values[i]))
                            members.push_back(i);
                    bool any_gap = false;
                    for (std::size_t i : members)
                        if (!obs[i].value) any_gap = true;
                    if (!any_gap) continue;
                    std::sort(members.begin(), members.end(), [&](std::size_t a, std::size_t b) {
                        return std::tie(obs[a].date, obs[a].obs_id) <
                               std::tie(obs[b].date, obs[b].obs_id);
                    });
                    std::vector<std::optional<double>> series;
                    for (std::size_t i : members) series.push_back(obs[i].value);
                    const auto fill = impute_series(series, rng);
                    for (std::size_t k : fill.imputed) {
                        const std::size_t i = members[k];
                        res.changes.push_back({obs[i].obs_id, old_values[i], fill.filled[k]});
                        obs[i].value = fill.filled[k];
                        res.usable[i] = true;
                    }
                }
            });

            timed("spatial-outliers", [&] {
                for (std::size_t d = 0; d < panel.dates.size(); ++d) {
                    std::vector<std::size_t> present; // market indices with data at this date
                    std::vector<std::vector<std::size_t>> cell(panel.markets.size());
                    for (std::size_t i = 0; i < obs.size(); ++i)
                        if (res.usable[i] && panel.date_of[i] == d)
                            cell[panel.market_of[i]].push_back(i);
                    for (std::size_t m = 0; m < panel.markets.size(); ++m)
                        if (!cell[m].empty()) present.push_back(m);

                    const int k_eff =
                        std::min<int>(cfg.k_neighbors, static_cast<int>(present.size()) - 1);
                    if (present.size() < 3 || k_eff < 2) {
                        spatial_skipped_dates.push_back(d);
                        continue;
                    }

                    std::vector<GeoPoint> pts;
                    std::vector<double> vals;
                    for (std::size_t m : present) {
                        pts.push_back(panel.market_points[m]);
                        double s = 0.0;
                        for (std::size_t i : cell[m]) s += *obs[i].value;
                        vals.push_back(s / static_cast<double>(cell[m].size()));
                    }
                    const auto dist = default_distance_matrix(pts);
                    const auto w =
                        build_weight_matrix(dist, NeighborRule::k_nearest_rule(k_eff));
                    const auto hit = detect_spatial_outliers(vals, w, cfg.spatial_r);
                    const auto fixed = replace_spatial_outliers(vals, w, hit.flags);
                    for (std::size_t p = 0; p < present.size(); ++p) {
                        if (!hit.flags[p]) continue;
                        for (std::size_t i : cell[present[p]]) {
                            res.changes.push_back({obs[i].obs_id, obs[i].value, fixed[p]});
                            obs[i].value = fixed[p];
                            if (res.tags[i] == ObsTag::clean)
                                res.tags[i] = ObsTag::spatial_outlier;
                        }
                    }
                }
                if (!spatial_skipped_dates.empty())
                    log_warn("spatial screen skipped " +
                             std::to_string(spatial_skipped_dates.size()) +
                             " date(s) with too few locations");
            });
        }

        timed("write-cleaned", [&] {
            artifacts.write("cleaned.csv", render_observations_csv(obs));

            std::ostringstream os;
            std::size_t n_clean = 0, n_missing = 0, n_global = 0, n_spatial = 0;
            for (const auto t : res.tags) {
                if (t == ObsTag::clean) ++n_clean;
                else if (t == ObsTag::missing) ++n_missing;
                else if (t == ObsTag::global_outlier) ++n_global;
                else ++n_spatial;
            }
            os << "{\n";
            os << "  \"thresholds\": {\"global_method\": "
               << detail::jstr(cfg.global_method == GlobalOutlierMethod::zscore ? "zscore"
                                                                                : "iqr")
               << ", \"z_threshold\": " << detail::jnum(cfg.z_threshold)
               << ", \"iqr_factor\": " << detail::jnum(cfg.iqr_factor)
               << ", \"spatial_r\": " << detail::jnum(cfg.spatial_r)
               << ", \"k_neighbors\": " << cfg.k_neighbors
               << ", \"cleaning\": " << (cfg.no_cleaning ? "false" : "true") << "},\n";
            os << "  \"counts\": {\"clean\": " << n_clean << ", \"missing\": " << n_missing
               << ", \"global-outlier\": " << n_global << ", \"spatial-outlier\": " << n_spatial
               << "},\n";
            os << "  \"skipped_dates\": " << spatial_skipped_dates.size() << ",\n";
            os << "  \"flags\": [";
            for (std::size_t i = 0; i < obs.size(); ++i)
                os << (i ? ", " : "") << "{\"obs_id\": " << detail::jstr(obs[i].obs_id)
                   << ", \"tag\": " << detail::jstr(to_string(res.tags[i])) << "}";
            os << "],\n";
            os << "  \"replaced\": [";
            for (std::size_t c = 0; c < res.changes.size(); ++c) {
                const auto& ch = res.changes[c];
                os << (c ? ", " : "") << "{\"obs_id\": " << detail::jstr(ch.obs_id) << ", \"old\": "
                   << (ch.old_value ? detail::jnum(*ch.old_value) : std::string("null"))
                   << ", \"new\": " << detail::jnum(ch.new_value) << "}";
            }
            os << "]\n}\n";
            artifacts.write("outliers.json", os.str());
        });

        res.cleaned = obs;
        res.markets = panel.markets;
        res.market_of = panel.market_of;
        res.market_points = panel.market_points;

        if (stop == PipelineStop::cleaning) {
            res.manifest.ok = true;
            finish_manifest();
            return res;
        }

        timed("cluster", [&] {
            if (cfg.clusters == 0) {
                res.market_cluster.resize(panel.markets.size());
                for (std::size_t m = 0; m < panel.markets.size(); ++m) res.market_cluster[m] = m;
            } else {
                KmeansConfig kc;
                kc.k = cfg.clusters;
                kc.restarts = cfg.kmeans_restarts;
                kc.seed = cfg.seed;
                const auto assignment = kmeans(panel.market_points, kc);
                res.market_cluster = assignment.labels;
            }
            std::ostringstream os;
            os << "location_id,lat,lon,cluster\n";
            for (std::size_t m = 0; m < panel.markets.size(); ++m)
                os << csv_quote(panel.markets[m]) << ',' << to_fixed(panel.market_points[m].y)
                   << ',' << to_fixed(panel.market_points[m].x) << ',' << res.market_cluster[m]
                   << '\n';
            artifacts.write("clusters.csv", os.str());
        });

        if (stop == PipelineStop::clustering) {
            res.manifest.ok = true;
            finish_manifest();
            return res;
        }

        const std::size_t cluster_count =
            cfg.clusters == 0 ? panel.markets.size() : cfg.clusters;

        timed("design", [&] {
            if (cfg.design_n > panel.markets.size())
                throw ConfigError("design_n exceeds the number of locations");
            Rng rng = Rng::substream(cfg.seed, detail::kDesignStream);
            if (cfg.design == "srs") {
                res.selected = srs_sample(panel.markets.size(), cfg.design_n, rng);
            } else if (cfg.design == "stratified-pps") {
                res.selected = stratified_pps_sample(res.market_cluster, cfg.design_n, rng);
            } else {
                const auto pi = equal_inclusion_probabilities(panel.markets.size(), cfg.design_n);
                res.selected = lpm2_sample(panel.market_points, pi, rng);
            }
            const auto m_l = counts_by_stratum(res.selected, res.market_cluster, cluster_count);

            std::ostringstream os;
            os << "{\n";
            os << "  \"design\": " << detail::jstr(cfg.design) << ",\n";
            os << "  \"n\": " << cfg.design_n << ",\n";
            os << "  \"seed\": " << cfg.seed << ",\n";
            os << "  \"selected\": [";
            for (std::size_t s = 0; s < res.selected.size(); ++s)
                os << (s ? ", " : "") << detail::jstr(panel.markets[res.selected[s]]);
            os << "],\n";
            os << "  \"per_cluster_m\": [";
            for (std::size_t l = 0; l < m_l.size(); ++l) os << (l ? ", " : "") << m_l[l];
            os << "]\n}\n";
            artifacts.write("design.json", os.str());
        });

        if (stop == PipelineStop::design) {
            res.manifest.ok = true;
            finish_manifest();
            return res;
        }

        timed("ratios", [&] {
            std::vector<std::size_t> n_l(cluster_count, 0);
            for (std::size_t m = 0; m < panel.markets.size(); ++m)
                n_l[res.market_cluster[m]] += 1;
            const auto m_l = counts_by_stratum(res.selected, res.market_cluster, cluster_count);
            res.weights = post_sampling_ratios(n_l, m_l);

            std::ostringstream os;
            os << "{\n  \"clusters\": [";
            for (std::size_t l = 0; l < cluster_count; ++l) {
                os << (l ? ", " : "")
                   << "{\"cluster\": " << l << ", \"n\": " << res.weights.crowd_counts[l]
                   << ", \"m\": " << res.weights.design_counts[l]
                   << ", \"ps\": " << detail::jnum(res.weights.ps[l]) << "}";
            }
            os << "],\n";
            os << "  \"excluded\": [";
            for (std::size_t e = 0; e < res.weights.excluded.size(); ++e)
                os << (e ? ", " : "") << res.weights.excluded[e];
            os << "],\n  \"zero_weight\": [";
            for (std::size_t z = 0; z < res.weights.zero_weight.size(); ++z)
                os << (z ? ", " : "") << res.weights.zero_weight[z];
            os << "]\n}\n";
            artifacts.write("weights.json", os.str());
        });

        timed("estimate", [&] {
            std::vector<double> values;
            std::vector<std::size_t> labels;
            for (std::size_t i = 0; i < obs.size(); ++i) {
                if (!res.usable[i]) continue;
                values.push_back(*obs[i].value);
                labels.push_back(res.market_cluster[panel.market_of[i]]);
            }
            res.report = weighted_estimate(values, labels, res.weights, cfg.mode);

            std::ostringstream os;
            os << "{\n";
            os << "  \"point_estimate\": " << detail::jnum(res.report.corrected) << ",\n";
            os << "  \"uncorrected_mean\": " << detail::jnum(res.report.uncorrected) << ",\n";
            os << "  \"relative_change\": " << detail::jnum(res.report.relative_change) << ",\n";
            os << "  \"mode\": " << detail::jstr(to_string(res.report.mode)) << ",\n";
            os << "  \"used_locations\": " << res.report.used_locations << ",\n";
            os << "  \"used_observations\": " << res.report.used_observations << ",\n";
            os << "  \"per_cluster\": [";
            for (std::size_t l = 0; l < cluster_count; ++l) {
                os << (l ? ", " : "") << "{\"cluster\": " << l
                   << ", \"markets\": " << res.weights.crowd_counts[l]
                   << ", \"m\": " << res.weights.design_counts[l]
                   << ", \"ps\": " << detail::jnum(res.weights.ps[l])
                   << ", \"observations\": " << res.report.location_obs[l]
                   << ", \"mean\": " << detail::jnum(res.report.location_means[l]) << "}";
            }
            os << "]\n}\n";
            artifacts.write("estimate.json", os.str());
        });

        res.manifest.ok = true;
        finish_manifest();
        return res;
    } catch (const std::exception& e) {
        res.manifest.ok = false;
        res.manifest.failed_stage = current_stage;
        res.manifest.error = e.what();
        finish_manifest();
        throw;
    }
}

} // namespace crowdps
