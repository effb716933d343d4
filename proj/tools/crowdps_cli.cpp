// Command-line front end: validate, cluster, design, estimate, pipeline,
// simulate. Exit codes: 0 ok, 2 configuration, 3 data, 4 numeric.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "crowdps/crowdps.hpp"

namespace {

struct FlagOverrides {
    std::optional<std::string> input;
    std::optional<std::string> out_dir;
    std::optional<std::uint64_t> seed;
    std::optional<bool> no_cleaning;
    std::optional<int> k_neighbors;
    std::optional<double> spatial_r;
    std::optional<std::string> global_method;
    std::optional<double> z_threshold;
    std::optional<double> iqr_factor;
    std::optional<std::size_t> clusters;
    std::optional<std::size_t> kmeans_restarts;
    std::optional<std::string> design;
    std::optional<std::size_t> design_n;
    std::optional<std::string> mode;
};

void add_common_flags(CLI::App* cmd, FlagOverrides& f, std::optional<std::string>& config_path) {
    cmd->add_option("--config", config_path, "key = value config file; flags override it");
    cmd->add_option("-i,--input", f.input, "observation file (.csv or .geojson)");
    cmd->add_option("-o,--out-dir", f.out_dir, "artifact directory");
    cmd->add_option("--seed", f.seed, "master RNG seed (required, no wall-clock default)");
    cmd->add_flag_callback(
        "--no-cleaning", [&f] { f.no_cleaning = true; },
        "skip imputation and outlier screens");
    cmd->add_option("--k-neighbors", f.k_neighbors, "neighbor count for the spatial screen");
    cmd->add_option("--spatial-r", f.spatial_r, "spatial outlier deviation multiplier");
    cmd->add_option("--global-method", f.global_method, "global outlier rule: zscore or iqr");
    cmd->add_option("--z-threshold", f.z_threshold, "z-score cutoff");
    cmd->add_option("--iqr-factor", f.iqr_factor, "iqr fence factor");
    cmd->add_option("-k,--k", f.clusters, "cluster count (0 = one cluster per location)");
    cmd->add_option("--restarts", f.kmeans_restarts, "k-means restarts");
    cmd->add_option("--design", f.design, "benchmark design: srs, stratified-pps, or lpm2");
    cmd->add_option("-n,--n", f.design_n, "benchmark design size");
    cmd->add_option("--mode", f.mode, "estimator mode: observation or cluster-mean");
}

crowdps::PipelineConfig resolve_config(const std::optional<std::string>& config_path,
                                       const FlagOverrides& f) {
    crowdps::PipelineConfig cfg;
    if (config_path) cfg = crowdps::load_pipeline_config(*config_path);
    if (f.input) cfg.input = *f.input;
    if (f.out_dir) cfg.out_dir = *f.out_dir;
    if (f.seed) {
        cfg.seed = *f.seed;
        cfg.seed_set = true;
    }
    if (f.no_cleaning) cfg.no_cleaning = *f.no_cleaning;
    if (f.k_neighbors) cfg.k_neighbors = *f.k_neighbors;
    if (f.spatial_r) cfg.spatial_r = *f.spatial_r;
    if (f.global_method) cfg.global_method = crowdps::global_method_from_string(*f.global_method);
    if (f.z_threshold) cfg.z_threshold = *f.z_threshold;
    if (f.iqr_factor) cfg.iqr_factor = *f.iqr_factor;
    if (f.clusters) cfg.clusters = *f.clusters;
    if (f.kmeans_restarts) cfg.kmeans_restarts = *f.kmeans_restarts;
    if (f.design) cfg.design = *f.design;
    if (f.design_n) cfg.design_n = *f.design_n;
    if (f.mode) cfg.mode = crowdps::weighting_mode_from_string(*f.mode);
    return cfg;
}

void print_cleaning_summary(const crowdps::PipelineResult& res) {
    std::size_t clean = 0, missing = 0, global = 0, spatial = 0;
    for (auto t : res.tags) {
        using crowdps::ObsTag;
        if (t == ObsTag::clean) ++clean;
        else if (t == ObsTag::missing) ++missing;
        else if (t == ObsTag::global_outlier) ++global;
        else ++spatial;
    }
    std::cout << "observations: " << res.tags.size() << " (clean " << clean << ", missing "
              << missing << ", global-outlier " << global << ", spatial-outlier " << spatial
              << ")\n";
}

void print_estimate(const crowdps::PipelineResult& res) {
    std::cout << "design: selected " << res.selected.size() << " of " << res.markets.size()
              << " locations\n";
    std::cout << "uncorrected mean: " << crowdps::to_fixed(res.report.uncorrected, 4) << "\n";
    std::cout << "corrected estimate (" << crowdps::to_string(res.report.mode)
              << "): " << crowdps::to_fixed(res.report.corrected, 4) << "\n";
    std::cout << "relative change: "
              << crowdps::to_fixed(100.0 * res.report.relative_change, 2) << "%\n";
}

int run_simulate(std::size_t replications, std::uint64_t seed, double lambda, int k_neighbors,
                 bool redraw, std::size_t threads, std::size_t block_size,
                 const std::string& out_dir) {
    crowdps::McConfig mc;
    mc.spec = crowdps::four_quadrant_population(800, 60, 60, 80, lambda,
                                                static_cast<std::size_t>(k_neighbors));
    mc.replications = replications;
    mc.seed = seed;
    mc.redraw_population = redraw;
    mc.threads = threads;

    const auto res = crowdps::run_monte_carlo(mc);

    std::filesystem::create_directories(out_dir);
    std::ostringstream js;
    js << "{\n";
    js << "  \"replications\": " << res.replications << ",\n";
    js << "  \"seed\": " << res.seed << ",\n";
    js << "  \"lambda\": " << crowdps::to_fixed(lambda, 3) << ",\n";
    js << "  \"k_neighbors\": " << k_neighbors << ",\n";
    js << "  \"redraw_population\": " << (redraw ? "true" : "false") << ",\n";
    js << "  \"truth_mean\": " << crowdps::to_fixed(crowdps::mean_of(res.truth), 9) << ",\n";
    js << "  \"strategies\": [";
    const char* names[] = {"naive-mean", "pps-post-sampling", "lpm2-post-sampling"};
    for (std::size_t s = 0; s < res.strategies.size(); ++s) {
        const auto& st = res.strategies[s];
        js << (s ? ", " : "") << "{\"name\": \"" << names[s]
           << "\", \"mean\": " << crowdps::to_fixed(st.mean, 9)
           << ", \"variance\": " << crowdps::to_fixed(st.variance, 9)
           << ", \"abs_relative_bias\": " << crowdps::to_fixed(st.abs_relative_bias, 9)
           << ", \"efficiency\": " << crowdps::to_fixed(st.efficiency, 9) << "}";
    }
    js << "]\n}\n";
    crowdps::write_text_atomic(std::filesystem::path(out_dir) / "mc_result.json", js.str());

    std::ostringstream hist;
    crowdps::emit_efficiency_histogram(res, hist, block_size);
    crowdps::write_text_atomic(std::filesystem::path(out_dir) / "efficiency_hist.csv",
                               hist.str());

    for (std::size_t s = 0; s < res.strategies.size(); ++s) {
        const auto& st = res.strategies[s];
        std::cout << names[s] << ": mean " << crowdps::to_fixed(st.mean, 5) << ", variance "
                  << crowdps::to_fixed(st.variance, 6) << ", |rel bias| "
                  << crowdps::to_fixed(st.abs_relative_bias, 4) << ", efficiency "
                  << crowdps::to_fixed(st.efficiency, 3) << "\n";
    }
    std::cout << "wrote " << out_dir << "/mc_result.json and efficiency_hist.csv\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"post-sampling reweighting for crowdsourced geolocated observations"};
    app.require_subcommand(1);

    std::optional<std::string> config_path;
    FlagOverrides flags;

    auto* validate = app.add_subcommand("validate", "ingest and clean, no estimation");
    add_common_flags(validate, flags, config_path);

    auto* cluster = app.add_subcommand("cluster", "group locations with k-means");
    add_common_flags(cluster, flags, config_path);

    auto* design = app.add_subcommand("design", "draw the benchmark sampling design");
    add_common_flags(design, flags, config_path);

    auto* estimate = app.add_subcommand("estimate", "full pipeline, print the estimate");
    add_common_flags(estimate, flags, config_path);

    auto* pipeline = app.add_subcommand("pipeline", "full pipeline, print the manifest path");
    add_common_flags(pipeline, flags, config_path);

    auto* simulate = app.add_subcommand("simulate", "Monte Carlo strategy comparison");
    std::size_t replications = 1000;
    std::uint64_t sim_seed = 0;
    double lambda = 0.7;
    int sim_k = 5;
    bool redraw = false;
    std::size_t threads = 0;
    std::size_t block_size = 50;
    std::string sim_out = "out";
    simulate->add_option("-R,--replications", replications, "Monte Carlo replications");
    simulate->add_option("--seed", sim_seed, "master RNG seed")->required();
    simulate->add_option("--lambda", lambda, "spatial dependence of the synthetic field");
    simulate->add_option("--k-neighbors", sim_k, "k behind the row-standardized W");
    simulate->add_flag("--redraw-population", redraw, "redraw the population every replication");
    simulate->add_option("--threads", threads, "worker threads (0 = hardware)");
    simulate->add_option("--block-size", block_size, "replications per histogram block");
    simulate->add_option("-o,--out-dir", sim_out, "artifact directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (simulate->parsed()) {
            return run_simulate(replications, sim_seed, lambda, sim_k, redraw, threads,
                                block_size, sim_out);
        }

        const crowdps::PipelineConfig cfg = resolve_config(config_path, flags);
        if (validate->parsed()) {
            const auto res = crowdps::run_pipeline(cfg, crowdps::PipelineStop::cleaning);
            print_cleaning_summary(res);
            std::cout << "wrote cleaned.csv and outliers.json to " << cfg.out_dir.string()
                      << "\n";
        } else if (cluster->parsed()) {
            const auto res = crowdps::run_pipeline(cfg, crowdps::PipelineStop::clustering);
            std::cout << "clustered " << res.markets.size() << " locations into "
                      << (cfg.clusters == 0 ? res.markets.size() : cfg.clusters)
                      << " groups; wrote clusters.csv\n";
        } else if (design->parsed()) {
            const auto res = crowdps::run_pipeline(cfg, crowdps::PipelineStop::design);
            std::cout << "selected " << res.selected.size() << " locations with " << cfg.design
                      << "; wrote design.json\n";
        } else if (estimate->parsed()) {
            const auto res = crowdps::run_pipeline(cfg);
            print_estimate(res);
        } else if (pipeline->parsed()) {
            const auto res = crowdps::run_pipeline(cfg);
            print_cleaning_summary(res);
            print_estimate(res);
            std::cout << "manifest: " << (cfg.out_dir / "manifest.json").string() << "\n";
        }
        return 0;
    } catch (const crowdps::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const crowdps::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const crowdps::NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    }
}
