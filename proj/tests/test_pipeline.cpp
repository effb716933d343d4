#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "crowdps/pipeline.hpp"

using namespace crowdps;
namespace fs = std::filesystem;

namespace {
const fs::path kDataDir = fs::path(CROWDPS_DATA_DIR);

fs::path fresh_out(const std::string& name) {
    const fs::path d = fs::temp_directory_path() / "crowdps_pipe_tests" / name;
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

std::string read_file(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    REQUIRE(is.good());
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

PipelineConfig bundled_config(const std::string& out_name) {
    auto cfg = load_pipeline_config(kDataDir / "kaduna.conf");
    cfg.out_dir = fresh_out(out_name);
    return cfg;
}

const std::vector<std::string> kArtifacts{
    "rejects.csv",  "cleaned.csv",  "outliers.json", "clusters.csv",
    "design.json",  "weights.json", "estimate.json", "manifest.json"};
} // namespace

TEST_CASE("the bundled run configuration loads") {
    const auto cfg = load_pipeline_config(kDataDir / "kaduna.conf");
    REQUIRE(cfg.input.filename() == "kaduna_synthetic.csv");
    REQUIRE(fs::exists(cfg.input));
    REQUIRE(cfg.seed == 42);
    REQUIRE(cfg.seed_set);
    REQUIRE(cfg.clusters == 4);
    REQUIRE(cfg.k_neighbors == 10);
    REQUIRE(cfg.design == "lpm2");
    REQUIRE(cfg.design_n == 8);
    REQUIRE(cfg.mode == WeightingMode::cluster_mean);
    REQUIRE_NOTHROW(cfg.validate());
}

TEST_CASE("unknown configuration keys are rejected with the line number") {
    const fs::path d = fresh_out("badconf");
    const fs::path conf = d / "bad.conf";
    std::ofstream(conf) << "# comment\nseed = 1\nbanana = 3\n";
    REQUIRE_THROWS_WITH(load_pipeline_config(conf),
                        Catch::Matchers::ContainsSubstring("unknown key") &&
                            Catch::Matchers::ContainsSubstring(":3"));
    std::ofstream(conf, std::ios::trunc) << "seed 1\n";
    REQUIRE_THROWS_WITH(load_pipeline_config(conf),
                        Catch::Matchers::ContainsSubstring("key = value"));
    std::ofstream(conf, std::ios::trunc) << "seed = banana\n";
    REQUIRE_THROWS_WITH(load_pipeline_config(conf),
                        Catch::Matchers::ContainsSubstring("cannot parse"));
}

TEST_CASE("pipeline configuration is validated before any work") {
    PipelineConfig cfg;
    cfg.input = kDataDir / "kaduna_synthetic.csv";
    cfg.design_n = 8;
    REQUIRE_THROWS_AS(cfg.validate(), ConfigError); // seed not set
    cfg.seed = 1;
    cfg.seed_set = true;
    REQUIRE_NOTHROW(cfg.validate());
    cfg.design = "magic";
    REQUIRE_THROWS_AS(cfg.validate(), ConfigError);
    cfg.design = "srs";
    cfg.design_n = 0;
    REQUIRE_THROWS_AS(cfg.validate(), ConfigError);
    cfg.design_n = 8;
    cfg.input = kDataDir / "no_such_file.csv";
    REQUIRE_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("the bundled pipeline produces every artifact and a sane estimate") {
    const auto cfg = bundled_config("full");
    const auto res = run_pipeline(cfg);

    for (const auto& name : kArtifacts) REQUIRE(fs::exists(cfg.out_dir / name));
    REQUIRE(res.manifest.ok);
    REQUIRE(res.manifest.failed_stage.empty());
    REQUIRE(res.manifest.stages.back().name == "estimate");
    REQUIRE(res.manifest.artifacts.size() == 7); // everything except the manifest itself

    REQUIRE(res.cleaned.size() == 320);
    REQUIRE(res.markets.size() == 16);
    REQUIRE(res.market_cluster.size() == 16);
    REQUIRE(res.selected.size() == 8);

    std::size_t n_l = 0, m_l = 0;
    for (auto c : res.weights.crowd_counts) n_l += c;
    for (auto c : res.weights.design_counts) m_l += c;
    REQUIRE(n_l == 16);
    REQUIRE(m_l == 8);

    // a weighted mean of market means must stay inside the observed range
    REQUIRE(res.report.corrected > 195.0);
    REQUIRE(res.report.corrected < 245.0);
    REQUIRE(res.report.uncorrected > 195.0);
    REQUIRE(res.report.uncorrected < 245.0);
    // unequal cluster sizes make equal ratios impossible at this design size,
    // so the correction has to move the estimate
    REQUIRE(std::abs(res.report.relative_change) > 1e-6);

    const std::string est = read_file(cfg.out_dir / "estimate.json");
    REQUIRE(est.find("\"point_estimate\"") != std::string::npos);
    REQUIRE(est.find("\"per_cluster\"") != std::string::npos);
}

TEST_CASE("the bundled data needs no outlier repairs, only gap fills") {
    const auto cfg = bundled_config("clean");
    const auto res = run_pipeline(cfg, PipelineStop::cleaning);

    std::size_t missing = 0, global = 0, spatial = 0;
    for (auto t : res.tags) {
        if (t == ObsTag::missing) ++missing;
        else if (t == ObsTag::global_outlier) ++global;
        else if (t == ObsTag::spatial_outlier) ++spatial;
    }
    REQUIRE(missing == 3); // the three deliberately blank value fields
    REQUIRE(global + spatial <= 3);
    for (std::size_t i = 0; i < res.cleaned.size(); ++i) {
        REQUIRE(res.usable[i]);
        REQUIRE(res.cleaned[i].value.has_value());
    }
}

TEST_CASE("two runs with the same seed are byte-identical") {
    const auto cfg_a = bundled_config("det_a");
    const auto cfg_b = bundled_config("det_b");
    const auto a = run_pipeline(cfg_a);
    const auto b = run_pipeline(cfg_b);

    for (const auto& name : kArtifacts) {
        if (name == "manifest.json") continue; // stage timings may differ
        REQUIRE(read_file(cfg_a.out_dir / name) == read_file(cfg_b.out_dir / name));
    }
    REQUIRE(a.manifest.artifacts == b.manifest.artifacts); // same names, same hashes
    REQUIRE(a.report.corrected == b.report.corrected);
    REQUIRE(a.market_cluster == b.market_cluster);
    REQUIRE(a.selected == b.selected);
}

TEST_CASE("a benchmark that keeps every location reproduces the plain mean") {
    auto cfg = bundled_config("identity");
    cfg.clusters = 0; // every market is its own group
    cfg.design_n = 16;
    cfg.mode = WeightingMode::observation;
    const auto res = run_pipeline(cfg);
    REQUIRE(res.report.corrected ==
            Catch::Approx(res.report.uncorrected).epsilon(1e-12));
    REQUIRE(std::abs(res.report.relative_change) < 1e-12);
    for (double p : res.weights.ps) REQUIRE(p == 1.0);
}

TEST_CASE("a planted spike is caught and repaired") {
    // rewrite the bundled file with one value pushed to 500
    const fs::path out = fresh_out("spike");
    const fs::path spiked_csv = out / "spiked.csv";
    {
        std::ifstream is(kDataDir / "kaduna_synthetic.csv");
        std::ofstream os(spiked_csv);
        std::string line;
        std::getline(is, line);
        os << line << '\n';
        bool done = false;
        std::string spiked_id;
        while (std::getline(is, line)) {
            if (!done) {
                const auto f = split_csv_line(line);
                if (!f[4].empty()) {
                    spiked_id = f[0];
                    os << f[0] << ',' << f[1] << ',' << f[2] << ',' << f[3] << ",500.00,"
                       << f[5] << ',' << f[6] << '\n';
                    done = true;
                    continue;
                }
            }
            os << line << '\n';
        }
        REQUIRE(done);
    }

    PipelineConfig cfg = load_pipeline_config(kDataDir / "kaduna.conf");
    cfg.input = spiked_csv;
    cfg.out_dir = out / "cleaned";
    const auto res = run_pipeline(cfg, PipelineStop::cleaning);

    PipelineConfig raw = cfg;
    raw.out_dir = out / "kept";
    raw.no_cleaning = true;
    const auto untouched = run_pipeline(raw, PipelineStop::cleaning);

    std::size_t spiked_idx = res.cleaned.size();
    for (std::size_t i = 0; i < res.cleaned.size(); ++i)
        if (*untouched.cleaned[i].value == 500.0) spiked_idx = i;
    REQUIRE(spiked_idx < res.cleaned.size());
    REQUIRE(res.tags[spiked_idx] == ObsTag::global_outlier);
    REQUIRE(*res.cleaned[spiked_idx].value < 260.0); // repaired to a plausible level
    REQUIRE(*res.cleaned[spiked_idx].value > 180.0);

    bool recorded = false;
    for (const auto& ch : res.changes)
        if (ch.obs_id == res.cleaned[spiked_idx].obs_id && ch.old_value &&
            *ch.old_value == 500.0)
            recorded = true;
    REQUIRE(recorded);
}

TEST_CASE("disabling cleaning leaves gaps unusable and values untouched") {
    auto cfg = bundled_config("rawonly");
    cfg.no_cleaning = true;
    const auto res = run_pipeline(cfg, PipelineStop::cleaning);
    REQUIRE(res.changes.empty());
    std::size_t unusable = 0;
    for (const auto u : res.usable)
        if (!u) ++unusable;
    REQUIRE(unusable == 3);
}

TEST_CASE("a failing stage leaves an honest manifest behind") {
    auto cfg = bundled_config("fail");
    cfg.design_n = 17; // more than the 16 markets
    REQUIRE_THROWS_AS(run_pipeline(cfg), ConfigError);

    const std::string manifest = read_file(cfg.out_dir / "manifest.json");
    REQUIRE(manifest.find("\"ok\": false") != std::string::npos);
    REQUIRE(manifest.find("\"failed_stage\": \"design\"") != std::string::npos);
    REQUIRE(fs::exists(cfg.out_dir / "cleaned.csv")); // earlier stages persisted
    REQUIRE_FALSE(fs::exists(cfg.out_dir / "design.json"));
}

TEST_CASE("stop levels cut the pipeline where asked") {
    auto cfg = bundled_config("stops");
    run_pipeline(cfg, PipelineStop::cleaning);
    REQUIRE(fs::exists(cfg.out_dir / "cleaned.csv"));
    REQUIRE_FALSE(fs::exists(cfg.out_dir / "clusters.csv"));

    cfg.out_dir = fresh_out("stops2");
    run_pipeline(cfg, PipelineStop::clustering);
    REQUIRE(fs::exists(cfg.out_dir / "clusters.csv"));
    REQUIRE_FALSE(fs::exists(cfg.out_dir / "design.json"));

    cfg.out_dir = fresh_out("stops3");
    run_pipeline(cfg, PipelineStop::design);
    REQUIRE(fs::exists(cfg.out_dir / "design.json"));
    REQUIRE_FALSE(fs::exists(cfg.out_dir / "weights.json"));
    REQUIRE_FALSE(fs::exists(cfg.out_dir / "estimate.json"));
}

TEST_CASE("weighting modes answer different questions") {
    auto obs_cfg = bundled_config("mode_obs");
    obs_cfg.mode = WeightingMode::observation;
    auto cm_cfg = bundled_config("mode_cm");
    cm_cfg.mode = WeightingMode::cluster_mean;
    const auto a = run_pipeline(obs_cfg);
    const auto b = run_pipeline(cm_cfg);
    REQUIRE(a.report.mode == WeightingMode::observation);
    REQUIRE(b.report.mode == WeightingMode::cluster_mean);
    REQUIRE(std::abs(a.report.corrected - b.report.corrected) > 1e-9);
    // the raw mean does not depend on the weighting mode
    REQUIRE(a.report.uncorrected == Catch::Approx(b.report.uncorrected).epsilon(1e-14));
}
