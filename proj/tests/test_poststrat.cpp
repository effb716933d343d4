#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "crowdps/poststrat.hpp"

using namespace crowdps;

namespace {
// Three locations: counts 2 / 1 / 3, ratios 2.0 / 0.5 / 1.0.
// Observation mode:  (2*30 + 0.5*30 + 1*120) / (2*2 + 0.5*1 + 1*3) = 195 / 7.5 = 26
// Cluster-mean mode: (2*15 + 0.5*30 + 1*40) / 3.5 = 85 / 3.5 = 170/7
// Plain mean: 180 / 6 = 30
const std::vector<double> kValues{10, 20, 30, 25, 35, 60};
const std::vector<std::size_t> kLabels{0, 0, 1, 2, 2, 2};

PostSamplingWeights manual_weights(std::vector<double> ps) {
    PostSamplingWeights w;
    w.ps = std::move(ps);
    w.crowd_counts.assign(w.ps.size(), 1);
    w.design_counts.assign(w.ps.size(), 1);
    return w;
}
} // namespace

TEST_CASE("ratios divide design counts by crowd counts") {
    const auto w = post_sampling_ratios({5, 8, 4, 10}, {16, 2, 1, 3});
    REQUIRE(w.ps.size() == 4);
    REQUIRE(w.ps[0] == Catch::Approx(3.2).epsilon(1e-15));
    REQUIRE(w.ps[1] == Catch::Approx(0.25).epsilon(1e-15));
    REQUIRE(w.ps[2] == Catch::Approx(0.25).epsilon(1e-15));
    REQUIRE(w.ps[3] == Catch::Approx(0.3).epsilon(1e-15));
    REQUIRE(w.excluded.empty());
    REQUIRE(w.zero_weight.empty());
}

TEST_CASE("locations without crowd data are excluded") {
    const auto w = post_sampling_ratios({0, 2}, {1, 1});
    REQUIRE(w.ps[0] == 0.0);
    REQUIRE(w.ps[1] == 0.5);
    REQUIRE(w.excluded == std::vector<std::size_t>{0});
}

TEST_CASE("locations the design skips get weight zero") {
    const auto w = post_sampling_ratios({2, 3}, {0, 3});
    REQUIRE(w.ps[0] == 0.0);
    REQUIRE(w.ps[1] == 1.0);
    REQUIRE(w.zero_weight == std::vector<std::size_t>{0});
}

TEST_CASE("ratio inputs must align") {
    REQUIRE_THROWS(post_sampling_ratios({1, 2}, {1}));
    REQUIRE_THROWS(post_sampling_ratios({}, {}));
}

TEST_CASE("observation-mode estimate matches the hand computation") {
    const auto w = manual_weights({2.0, 0.5, 1.0});
    const auto r = weighted_estimate(kValues, kLabels, w, WeightingMode::observation);
    REQUIRE(r.corrected == Catch::Approx(26.0).epsilon(1e-14));
    REQUIRE(r.uncorrected == Catch::Approx(30.0).epsilon(1e-14));
    REQUIRE(r.relative_change == Catch::Approx(26.0 / 30.0 - 1.0).epsilon(1e-12));
    REQUIRE(r.used_locations == 3);
    REQUIRE(r.used_observations == 6);
    REQUIRE(r.location_obs == std::vector<std::size_t>{2, 1, 3});
    REQUIRE(r.location_means[0] == Catch::Approx(15.0));
    REQUIRE(r.location_means[1] == Catch::Approx(30.0));
    REQUIRE(r.location_means[2] == Catch::Approx(40.0));
}

TEST_CASE("cluster-mean estimate matches the hand computation") {
    const auto w = manual_weights({2.0, 0.5, 1.0});
    const auto r = weighted_estimate(kValues, kLabels, w, WeightingMode::cluster_mean);
    REQUIRE(r.corrected == Catch::Approx(170.0 / 7.0).epsilon(1e-14));
    REQUIRE(r.mode == WeightingMode::cluster_mean);
}

TEST_CASE("unit ratios leave the observation-mode mean untouched") {
    const auto w = manual_weights({1.0, 1.0, 1.0});
    const auto r = weighted_estimate(kValues, kLabels, w, WeightingMode::observation);
    REQUIRE(r.corrected == Catch::Approx(r.uncorrected).epsilon(1e-14));
    REQUIRE(r.relative_change == Catch::Approx(0.0).margin(1e-14));
}

TEST_CASE("modes agree when every location holds the same number of observations") {
    const std::vector<double> vals{1, 3, 10, 14, 7, 9};
    const std::vector<std::size_t> labels{0, 0, 1, 1, 2, 2};
    const auto w = manual_weights({0.7, 1.4, 2.1});
    const auto a = weighted_estimate(vals, labels, w, WeightingMode::observation);
    const auto b = weighted_estimate(vals, labels, w, WeightingMode::cluster_mean);
    REQUIRE(a.corrected == Catch::Approx(b.corrected).epsilon(1e-13));
}

TEST_CASE("estimates are invariant to rescaling all ratios") {
    auto w = manual_weights({2.0, 0.5, 1.0});
    const auto base = weighted_estimate(kValues, kLabels, w, WeightingMode::cluster_mean);
    for (double& p : w.ps) p *= 17.25;
    const auto scaled = weighted_estimate(kValues, kLabels, w, WeightingMode::cluster_mean);
    REQUIRE(scaled.corrected == Catch::Approx(base.corrected).epsilon(1e-13));
}

TEST_CASE("corrected estimate stays inside the data range") {
    const auto w = manual_weights({37.0, 0.01, 4.5});
    const auto r = weighted_estimate(kValues, kLabels, w, WeightingMode::observation);
    REQUIRE(r.corrected >= 10.0);
    REQUIRE(r.corrected <= 60.0);
    const auto c = weighted_estimate(kValues, kLabels, w, WeightingMode::cluster_mean);
    REQUIRE(c.corrected >= 15.0);
    REQUIRE(c.corrected <= 40.0);
}

TEST_CASE("zero-weight locations are dropped from the estimate") {
    const auto w = manual_weights({0.0, 1.0, 1.0});
    const auto r = weighted_estimate(kValues, kLabels, w, WeightingMode::cluster_mean);
    REQUIRE(r.used_locations == 2);
    REQUIRE(r.used_observations == 4);
    REQUIRE(r.corrected == Catch::Approx((30.0 + 40.0) / 2.0).epsilon(1e-14));
}

TEST_CASE("an estimate with no effective sample is an error") {
    const auto w = manual_weights({0.0, 0.0, 0.0});
    REQUIRE_THROWS_AS(weighted_estimate(kValues, kLabels, w), NumericError);
}

TEST_CASE("estimate input validation") {
    const auto w = manual_weights({1.0, 1.0, 1.0});
    REQUIRE_THROWS(weighted_estimate({1.0}, {0, 1}, w));
    REQUIRE_THROWS(weighted_estimate({}, {}, w));
    REQUIRE_THROWS(weighted_estimate({1.0}, {9}, w));
    REQUIRE_THROWS(weighted_estimate({std::nan("")}, {0}, w));
}

TEST_CASE("equal-probability ht estimate is the sample mean") {
    const std::vector<double> y{4, 8, 6};
    const double pi = 3.0 / 10.0;
    REQUIRE(ht_estimate(y, {pi, pi, pi}, 10) == Catch::Approx(6.0).epsilon(1e-14));
}

TEST_CASE("ht estimate with known inclusion probabilities") {
    REQUIRE(ht_estimate({1.0, 10.0}, {0.2, 0.2}, 10) == Catch::Approx(5.5).epsilon(1e-14));
}

TEST_CASE("ht estimate is exactly unbiased over all samples of size two") {
    const std::vector<double> y{3, 1, 4, 1, 5};
    const double truth = (3 + 1 + 4 + 1 + 5) / 5.0;
    const double pi = 2.0 / 5.0;
    double sum = 0.0;
    int samples = 0;
    for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t j = i + 1; j < 5; ++j) {
            sum += ht_estimate({y[i], y[j]}, {pi, pi}, 5);
            ++samples;
        }
    REQUIRE(samples == 10);
    REQUIRE(sum / samples == Catch::Approx(truth).epsilon(1e-12));
}

TEST_CASE("ht estimate rejects invalid probabilities") {
    REQUIRE_THROWS(ht_estimate({1.0}, {0.0}, 5));
    REQUIRE_THROWS(ht_estimate({1.0}, {1.5}, 5));
    REQUIRE_THROWS(ht_estimate({1.0}, {0.5, 0.5}, 5));
    REQUIRE_THROWS(ht_estimate({}, {}, 5));
    REQUIRE_THROWS(ht_estimate({1.0}, {0.5}, 0));
}
