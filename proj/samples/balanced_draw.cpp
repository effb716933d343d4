// Draws the same-size sample twice from one point cloud -- once with simple
// random sampling, once with the spatially balanced pivotal draw -- and
// compares how evenly each sample covers the region.

#include <algorithm>
#include <cstdio>
#include <limits>
#include <vector>

#include "crowdps/crowdps.hpp"

using namespace crowdps;

namespace {
// mean distance from every population point to its nearest sampled point:
// lower means the sample covers the region more evenly
double coverage_radius(const std::vector<GeoPoint>& points,
                       const std::vector<std::size_t>& sample) {
    double total = 0.0;
    for (const auto& p : points) {
        double best = std::numeric_limits<double>::infinity();
        for (auto s : sample) best = std::min(best, euclidean(p, points[s]));
        total += best;
    }
    return total / static_cast<double>(points.size());
}
} // namespace

int main() {
    Rng rng(2024);
    std::vector<GeoPoint> points;
    for (int i = 0; i < 400; ++i)
        points.push_back(GeoPoint{rng.uniform(0.0, 1.0), rng.uniform(0.0, 1.0),
                                  Crs::planar_unit});

    const auto pi = equal_inclusion_probabilities(points.size(), 40);

    double srs_radius = 0.0, balanced_radius = 0.0;
    const int rounds = 20;
    for (int r = 0; r < rounds; ++r) {
        srs_radius += coverage_radius(points, srs_sample(points.size(), 40, rng));
        balanced_radius += coverage_radius(points, lpm2_sample(points, pi, rng));
    }
    srs_radius /= rounds;
    balanced_radius /= rounds;

    std::printf("400 points, 40 sampled, %d rounds\n", rounds);
    std::printf("mean distance to nearest sampled point:\n");
    std::printf("  simple random draw : %.4f\n", srs_radius);
    std::printf("  balanced draw      : %.4f\n", balanced_radius);
    std::printf("the balanced draw covers the region with %.0f%% less slack\n",
                100.0 * (1.0 - balanced_radius / srs_radius));
    return 0;
}
