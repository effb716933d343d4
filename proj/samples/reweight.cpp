// A crowd oversamples the cheap-to-reach part of a region. This example shows
// how ratios between a formal benchmark design and the crowd's own counts
// pull the estimate back toward the design-implied composition.

#include <cstdio>
#include <vector>

#include "crowdps/crowdps.hpp"

using namespace crowdps;

int main() {
    // two zones: zone 0 is urban (cheap to visit, low prices),
    // zone 1 is rural (rarely visited, high prices)
    std::vector<double> values;
    std::vector<std::size_t> zones;
    Rng rng(7);
    for (int i = 0; i < 90; ++i) { // heavy urban coverage
        values.push_back(rng.normal(200.0, 4.0));
        zones.push_back(0);
    }
    for (int i = 0; i < 10; ++i) { // thin rural coverage
        values.push_back(rng.normal(230.0, 4.0));
        zones.push_back(1);
    }

    // a proportional design over equal-population zones would sample 50/50
    const auto weights = post_sampling_ratios({90, 10}, {50, 50});
    const auto report = weighted_estimate(values, zones, weights);

    std::printf("crowd counts          : urban 90, rural 10\n");
    std::printf("benchmark design      : urban 50, rural 50\n");
    std::printf("ratio per zone        : %.3f, %.3f\n", weights.ps[0], weights.ps[1]);
    std::printf("plain crowd mean      : %.2f\n", report.uncorrected);
    std::printf("reweighted estimate   : %.2f\n", report.corrected);
    std::printf("relative change       : %+.1f%%\n", 100.0 * report.relative_change);
    return 0;
}
