#pragma once

// Umbrella header: post-sampling reweighting for crowdsourced geodata.

#include "crowdps/cluster.hpp"
#include "crowdps/designs.hpp"
#include "crowdps/distance.hpp"
#include "crowdps/error.hpp"
#include "crowdps/geo.hpp"
#include "crowdps/hash.hpp"
#include "crowdps/io.hpp"
#include "crowdps/log.hpp"
#include "crowdps/pipeline.hpp"
#include "crowdps/poststrat.hpp"
#include "crowdps/preprocess.hpp"
#include "crowdps/rng.hpp"
#include "crowdps/routing.hpp"
#include "crowdps/sim.hpp"
#include "crowdps/stats.hpp"
#include "crowdps/version.hpp"
#include "crowdps/weights.hpp"
