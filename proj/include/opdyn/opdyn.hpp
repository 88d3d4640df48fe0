#pragma once

#include "opdyn/error.hpp"
#include "opdyn/types.hpp"
#include "opdyn/rng.hpp"
#include "opdyn/net_graph.hpp"
#include "opdyn/linear_dynamics.hpp"
#include "opdyn/bounded_confidence.hpp"
#include "opdyn/gossip.hpp"
#include "opdyn/analysis.hpp"
#include "opdyn/io.hpp"
