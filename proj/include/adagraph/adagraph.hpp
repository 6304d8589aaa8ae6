#pragma once

#include "adagraph/benchmark.hpp"
#include "adagraph/config.hpp"
#include "adagraph/domain_graph.hpp"
#include "adagraph/errors.hpp"
#include "adagraph/gbn.hpp"
#include "adagraph/matrix.hpp"
#include "adagraph/network.hpp"
#include "adagraph/prediction.hpp"
#include "adagraph/refinement.hpp"
#include "adagraph/selftest.hpp"
#include "adagraph/serialization.hpp"
#include "adagraph/training.hpp"
