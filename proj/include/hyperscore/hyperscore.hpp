#pragma once

#include "hyperscore/bench.hpp"
#include "hyperscore/embedding.hpp"
#include "hyperscore/error.hpp"
#include "hyperscore/eval.hpp"
#include "hyperscore/hyperhead.hpp"
#include "hyperscore/knn_graph.hpp"
#include "hyperscore/matrix.hpp"
#include "hyperscore/perturb.hpp"
#include "hyperscore/qnet.hpp"
#include "hyperscore/search.hpp"
