#pragma once

#include "sfe/cost.hpp"
#include "sfe/dispatch.hpp"
#include "sfe/equilibrium.hpp"
#include "sfe/errors.hpp"
#include "sfe/indices.hpp"
#include "sfe/network.hpp"
#include "sfe/scenario.hpp"
#include "sfe/simplex.hpp"
#include "sfe/solver.hpp"
#include "sfe/two_node.hpp"
