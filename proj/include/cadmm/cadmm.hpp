#pragma once

// Umbrella header for the consensus-ADMM combined-regularization solver.

#include "cadmm/data.hpp"
#include "cadmm/engine.hpp"
#include "cadmm/metrics.hpp"
#include "cadmm/prox.hpp"
#include "cadmm/regularizer.hpp"
#include "cadmm/types.hpp"
#include "cadmm/worker.hpp"
