#pragma once

#include "lqgopt/agent.hpp"
#include "lqgopt/arx.hpp"
#include "lqgopt/experiment.hpp"
#include "lqgopt/linear_system.hpp"
#include "lqgopt/lyapunov.hpp"
#include "lqgopt/markov.hpp"
#include "lqgopt/noise_evolution.hpp"
#include "lqgopt/ofu.hpp"
#include "lqgopt/plant.hpp"
#include "lqgopt/riccati.hpp"
#include "lqgopt/sysid.hpp"
#include "lqgopt/trace.hpp"
