#pragma once

#include "probeopt/additive.hpp"
#include "probeopt/core.hpp"
#include "probeopt/error.hpp"
#include "probeopt/evaluate.hpp"
#include "probeopt/instance_gen.hpp"
#include "probeopt/io.hpp"
#include "probeopt/lagrange.hpp"
#include "probeopt/multi_state.hpp"
#include "probeopt/oracle.hpp"
#include "probeopt/parallel.hpp"
#include "probeopt/policy.hpp"
#include "probeopt/simulator.hpp"
#include "probeopt/two_state.hpp"
