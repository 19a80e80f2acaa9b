#pragma once

// Umbrella header: the whole simulator in one include.

#include "crossway/core.hpp"
#include "crossway/geometry.hpp"
#include "crossway/rng.hpp"
#include "crossway/trace.hpp"
#include "crossway/engine.hpp"
#include "crossway/gvh.hpp"
#include "crossway/physics.hpp"
#include "crossway/netmodel.hpp"
#include "crossway/timing.hpp"
#include "crossway/mutex.hpp"
#include "crossway/registration.hpp"
#include "crossway/election.hpp"
#include "crossway/icp.hpp"
#include "crossway/scenario.hpp"
#include "crossway/monitor.hpp"
#include "crossway/sim.hpp"
#include "crossway/render.hpp"
#include "crossway/cli.hpp"
