#pragma once

#include "cimr/backends.hpp"
#include "cimr/context.hpp"
#include "cimr/encoders.hpp"
#include "cimr/engine.hpp"
#include "cimr/errors.hpp"
#include "cimr/feedback.hpp"
#include "cimr/fusion.hpp"
#include "cimr/goal.hpp"
#include "cimr/harness.hpp"
#include "cimr/map_sim.hpp"
#include "cimr/remote.hpp"
#include "cimr/response.hpp"
#include "cimr/rng.hpp"
#include "cimr/scenario.hpp"
#include "cimr/serialization.hpp"
