#pragma once

#include "pmidx/errors.hpp"
#include "pmidx/random.hpp"
#include "pmidx/model.hpp"
#include "pmidx/index.hpp"
#include "pmidx/policy.hpp"
#include "pmidx/mdp.hpp"
#include "pmidx/sim.hpp"
#include "pmidx/experiment.hpp"
#include "pmidx/io.hpp"
