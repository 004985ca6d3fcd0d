#pragma once

#include "mecsim/error.hpp"
#include "mecsim/units.hpp"
#include "mecsim/rng.hpp"
#include "mecsim/scenario.hpp"
#include "mecsim/profiles.hpp"
#include "mecsim/sim_core.hpp"
#include "mecsim/reward.hpp"
#include "mecsim/graph.hpp"
#include "mecsim/gcn.hpp"
#include "mecsim/mlp.hpp"
#include "mecsim/quantize.hpp"
#include "mecsim/policies.hpp"
#include "mecsim/checkpoint.hpp"
#include "mecsim/io.hpp"
#include "mecsim/experiment.hpp"
