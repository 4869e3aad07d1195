#pragma once

/// Umbrella header: plant models, controllers, idealized maps, bifurcation
/// tools, closed-loop simulation, serialization and the command-line layer.

#include "levelctl/error.hpp"
#include "levelctl/plant.hpp"
#include "levelctl/controllers.hpp"
#include "levelctl/maps.hpp"
#include "levelctl/bifurcation.hpp"
#include "levelctl/closedloop.hpp"
#include "levelctl/emit.hpp"
#include "levelctl/cli.hpp"
