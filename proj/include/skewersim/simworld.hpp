#pragma once

#include "skewersim/simworld/archetypes.hpp"
#include "skewersim/simworld/contact.hpp"
#include "skewersim/simworld/outcome.hpp"
#include "skewersim/simworld/plate.hpp"
#include "skewersim/simworld/primitives.hpp"
#include "skewersim/simworld/trajectory_io.hpp"
#include "skewersim/simworld/types.hpp"
