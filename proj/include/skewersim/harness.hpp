#pragma once

#include "skewersim/harness/experiment.hpp"
#include "skewersim/harness/plates.hpp"
#include "skewersim/harness/report.hpp"
