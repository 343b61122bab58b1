#pragma once

#include "skewersim/policy/dataset.hpp"
#include "skewersim/policy/example.hpp"
#include "skewersim/policy/model.hpp"
#include "skewersim/policy/train.hpp"
