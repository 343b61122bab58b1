#pragma once

#include "skewersim/tinynn/checkpoint.hpp"
#include "skewersim/tinynn/gradcheck.hpp"
#include "skewersim/tinynn/layers.hpp"
#include "skewersim/tinynn/loss.hpp"
#include "skewersim/tinynn/optim.hpp"
#include "skewersim/tinynn/tensor.hpp"
