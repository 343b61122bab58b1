#pragma once

#include "skewersim/perception/detect.hpp"
#include "skewersim/perception/image.hpp"
#include "skewersim/perception/pose.hpp"
#include "skewersim/perception/render.hpp"
#include "skewersim/perception/servo.hpp"
