#pragma once

#include "terla/numeric/ops.hpp"
#include "terla/numeric/optim.hpp"
#include "terla/numeric/parameters.hpp"
#include "terla/numeric/tape.hpp"
#include "terla/numeric/tensor.hpp"
