#pragma once

#include "pgrad/action.hpp"
#include "pgrad/dual.hpp"
#include "pgrad/error.hpp"
#include "pgrad/expr.hpp"
#include "pgrad/grid.hpp"
#include "pgrad/potential.hpp"
#include "pgrad/solver.hpp"
#include "pgrad/verify.hpp"
