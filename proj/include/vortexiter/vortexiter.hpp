#pragma once

#include "bounds.hpp"
#include "drift.hpp"
#include "error.hpp"
#include "field_io.hpp"
#include "gaussian.hpp"
#include "grid.hpp"
#include "iteration.hpp"
#include "ops.hpp"
#include "parabolic_norm.hpp"
#include "parallel.hpp"
#include "spectral.hpp"
#include "stochastic.hpp"
#include "vorticity_solver.hpp"
