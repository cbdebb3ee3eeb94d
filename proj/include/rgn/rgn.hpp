#pragma once

#include "rgn/scalar.hpp"
#include "rgn/error.hpp"
#include "rgn/linalg.hpp"
#include "rgn/segre.hpp"
#include "rgn/cpd_model.hpp"
#include "rgn/solver.hpp"
#include "rgn/random.hpp"
#include "rgn/diagnostics.hpp"
#include "rgn/experiments.hpp"
