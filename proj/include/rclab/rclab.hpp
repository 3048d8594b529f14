#pragma once

#include "rclab/adjoint.hpp"
#include "rclab/benchmark.hpp"
#include "rclab/chattering.hpp"
#include "rclab/config.hpp"
#include "rclab/control.hpp"
#include "rclab/core.hpp"
#include "rclab/experiment.hpp"
#include "rclab/hamiltonian.hpp"
#include "rclab/io.hpp"
#include "rclab/mp_check.hpp"
#include "rclab/noise.hpp"
#include "rclab/parallel.hpp"
#include "rclab/problem.hpp"
#include "rclab/regression.hpp"
#include "rclab/rng.hpp"
#include "rclab/simulate.hpp"
#include "rclab/time_grid.hpp"
