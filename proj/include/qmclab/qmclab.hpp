#pragma once

#include "qmclab/config.hpp"
#include "qmclab/csv.hpp"
#include "qmclab/errors.hpp"
#include "qmclab/experiments.hpp"
#include "qmclab/gfmc.hpp"
#include "qmclab/krylov.hpp"
#include "qmclab/model.hpp"
#include "qmclab/oracle.hpp"
#include "qmclab/parallel.hpp"
#include "qmclab/rng.hpp"
#include "qmclab/sampling.hpp"
#include "qmclab/spectrum.hpp"
#include "qmclab/spin.hpp"
#include "qmclab/stats.hpp"
#include "qmclab/trial.hpp"
#include "qmclab/walkers.hpp"
