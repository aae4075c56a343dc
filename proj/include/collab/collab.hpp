#pragma once

#include "collab/error.hpp"
#include "collab/rng.hpp"
#include "collab/params.hpp"
#include "collab/alpha.hpp"
#include "collab/allocation.hpp"
#include "collab/estimators.hpp"
#include "collab/mechanisms.hpp"
#include "collab/quadrature.hpp"
#include "collab/analytics.hpp"
#include "collab/simulation.hpp"
