#pragma once

#include "collab/params.hpp"

namespace collab {

/**
 * What a mechanism returns to one agent: an uncorrupted dataset, a dataset
 * with added Gaussian noise, and the per-dimension noise variance. An
 * infinite variance marks a corrupted set that carries no information
 * (the agent submitted nothing to cross-check).
 */
struct Allocation {
  Dataset clean;
  Dataset corrupted;
  Vec eta_sq;
};

}  // namespace collab
