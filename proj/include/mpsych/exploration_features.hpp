#pragma once

#include "mpsych/posterior.hpp"

namespace mpsych::explore {

// Regressors of the hybrid exploration model, computed from the
// pre-choice posterior.
struct ExplorationFeatures {
  double value_difference = 0.0;      // V  = mu1 - mu2
  double total_uncertainty = 0.0;     // TU = sqrt(var1 + var2)
  double relative_uncertainty = 0.0;  // RU = sd1 - sd2
  double scaled_value = 0.0;          // V / TU
};

// Throws InvalidPosteriorError for non-positive or non-finite variances.
ExplorationFeatures features(const bandit::PosteriorState& posterior);

}  // namespace mpsych::explore
