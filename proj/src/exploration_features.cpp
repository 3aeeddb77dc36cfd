#include "mpsych/exploration_features.hpp"

#include <cmath>

#include "mpsych/error.hpp"

namespace mpsych {

void bandit::PosteriorState::validate() const {
  for (const auto& arm : arms) {
    if (!std::isfinite(arm.mean) || !std::isfinite(arm.variance) || !(arm.variance > 0.0)) {
      throw InvalidPosteriorError("posterior needs finite means and positive variances");
    }
  }
}

explore::ExplorationFeatures explore::features(const bandit::PosteriorState& posterior) {
  posterior.validate();
  const auto& a = posterior.arms[0];
  const auto& b = posterior.arms[1];
  ExplorationFeatures f;
  f.value_difference = a.mean - b.mean;
  f.total_uncertainty = std::sqrt(a.variance + b.variance);
  f.relative_uncertainty = std::sqrt(a.variance) - std::sqrt(b.variance);
  f.scaled_value = f.value_difference / f.total_uncertainty;
  return f;
}

}  // namespace mpsych
