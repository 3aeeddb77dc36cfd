#pragma once

#include <array>

namespace mpsych::bandit {

enum class Arm : int { first = 1, second = 2 };

constexpr int arm_number(Arm a) { return static_cast<int>(a); }
constexpr std::size_t arm_slot(Arm a) { return a == Arm::first ? 0 : 1; }
constexpr Arm other_arm(Arm a) { return a == Arm::first ? Arm::second : Arm::first; }

struct ArmBelief {
  double mean = 0.0;
  double variance = 1.0;

  bool operator==(const ArmBelief&) const = default;
};

// Independent Gaussian beliefs over the two arms' mean rewards.
struct PosteriorState {
  std::array<ArmBelief, 2> arms{};

  static PosteriorState prior(double mean, double variance) {
    return PosteriorState{{ArmBelief{mean, variance}, ArmBelief{mean, variance}}};
  }

  const ArmBelief& operator[](Arm a) const { return arms[arm_slot(a)]; }
  ArmBelief& operator[](Arm a) { return arms[arm_slot(a)]; }

  // Same beliefs with the arm labels exchanged.
  PosteriorState swapped() const { return PosteriorState{{arms[1], arms[0]}}; }

  // Throws InvalidPosteriorError unless both variances are finite and > 0
  // and both means are finite.
  void validate() const;

  bool operator==(const PosteriorState&) const = default;
};

}  // namespace mpsych::bandit
