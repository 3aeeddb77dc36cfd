#pragma once

#include <stdexcept>
#include <string>

namespace mpsych {

// Base for every error raised by the toolkit. Callers that only care about
// "something in mpsych failed" catch this; tests match the concrete types.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define MPSYCH_DEFINE_ERROR(Name)     \
  class Name : public Error {         \
   public:                            \
    using Error::Error;               \
  }

// Agents
MPSYCH_DEFINE_ERROR(TransportError);
MPSYCH_DEFINE_ERROR(UnmappedPromptError);

// Input validation shared across modules
MPSYCH_DEFINE_ERROR(InputError);
MPSYCH_DEFINE_ERROR(PreconditionError);
MPSYCH_DEFINE_ERROR(RangeError);
MPSYCH_DEFINE_ERROR(EmptyInputError);
MPSYCH_DEFINE_ERROR(DegenerateVarianceError);

// Bandit / posterior
MPSYCH_DEFINE_ERROR(InvalidPosteriorError);
MPSYCH_DEFINE_ERROR(InvalidObservationError);
MPSYCH_DEFINE_ERROR(GameOverError);
MPSYCH_DEFINE_ERROR(ParseFailureError);

// Model fitting
MPSYCH_DEFINE_ERROR(SeparationError);
MPSYCH_DEFINE_ERROR(RankDeficiencyError);
MPSYCH_DEFINE_ERROR(ConvergenceError);

// Runner / persistence
MPSYCH_DEFINE_ERROR(IntegrityError);
MPSYCH_DEFINE_ERROR(SchemaError);
MPSYCH_DEFINE_ERROR(IoError);

#undef MPSYCH_DEFINE_ERROR

}  // namespace mpsych
