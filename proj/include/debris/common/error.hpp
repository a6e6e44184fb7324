#pragma once

#include <stdexcept>
#include <string>

namespace debris {

// Every failure raised by the library derives from Error so callers (the CLI
// in particular) can map it to a nonzero exit status in one place.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define DEBRIS_DEFINE_ERROR(Name)            \
  class Name : public Error {                \
   public:                                   \
    using Error::Error;                      \
  }

DEBRIS_DEFINE_ERROR(ShapeError);
DEBRIS_DEFINE_ERROR(BoundsError);
DEBRIS_DEFINE_ERROR(ConfigError);
DEBRIS_DEFINE_ERROR(ContractError);
DEBRIS_DEFINE_ERROR(DomainError);
DEBRIS_DEFINE_ERROR(IoError);
DEBRIS_DEFINE_ERROR(DecodeError);
DEBRIS_DEFINE_ERROR(GeoreferenceError);
DEBRIS_DEFINE_ERROR(CoverageError);
DEBRIS_DEFINE_ERROR(EmptyInputError);
DEBRIS_DEFINE_ERROR(IncompleteError);
DEBRIS_DEFINE_ERROR(TrainingError);
DEBRIS_DEFINE_ERROR(BackendError);
DEBRIS_DEFINE_ERROR(PreconditionError);

#undef DEBRIS_DEFINE_ERROR

}  // namespace debris
