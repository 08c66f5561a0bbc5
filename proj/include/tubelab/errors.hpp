#pragma once

#include <stdexcept>
#include <string>

namespace tubelab {

// Every failure raised by the library derives from Error so the CLI can map
// it to an exit code in one place.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define TUBELAB_ERROR(Name)                  \
  class Name : public Error {                \
   public:                                   \
    explicit Name(const std::string& what)   \
        : Error(#Name ": " + what) {}        \
  }

TUBELAB_ERROR(NotImplemented);
TUBELAB_ERROR(NotSupported);
TUBELAB_ERROR(InvalidArgument);
TUBELAB_ERROR(FocalRadiusExceeded);
TUBELAB_ERROR(ResolutionError);
TUBELAB_ERROR(NumericalError);
TUBELAB_ERROR(CoercivityViolation);
TUBELAB_ERROR(DegenerateConditioning);
TUBELAB_ERROR(StepSizeError);
TUBELAB_ERROR(EmptyEnsemble);
TUBELAB_ERROR(ConfigError);

#undef TUBELAB_ERROR

}  // namespace tubelab
