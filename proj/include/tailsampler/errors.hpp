#pragma once

#include <stdexcept>
#include <string>

namespace tailsampler {

/// Base of every error raised by the library. Carries the name of the module
/// that detected the problem so the CLI can surface it.
class Error : public std::runtime_error {
 public:
  Error(std::string module, const std::string& what)
      : std::runtime_error(module + ": " + what), module_(std::move(module)) {}

  const std::string& module() const noexcept { return module_; }

 private:
  std::string module_;
};

#define TAILSAMPLER_DEFINE_ERROR(Name)      \
  class Name : public Error {               \
   public:                                  \
    using Error::Error;                     \
  };

TAILSAMPLER_DEFINE_ERROR(DimensionError)
TAILSAMPLER_DEFINE_ERROR(SingularInputError)
TAILSAMPLER_DEFINE_ERROR(ShapeError)
TAILSAMPLER_DEFINE_ERROR(PreconditionError)
TAILSAMPLER_DEFINE_ERROR(ZeroBranchError)
TAILSAMPLER_DEFINE_ERROR(ContainmentError)
TAILSAMPLER_DEFINE_ERROR(ExhaustedDomain)
TAILSAMPLER_DEFINE_ERROR(RangeError)
TAILSAMPLER_DEFINE_ERROR(FitDomainError)
TAILSAMPLER_DEFINE_ERROR(ConsistencyError)
TAILSAMPLER_DEFINE_ERROR(FormatError)

#undef TAILSAMPLER_DEFINE_ERROR

/// Raised when an input vector is not unit-norm; keeps the measured norm.
class NormalizationError : public Error {
 public:
  NormalizationError(std::string module, const std::string& what, double norm)
      : Error(std::move(module), what), norm_(norm) {}

  double norm() const noexcept { return norm_; }

 private:
  double norm_;
};

}  // namespace tailsampler
