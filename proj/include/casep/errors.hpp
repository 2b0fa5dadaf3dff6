#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

namespace casep {

// Base of every error thrown by the library. The concrete type names the
// failure; what() carries the details.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NonViable : public Error {
 public:
  NonViable(std::int64_t site, const std::string& what)
      : Error(what), site_(site) {}
  // Left endpoint of the first offending bond.
  std::int64_t site() const noexcept { return site_; }

 private:
  std::int64_t site_;
};

#define CASEP_DEFINE_ERROR(Name)       \
  class Name : public Error {          \
   public:                             \
    using Error::Error;                \
  };

CASEP_DEFINE_ERROR(WindowMismatch)
CASEP_DEFINE_ERROR(OutOfRange)
CASEP_DEFINE_ERROR(RateOverflow)
CASEP_DEFINE_ERROR(NotMisanthrope)
CASEP_DEFINE_ERROR(StaleEvent)
CASEP_DEFINE_ERROR(NotInC1Delta)
CASEP_DEFINE_ERROR(QuadratureFailure)
CASEP_DEFINE_ERROR(GridUncovered)
CASEP_DEFINE_ERROR(QuadratureTooCoarse)
CASEP_DEFINE_ERROR(EnsembleTooSmall)
CASEP_DEFINE_ERROR(ResolutionMismatch)
CASEP_DEFINE_ERROR(GridTooLarge)
CASEP_DEFINE_ERROR(PreconditionNotMet)
CASEP_DEFINE_ERROR(IoError)

#undef CASEP_DEFINE_ERROR

// Configuration error; path() points at the offending field, e.g.
// "initial[1].profile.scale".
class ConfigInvalid : public Error {
 public:
  ConfigInvalid(std::string path, const std::string& what)
      : Error(path + ": " + what), path_(std::move(path)) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

}  // namespace casep
