#pragma once

#include <stdexcept>
#include <string>

namespace mvlab {

/// Base class for every error raised by the library. `code()` is the stable
/// machine-readable name that the CLI writes into its error JSON.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& what)
      : std::runtime_error(what), code_(std::move(code)) {}
  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

#define MVLAB_DEFINE_ERROR(Name)                                  \
  class Name : public Error {                                     \
   public:                                                        \
    explicit Name(const std::string& what) : Error(#Name, what) {} \
  };

MVLAB_DEFINE_ERROR(InvalidPrior)
MVLAB_DEFINE_ERROR(InvalidDelta)
MVLAB_DEFINE_ERROR(UnsupportedFamily)
MVLAB_DEFINE_ERROR(IncomparableCells)
MVLAB_DEFINE_ERROR(InstanceTooLarge)
MVLAB_DEFINE_ERROR(DegenerateRegression)
MVLAB_DEFINE_ERROR(ZeroProbabilityHistory)
MVLAB_DEFINE_ERROR(HistoryGap)
MVLAB_DEFINE_ERROR(InvalidTree)
MVLAB_DEFINE_ERROR(InvalidArgument)
MVLAB_DEFINE_ERROR(LpFailure)

#undef MVLAB_DEFINE_ERROR

}  // namespace mvlab
