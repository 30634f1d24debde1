#ifndef SSW_ERROR_HPP
#define SSW_ERROR_HPP

#include <stdexcept>
#include <string>

namespace ssw {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input data or a violated dataset invariant.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Model specification inconsistent with its role or with the dataset.
class SpecError : public Error {
 public:
  using Error::Error;
};

/// Logistic fit failure: rank deficiency, separation, or non-convergence.
class FitError : public Error {
 public:
  enum class Kind { RankDeficient, Separation, NonConvergence, EmptySubset };
  FitError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

/// Classification probabilities too close to each other: p(1,a) - p(0,a) ~ 0.
class IdentificationError : public Error {
 public:
  using Error::Error;
};

/// Bad argument to an estimator or interval routine.
class ArgumentError : public Error {
 public:
  using Error::Error;
};

}  // namespace ssw

#endif  // SSW_ERROR_HPP
