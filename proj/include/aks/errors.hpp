#ifndef AKS_ERRORS_HPP
#define AKS_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace aks {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class SingularMatrix : public Error {
public:
  using Error::Error;
};

class NonFiniteResult : public Error {
public:
  using Error::Error;
};

/// A group element lies outside the open set where the factorization g = g_A g_B exists.
class NotInCheckedDomain : public Error {
public:
  using Error::Error;
};

class DirectSumViolation : public Error {
public:
  using Error::Error;
};

class NotSubalgebra : public Error {
public:
  using Error::Error;
};

class DegenerateForm : public Error {
public:
  using Error::Error;
};

/// An argument is not an element of the subspace (or subgroup) it is required to lie in.
class MembershipError : public Error {
public:
  using Error::Error;
};

/// An internal consistency identity failed beyond its tolerance.
class InvariantViolation : public Error {
public:
  using Error::Error;
};

class IllConditioned : public Error {
public:
  IllConditioned(const std::string& what, double condition)
      : Error(what), condition_(condition) {}
  double condition() const noexcept { return condition_; }

private:
  double condition_;
};

class ConstraintDrift : public Error {
public:
  ConstraintDrift(const std::string& what, double time, double drift)
      : Error(what), time_(time), drift_(drift) {}
  double time() const noexcept { return time_; }
  double drift() const noexcept { return drift_; }

private:
  double time_;
  double drift_;
};

} // namespace aks

#endif // AKS_ERRORS_HPP
