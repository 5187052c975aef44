#pragma once

#include <stdexcept>
#include <string>

namespace qpol {

/// Root of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An argument lies outside the domain of the operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Drude dispersion evaluated at (or too close to) a resonance wavelength.
class PoleError : public DomainError {
 public:
  using DomainError::DomainError;
};

/// Concentration inversion with a vanishing specific-rotation x length product.
class DivisionDomainError : public DomainError {
 public:
  using DomainError::DomainError;
};

/// DSR statistic requested for a trial with no detected photons.
class EmptyDenominator : public Error {
 public:
  using Error::Error;
};

/// The inverted transmittance fell outside [0, 1].
class UnphysicalStatistic : public Error {
 public:
  explicit UnphysicalStatistic(const std::string& what, double transmittance)
      : Error(what), transmittance_(transmittance) {}
  double transmittance() const noexcept { return transmittance_; }

 private:
  double transmittance_;
};

class FitDegenerate : public Error {
 public:
  using Error::Error;
};

/// A closed form diverges (or is 0/0) at the requested operating point.
class SingularPoint : public Error {
 public:
  using Error::Error;
};

/// The estimator carries no information at this angle.
class ZeroSlope : public Error {
 public:
  using Error::Error;
};

class UnitMismatch : public Error {
 public:
  using Error::Error;
};

/// An outcome distribution could not be truncated to the requested tail mass.
class TruncationError : public Error {
 public:
  using Error::Error;
};

}  // namespace qpol
