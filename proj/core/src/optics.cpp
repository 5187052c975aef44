#include "qpol/optics.hpp"

#include <cmath>
#include <string>

#include "qpol/errors.hpp"

namespace qpol {

void ChiralSample::validate() const {
  if (!(concentration >= 0.0) || !std::isfinite(concentration)) {
    throw DomainError("concentration must be finite and >= 0");
  }
  if (!(path_length_dm > 0.0) || !std::isfinite(path_length_dm)) {
    throw DomainError("path length must be finite and > 0");
  }
  if (transitions.empty()) {
    throw DomainError("at least one Drude transition is required");
  }
  for (const auto& t : transitions) {
    if (!(t.resonance_nm > 0.0) || !std::isfinite(t.amplitude) || t.amplitude == 0.0) {
      throw DomainError("Drude transition needs resonance > 0 and a finite nonzero amplitude");
    }
  }
}

double specific_rotation(double wavelength_nm, std::span<const DrudeTransition> transitions,
                         double pole_epsilon) {
  if (!(wavelength_nm > 0.0)) {
    throw DomainError("wavelength must be > 0");
  }
  if (std::isinf(wavelength_nm)) {
    return 0.0;
  }
  const double lambda2 = wavelength_nm * wavelength_nm;
  double sum = 0.0;
  for (const auto& t : transitions) {
    const double gap = lambda2 - t.resonance_nm * t.resonance_nm;
    if (std::abs(gap) < pole_epsilon) {
      throw PoleError("wavelength " + std::to_string(wavelength_nm) + " nm lies on the resonance at " +
                      std::to_string(t.resonance_nm) + " nm");
    }
    sum += t.amplitude / gap;
  }
  return sum;
}

double rotation_angle_deg(const ChiralSample& sample, double wavelength_nm, double pole_epsilon) {
  sample.validate();
  return specific_rotation(wavelength_nm, sample.transitions, pole_epsilon) * sample.path_length_dm *
         sample.concentration;
}

Projection projection_coefficients(PolarizationAngle theta_out) {
  const double c = std::cos(theta_out.radians());
  const double s = std::sin(theta_out.radians());
  const double c2 = c * c;
  const double s2 = s * s;
  // The smaller of the two is computed directly so it keeps full relative precision.
  if (c2 >= s2) {
    return {1.0 - s2, s2};
  }
  return {c2, 1.0 - c2};
}

double concentration_from_angle(double alpha_deg, double specific_rotation, double path_length_dm) {
  const double denom = specific_rotation * path_length_dm;
  if (denom == 0.0 || !std::isfinite(denom)) {
    throw DivisionDomainError("specific rotation x path length must be finite and nonzero");
  }
  return alpha_deg / denom;
}

}  // namespace qpol
