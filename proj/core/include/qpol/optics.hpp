#pragma once

#include <numbers>
#include <span>
#include <vector>

namespace qpol {

inline constexpr double kDegree = std::numbers::pi / 180.0;

/// Plane-polarization angle. Stored in radians; degrees only at I/O.
class PolarizationAngle {
 public:
  constexpr PolarizationAngle() = default;

  static constexpr PolarizationAngle from_radians(double rad) { return PolarizationAngle(rad); }
  static constexpr PolarizationAngle from_degrees(double deg) { return PolarizationAngle(deg * kDegree); }

  constexpr double radians() const { return rad_; }
  constexpr double degrees() const { return rad_ / kDegree; }

  friend constexpr PolarizationAngle operator+(PolarizationAngle a, PolarizationAngle b) {
    return PolarizationAngle(a.rad_ + b.rad_);
  }
  friend constexpr PolarizationAngle operator-(PolarizationAngle a, PolarizationAngle b) {
    return PolarizationAngle(a.rad_ - b.rad_);
  }
  friend constexpr bool operator==(PolarizationAngle, PolarizationAngle) = default;

 private:
  constexpr explicit PolarizationAngle(double rad) : rad_(rad) {}
  double rad_ = 0.0;
};

/// One Drude term: amplitude in deg nm^2 dm^-1 g^-1 ml, resonance in nm.
struct DrudeTransition {
  double amplitude = 0.0;
  double resonance_nm = 0.0;
};

/// Single-transition dispersion of aqueous sucrose.
inline constexpr DrudeTransition kSucroseTransition{2.1648e7, 146.0};

/// Default guard on |lambda^2 - lambda_j^2| in nm^2.
inline constexpr double kDefaultPoleEpsilon = 1e-6;

struct ChiralSample {
  double concentration = 0.0;   // g/ml
  double path_length_dm = 0.1;  // dm
  std::vector<DrudeTransition> transitions{kSucroseTransition};

  /// Throws DomainError on a negative concentration, non-positive length,
  /// an empty transition list or an invalid transition.
  void validate() const;
};

/// Geometry needed to turn an angle into a concentration.
struct SampleGeometry {
  double path_length_dm = 0.1;
  double wavelength_nm = 809.6;
  std::vector<DrudeTransition> transitions{kSucroseTransition};
};

/// Transmittance (cos^2) and reflectance (sin^2) at the analysing PBS.
struct Projection {
  double transmittance = 1.0;
  double reflectance = 0.0;
};

/// Specific rotation [alpha](lambda) = sum_j A_j / (lambda^2 - lambda_j^2),
/// in deg dm^-1 g^-1 ml. Throws PoleError within `pole_epsilon` of a resonance.
double specific_rotation(double wavelength_nm, std::span<const DrudeTransition> transitions,
                         double pole_epsilon = kDefaultPoleEpsilon);

/// Rotation angle alpha = [alpha] l C in degrees.
double rotation_angle_deg(const ChiralSample& sample, double wavelength_nm,
                          double pole_epsilon = kDefaultPoleEpsilon);

/// T and R for an output polarization; T + R == 1 to one ulp.
Projection projection_coefficients(PolarizationAngle theta_out);

/// C = alpha / ([alpha] l). Negative results are returned unchanged.
double concentration_from_angle(double alpha_deg, double specific_rotation, double path_length_dm);

}  // namespace qpol
