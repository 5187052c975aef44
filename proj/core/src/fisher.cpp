#include "qpol/fisher.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "qpol/errors.hpp"
#include "qpol/text_table.hpp"
#include "qpol/uncertainty.hpp"

namespace qpol {

namespace {

constexpr double kEdge = 1e-12;

std::string_view regime_name(Regime r) { return r == Regime::Quantum ? "quantum" : "classical"; }

// Poisson pmf on a fixed support {0, ..., size - 1}.
std::vector<double> poisson_fixed(double mean, std::size_t size) {
  std::vector<double> p(size, 0.0);
  if (mean <= 0.0) {
    p[0] = 1.0;
    return p;
  }
  for (std::size_t k = 0; k < size; ++k) p[k] = std::exp(k * std::log(mean) - mean - std::lgamma(k + 1.0));
  return p;
}

}  // namespace

std::string_view to_string(Scheme scheme) {
  switch (scheme) {
    case Scheme::TwoMode: return "two-mode";
    case Scheme::SingleModeH: return "single-h";
    case Scheme::SingleModeV: return "single-v";
  }
  return "unknown";
}

double fi_closed(Scheme scheme, Regime regime, PolarizationAngle theta_out, double eta_h, double eta_v,
                 double photons) {
  if (!(eta_h >= 0.0 && eta_h <= 1.0) || !(eta_v >= 0.0 && eta_v <= 1.0)) {
    throw DomainError("efficiencies must lie in [0, 1]");
  }
  if (!(photons >= 0.0)) throw DomainError("photon number must be >= 0");
  const Projection proj = projection_coefficients(theta_out);
  const double t = proj.transmittance;
  const double r = proj.reflectance;
  if (t < kEdge || r < kEdge) throw SingularPoint("Fisher information is singular at T in {0, 1}");
  const double slope2 = 4.0 * t * r;
  const double n = photons;

  switch (scheme) {
    case Scheme::SingleModeH: {
      if (regime == Regime::Classical) return n * eta_h / t * slope2;
      const double lost = 1.0 - eta_h * t;
      if (lost < kEdge) throw SingularPoint("single-mode H information singular at eta_h T = 1");
      return n * eta_h / (t * lost) * slope2;
    }
    case Scheme::SingleModeV: {
      if (regime == Regime::Classical) return n * eta_v / r * slope2;
      const double lost = 1.0 - eta_v * r;
      if (lost < kEdge) throw SingularPoint("single-mode V information singular at eta_v R = 1");
      return n * eta_v / (r * lost) * slope2;
    }
    case Scheme::TwoMode: {
      double fi = n * (eta_h / t + eta_v / r) * slope2;
      if (regime == Regime::Quantum && eta_h != eta_v) {
        const double lost = 1.0 - eta_h * t - eta_v * r;
        if (lost < kEdge) throw SingularPoint("two-mode information singular with no loss cell");
        fi += n * (eta_h - eta_v) * (eta_h - eta_v) / lost * slope2;
      }
      return fi;
    }
  }
  throw DomainError("unknown scheme");
}

double fi_numeric(const DistributionFamily& family, double theta, double step, Differencing differencing,
                  double tail_tolerance) {
  if (!(step > 0.0)) throw DomainError("finite-difference step must be > 0");
  const std::vector<double> p = family(theta);
  double mass = 0.0;
  for (double x : p) mass += x;
  if (!(mass >= 1.0 - tail_tolerance)) {
    throw TruncationError("outcome support holds only " + text::format_number(mass) + " of the mass");
  }

  auto central = [&](double h) {
    const auto plus = family(theta + h);
    const auto minus = family(theta - h);
    if (plus.size() != p.size() || minus.size() != p.size()) {
      throw DomainError("distribution family changed its support size");
    }
    std::vector<double> d(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) d[i] = (plus[i] - minus[i]) / (2.0 * h);
    return d;
  };

  std::vector<double> deriv = central(step);
  if (differencing == Differencing::Richardson) {
    const auto half = central(step / 2.0);
    for (std::size_t i = 0; i < deriv.size(); ++i) deriv[i] = (4.0 * half[i] - deriv[i]) / 3.0;
  }

  double fi = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] > 0.0) fi += deriv[i] * deriv[i] / p[i];
  }
  return fi;
}

DistributionFamily outcome_family(Scheme scheme, Regime regime, double eta_h, double eta_v, double photons) {
  if (regime == Regime::Quantum) {
    const double rounded = std::round(photons);
    if (rounded < 0.0 || rounded != photons) throw DomainError("quantum probe needs an integer photon number");
    const auto n = static_cast<unsigned>(rounded);
    return [=](double theta) {
      const Projection proj{std::cos(theta) * std::cos(theta), std::sin(theta) * std::sin(theta)};
      switch (scheme) {
        case Scheme::SingleModeH: return binomial_pmf(n, eta_h * proj.transmittance);
        case Scheme::SingleModeV: return binomial_pmf(n, eta_v * proj.reflectance);
        case Scheme::TwoMode: break;
      }
      const double t = proj.transmittance;
      return outcome_probs_quantum(n, t, 1.0 - t, eta_h, eta_v).values();
    };
  }

  // One truncation point for the whole family keeps the support fixed in theta.
  const double worst_mean = std::max(eta_h, eta_v) * photons;
  const std::size_t size = poisson_pmf(worst_mean, 1e-16).size() + 2;
  return [=](double theta) {
    const double t = std::cos(theta) * std::cos(theta);
    const double r = std::sin(theta) * std::sin(theta);
    switch (scheme) {
      case Scheme::SingleModeH: return poisson_fixed(eta_h * t * photons, size);
      case Scheme::SingleModeV: return poisson_fixed(eta_v * r * photons, size);
      case Scheme::TwoMode: break;
    }
    const auto ph = poisson_fixed(eta_h * t * photons, size);
    const auto pv = poisson_fixed(eta_v * r * photons, size);
    std::vector<double> joint(size * size);
    for (std::size_t h = 0; h < size; ++h)
      for (std::size_t v = 0; v < size; ++v) joint[h * size + v] = ph[h] * pv[v];
    return joint;
  };
}

DistributionFamily product_family(DistributionFamily family, unsigned copies) {
  if (copies == 0) throw DomainError("product of zero copies");
  return [family = std::move(family), copies](double theta) {
    const auto single = family(theta);
    std::vector<double> joint{1.0};
    for (unsigned c = 0; c < copies; ++c) {
      std::vector<double> next;
      next.reserve(joint.size() * single.size());
      for (double a : joint)
        for (double b : single) next.push_back(a * b);
      joint = std::move(next);
    }
    return joint;
  };
}

void check_pairing(EstimatorKind kind, Scheme scheme) {
  const bool ok = (kind == EstimatorKind::Single && scheme == Scheme::SingleModeH) ||
                  (kind != EstimatorKind::Single && scheme == Scheme::TwoMode);
  if (!ok) {
    throw DomainError(std::string("estimator '") + std::string(to_string(kind)) + "' does not pair with scheme '" +
                      std::string(to_string(scheme)) + "'");
  }
}

FisherReport fisher_report(EstimatorKind kind, Scheme scheme, Regime regime, PolarizationAngle theta_out,
                           double eta_h, double eta_v, double nu, double mean_photons) {
  check_pairing(kind, scheme);
  const double photons = regime == Regime::Quantum ? 1.0 : mean_photons;
  FisherReport rep;
  rep.scheme = scheme;
  rep.regime = regime;
  rep.kind = kind;
  rep.theta_out_deg = theta_out.degrees();
  rep.transmittance = projection_coefficients(theta_out).transmittance;
  rep.fi_closed = fi_closed(scheme, regime, theta_out, eta_h, eta_v, photons);
  rep.fi_numeric = fi_numeric(outcome_family(scheme, regime, eta_h, eta_v, photons), theta_out.radians());
  rep.fi_campaign = nu * rep.fi_closed;
  rep.cr_bound = 1.0 / std::sqrt(rep.fi_campaign);
  rep.lep_value = lep_uncertainty({kind, regime, theta_out, eta_h, eta_v, nu, mean_photons});
  rep.saturation_gap = rep.lep_value * std::sqrt(rep.fi_campaign) - 1.0;
  return rep;
}

SaturationReport saturation_check(EstimatorKind kind, Scheme scheme, Regime regime,
                                  std::span<const double> theta_grid_deg, double eta_h, double eta_v, double nu,
                                  double mean_photons, double tolerance) {
  check_pairing(kind, scheme);
  if (theta_grid_deg.empty()) throw DomainError("saturation grid is empty");
  SaturationReport rep;
  rep.min_gap = INFINITY;
  rep.max_gap = -INFINITY;
  for (double deg : theta_grid_deg) {
    auto row = fisher_report(kind, scheme, regime, PolarizationAngle::from_degrees(deg), eta_h, eta_v, nu,
                             mean_photons);
    rep.min_gap = std::min(rep.min_gap, row.saturation_gap);
    rep.max_gap = std::max(rep.max_gap, row.saturation_gap);
    rep.rows.push_back(row);
  }
  rep.saturated = rep.min_gap >= -tolerance && rep.max_gap <= tolerance;
  rep.bound_respected = rep.min_gap >= -tolerance;
  return rep;
}

void write_fisher_csv(std::ostream& out, std::span<const FisherReport> rows) {
  out << "scheme,regime,estimator,theta_out_deg,transmittance,fi_closed_per_herald_rad-2,"
         "fi_numeric_per_herald_rad-2,fi_campaign_rad-2,cr_bound_rad,lep_rad,saturation_gap\n";
  for (const auto& r : rows) {
    out << to_string(r.scheme) << ',' << regime_name(r.regime) << ','
        << (std::isnan(r.lep_value) ? std::string_view("none") : to_string(r.kind)) << ','
        << text::format_number(r.theta_out_deg) << ',' << text::format_number(r.transmittance) << ','
        << text::format_number(r.fi_closed) << ',' << text::format_number(r.fi_numeric) << ','
        << text::format_number(r.fi_campaign) << ',' << text::format_number(r.cr_bound) << ','
        << text::format_number(r.lep_value) << ',' << text::format_number(r.saturation_gap) << '\n';
  }
}

}  // namespace qpol
