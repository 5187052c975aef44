#include "qpol/uncertainty.hpp"

#include <cmath>

#include "qpol/errors.hpp"

namespace qpol {

namespace {

constexpr double kSingularTol = 1e-14;

void check_context(const UncertaintyContext& ctx) {
  if (!(ctx.eta_h > 0.0 && ctx.eta_h <= 1.0) || !(ctx.eta_v > 0.0 && ctx.eta_v <= 1.0)) {
    throw DomainError("efficiencies must lie in (0, 1]");
  }
  if (!(ctx.nu > 0.0)) throw DomainError("nu must be > 0");
  if (ctx.regime == Regime::Classical && !(ctx.mean_photons > 0.0)) {
    throw DomainError("mean photon number must be > 0");
  }
}

double guarded_sqrt_ratio(double num, double den, const char* what) {
  if (!(den > kSingularTol)) throw SingularPoint(what);
  return std::sqrt(std::max(num, 0.0) / den);
}

}  // namespace

double lep_uncertainty(const UncertaintyContext& ctx) {
  check_context(ctx);
  const Projection proj = projection_coefficients(ctx.theta_out);
  const double t = proj.transmittance;
  const double r = proj.reflectance;
  const double eh = ctx.eta_h;
  const double ev = ctx.eta_v;
  const double s = eh * t + ev * r;
  const double d = eh * t - ev * r;
  const double scale = ctx.regime == Regime::Classical ? ctx.nu * ctx.mean_photons : ctx.nu;

  double per_photon = 0.0;
  if (ctx.regime == Regime::Quantum) {
    switch (ctx.kind) {
      case EstimatorKind::Single:
        // eta_h = 1 is the 0/0 limit of (1 - T)/(1 - T).
        per_photon = eh == 1.0 ? 0.5 : guarded_sqrt_ratio(1.0 - eh * t, 4.0 * eh * r, "single: T -> 1");
        break;
      case EstimatorKind::Diff:
        per_photon = guarded_sqrt_ratio(s - d * d, 4.0 * (eh + ev) * (eh + ev) * t * r, "diff: T -> 0 or 1");
        break;
      case EstimatorKind::Dsr:
        per_photon = std::sqrt(s / (4.0 * eh * ev));
        break;
    }
  } else {
    switch (ctx.kind) {
      case EstimatorKind::Single:
        per_photon = guarded_sqrt_ratio(1.0, 4.0 * eh * r, "single: T -> 1");
        break;
      case EstimatorKind::Diff:
        per_photon = guarded_sqrt_ratio(s, 4.0 * (eh + ev) * (eh + ev) * t * r, "diff: T -> 0 or 1");
        break;
      case EstimatorKind::Dsr:
        per_photon = std::sqrt(s / (4.0 * eh * ev));
        break;
    }
  }
  return per_photon / std::sqrt(scale);
}

CountMoments model_moments(const UncertaintyContext& ctx) {
  check_context(ctx);
  const Projection proj = projection_coefficients(ctx.theta_out);
  const double t = proj.transmittance;
  const double r = proj.reflectance;
  const double eh = ctx.eta_h;
  const double ev = ctx.eta_v;
  const double n = ctx.regime == Regime::Classical ? ctx.nu * ctx.mean_photons : ctx.nu;
  const double ph = eh * t;
  const double pv = ev * r;
  // dT/dtheta = -sin(2 theta).
  const double dt = -std::sin(2.0 * ctx.theta_out.radians());

  CountMoments m;
  if (ctx.regime == Regime::Quantum) {
    m.covariance = {{{n * ph * (1.0 - ph), -n * ph * pv}, {-n * ph * pv, n * pv * (1.0 - pv)}}};
  } else {
    m.covariance = {{{n * ph, 0.0}, {0.0, n * pv}}};
  }
  const double nu = ctx.nu;
  switch (ctx.kind) {
    case EstimatorKind::Single:
      m.partials = {1.0 / nu, 0.0};
      m.slope = (n / nu) * eh * dt;
      break;
    case EstimatorKind::Diff:
      m.partials = {1.0 / nu, -1.0 / nu};
      m.slope = (n / nu) * (eh + ev) * dt;
      break;
    case EstimatorKind::Dsr: {
      const double mh = n * ph;
      const double mv = n * pv;
      const double sum = mh + mv;
      m.partials = {2.0 * mv / (sum * sum), -2.0 * mh / (sum * sum)};
      const double s = ph + pv;
      m.slope = 2.0 * eh * ev / (s * s) * dt;
      break;
    }
  }
  return m;
}

double covariance_propagation(const CountMoments& m, double slope_epsilon) {
  const auto& c = m.covariance;
  if (c[0][0] < 0.0 || c[1][1] < 0.0 || c[0][0] * c[1][1] - c[0][1] * c[1][0] < -1e-12 * (c[0][0] * c[1][1])) {
    throw DomainError("covariance matrix is not positive semidefinite");
  }
  if (!(std::abs(m.slope) >= slope_epsilon)) throw ZeroSlope("estimator slope vanishes at this angle");
  double var = 0.0;
  for (int j = 0; j < 2; ++j)
    for (int k = 0; k < 2; ++k) var += m.partials[j] * m.partials[k] * c[j][k];
  return std::sqrt(std::max(var, 0.0)) / std::abs(m.slope);
}

double quantum_enhancement(EstimatorKind kind, PolarizationAngle theta_out, double eta_h, double eta_v) {
  const Projection proj = projection_coefficients(theta_out);
  const double t = proj.transmittance;
  const double r = proj.reflectance;
  switch (kind) {
    case EstimatorKind::Single: {
      const double q = 1.0 - eta_h * t;
      if (!(q > kSingularTol)) throw SingularPoint("single enhancement diverges at eta_h T = 1");
      return 1.0 / std::sqrt(q);
    }
    case EstimatorKind::Diff: {
      // Ratio of the classical to the quantum diff closed forms: (1 - D^2 / S)^(-1/2).
      const double s = eta_h * t + eta_v * r;
      const double d = eta_h * t - eta_v * r;
      if (!(s > 0.0)) throw SingularPoint("diff enhancement undefined with no detected light");
      const double q = 1.0 - d * d / s;
      if (!(q > kSingularTol)) throw SingularPoint("diff enhancement diverges");
      return 1.0 / std::sqrt(q);
    }
    case EstimatorKind::Dsr:
      return 1.0;
  }
  throw DomainError("unknown estimator kind");
}

ExtremaReport extrema(EstimatorKind kind, Regime regime, double eta_h, double eta_v, double nu) {
  if (!(eta_h > 0.0 && eta_h <= 1.0) || !(eta_v > 0.0 && eta_v <= 1.0)) {
    throw DomainError("efficiencies must lie in (0, 1]");
  }
  if (!(nu > 0.0)) throw DomainError("nu must be > 0");
  const double root_nu = std::sqrt(nu);
  ExtremaReport rep;
  switch (kind) {
    case EstimatorKind::Single:
      rep.min = {1.0 / (root_nu * std::sqrt(4.0 * eta_h)), 0.0};
      if (regime == Regime::Quantum && eta_h == 1.0) {
        rep.max = rep.min;
        rep.constant = true;
      }
      break;
    case EstimatorKind::Diff: {
      if (regime == Regime::Quantum) {
        const double gh = eta_h * (1.0 - eta_h);
        const double gv = eta_v * (1.0 - eta_v);
        const double cross = std::sqrt(gh * gv);
        const double t_star = gv + cross > 0.0 ? gv / (gv + cross) : 0.5;
        const double value = std::sqrt(eta_h * (1.0 + eta_v) + eta_v * (1.0 + eta_h) + 2.0 * cross) /
                             (2.0 * root_nu * (eta_h + eta_v));
        rep.min = {value, t_star};
        if (eta_h == 1.0 && eta_v == 1.0) {
          rep.max = rep.min;
          rep.constant = true;
        }
      } else {
        // d/dT [S / (T R)] = 0  ->  (eta_h - eta_v) T^2 + 2 eta_v T - eta_v = 0.
        const double sh = std::sqrt(eta_h);
        const double sv = std::sqrt(eta_v);
        const double t_star = sv / (sh + sv);
        const double s = eta_h * t_star + eta_v * (1.0 - t_star);
        const double value =
            std::sqrt(s / (4.0 * (eta_h + eta_v) * (eta_h + eta_v) * t_star * (1.0 - t_star))) / root_nu;
        rep.min = {value, t_star};
      }
      break;
    }
    case EstimatorKind::Dsr: {
      const Extremum at_zero{1.0 / (root_nu * std::sqrt(4.0 * eta_h)), 0.0};
      const Extremum at_one{1.0 / (root_nu * std::sqrt(4.0 * eta_v)), 1.0};
      if (eta_h == eta_v) {
        rep.min = at_zero;
        rep.max = at_zero;
        rep.constant = true;
      } else if (eta_h > eta_v) {
        rep.min = at_zero;
        rep.max = at_one;
      } else {
        rep.min = at_one;
        rep.max = at_zero;
      }
      break;
    }
  }
  return rep;
}

PeBias pe_bias(EstimatorKind kind, PolarizationAngle theta_out, double eta_h, double eta_v, double r_pe,
               double nu) {
  if (!(eta_h > 0.0 && eta_h <= 1.0) || !(eta_v > 0.0 && eta_v <= 1.0)) {
    throw DomainError("efficiencies must lie in (0, 1]");
  }
  if (!(r_pe >= 0.0 && r_pe < 0.5)) throw DomainError("r_pe must lie in [0, 0.5)");
  const Projection proj = projection_coefficients(theta_out);
  const double t = proj.transmittance;
  const double r = proj.reflectance;
  if (!(t > kSingularTol && r > kSingularTol)) {
    throw SingularPoint("leakage bias diverges as T -> 0 or 1");
  }
  const double lean = 1.0 - 2.0 * t;
  PeBias out;
  out.large_leakage = r_pe > 0.05;

  const UncertaintyContext ctx{kind, Regime::Quantum, theta_out, eta_h, eta_v, nu, 1.0};
  const double delta = lep_uncertainty(ctx);
  switch (kind) {
    case EstimatorKind::Single:
      out.delta_f = lean * eta_h;
      out.delta_uncertainty = lean / 8.0 * (1.0 / eta_h - 1.0) / (r * r) / (nu * delta);
      break;
    case EstimatorKind::Diff:
      out.delta_f = lean * (eta_h + eta_v);
      out.delta_uncertainty = lean / 8.0 / ((eta_h + eta_v) * (eta_h + eta_v)) *
                              (eta_h * (1.0 - eta_h) / (r * r) - eta_v * (1.0 - eta_v) / (t * t)) /
                              (nu * delta);
      break;
    case EstimatorKind::Dsr: {
      const double s = t * eta_h + r * eta_v;
      out.delta_f = lean * 2.0 * eta_h * eta_v / (s * s);
      out.delta_uncertainty = lean / 8.0 * (1.0 / eta_v - 1.0 / eta_h) / (nu * delta);
      break;
    }
  }
  // theta' = theta - lean / (dT/dtheta) = theta + cot(2 theta) per unit r_pe.
  out.delta_theta = std::cos(2.0 * theta_out.radians()) / std::sin(2.0 * theta_out.radians());
  out.bias_f = r_pe * out.delta_f;
  out.bias_theta = r_pe * out.delta_theta;
  out.bias_uncertainty = r_pe * out.delta_uncertainty;
  return out;
}

}  // namespace qpol
