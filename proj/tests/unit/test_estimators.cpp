#include <cmath>

#include "doctest.h"
#include "qpol/errors.hpp"
#include "qpol/estimators.hpp"
#include "qpol/rng.hpp"

using namespace qpol;

namespace {

// Oracle: noiseless statistic of each estimator at transmittance t.
double expected_statistic(EstimatorKind kind, double t, double eh, double ev) {
  const double h = eh * t, v = ev * (1.0 - t);
  switch (kind) {
    case EstimatorKind::Single: return h;
    case EstimatorKind::Diff: return h - v;
    case EstimatorKind::Dsr: return (h - v) / (h + v);
  }
  return NAN;
}

CountRecord expected_counts(double theta_deg, double eh, double ev, std::uint64_t nu) {
  const auto p = projection_coefficients(PolarizationAngle::from_degrees(theta_deg));
  return {static_cast<std::uint64_t>(std::llround(eh * p.transmittance * nu)),
          static_cast<std::uint64_t>(std::llround(ev * p.reflectance * nu)), nu};
}

}  // namespace

TEST_SUITE("estimators") {

TEST_CASE("outcome values") {
  CHECK(outcome_value({13930, 0, 100000}, EstimatorKind::Single) == doctest::Approx(0.1393));
  CHECK(outcome_value({700, 700, 100000}, EstimatorKind::Dsr) == 0.0);
  CHECK(outcome_value({12500, 12500, 100000}, EstimatorKind::Diff) == 0.0);
  CHECK(outcome_value({30, 10, 100}, EstimatorKind::Diff) == doctest::Approx(0.2));
  CHECK(outcome_value({30, 10, 100}, EstimatorKind::Dsr) == doctest::Approx(0.5));
  CHECK_THROWS_AS(outcome_value({0, 0, 100}, EstimatorKind::Dsr), EmptyDenominator);
}

TEST_CASE("inversion examples") {
  const auto cal = Calibration::configured(0.25, 0.25);
  CHECK(invert_to_theta(0.125, EstimatorKind::Single, cal, PolarizationAngle::from_degrees(45.0)).degrees() ==
        doctest::Approx(45.0));
  CHECK(invert_to_theta(0.0, EstimatorKind::Dsr, cal, PolarizationAngle::from_degrees(40.0)).degrees() ==
        doctest::Approx(45.0));
  CHECK(invert_to_theta(0.0, EstimatorKind::Dsr, cal, PolarizationAngle::from_degrees(-40.0)).degrees() ==
        doctest::Approx(-45.0));
  try {
    invert_to_theta(0.26, EstimatorKind::Single, cal, PolarizationAngle::from_degrees(10.0));
    FAIL("expected UnphysicalStatistic");
  } catch (const UnphysicalStatistic& ex) {
    CHECK(ex.transmittance() == doctest::Approx(1.04));
  }
}

TEST_CASE("branch resolution picks the candidate nearest the hint") {
  const double p = 30.0 * kDegree;
  CHECK(resolve_branch(p, PolarizationAngle::from_degrees(25.0)).degrees() == doctest::Approx(30.0));
  CHECK(resolve_branch(p, PolarizationAngle::from_degrees(-20.0)).degrees() == doctest::Approx(-30.0));
  CHECK(resolve_branch(p, PolarizationAngle::from_degrees(140.0)).degrees() == doctest::Approx(150.0));
  CHECK(resolve_branch(p, PolarizationAngle::from_degrees(200.0)).degrees() == doctest::Approx(210.0));
  CHECK(resolve_branch(p, PolarizationAngle::from_degrees(-100.0)).degrees() == doctest::Approx(-150.0));
}

TEST_CASE("inversion round trip for every estimator") {
  for (auto [eh, ev] : {std::pair{0.25, 0.25}, std::pair{0.3, 0.2}, std::pair{0.9, 0.6}}) {
    const auto cal = Calibration::configured(eh, ev);
    for (auto kind : {EstimatorKind::Single, EstimatorKind::Diff, EstimatorKind::Dsr}) {
      for (double deg = -175.0; deg <= 175.0; deg += 2.5) {
        const auto theta = PolarizationAngle::from_degrees(deg);
        const double t = projection_coefficients(theta).transmittance;
        if (t < 1e-6 || t > 1 - 1e-6) continue;
        const double f = expected_statistic(kind, t, eh, ev);
        CHECK(transmittance_from_statistic(f, kind, cal) == doctest::Approx(t).epsilon(1e-12));
        CHECK(std::abs(invert_to_theta(f, kind, cal, theta).degrees() - deg) < 1e-9);
      }
    }
  }
}

TEST_CASE("equal efficiencies: DSR equals normalized diff") {
  StreamRng g(3, 0);
  for (int i = 0; i < 100; ++i) {
    const CountRecord rec{1 + g() % 1000, 1 + g() % 1000, 5000};
    const double diff = outcome_value(rec, EstimatorKind::Diff);
    CHECK(outcome_value(rec, EstimatorKind::Dsr) ==
          doctest::Approx(diff * rec.nu / double(rec.n_h + rec.n_v)).epsilon(1e-14));
  }
  // expectation level at eta_h = eta_v: f_dsr = 2T - 1 and f_diff = eta (2T - 1)
  for (double t : {0.1, 0.4, 0.8}) {
    CHECK(expected_statistic(EstimatorKind::Dsr, t, 0.25, 0.25) ==
          doctest::Approx(expected_statistic(EstimatorKind::Diff, t, 0.25, 0.25) / 0.25));
  }
}

TEST_CASE("exclusion rule") {
  const auto cal = Calibration::configured(0.25, 0.25);
  CHECK_FALSE(exclusion_check(PolarizationAngle::from_degrees(45.0), cal, 100000));
  CHECK(exclusion_check(PolarizationAngle::from_degrees(0.0), cal, 100000));
  CHECK(exclusion_check(PolarizationAngle::from_degrees(90.0), cal, 100000));
  CHECK(exclusion_check(PolarizationAngle::from_degrees(-90.0), cal, 100000));

  // Oracle: margin eta nu - E[N] against 3 binomial standard deviations.
  auto oracle = [](double deg, double eh, double ev, double nu) {
    const auto p = projection_coefficients(PolarizationAngle::from_degrees(deg));
    auto bad = [nu](double eta, double share) {
      const double q = eta * share;
      return eta * nu - nu * q < 3.0 * std::sqrt(nu * q * (1 - q));
    };
    return bad(eh, p.transmittance) || bad(ev, p.reflectance);
  };
  const auto cal2 = Calibration::configured(0.3, 0.2);
  for (double deg = 0.0; deg <= 90.0; deg += 0.25) {
    CHECK(exclusion_check(PolarizationAngle::from_degrees(deg), cal2, 100000) == oracle(deg, 0.3, 0.2, 1e5));
  }
}

TEST_CASE("exclusion is monotone toward the violating channel") {
  const auto cal = Calibration::configured(0.25, 0.25);
  bool excluded_seen = false;
  // Moving from 20 deg toward 0 raises eta_h T; once excluded, stays excluded.
  for (double deg = 20.0; deg >= 0.0; deg -= 0.01) {
    const bool ex = exclusion_check(PolarizationAngle::from_degrees(deg), cal, 100000);
    if (excluded_seen) CHECK(ex);
    excluded_seen = excluded_seen || ex;
  }
  CHECK(excluded_seen);
}

TEST_CASE("noiseless campaign recovers the concentration") {
  const SampleGeometry geo;
  const double rot = specific_rotation(geo.wavelength_nm, geo.transitions);
  const double alpha = rot * geo.path_length_dm * 0.5;
  const double theta_in = 40.0;
  const std::uint64_t nu = 1000000000000000ULL;
  for (auto kind : {EstimatorKind::Single, EstimatorKind::Diff, EstimatorKind::Dsr}) {
    std::vector<CountRecord> camp(3, expected_counts(theta_in + alpha, 0.25, 0.25, nu));
    const auto e = estimate_concentration(camp, kind, Calibration::configured(0.25, 0.25),
                                          PolarizationAngle::from_degrees(theta_in), geo);
    CHECK(e.concentration == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(e.theta_out_std_deg == 0.0);
    CHECK(e.trials_used == 3);
    CHECK_FALSE(e.excluded);
  }
}

TEST_CASE("simulated DSR campaign spread") {
  ProbeConfig probe;
  const SampleGeometry geo;
  const double rot = specific_rotation(geo.wavelength_nm, geo.transitions);
  const double theta_out = 40.0 + rot * 0.1 * 0.5;
  const auto camp = sample_campaign(probe, PolarizationAngle::from_degrees(theta_out), 11);
  const auto e = estimate_concentration(camp, EstimatorKind::Dsr, Calibration::configured(0.25, 0.25),
                                        PolarizationAngle::from_degrees(40.0), geo);
  // 1/sqrt(4 eta nu) rad = 0.1812 deg; std-of-std at mu = 500 is 3.2 %
  CHECK(e.theta_out_std_deg == doctest::Approx(0.18119).epsilon(0.13));
  CHECK(e.concentration_std == doctest::Approx(0.18119 / (rot * 0.1)).epsilon(0.13));
  CHECK(e.concentration_std == doctest::Approx(0.0517).epsilon(0.15));
  CHECK(std::abs(e.concentration - 0.5) < 5 * e.concentration_std / std::sqrt(500.0));
}

TEST_CASE("empty DSR trials are dropped and counted") {
  const SampleGeometry geo;
  std::vector<CountRecord> camp(200, CountRecord{10, 10, 100});
  camp[0] = {0, 0, 100};
  auto e = estimate_concentration(camp, EstimatorKind::Dsr, Calibration::configured(0.25, 0.25),
                                  PolarizationAngle::from_degrees(45.0), geo);
  CHECK(e.trials_dropped == 1);
  CHECK(e.trials_used == 199);
  CHECK_FALSE(e.excluded);  // 0.5 % dropped
  camp[1] = camp[2] = {0, 0, 100};
  e = estimate_concentration(camp, EstimatorKind::Dsr, Calibration::configured(0.25, 0.25),
                             PolarizationAngle::from_degrees(45.0), geo);
  CHECK(e.trials_dropped == 3);
  CHECK(e.excluded);  // 1.5 % dropped
  CHECK_THROWS_AS(estimate_concentration(std::span(camp).first(1), EstimatorKind::Dsr,
                                         Calibration::configured(0.25, 0.25), PolarizationAngle{}, geo),
                  DomainError);
}

TEST_CASE("DSR expectation over the exact law") {
  // Conditional on N_H + N_V = n > 0 the H share is binomial, so the mean of
  // the DSR statistic over nonempty trials equals its closed form exactly.
  for (unsigned n : {1u, 3u, 8u}) {
    const double t = 0.7, eh = 0.3, ev = 0.2;
    const auto law = outcome_probs_quantum(n, t, 1 - t, eh, ev);
    double mass = 0, mean = 0;
    for (unsigned h = 0; h <= n; ++h)
      for (unsigned v = 0; h + v <= n; ++v) {
        if (h + v == 0) continue;
        mass += law.at(h, v);
        mean += law.at(h, v) * (double(h) - double(v)) / double(h + v);
      }
    CHECK(mean / mass == doctest::Approx(expected_statistic(EstimatorKind::Dsr, t, eh, ev)).epsilon(1e-12));
  }
}

TEST_CASE("DSR sample mean is unbiased across nu") {
  const double t = projection_coefficients(PolarizationAngle::from_degrees(35.0)).transmittance;
  const double truth = expected_statistic(EstimatorKind::Dsr, t, 0.3, 0.2);
  for (std::uint64_t nu : {100ULL, 1000ULL, 10000ULL}) {
    ProbeConfig p;
    p.eta_h = 0.3;
    p.eta_v = 0.2;
    p.nu = nu;
    p.mu = 20000;
    const auto camp = sample_campaign(p, PolarizationAngle::from_degrees(35.0), nu);
    double sum = 0, sum2 = 0;
    for (const auto& r : camp) {
      const double f = outcome_value(r, EstimatorKind::Dsr);
      sum += f;
      sum2 += f * f;
    }
    const double m = sum / camp.size();
    const double se = std::sqrt((sum2 / camp.size() - m * m) / camp.size());
    CHECK(std::abs(m - truth) < 5 * se);
  }
}

TEST_CASE("calibration from an exact blank scan") {
  std::vector<BlankScanSummary> scan;
  for (double deg = -90.0; deg <= 90.0; deg += 10.0) {
    const auto th = PolarizationAngle::from_degrees(deg);
    const auto p = projection_coefficients(th);
    scan.push_back({th, 0.25 * p.transmittance, 0.25 * p.reflectance, 1e-4, 1e-4});
  }
  const auto cal = calibrate_efficiencies(scan);
  CHECK(std::abs(cal.eta_h - 0.25) < 1e-12);
  CHECK(std::abs(cal.eta_v - 0.25) < 1e-12);
  CHECK(cal.source == CalibrationSource::FittedFromBlankScan);
  REQUIRE(cal.fit);
  CHECK(cal.fit->residual_rms_h < 1e-14);

  std::vector<BlankScanSummary> same(6, scan[3]);
  CHECK_THROWS_AS(calibrate_efficiencies(same), FitDegenerate);
  CHECK_THROWS_AS(calibrate_efficiencies(std::span(scan).first(3)), DomainError);
}

TEST_CASE("calibration coverage on noisy scans") {
  int covered = 0;
  const int seeds = 40;
  for (int s = 0; s < seeds; ++s) {
    ProbeConfig p;
    p.mu = 100;
    std::vector<BlankScanPoint> scan;
    for (double deg = 0.0; deg <= 90.0; deg += 10.0) {
      const auto th = PolarizationAngle::from_degrees(deg);
      scan.push_back({th, sample_campaign(p, th, derive_seed(1000 + s, scan.size()))});
    }
    const auto cal = calibrate_efficiencies(scan);
    if (std::abs(cal.eta_h - 0.25) < 3 * cal.fit->stderr_h && std::abs(cal.eta_v - 0.25) < 3 * cal.fit->stderr_v)
      ++covered;
    CHECK(cal.fit->consistent());
  }
  // 3-sigma two-channel coverage is ~99.5 %; require the 95 % of the design
  CHECK(covered >= 36);
}

TEST_CASE("calibration flags a scan with a rotating sample") {
  ProbeConfig p;
  p.mu = 100;
  std::vector<BlankScanPoint> scan;
  for (double deg = 0.0; deg <= 90.0; deg += 10.0) {
    const auto out = PolarizationAngle::from_degrees(deg + 1.7);  // alpha != 0 sneaks in
    scan.push_back({PolarizationAngle::from_degrees(deg), sample_campaign(p, out, derive_seed(5, scan.size()))});
  }
  const auto cal = calibrate_efficiencies(scan);
  CHECK_FALSE(cal.fit->consistent());
  CHECK(cal.fit->residual_rms_h > 10 * cal.fit->noise_rms_h);
}

}
