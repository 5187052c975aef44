#include "qpol/photostats.hpp"

#include <cmath>
#include <random>

#include "qpol/errors.hpp"
#include "qpol/rng.hpp"

namespace qpol {

namespace {

constexpr double kProbabilitySlack = 1e-12;

void check_probability(double p, const char* what) {
  if (!(p >= -kProbabilitySlack && p <= 1.0 + kProbabilitySlack)) {
    throw DomainError(std::string(what) + " must lie in [0, 1]");
  }
}

double clamp01(double p) { return p < 0.0 ? 0.0 : (p > 1.0 ? 1.0 : p); }

double log_choose(unsigned n, unsigned k) {
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

// p^k with the convention 0^0 = 1, in log space when p > 0.
double pow_term(double p, unsigned k, double& log_acc) {
  if (k == 0) return 1.0;
  if (p <= 0.0) return 0.0;
  log_acc += k * std::log(p);
  return 1.0;
}

struct Cells {
  double h;
  double v;
};

Cells detection_cells(const ProbeConfig& config, PolarizationAngle theta_out) {
  const Projection proj = projection_coefficients(theta_out);
  const double t_eff = effective_transmittance(proj.transmittance, config.r_pe);
  return {clamp01(config.eta_h * t_eff), clamp01(config.eta_v * (1.0 - t_eff))};
}

}  // namespace

void ProbeConfig::validate() const {
  if (!(eta_h >= 0.0 && eta_h <= 1.0)) throw DomainError("eta_h must lie in [0, 1]");
  if (!(eta_v >= 0.0 && eta_v <= 1.0)) throw DomainError("eta_v must lie in [0, 1]");
  if (!(r_pe >= 0.0 && r_pe < 0.5)) throw DomainError("r_pe must lie in [0, 0.5)");
  if (nu < 1) throw DomainError("nu must be >= 1");
  if (mu < 1) throw DomainError("mu must be >= 1");
  if (!(mean_photons >= 0.0) || !std::isfinite(mean_photons)) {
    throw DomainError("mean_photons must be finite and >= 0");
  }
}

double JointDistribution::total() const {
  double s = 0.0;
  for (double p : p_) s += p;
  return s;
}

std::vector<double> JointDistribution::marginal_h() const {
  std::vector<double> m(max_h_ + 1, 0.0);
  for (std::size_t h = 0; h <= max_h_; ++h)
    for (std::size_t v = 0; v <= max_v_; ++v) m[h] += at(h, v);
  return m;
}

std::vector<double> JointDistribution::marginal_v() const {
  std::vector<double> m(max_v_ + 1, 0.0);
  for (std::size_t h = 0; h <= max_h_; ++h)
    for (std::size_t v = 0; v <= max_v_; ++v) m[v] += at(h, v);
  return m;
}

double JointDistribution::mean_h() const {
  double m = 0.0;
  for (std::size_t h = 0; h <= max_h_; ++h)
    for (std::size_t v = 0; v <= max_v_; ++v) m += static_cast<double>(h) * at(h, v);
  return m;
}

double JointDistribution::mean_v() const {
  double m = 0.0;
  for (std::size_t h = 0; h <= max_h_; ++h)
    for (std::size_t v = 0; v <= max_v_; ++v) m += static_cast<double>(v) * at(h, v);
  return m;
}

double JointDistribution::covariance() const {
  const double mh = mean_h();
  const double mv = mean_v();
  double c = 0.0;
  for (std::size_t h = 0; h <= max_h_; ++h)
    for (std::size_t v = 0; v <= max_v_; ++v)
      c += (static_cast<double>(h) - mh) * (static_cast<double>(v) - mv) * at(h, v);
  return c;
}

double effective_transmittance(double transmittance, double r_pe) {
  return transmittance + r_pe * (1.0 - 2.0 * transmittance);
}

std::vector<double> binomial_pmf(unsigned n, double p) {
  check_probability(p, "binomial probability");
  p = clamp01(p);
  std::vector<double> pmf(n + 1, 0.0);
  for (unsigned k = 0; k <= n; ++k) {
    double log_acc = log_choose(n, k);
    const double a = pow_term(p, k, log_acc);
    const double b = pow_term(1.0 - p, n - k, log_acc);
    pmf[k] = a * b * std::exp(log_acc);
  }
  return pmf;
}

std::vector<double> poisson_pmf(double mean, double tail_mass) {
  if (!(mean >= 0.0) || !std::isfinite(mean)) throw DomainError("Poisson mean must be finite and >= 0");
  if (mean == 0.0) return {1.0};
  std::vector<double> pmf;
  // Stop once past the mode and a geometric bound on the remaining mass,
  // p_{k+1} / (1 - mean / (k + 2)), is below the tolerance.
  for (std::size_t k = 0;; ++k) {
    const double p = std::exp(k * std::log(mean) - mean - std::lgamma(k + 1.0));
    pmf.push_back(p);
    const double kd = static_cast<double>(k);
    if (kd + 2.0 > 2.0 * mean && kd > mean) {
      const double next = p * mean / (kd + 1.0);
      if (next / (1.0 - mean / (kd + 2.0)) < tail_mass) break;
    }
    if (k > 100000000) throw TruncationError("Poisson support exceeds 1e8 outcomes");
  }
  return pmf;
}

JointDistribution outcome_probs_quantum(unsigned photons, double transmittance, double reflectance,
                                        double eta_h, double eta_v) {
  check_probability(transmittance, "transmittance");
  check_probability(reflectance, "reflectance");
  check_probability(eta_h, "eta_h");
  check_probability(eta_v, "eta_v");
  if (std::abs(transmittance + reflectance - 1.0) > kProbabilitySlack) {
    throw DomainError("transmittance + reflectance must equal 1");
  }
  const double ph = eta_h * transmittance;
  const double pv = eta_v * reflectance;
  const double pl = 1.0 - ph - pv;
  if (pl < -kProbabilitySlack) throw DomainError("detection probabilities exceed 1");

  JointDistribution dist(photons, photons);
  for (unsigned h = 0; h <= photons; ++h) {
    for (unsigned v = 0; h + v <= photons; ++v) {
      const unsigned lost = photons - h - v;
      double log_acc = log_choose(photons, h) + log_choose(photons - h, v);
      const double f = pow_term(ph, h, log_acc) * pow_term(pv, v, log_acc) *
                       pow_term(clamp01(pl), lost, log_acc);
      dist.at(h, v) = f * std::exp(log_acc);
    }
  }
  return dist;
}

JointDistribution outcome_probs_classical(double mean_photons, double transmittance, double reflectance,
                                          double eta_h, double eta_v, double tail_mass) {
  if (!(mean_photons >= 0.0)) throw DomainError("mean photon number must be >= 0");
  check_probability(transmittance, "transmittance");
  check_probability(reflectance, "reflectance");
  check_probability(eta_h, "eta_h");
  check_probability(eta_v, "eta_v");
  const auto ph = poisson_pmf(eta_h * transmittance * mean_photons, tail_mass);
  const auto pv = poisson_pmf(eta_v * reflectance * mean_photons, tail_mass);
  JointDistribution dist(ph.size() - 1, pv.size() - 1);
  for (std::size_t h = 0; h < ph.size(); ++h)
    for (std::size_t v = 0; v < pv.size(); ++v) dist.at(h, v) = ph[h] * pv[v];
  return dist;
}

CountRecord sample_trial(const ProbeConfig& config, PolarizationAngle theta_out, std::uint64_t seed,
                         std::uint64_t stream) {
  config.validate();
  const Cells cells = detection_cells(config, theta_out);
  StreamRng rng(seed, stream);
  CountRecord rec{0, 0, config.nu};
  if (config.regime == Regime::Quantum) {
    // Multinomial draw as a chain of conditional binomials.
    std::binomial_distribution<std::uint64_t> draw_h(config.nu, cells.h);
    rec.n_h = draw_h(rng);
    const double rest = 1.0 - cells.h;
    const double pv = rest > 0.0 ? clamp01(cells.v / rest) : 0.0;
    std::binomial_distribution<std::uint64_t> draw_v(config.nu - rec.n_h, pv);
    rec.n_v = draw_v(rng);
  } else {
    const double scale = config.mean_photons * static_cast<double>(config.nu);
    const double mean_h = cells.h * scale;
    const double mean_v = cells.v * scale;
    if (mean_h > 0.0) rec.n_h = std::poisson_distribution<std::uint64_t>(mean_h)(rng);
    if (mean_v > 0.0) rec.n_v = std::poisson_distribution<std::uint64_t>(mean_v)(rng);
  }
  return rec;
}

std::vector<CountRecord> sample_campaign(const ProbeConfig& config, PolarizationAngle theta_out,
                                         std::uint64_t master_seed) {
  config.validate();
  std::vector<CountRecord> out;
  out.reserve(config.mu);
  for (std::uint64_t i = 0; i < config.mu; ++i) out.push_back(sample_trial(config, theta_out, master_seed, i));
  return out;
}

}  // namespace qpol
