#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "qpol/optics.hpp"

namespace qpol {

enum class Regime { Quantum, Classical };

/// Probe and acquisition parameters shared by every trial of a campaign.
struct ProbeConfig {
  Regime regime = Regime::Quantum;
  double eta_h = 0.25;        // source-to-detection efficiency, H channel
  double eta_v = 0.25;        // same, V channel
  double r_pe = 0.0;          // PBS extinction leakage probability (1 / extinction ratio)
  std::uint64_t nu = 100000;  // heralds per trial
  std::uint64_t mu = 500;     // trials per campaign
  double mean_photons = 1.0;  // coherent-state mean photon number per herald-equivalent

  void validate() const;
};

/// Coincidence counts of one trial of `nu` heralds.
struct CountRecord {
  std::uint64_t n_h = 0;
  std::uint64_t n_v = 0;
  std::uint64_t nu = 0;

  friend bool operator==(const CountRecord&, const CountRecord&) = default;
};

/// Probability table over (N_H, N_V), row-major in N_H.
class JointDistribution {
 public:
  JointDistribution(std::size_t max_h, std::size_t max_v)
      : max_h_(max_h), max_v_(max_v), p_((max_h + 1) * (max_v + 1), 0.0) {}

  std::size_t max_h() const { return max_h_; }
  std::size_t max_v() const { return max_v_; }
  double at(std::size_t h, std::size_t v) const { return p_[h * (max_v_ + 1) + v]; }
  double& at(std::size_t h, std::size_t v) { return p_[h * (max_v_ + 1) + v]; }
  const std::vector<double>& values() const { return p_; }

  double total() const;
  std::vector<double> marginal_h() const;
  std::vector<double> marginal_v() const;
  double mean_h() const;
  double mean_v() const;
  double covariance() const;

 private:
  std::size_t max_h_;
  std::size_t max_v_;
  std::vector<double> p_;
};

/// T + r_PE (1 - 2T): symmetric H<->V exchange at the analysing PBS.
double effective_transmittance(double transmittance, double r_pe);

/// Multinomial outcome law for an N-photon probe: cells (eta_h T, eta_v R, lost).
JointDistribution outcome_probs_quantum(unsigned photons, double transmittance, double reflectance,
                                        double eta_h, double eta_v);

/// Product-Poisson outcome law for a coherent probe of mean photon number N,
/// truncated so the discarded mass per channel is below `tail_mass`.
JointDistribution outcome_probs_classical(double mean_photons, double transmittance, double reflectance,
                                          double eta_h, double eta_v, double tail_mass = 1e-15);

/// Binomial(N, p) and Poisson(mean) probability vectors used by the marginal models.
std::vector<double> binomial_pmf(unsigned n, double p);
std::vector<double> poisson_pmf(double mean, double tail_mass = 1e-15);

/// One trial drawn from substream `stream` of `seed`. Leakage is applied to the
/// ideal transmittance before drawing.
CountRecord sample_trial(const ProbeConfig& config, PolarizationAngle theta_out, std::uint64_t seed,
                         std::uint64_t stream);

/// `config.mu` trials; trial i uses substream i of `master_seed`.
std::vector<CountRecord> sample_campaign(const ProbeConfig& config, PolarizationAngle theta_out,
                                         std::uint64_t master_seed);

}  // namespace qpol
