#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "pairqe/rng.hpp"

namespace pairqe {

// Relative standard deviations of the measured quantities entering the QE
// deduction, plus the absolute central values the Raman-subtraction chain
// needs. Relative deviations are dimensionless (0.04 = 4%).
struct UncertaintyInputs {
  double rel_eta_ti = 0.0;
  double rel_eta_ts = 0.0;
  double rel_p_ave = 0.0;
  double rel_n_t = 0.0;
  double rel_r_ri = 0.0;
  double rel_c_c = 0.0;
  double rel_xi_s = 0.0;

  double n_t = 0.0;       // total idler rate, photons/pulse
  double eta_ti = 1.0;    // idler transmission
  double s1_prime = 0.0;  // 1e-3 photons/pulse/mW
  double p_ave_mw = 0.0;
  double r_if = 0.0;      // detected pair rate, photons/pulse

  void validate() const {
    for (double d : {rel_eta_ti, rel_eta_ts, rel_p_ave, rel_n_t, rel_r_ri, rel_c_c, rel_xi_s})
      if (d < 0.0) throw std::invalid_argument("UncertaintyInputs: relative deviations must be >= 0");
  }
};

// Relative deviation of the normalized Raman coefficient: quadrature sum of
// the Raman-rate, idler-transmission and power deviations.
inline double propagate_s1prime(const UncertaintyInputs& in) {
  in.validate();
  return std::sqrt(in.rel_r_ri * in.rel_r_ri + in.rel_eta_ti * in.rel_eta_ti +
                   in.rel_p_ave * in.rel_p_ave);
}

struct RifDeviation {
  double absolute = 0.0;
  double relative = 0.0;
};

// Deviation of the SFWM rate after Raman subtraction. The Raman term
// eta_ti s1' P carries the transmission, coefficient and power deviations;
// the total-rate term enters absolutely.
inline RifDeviation propagate_rif(const UncertaintyInputs& in) {
  in.validate();
  if (in.r_if <= 0.0) throw std::domain_error("propagate_rif: R_iF must be positive");
  const double raman = in.eta_ti * in.s1_prime * 1e-3 * in.p_ave_mw;
  const double rel_s1 = propagate_s1prime(in);
  const double abs_n_t = in.rel_n_t * in.n_t;
  const double bracket = in.rel_eta_ti * in.rel_eta_ti + rel_s1 * rel_s1 +
                         in.rel_p_ave * in.rel_p_ave;
  const double abs_dev = std::sqrt(abs_n_t * abs_n_t + raman * raman * bracket);
  return {abs_dev, abs_dev / in.r_if};
}

// Relative deviation of the deduced quantum efficiency: quadrature sum over
// the four factors of eta = C_c / (xi_s R_iF eta_ts).
inline double propagate_qe(double rel_c_c, double rel_xi_s, double rel_r_if, double rel_eta_ts) {
  for (double d : {rel_c_c, rel_xi_s, rel_r_if, rel_eta_ts})
    if (d < 0.0) throw std::invalid_argument("propagate_qe: relative deviations must be >= 0");
  return std::sqrt(rel_c_c * rel_c_c + rel_xi_s * rel_xi_s + rel_r_if * rel_r_if +
                   rel_eta_ts * rel_eta_ts);
}

// Monte Carlo check of the first-order propagation: every input fluctuates as
// an independent Gaussian with its stated relative deviation (the calibration
// run's eta_ti and P are independent of the measurement run's, matching the
// formulas' independence assumption), is pushed through the Raman subtraction
// and the QE quotient, and the sample std/mean is returned. Deterministic for
// a fixed seed.
inline double mc_resample_relative_qe_dev(const UncertaintyInputs& in, std::uint64_t draws,
                                          std::uint64_t seed) {
  in.validate();
  if (draws < 10000)
    throw std::invalid_argument("mc_resample_relative_qe_dev: need at least 1e4 draws");
  if (in.r_if <= 0.0) throw std::domain_error("mc_resample_relative_qe_dev: R_iF must be positive");

  const double rel_s1 = propagate_s1prime(in);
  rng::CounterStream stream(seed);
  double sum = 0.0, sum_sq = 0.0;
  for (std::uint64_t k = 0; k < draws; ++k) {
    const double n_t = in.n_t * (1.0 + in.rel_n_t * stream.next_normal());
    const double eta_ti = in.eta_ti * (1.0 + in.rel_eta_ti * stream.next_normal());
    const double s1p = in.s1_prime * (1.0 + rel_s1 * stream.next_normal());
    const double p = in.p_ave_mw * (1.0 + in.rel_p_ave * stream.next_normal());
    const double r_if = n_t - eta_ti * s1p * 1e-3 * p;
    const double c_c = 1.0 + in.rel_c_c * stream.next_normal();
    const double xi = 1.0 + in.rel_xi_s * stream.next_normal();
    const double eta_ts = 1.0 + in.rel_eta_ts * stream.next_normal();
    const double eta = c_c / (xi * r_if * eta_ts);
    sum += eta;
    sum_sq += eta * eta;
  }
  const double mean = sum / static_cast<double>(draws);
  const double var = std::max(0.0, sum_sq / static_cast<double>(draws) - mean * mean);
  if (mean == 0.0) return 0.0;
  return std::sqrt(var) / std::abs(mean);
}

struct BudgetRow {
  std::string label;
  double rel_s1_prime = 0.0;
  double rel_r_if = 0.0;
  double rel_eta_ut = 0.0;
};

// Bias terms bounded but deliberately left out of the quadrature sums; kept
// visible in every report.
struct SystematicBounds {
  double timing_drift = 0.005;
  double afterpulse = 0.005;
  double multi_pair = 0.03;
};

struct BudgetReport {
  std::vector<BudgetRow> rows;
  double mean_rel_eta_ut = 0.0;      // mean of the per-configuration deviations
  double combined_rel_eta_ut = 0.0;  // mean / sqrt(n): deviation of the n-point average
  SystematicBounds unpropagated;
};

inline BudgetReport budget_report(
    std::span<const std::pair<std::string, UncertaintyInputs>> configurations) {
  if (configurations.empty()) throw std::invalid_argument("budget_report: no configurations");
  BudgetReport report;
  double sum = 0.0;
  for (const auto& [label, in] : configurations) {
    BudgetRow row;
    row.label = label;
    row.rel_s1_prime = propagate_s1prime(in);
    row.rel_r_if = propagate_rif(in).relative;
    row.rel_eta_ut = propagate_qe(in.rel_c_c, in.rel_xi_s, row.rel_r_if, in.rel_eta_ts);
    sum += row.rel_eta_ut;
    report.rows.push_back(std::move(row));
  }
  report.mean_rel_eta_ut = sum / static_cast<double>(configurations.size());
  report.combined_rel_eta_ut =
      report.mean_rel_eta_ut / std::sqrt(static_cast<double>(configurations.size()));
  return report;
}

}  // namespace pairqe
