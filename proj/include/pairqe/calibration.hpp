#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pairqe/counting.hpp"
#include "pairqe/errors.hpp"
#include "pairqe/fit.hpp"
#include "pairqe/jsa.hpp"
#include "pairqe/uncertainty.hpp"

namespace pairqe {

struct DarkProbs {
  double signal = 0.0;
  double idler = 0.0;
};

enum class AccidentalMode { computed, measured };

// True coincidence per gated pulse after accidental subtraction. The
// accidental estimate uses the raw singles probabilities, dark clicks
// included: uncorrelated dark-dark and dark-photon pairings are accidentals
// too. Dark subtraction belongs to the trigger rate N_T only (see
// dark_subtracted_idler_rate). May legitimately go negative within noise;
// never clamped.
inline double true_coincidence(const CountRecord& r, const DarkProbs& dark,
                               AccidentalMode mode = AccidentalMode::computed) {
  if (r.gates == 0) throw std::domain_error("true_coincidence: record has zero gates");
  const double gates = static_cast<double>(r.gates);
  if (mode == AccidentalMode::measured) {
    if (!r.accidentals_measured)
      throw std::invalid_argument("true_coincidence: no measured accidentals in record");
    return (static_cast<double>(r.coincidences_raw) -
            static_cast<double>(*r.accidentals_measured)) /
           gates;
  }
  double p_s = static_cast<double>(r.singles_signal) / gates;
  double p_i = static_cast<double>(r.singles_idler) / gates;
  if (r.dark_corrected) {  // restore total click probabilities
    p_s += dark.signal;
    p_i += dark.idler;
  }
  return static_cast<double>(r.coincidences_raw) / gates - p_s * p_i;
}

// Trigger rate with dark counts removed, photons/pulse.
inline double dark_subtracted_idler_rate(const CountRecord& r, const DarkProbs& dark) {
  if (r.gates == 0) throw std::domain_error("dark_subtracted_idler_rate: record has zero gates");
  const double p_i = static_cast<double>(r.singles_idler) / static_cast<double>(r.gates);
  return r.dark_corrected ? p_i : p_i - dark.idler;
}

struct SfwmRate {
  double value = 0.0;  // photons/pulse
  bool negative_warning = false;
};

// SFWM rate in the idler channel: subtract the Raman prediction
// eta_ti s1' P from the dark-subtracted total. Negative outcomes are
// reported with a warning flag, never clamped, so downstream statistics
// stay unbiased.
inline SfwmRate extract_sfwm_rate(const CountRecord& r, const DarkProbs& dark, double s1_prime,
                                  double eta_ti) {
  const double n_t = dark_subtracted_idler_rate(r, dark);
  const double value = n_t - eta_ti * s1_prime * 1e-3 * r.p_ave_mw;
  return {value, value < 0.0};
}

struct RamanFitResult {
  double s1_prime = 0.0;  // 1e-3 photons/pulse/mW
  double std_dev = 0.0;   // same units
  FitResult fit;
};

// Normalized Raman coefficient from an SFWM-disabled power sweep: weighted
// line through the origin of (dark-subtracted idler singles)/eta_ti against
// average power. Weights are inverse Poisson variances of the counts.
inline RamanFitResult fit_raman(std::span<const CountRecord> records, const DarkProbs& dark,
                                double eta_ti) {
  if (records.size() < 3) throw std::invalid_argument("fit_raman: need at least 3 power points");
  if (eta_ti <= 0.0 || eta_ti > 1.0)
    throw std::invalid_argument("fit_raman: eta_ti must be in (0, 1]");
  std::vector<double> x, y, w;
  bool any_counts = false;
  for (const auto& r : records) {
    if (r.gates == 0) throw std::domain_error("fit_raman: record has zero gates");
    const double gates = static_cast<double>(r.gates);
    const double rate = dark_subtracted_idler_rate(r, dark) / eta_ti;
    const double counts = static_cast<double>(r.singles_idler);
    if (counts > 0.0) any_counts = true;
    const double var = std::max(counts, 1.0) / (gates * gates * eta_ti * eta_ti);
    x.push_back(r.p_ave_mw);
    y.push_back(rate);
    w.push_back(1.0 / var);
  }
  if (!any_counts) throw fit_error("fit_raman: all idler counts are zero");
  const FitResult fit = fit_through_origin(x, y, w);
  RamanFitResult out;
  out.fit = fit;
  out.s1_prime = fit.coefficients[0] * 1e3;
  out.std_dev = fit.std_dev(0) * 1e3;
  return out;
}

// Power-sweep fit N_T = eta_ti s1' P + s2 P^2 on the dark-subtracted idler
// rate. With a calibrated s1' supplied only s2 is free (the preferred mode:
// the Raman line is measured separately, not inferred from the sweep).
// Coefficients are reported in 1e-3 photons/pulse/mW and /mW^2.
struct PowerSweepFit {
  double s1_prime = 0.0;
  double s1_prime_std = 0.0;
  bool s1_fixed = false;
  double s2 = 0.0;
  double s2_std = 0.0;
  FitResult fit;
};

inline PowerSweepFit fit_power_sweep(std::span<const CountRecord> records, const DarkProbs& dark,
                                     double eta_ti, std::optional<double> s1_prime = {}) {
  if (records.size() < 4)
    throw std::invalid_argument("fit_power_sweep: need at least 4 power points");
  if (eta_ti <= 0.0 || eta_ti > 1.0)
    throw std::invalid_argument("fit_power_sweep: eta_ti must be in (0, 1]");
  std::vector<double> y, w;
  std::vector<double> design;
  const bool fix_s1 = s1_prime.has_value();
  for (const auto& r : records) {
    if (r.gates == 0) throw std::domain_error("fit_power_sweep: record has zero gates");
    const double gates = static_cast<double>(r.gates);
    double rate = dark_subtracted_idler_rate(r, dark);
    const double var =
        std::max(static_cast<double>(r.singles_idler), 1.0) / (gates * gates);
    if (fix_s1) {
      rate -= eta_ti * *s1_prime * 1e-3 * r.p_ave_mw;
      design.push_back(r.p_ave_mw * r.p_ave_mw);
    } else {
      design.push_back(r.p_ave_mw);
      design.push_back(r.p_ave_mw * r.p_ave_mw);
    }
    y.push_back(rate);
    w.push_back(1.0 / var);
  }
  PowerSweepFit out;
  out.s1_fixed = fix_s1;
  try {
    out.fit = fit_linear(design, y, w, fix_s1 ? 1 : 2);
  } catch (const fit_error& e) {
    throw fit_error(std::string("fit_power_sweep: ") + e.what());
  }
  if (fix_s1) {
    out.s1_prime = *s1_prime;
    out.s1_prime_std = 0.0;
    out.s2 = out.fit.coefficients[0] * 1e3;
    out.s2_std = out.fit.std_dev(0) * 1e3;
  } else {
    out.s1_prime = out.fit.coefficients[0] / eta_ti * 1e3;
    out.s1_prime_std = out.fit.std_dev(0) / eta_ti * 1e3;
    out.s2 = out.fit.coefficients[1] * 1e3;
    out.s2_std = out.fit.std_dev(1) * 1e3;
  }
  return out;
}

struct QeResult {
  double eta_ut = 0.0;
  bool unphysical_warning = false;  // eta > 1
};

// The heralded-pair QE deduction: eta = C_c / (xi_s R_iF eta_ts). With
// xi_s = 1 this is the continuous-wave coincidence-to-singles relation.
inline QeResult deduce_qe(double c_c, double xi_s, double r_if, double eta_ts) {
  if (xi_s <= 0.0 || xi_s > 1.0) throw std::domain_error("deduce_qe: xi_s must be in (0, 1]");
  if (r_if <= 0.0) throw std::domain_error("deduce_qe: R_iF must be positive");
  if (eta_ts <= 0.0 || eta_ts > 1.0) throw std::domain_error("deduce_qe: eta_ts must be in (0, 1]");
  const double eta = c_c / (xi_s * r_if * eta_ts);
  return {eta, eta > 1.0};
}

struct ZetaFit {
  double zeta = 0.0;
  double std_dev = 0.0;
  FitResult fit;
};

// Slope of C_c against eta_ts R_iF through the origin; zeta = xi_s eta_UT.
inline ZetaFit fit_zeta(std::span<const double> eta_ts_r_if, std::span<const double> c_c,
                        std::span<const double> weights = {}) {
  if (eta_ts_r_if.size() < 3) throw std::invalid_argument("fit_zeta: need at least 3 points");
  std::vector<double> w(eta_ts_r_if.size(), 1.0);
  if (!weights.empty()) {
    if (weights.size() != eta_ts_r_if.size())
      throw std::invalid_argument("fit_zeta: weight count mismatch");
    std::copy(weights.begin(), weights.end(), w.begin());
  }
  FitResult fit;
  try {
    fit = fit_through_origin(eta_ts_r_if, c_c, w);
  } catch (const fit_error&) {
    throw fit_error("fit_zeta: degenerate abscissa");
  }
  return {fit.coefficients[0], fit.std_dev(0), fit};
}

inline double qe_from_zeta(double zeta, double xi_s) {
  if (xi_s <= 0.0 || xi_s > 1.0) throw std::domain_error("qe_from_zeta: xi_s must be in (0, 1]");
  return zeta / xi_s;
}

struct MultiPairParams {
  double n_bar = 0.0;           // mean idler photon number per pulse
  double eta_ts_eta_s0 = 0.0;   // end-to-end signal detection probability
  double eta_ti_eta_i0 = 0.0;   // end-to-end idler detection probability

  void validate() const {
    if (n_bar < 0.0) throw std::domain_error("MultiPairParams: n_bar must be >= 0");
    if (eta_ts_eta_s0 < 0.0 || eta_ts_eta_s0 >= 1.0 || eta_ti_eta_i0 < 0.0 || eta_ti_eta_i0 >= 1.0)
      throw std::domain_error("MultiPairParams: detection products must be in [0, 1)");
  }
};

// Upper bound on the multi-pair inflation of the deduced QE relative to the
// true one, single-temporal-mode estimate. Reported as a bound, never applied
// as a correction.
inline double multipair_ratio(const MultiPairParams& p) {
  p.validate();
  const double a = p.eta_ts_eta_s0;
  const double b = p.eta_ti_eta_i0;
  return (1.0 + p.n_bar) /
         ((1.0 + p.n_bar * a) * (1.0 + p.n_bar * (a + b - a * b)));
}

// Reference QE from an attenuated CW laser: mu photons per nominal gate,
// rescaled to the effective gate width, Poisson-inverted from the click
// probability. Reduces to P_click / mu_eff for small rates.
inline double cw_reference_qe(double photons_per_nominal_gate, double nominal_gate_width_ns,
                              double effective_gate_width_ns, double p_click) {
  if (photons_per_nominal_gate <= 0.0)
    throw std::domain_error("cw_reference_qe: photon number must be positive");
  if (nominal_gate_width_ns <= 0.0 || effective_gate_width_ns <= 0.0)
    throw std::domain_error("cw_reference_qe: gate widths must be positive");
  if (p_click < 0.0 || p_click >= 1.0)
    throw std::domain_error("cw_reference_qe: click probability must be in [0, 1)");
  const double mu_eff =
      photons_per_nominal_gate * effective_gate_width_ns / nominal_gate_width_ns;
  return -std::log1p(-p_click) / mu_eff;
}

// Forward model of the CW measurement, the exact inverse of cw_reference_qe.
inline double cw_click_probability(double eta, double photons_per_nominal_gate,
                                   double nominal_gate_width_ns, double effective_gate_width_ns) {
  const double mu_eff =
      photons_per_nominal_gate * effective_gate_width_ns / nominal_gate_width_ns;
  return -std::expm1(-eta * mu_eff);
}

// ---------------------------------------------------------------------------
// Full pipeline orchestration
// ---------------------------------------------------------------------------

enum class XiMode { analytic, scan, fixed };

struct CalibrationSettings {
  double eta_ts = 1.0;
  double eta_ti = 1.0;
  double trigger_qe = 1.0;  // idler detector QE estimate, for the pair-rate bound
  DarkProbs dark;
  AccidentalMode accidental_mode = AccidentalMode::computed;
  XiMode xi_mode = XiMode::analytic;
  double xi_fixed = 1.0;
  double pair_rate_cap = 0.03;  // pairs/pulse
  // spectra for the analytic xi path
  std::optional<PumpSpec> pump;
  std::optional<FilterSpec> signal_filter;
  std::optional<FilterSpec> idler_filter;
  // measured relative deviations for the budget (counting statistics are
  // added on top of these)
  double rel_eta_ts = 0.0;
  double rel_eta_ti = 0.0;
  double rel_p_ave = 0.0;
  double rel_xi_s = 0.0;
};

struct CalibrationResult {
  double eta_ut = 0.0;
  bool unphysical_warning = false;
  double eta_ut_rel_dev = 0.0;  // propagated relative standard deviation

  double xi_s = 0.0;
  double sigma0 = 0.0;  // rad/s; 0 when xi came in fixed
  double c_c = 0.0;     // per pulse, at the operating point
  double c_c_rel_dev = 0.0;
  double r_if = 0.0;    // photons/pulse, at the operating point
  double r_if_rel_dev = 0.0;
  double n_t = 0.0;
  double pair_rate = 0.0;  // produced pairs/pulse estimate
  bool pair_rate_flagged = false;
  double p_ave_mw = 0.0;
  std::size_t operating_index = 0;

  double eta_ts = 0.0;
  double eta_ti = 0.0;
  double s1_prime = 0.0;
  double s1_prime_std = 0.0;
  double s2 = 0.0;
  double s2_std = 0.0;

  double zeta = 0.0;
  double zeta_std = 0.0;
  double eta_from_zeta = 0.0;

  UncertaintyInputs budget_inputs;
  std::vector<std::string> warnings;

  // per-record intermediates, in input order
  std::vector<double> record_c_c;
  std::vector<double> record_r_if;
  std::vector<double> record_pair_rate;
};

// The analysis chain of one detector calibration: Raman coefficient from the
// SFWM-disabled sweep, per-record accidental subtraction and SFWM extraction,
// collection efficiency from the configured mode, operating-point selection
// (maximum C_c subject to the pair-rate cap), QE deduction and the propagated
// budget. Also reports the pooled zeta fit over the whole sweep.
inline CalibrationResult run_calibration(std::span<const CountRecord> counts,
                                         std::span<const CountRecord> raman_counts,
                                         std::span<const ScanRecord> scan,
                                         const CalibrationSettings& settings) {
  if (counts.empty()) throw std::invalid_argument("run_calibration: no count records");
  CalibrationResult res;
  res.eta_ts = settings.eta_ts;
  res.eta_ti = settings.eta_ti;

  // Raman calibration
  const RamanFitResult raman = fit_raman(raman_counts, settings.dark, settings.eta_ti);
  res.s1_prime = raman.s1_prime;
  res.s1_prime_std = raman.std_dev;

  // collection efficiency
  switch (settings.xi_mode) {
    case XiMode::fixed:
      if (settings.xi_fixed <= 0.0 || settings.xi_fixed > 1.0)
        throw std::invalid_argument("run_calibration: fixed xi must be in (0, 1]");
      res.xi_s = settings.xi_fixed;
      break;
    case XiMode::scan: {
      if (scan.empty()) throw std::invalid_argument("run_calibration: scan mode without scan data");
      if (!settings.signal_filter)
        throw std::invalid_argument("run_calibration: scan mode needs the signal filter");
      if (settings.signal_filter->order_m != 1)
        throw std::invalid_argument("run_calibration: the scanning filter must be Gaussian");
      const ScanDeduction d = deduce_sigma0_from_scan(scan, settings.signal_filter->width_a);
      res.sigma0 = d.sigma0;
      res.xi_s = d.xi_s;
      break;
    }
    case XiMode::analytic: {
      if (!settings.pump || !settings.signal_filter || !settings.idler_filter)
        throw std::invalid_argument("run_calibration: analytic xi needs pump and both filters");
      const auto spectrum = conditional_spectrum_analytic(*settings.pump, *settings.idler_filter);
      res.sigma0 = spectrum.sigma0;
      res.xi_s = collection_efficiency(*settings.signal_filter, spectrum);
      break;
    }
  }

  // per-record intermediates
  const double trigger_product = settings.eta_ti * settings.trigger_qe;
  for (const auto& r : counts) {
    const double c_c = true_coincidence(r, settings.dark, settings.accidental_mode);
    const SfwmRate sfwm = extract_sfwm_rate(r, settings.dark, raman.s1_prime, settings.eta_ti);
    res.record_c_c.push_back(c_c);
    res.record_r_if.push_back(sfwm.value);
    res.record_pair_rate.push_back(trigger_product > 0.0 ? sfwm.value / trigger_product : 0.0);
    if (sfwm.negative_warning)
      res.warnings.push_back("negative SFWM rate at P = " + std::to_string(r.p_ave_mw) +
                             " mW (noise regime)");
  }

  // operating point: maximum C_c subject to the pair-rate cap
  std::size_t best = counts.size();
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (res.record_pair_rate[i] > settings.pair_rate_cap) continue;
    if (best == counts.size() || res.record_c_c[i] > res.record_c_c[best]) best = i;
  }
  if (best == counts.size()) {
    res.warnings.push_back("no record satisfies the pair-rate cap; using maximum C_c anyway");
    best = static_cast<std::size_t>(
        std::max_element(res.record_c_c.begin(), res.record_c_c.end()) - res.record_c_c.begin());
  }
  res.operating_index = best;
  const CountRecord& op = counts[best];
  res.p_ave_mw = op.p_ave_mw;
  res.c_c = res.record_c_c[best];
  res.r_if = res.record_r_if[best];
  res.n_t = dark_subtracted_idler_rate(op, settings.dark);
  res.pair_rate = res.record_pair_rate[best];
  res.pair_rate_flagged = res.pair_rate > settings.pair_rate_cap;
  if (res.r_if <= 0.0)
    throw fit_error("run_calibration: non-positive SFWM rate at the operating point");

  const QeResult qe = deduce_qe(res.c_c, res.xi_s, res.r_if, settings.eta_ts);
  res.eta_ut = qe.eta_ut;
  res.unphysical_warning = qe.unphysical_warning;
  if (qe.unphysical_warning) res.warnings.push_back("deduced efficiency exceeds 1 (unphysical)");

  // sweep-wide fits
  if (counts.size() >= 4) {
    const PowerSweepFit sweep =
        fit_power_sweep(counts, settings.dark, settings.eta_ti, raman.s1_prime);
    res.s2 = sweep.s2;
    res.s2_std = sweep.s2_std;
  }
  if (counts.size() >= 3) {
    std::vector<double> x, y, acc;
    for (std::size_t i = 0; i < counts.size(); ++i) {
      x.push_back(settings.eta_ts * res.record_r_if[i]);
      y.push_back(res.record_c_c[i]);
      const double gates = static_cast<double>(counts[i].gates);
      acc.push_back(static_cast<double>(counts[i].singles_signal) *
                    static_cast<double>(counts[i].singles_idler) / (gates * gates));
    }
    // Pass 1 unweighted, pass 2 with Poisson variances taken from the model
    // prediction. Weighting by the observed raw coincidences would correlate
    // the weights with the fluctuations and pull the slope down at low
    // counts.
    ZetaFit zf = fit_zeta(x, y, std::vector<double>(x.size(), 1.0));
    std::vector<double> w(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double gates = static_cast<double>(counts[i].gates);
      const double raw_rate = std::max(zf.zeta * x[i], 0.0) + acc[i];
      const double var = std::max(raw_rate, 1.0 / gates) / gates;
      w[i] = 1.0 / var;
    }
    zf = fit_zeta(x, y, w);
    res.zeta = zf.zeta;
    res.zeta_std = zf.std_dev;
    res.eta_from_zeta = qe_from_zeta(zf.zeta, res.xi_s);
  }

  // uncertainty budget at the operating point: counting statistics from the
  // record, systematic deviations from the settings
  const double gates = static_cast<double>(op.gates);
  const double acc_var =
      static_cast<double>(op.coincidences_raw) / (gates * gates);  // raw Poisson
  res.c_c_rel_dev = res.c_c > 0.0 ? std::sqrt(acc_var) / res.c_c : 0.0;

  UncertaintyInputs in;
  in.rel_eta_ti = settings.rel_eta_ti;
  in.rel_eta_ts = settings.rel_eta_ts;
  in.rel_p_ave = settings.rel_p_ave;
  in.rel_xi_s = settings.rel_xi_s;
  in.rel_c_c = res.c_c_rel_dev;
  const double n_t_counts = std::max(static_cast<double>(op.singles_idler), 1.0);
  in.rel_n_t = std::sqrt(n_t_counts) / gates / std::max(res.n_t, 1e-300);
  in.rel_r_ri = raman.s1_prime > 0.0 ? raman.std_dev / raman.s1_prime : 0.0;
  in.n_t = res.n_t;
  in.eta_ti = settings.eta_ti;
  in.s1_prime = raman.s1_prime;
  in.p_ave_mw = op.p_ave_mw;
  in.r_if = res.r_if;
  res.budget_inputs = in;

  // rel_r_ri above already folds the fit's eta_ti/P sensitivity into s1'
  // only statistically; the systematic eta_ti and P deviations are added by
  // propagate_rif itself.
  res.r_if_rel_dev = propagate_rif(in).relative;
  res.eta_ut_rel_dev =
      propagate_qe(in.rel_c_c, in.rel_xi_s, res.r_if_rel_dev, in.rel_eta_ts);
  return res;
}

}  // namespace pairqe
