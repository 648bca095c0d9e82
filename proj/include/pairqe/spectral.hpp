#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "pairqe/units.hpp"

namespace pairqe {

// 1/e half-width of exp(-(x/a)^(2m)) given its full width at half maximum.
// Unit-agnostic: returns the same unit the FWHM was given in.
inline double width_param_from_fwhm(double fwhm, int order_m) {
  if (fwhm <= 0.0) throw std::domain_error("width_param_from_fwhm: fwhm must be positive");
  if (order_m < 1) throw std::domain_error("width_param_from_fwhm: order must be >= 1");
  return fwhm / (2.0 * std::pow(std::numbers::ln2, 1.0 / (2.0 * order_m)));
}

inline double fwhm_from_width_param(double width_a, int order_m) {
  if (width_a <= 0.0) throw std::domain_error("fwhm_from_width_param: width must be positive");
  if (order_m < 1) throw std::domain_error("fwhm_from_width_param: order must be >= 1");
  return 2.0 * width_a * std::pow(std::numbers::ln2, 1.0 / (2.0 * order_m));
}

// Parametric passband T0 * exp(-(Omega/a)^(2m)). Order m = 1 is a Gaussian,
// m = 3 the sixth-order super-Gaussian typical of flat-top WDM filters.
// The width parameter is stored in angular frequency (rad/s); the factories
// accept nm and convert at the passband center.
struct FilterSpec {
  double center_wavelength_nm = 1550.0;
  double width_a = 0.0;  // 1/e half-width of the transmittance, rad/s
  int order_m = 1;
  double peak_transmittance = 1.0;

  static FilterSpec from_width_nm(double center_nm, double a_nm, int order_m,
                                  double peak_transmittance = 1.0) {
    if (a_nm <= 0.0) throw std::invalid_argument("FilterSpec: width must be positive");
    if (order_m < 1) throw std::invalid_argument("FilterSpec: order must be >= 1");
    if (peak_transmittance <= 0.0 || peak_transmittance > 1.0)
      throw std::invalid_argument("FilterSpec: peak transmittance must be in (0, 1]");
    FilterSpec f;
    f.center_wavelength_nm = center_nm;
    f.width_a = width_rad_s_from_nm(a_nm, center_nm);
    f.order_m = order_m;
    f.peak_transmittance = peak_transmittance;
    return f;
  }

  static FilterSpec from_fwhm_nm(double center_nm, double fwhm_nm, int order_m,
                                 double peak_transmittance = 1.0) {
    return from_width_nm(center_nm, width_param_from_fwhm(fwhm_nm, order_m), order_m,
                         peak_transmittance);
  }

  double width_a_nm() const { return width_nm_from_rad_s(width_a, center_wavelength_nm); }
  double fwhm_rad_s() const { return fwhm_from_width_param(width_a, order_m); }
};

inline double filter_transmittance(const FilterSpec& f, double omega_detune) {
  const double u = (omega_detune / f.width_a) * (omega_detune / f.width_a);
  double p = u;
  for (int k = 1; k < f.order_m; ++k) p *= u;
  return f.peak_transmittance * std::exp(-p);
}

// Pulsed pump description. sigma_p follows the same 1/e half-width convention
// as the filters, taken directly from the fitted pump spectrum.
struct PumpSpec {
  double center_wavelength_nm = 1544.0;
  double sigma_p = 0.0;  // rad/s
  double average_power_mw = 0.0;
  double repetition_rate_hz = 0.0;
  double pulse_duration_s = 0.0;
  double peak_power_w = 0.0;

  // peak_power_override_w = 0 derives the peak from the duty factor.
  static PumpSpec make(double center_nm, double sigma_nm, double average_power_mw,
                       double repetition_rate_hz, double pulse_duration_s,
                       double peak_power_override_w = 0.0) {
    if (sigma_nm <= 0.0 || average_power_mw <= 0.0 || repetition_rate_hz <= 0.0 ||
        pulse_duration_s <= 0.0)
      throw std::invalid_argument("PumpSpec: all parameters must be positive");
    PumpSpec p;
    p.center_wavelength_nm = center_nm;
    p.sigma_p = width_rad_s_from_nm(sigma_nm, center_nm);
    p.average_power_mw = average_power_mw;
    p.repetition_rate_hz = repetition_rate_hz;
    p.pulse_duration_s = pulse_duration_s;
    p.peak_power_w = peak_power_override_w > 0.0
                         ? peak_power_override_w
                         : average_power_mw * 1e-3 / (repetition_rate_hz * pulse_duration_s);
    return p;
  }

  double sigma_p_nm() const { return width_nm_from_rad_s(sigma_p, center_wavelength_nm); }

  // Peak power rescaled to a different average power, same duty factor.
  double peak_power_at_mw(double average_mw) const {
    return peak_power_w * average_mw / average_power_mw;
  }
};

struct FiberSpec {
  double length_m = 0.0;
  double gamma_per_w_m = 0.0;  // nonlinear coefficient, (W*m)^-1
  double zero_dispersion_wavelength_nm = 1544.0;
  double k2_s2_per_m = 0.0;  // second-order dispersion at the pump center
  double k3_s3_per_m = 0.0;  // third-order dispersion at the pump center

  static FiberSpec make(double length_m, double gamma_per_w_m, double zdw_nm, double k2,
                        double k3) {
    if (length_m <= 0.0) throw std::invalid_argument("FiberSpec: length must be positive");
    if (gamma_per_w_m < 0.0) throw std::invalid_argument("FiberSpec: gamma must be >= 0");
    return FiberSpec{length_m, gamma_per_w_m, zdw_nm, k2, k3};
  }
};

}  // namespace pairqe
