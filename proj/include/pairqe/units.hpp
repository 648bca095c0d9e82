#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace pairqe {

inline constexpr double kSpeedOfLight = 299792458.0;  // m/s

// 2*pi*c, the factor relating inverse wavelength (1/m) to angular frequency.
inline constexpr double kTwoPiC = 2.0 * std::numbers::pi * kSpeedOfLight;

inline double angular_frequency_from_wavelength_nm(double lambda_nm) {
  if (lambda_nm <= 0.0) throw std::domain_error("wavelength must be positive");
  return kTwoPiC / (lambda_nm * 1e-9);
}

inline double wavelength_nm_from_angular_frequency(double omega_rad_s) {
  if (omega_rad_s <= 0.0) throw std::domain_error("angular frequency must be positive");
  return kTwoPiC / omega_rad_s * 1e9;
}

// Detuning Omega = omega(lambda) - omega(center), exact in 1/lambda.
inline double detuning_from_wavelength_nm(double lambda_nm, double center_nm) {
  if (lambda_nm <= 0.0 || center_nm <= 0.0) throw std::domain_error("wavelength must be positive");
  return kTwoPiC * (1.0 / (lambda_nm * 1e-9) - 1.0 / (center_nm * 1e-9));
}

// Exact inverse of detuning_from_wavelength_nm.
inline double wavelength_nm_from_detuning(double omega_detune_rad_s, double center_nm) {
  if (center_nm <= 0.0) throw std::domain_error("wavelength must be positive");
  const double inv_lambda_m = omega_detune_rad_s / kTwoPiC + 1.0 / (center_nm * 1e-9);
  if (inv_lambda_m <= 0.0) throw std::domain_error("detuning out of range for this center wavelength");
  return 1e9 / inv_lambda_m;
}

// Spectral widths quoted in nm map to angular frequency through the local
// Jacobian |d(omega)/d(lambda)| at the band center. Passbands here are a few
// nm wide at 1550 nm, so the linearization error is far below fit precision.
inline double width_rad_s_from_nm(double width_nm, double center_nm) {
  if (center_nm <= 0.0) throw std::domain_error("wavelength must be positive");
  const double lam_m = center_nm * 1e-9;
  return kTwoPiC * (width_nm * 1e-9) / (lam_m * lam_m);
}

inline double width_nm_from_rad_s(double width_rad_s, double center_nm) {
  if (center_nm <= 0.0) throw std::domain_error("wavelength must be positive");
  const double lam_m = center_nm * 1e-9;
  return width_rad_s * lam_m * lam_m / kTwoPiC * 1e9;
}

}  // namespace pairqe
