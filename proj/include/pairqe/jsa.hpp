#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <numbers>
#include <span>
#include <sstream>
#include <utility>
#include <vector>

#include "pairqe/errors.hpp"
#include "pairqe/fit.hpp"
#include "pairqe/spectral.hpp"
#include "pairqe/units.hpp"

namespace pairqe {

namespace detail {

// Nodes/weights of n-point Gauss-Legendre on [-1, 1] by Newton iteration on
// the Legendre recurrence; cached per order.
inline const std::vector<std::array<double, 2>>& gauss_legendre(int n) {
  static std::vector<std::vector<std::array<double, 2>>> cache;
  if (n < 1) throw std::invalid_argument("gauss_legendre: order must be >= 1");
  if (cache.size() <= static_cast<std::size_t>(n)) cache.resize(n + 1);
  auto& entry = cache[n];
  if (!entry.empty()) return entry;
  entry.resize(n);
  for (int k = 0; k < n; ++k) {
    double x = std::cos(std::numbers::pi * (k + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int j = 2; j <= n; ++j) {
        const double p2 = ((2.0 * j - 1.0) * x * p1 - (j - 1.0) * p0) / j;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    entry[k] = {x, 2.0 / ((1.0 - x * x) * dp * dp)};
  }
  return entry;
}

}  // namespace detail

// Wave-vector mismatch model. Arguments are detunings (rad/s) of signal and
// idler from their band centers; the returned mismatch is in rad/m.
using DeltaKModel = std::function<double(double, double)>;

// Standard Taylor expansion of k_s + k_i - 2 k_p around the pump center,
// even and odd dispersion terms only (the group-velocity term cancels for
// band centers placed symmetrically about the pump). Band-center offsets are
// computed exactly from the configured wavelengths.
inline DeltaKModel make_taylor_delta_k(const FiberSpec& fiber, double pump_center_nm,
                                       double signal_center_nm, double idler_center_nm) {
  const double off_s = detuning_from_wavelength_nm(signal_center_nm, pump_center_nm);
  const double off_i = detuning_from_wavelength_nm(idler_center_nm, pump_center_nm);
  const double k2 = fiber.k2_s2_per_m;
  const double k3 = fiber.k3_s3_per_m;
  return [off_s, off_i, k2, k3](double omega_s, double omega_i) {
    const double ws = omega_s + off_s;
    const double wi = omega_i + off_i;
    return 0.5 * k2 * (ws * ws + wi * wi) + (k3 / 6.0) * (ws * ws * ws + wi * wi * wi);
  };
}

struct SpectralFunctionParams {
  FiberSpec fiber;
  PumpSpec pump;
  DeltaKModel delta_k;       // empty = perfect phase matching
  int quadrature_steps = 64; // initial node count of the z integral, >= 16
};

// Two-photon spectral amplitude at detunings (omega_s, omega_i) from the band
// centers: the fiber-length integral of the dispersion/phase kernel times the
// Gaussian pump envelope. The integrand's complex square root stays on the
// principal branch (its argument has real part 1 for all z in [-L, 0]).
// Panel count doubles until the result is stable to 1e-7 relative.
inline std::complex<double> spectral_function(const SpectralFunctionParams& params,
                                              double omega_s, double omega_i) {
  if (params.quadrature_steps < 16)
    throw std::invalid_argument("spectral_function: quadrature_steps must be >= 16");
  const double sigma_p = params.pump.sigma_p;
  const double sum = omega_s + omega_i;
  const double envelope = std::exp(-sum * sum / (4.0 * sigma_p * sigma_p));
  const double length = params.fiber.length_m;
  if (envelope == 0.0) return {0.0, 0.0};

  const double phase_rate =
      (params.delta_k ? params.delta_k(omega_s, omega_i) : 0.0) +
      2.0 * params.fiber.gamma_per_w_m * params.pump.peak_power_w;
  // sqrt(1 - i b z) with b = sigma_p^2 (k'' + k''' (omega_s+omega_i)/2)
  const double b = sigma_p * sigma_p *
                   (params.fiber.k2_s2_per_m + 0.5 * params.fiber.k3_s3_per_m * sum);

  const auto& nodes = detail::gauss_legendre(16);
  auto integrate = [&](int panels) {
    std::complex<double> acc{0.0, 0.0};
    const double h = length / panels;
    for (int p = 0; p < panels; ++p) {
      const double z0 = -length + p * h;
      for (const auto& nw : nodes) {
        const double z = z0 + 0.5 * h * (nw[0] + 1.0);
        const std::complex<double> denom = std::sqrt(std::complex<double>(1.0, -b * z));
        const std::complex<double> phase{std::cos(phase_rate * z), -std::sin(phase_rate * z)};
        acc += (0.5 * h * nw[1]) * phase / denom;
      }
    }
    return acc;
  };

  int panels = std::max(1, params.quadrature_steps / 16);
  std::complex<double> prev = integrate(panels);
  for (int round = 0; round < 16; ++round) {
    panels *= 2;
    const std::complex<double> next = integrate(panels);
    const double scale = std::abs(next);
    if (std::abs(next - prev) <= 1e-7 * (scale > 0.0 ? scale : 1.0))
      return envelope * next;
    prev = next;
  }
  std::ostringstream msg;
  msg << "spectral_function: z quadrature did not stabilize to 1e-7 after " << panels
      << " panels (omega_s=" << omega_s << ", omega_i=" << omega_i << ")";
  throw numerics_error(msg.str());
}

// Width of the heralded-photon conditional spectrum in the phase-matched,
// narrow-pump limit: sigma0 = sqrt(2 sigma_p^2 + sigma_i^2).
inline double analytic_conditional_width(double sigma_p, double sigma_i) {
  if (sigma_p <= 0.0) throw std::domain_error("analytic_conditional_width: sigma_p must be > 0");
  if (sigma_i < 0.0) throw std::domain_error("analytic_conditional_width: sigma_i must be >= 0");
  return std::sqrt(2.0 * sigma_p * sigma_p + sigma_i * sigma_i);
}

// Spectral density of the heralded photon, either an analytic Gaussian of
// 1/e half-width sigma0 or a density sampled on a detuning grid.
struct ConditionalSpectrum {
  std::vector<double> grid;     // rad/s detunings, strictly increasing; empty in analytic mode
  std::vector<double> density;  // same length as grid
  double sigma0 = 0.0;          // analytic-mode width, rad/s
  double center_detuning = 0.0;

  bool analytic() const { return grid.empty(); }

  static ConditionalSpectrum analytic_gaussian(double sigma0, double center_detuning = 0.0) {
    if (sigma0 <= 0.0) throw std::invalid_argument("ConditionalSpectrum: sigma0 must be > 0");
    ConditionalSpectrum s;
    s.sigma0 = sigma0;
    s.center_detuning = center_detuning;
    return s;
  }

  static ConditionalSpectrum sampled(std::vector<double> grid, std::vector<double> density,
                                     double center_detuning = 0.0) {
    if (grid.size() != density.size() || grid.size() < 3)
      throw std::invalid_argument("ConditionalSpectrum: need >= 3 grid points");
    for (std::size_t i = 0; i < grid.size(); ++i) {
      if (i > 0 && grid[i] <= grid[i - 1])
        throw std::invalid_argument("ConditionalSpectrum: grid must be strictly increasing");
      if (density[i] < 0.0)
        throw std::invalid_argument("ConditionalSpectrum: density must be nonnegative");
    }
    ConditionalSpectrum s;
    s.grid = std::move(grid);
    s.density = std::move(density);
    s.center_detuning = center_detuning;
    return s;
  }

  double value(double omega) const {
    if (analytic()) {
      const double u = (omega - center_detuning) / sigma0;
      return std::exp(-u * u);
    }
    // linear interpolation, zero outside the grid
    if (omega <= grid.front() || omega >= grid.back()) return 0.0;
    const auto it = std::upper_bound(grid.begin(), grid.end(), omega);
    const std::size_t hi = static_cast<std::size_t>(it - grid.begin());
    const double t = (omega - grid[hi - 1]) / (grid[hi] - grid[hi - 1]);
    return density[hi - 1] + t * (density[hi] - density[hi - 1]);
  }
};

// Conditional spectrum in the analytic limit for a Gaussian idler filter.
inline ConditionalSpectrum conditional_spectrum_analytic(const PumpSpec& pump,
                                                         const FilterSpec& idler_filter) {
  if (idler_filter.order_m != 1)
    throw std::invalid_argument(
        "conditional_spectrum_analytic: closed form requires a Gaussian idler filter");
  return ConditionalSpectrum::analytic_gaussian(
      analytic_conditional_width(pump.sigma_p, idler_filter.width_a));
}

// Conditional spectrum by quadrature of the full two-photon amplitude:
// S_s(omega_s) = integral f(omega_i) |F(omega_s, omega_i)|^2 d omega_i.
// The signal grid must be wide enough that the density has decayed to
// <= 1e-4 of its peak at the edges.
inline ConditionalSpectrum conditional_spectrum(const SpectralFunctionParams& params,
                                                const FilterSpec& idler_filter,
                                                double signal_half_span, std::size_t signal_points,
                                                std::size_t idler_points = 257) {
  if (signal_points < 9 || idler_points < 9)
    throw std::invalid_argument("conditional_spectrum: grids too coarse");
  const double idler_half_span =
      5.0 * analytic_conditional_width(params.pump.sigma_p, idler_filter.width_a);
  std::vector<double> grid(signal_points), density(signal_points, 0.0);
  const double hs = 2.0 * signal_half_span / static_cast<double>(signal_points - 1);
  const double hi = 2.0 * idler_half_span / static_cast<double>(idler_points - 1);
  for (std::size_t i = 0; i < signal_points; ++i) grid[i] = -signal_half_span + hs * i;
  for (std::size_t i = 0; i < signal_points; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < idler_points; ++j) {
      const double wi = -idler_half_span + hi * j;
      const double f = filter_transmittance(idler_filter, wi) / idler_filter.peak_transmittance;
      const double amp = std::abs(spectral_function(params, grid[i], wi));
      const double term = f * amp * amp;
      acc += (j == 0 || j + 1 == idler_points) ? 0.5 * term : term;
    }
    density[i] = acc * hi;
  }
  const double peak = *std::max_element(density.begin(), density.end());
  if (peak <= 0.0) throw std::domain_error("conditional_spectrum: zero density");
  if (density.front() > 1e-4 * peak || density.back() > 1e-4 * peak)
    throw std::domain_error("conditional_spectrum: signal grid too narrow for the density");
  return ConditionalSpectrum::sampled(std::move(grid), std::move(density));
}

namespace detail {

// Trapezoid on a uniform grid chosen to resolve both the filter and the
// spectrum; spans +-6 of the wider scale. Integrands are entire and decaying,
// so the rule converges far past the 1e-6 absolute target.
inline std::pair<double, double> overlap_integrals(const FilterSpec& filter,
                                                   const ConditionalSpectrum& s) {
  const double wide = std::max(filter.width_a, s.sigma0);
  const double narrow = std::max(1e-12 * wide, std::min(filter.width_a, s.sigma0));
  const double span = 6.0 * wide;
  std::size_t n = static_cast<std::size_t>(std::ceil(120.0 * span / narrow));
  n = std::clamp<std::size_t>(n | 1, 2001, 400001);
  const double h = 2.0 * span / static_cast<double>(n - 1);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double omega = s.center_detuning - span + h * i;
    const double sv = s.value(omega);
    const double fv = filter_transmittance(filter, omega) / filter.peak_transmittance;
    const double edge = (i == 0 || i + 1 == n) ? 0.5 : 1.0;
    num += edge * fv * sv;
    den += edge * sv;
  }
  return {num * h, den * h};
}

}  // namespace detail

// Collection efficiency: the fraction of the heralded photon's spectral
// density passed by the heralded-channel filter,
//   xi = integral f * S / integral S.
// Pure spectral overlap: the filter's peak transmittance is normalized out
// (broadband channel loss belongs to the transmission efficiency).
inline double collection_efficiency(const FilterSpec& signal_filter,
                                    const ConditionalSpectrum& s) {
  double num = 0.0, den = 0.0;
  if (s.analytic()) {
    std::tie(num, den) = detail::overlap_integrals(signal_filter, s);
  } else {
    for (std::size_t i = 0; i + 1 < s.grid.size(); ++i) {
      const double h = s.grid[i + 1] - s.grid[i];
      const double f0 =
          filter_transmittance(signal_filter, s.grid[i]) / signal_filter.peak_transmittance;
      const double f1 =
          filter_transmittance(signal_filter, s.grid[i + 1]) / signal_filter.peak_transmittance;
      num += 0.5 * h * (f0 * s.density[i] + f1 * s.density[i + 1]);
      den += 0.5 * h * (s.density[i] + s.density[i + 1]);
    }
  }
  if (den <= 0.0) throw std::domain_error("collection_efficiency: spectrum has zero norm");
  return num / den;
}

// Closed form for a Gaussian filter over a Gaussian spectrum; used as the
// independent check of the quadrature path.
inline double collection_efficiency_gaussian_closed_form(double sigma_s, double sigma0) {
  if (sigma_s <= 0.0 || sigma0 <= 0.0)
    throw std::domain_error("collection_efficiency_gaussian_closed_form: widths must be > 0");
  const double r = sigma0 / sigma_s;
  return 1.0 / std::sqrt(1.0 + r * r);
}

// Collection efficiency as a function of sigma_s / sigma0 for the analytic
// Gaussian conditional spectrum; scale-free, so sigma0 is fixed at 1.
inline std::vector<std::pair<double, double>> xi_curve(int order_m,
                                                       std::span<const double> ratios) {
  std::vector<std::pair<double, double>> out;
  out.reserve(ratios.size());
  const auto spectrum = ConditionalSpectrum::analytic_gaussian(1.0);
  for (const double r : ratios) {
    if (r <= 0.0) throw std::domain_error("xi_curve: ratios must be positive");
    FilterSpec f;
    f.width_a = r;
    f.order_m = order_m;
    out.emplace_back(r, collection_efficiency(f, spectrum));
  }
  return out;
}

// One point of a heralded-coincidence scan: the signal-channel filter parked
// at lambda_s0_prime, true coincidences normalized by the channel transmission
// measured at that setting. Values may go negative within noise after
// accidental subtraction and are stored as-is.
struct ScanRecord {
  double lambda_s0_prime_nm = 0.0;
  double cc_normalized = 0.0;
  double eta_ts = 1.0;
};

struct ScanDeduction {
  double sigma0 = 0.0;        // deduced conditional-spectrum width, rad/s
  double sigma0_prime = 0.0;  // fitted scan width, rad/s
  double center_omega = 0.0;  // fitted band center, rad/s (absolute)
  double xi_s = 0.0;          // collection efficiency of the scanning filter
  GaussianPeakFit fit;
};

// Deduce the conditional-spectrum width from a filter-center scan: fit a
// Gaussian of width sigma0' to the normalized true coincidences against the
// filter's angular frequency, then deconvolve the known Gaussian scanning
// filter, sigma0 = sqrt(sigma0'^2 - sigma_s^2). Also evaluates the collection
// efficiency the scanning filter itself achieves on the deduced spectrum.
inline ScanDeduction deduce_sigma0_from_scan(std::span<const ScanRecord> scan,
                                             double signal_filter_sigma,
                                             std::span<const double> weights = {}) {
  if (scan.size() < 5)
    throw std::invalid_argument("deduce_sigma0_from_scan: need at least 5 scan points");
  if (signal_filter_sigma <= 0.0)
    throw std::domain_error("deduce_sigma0_from_scan: filter width must be positive");
  std::vector<double> x(scan.size()), y(scan.size()), w(scan.size(), 1.0);
  std::size_t imax = 0;
  for (std::size_t i = 0; i < scan.size(); ++i) {
    x[i] = angular_frequency_from_wavelength_nm(scan[i].lambda_s0_prime_nm);
    y[i] = scan[i].cc_normalized;
    if (y[i] > y[imax]) imax = i;
  }
  if (!weights.empty()) {
    if (weights.size() != scan.size())
      throw std::invalid_argument("deduce_sigma0_from_scan: weight count mismatch");
    std::copy(weights.begin(), weights.end(), w.begin());
  }
  if (imax == 0 || imax + 1 == scan.size())
    throw fit_error("deduce_sigma0_from_scan: scan does not bracket the peak");

  const GaussianPeakFit fit = fit_gaussian_peak(x, y, w);
  ScanDeduction out;
  out.sigma0_prime = fit.sigma;
  out.center_omega = fit.center;
  out.fit = fit;
  if (fit.sigma <= signal_filter_sigma)
    throw fit_error(
        "deduce_sigma0_from_scan: fitted scan width does not exceed the filter width "
        "(degenerate deconvolution)");
  out.sigma0 = std::sqrt(fit.sigma * fit.sigma - signal_filter_sigma * signal_filter_sigma);
  FilterSpec scanning;
  scanning.width_a = signal_filter_sigma;
  scanning.order_m = 1;
  out.xi_s = collection_efficiency(scanning, ConditionalSpectrum::analytic_gaussian(out.sigma0));
  return out;
}

}  // namespace pairqe
