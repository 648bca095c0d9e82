#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "pairqe/errors.hpp"

namespace pairqe {

// Generic weighted least-squares outcome. Covariance is row-major
// n_params x n_params, computed from the supplied weights taken as
// inverse variances.
struct FitResult {
  std::vector<double> coefficients;
  std::vector<double> covariance;
  double reduced_chi2 = 0.0;
  std::size_t n_points = 0;
  std::size_t n_params = 0;

  double variance(std::size_t k) const { return covariance[k * n_params + k]; }
  double std_dev(std::size_t k) const { return std::sqrt(std::max(0.0, variance(k))); }
};

namespace detail {

// Solve the symmetric positive definite system a*x = b in place (tiny n).
inline std::vector<double> solve_spd(std::vector<double> a, std::vector<double> b,
                                     std::size_t n) {
  double max_diag = 0.0;
  for (std::size_t k = 0; k < n; ++k) max_diag = std::max(max_diag, std::abs(a[k * n + k]));
  const double pivot_floor = max_diag > 0.0 ? 1e-13 * max_diag : 1e-300;
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::abs(a[r * n + col]) > std::abs(a[piv * n + col])) piv = r;
    if (std::abs(a[piv * n + col]) < pivot_floor) throw fit_error("singular normal equations");
    if (piv != col) {
      for (std::size_t c = 0; c < n; ++c) std::swap(a[col * n + c], a[piv * n + c]);
      std::swap(b[col], b[piv]);
    }
    for (std::size_t r = col + 1; r < n; ++r) {
      const double m = a[r * n + col] / a[col * n + col];
      for (std::size_t c = col; c < n; ++c) a[r * n + c] -= m * a[col * n + c];
      b[r] -= m * b[col];
    }
  }
  std::vector<double> x(n, 0.0);
  for (std::size_t ri = n; ri-- > 0;) {
    double s = b[ri];
    for (std::size_t c = ri + 1; c < n; ++c) s -= a[ri * n + c] * x[c];
    x[ri] = s / a[ri * n + ri];
  }
  return x;
}

inline std::vector<double> invert_spd(const std::vector<double>& a, std::size_t n) {
  std::vector<double> inv(n * n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    std::vector<double> e(n, 0.0);
    e[k] = 1.0;
    const auto col = solve_spd(a, e, n);
    for (std::size_t r = 0; r < n; ++r) inv[r * n + k] = col[r];
  }
  // symmetrize against roundoff
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = r + 1; c < n; ++c) {
      const double m = 0.5 * (inv[r * n + c] + inv[c * n + r]);
      inv[r * n + c] = inv[c * n + r] = m;
    }
  return inv;
}

}  // namespace detail

// Weighted fit of y = slope * x through the origin. Weights are inverse
// variances of y; the slope variance is 1 / sum(w x^2).
inline FitResult fit_through_origin(std::span<const double> x, std::span<const double> y,
                                    std::span<const double> w) {
  if (x.size() != y.size() || x.size() != w.size())
    throw std::invalid_argument("fit_through_origin: size mismatch");
  if (x.empty()) throw fit_error("fit_through_origin: no points");
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += w[i] * x[i] * x[i];
    sxy += w[i] * x[i] * y[i];
  }
  if (sxx <= 0.0) throw fit_error("fit_through_origin: degenerate abscissa");
  const double slope = sxy / sxx;
  double chi2 = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - slope * x[i];
    chi2 += w[i] * r * r;
  }
  FitResult res;
  res.coefficients = {slope};
  res.covariance = {1.0 / sxx};
  res.n_points = x.size();
  res.n_params = 1;
  res.reduced_chi2 = x.size() > 1 ? chi2 / static_cast<double>(x.size() - 1) : 0.0;
  return res;
}

// Weighted linear least squares for an arbitrary design matrix
// (row-major n_points x n_params).
inline FitResult fit_linear(const std::vector<double>& design, std::span<const double> y,
                            std::span<const double> w, std::size_t n_params) {
  const std::size_t n = y.size();
  if (w.size() != n || design.size() != n * n_params)
    throw std::invalid_argument("fit_linear: size mismatch");
  if (n < n_params) throw fit_error("fit_linear: fewer points than parameters");
  std::vector<double> ata(n_params * n_params, 0.0), atb(n_params, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t r = 0; r < n_params; ++r) {
      const double dr = design[i * n_params + r];
      atb[r] += w[i] * dr * y[i];
      for (std::size_t c = r; c < n_params; ++c)
        ata[r * n_params + c] += w[i] * dr * design[i * n_params + c];
    }
  }
  for (std::size_t r = 0; r < n_params; ++r)
    for (std::size_t c = 0; c < r; ++c) ata[r * n_params + c] = ata[c * n_params + r];

  FitResult res;
  res.coefficients = detail::solve_spd(ata, atb, n_params);
  res.covariance = detail::invert_spd(ata, n_params);
  res.n_points = n;
  res.n_params = n_params;
  double chi2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double f = 0.0;
    for (std::size_t r = 0; r < n_params; ++r) f += design[i * n_params + r] * res.coefficients[r];
    const double d = y[i] - f;
    chi2 += w[i] * d * d;
  }
  res.reduced_chi2 = n > n_params ? chi2 / static_cast<double>(n - n_params) : 0.0;
  return res;
}

struct GaussianPeakFit {
  double amplitude = 0.0;
  double center = 0.0;
  double sigma = 0.0;  // 1/e half-width of the fitted exp(-(x-c)^2/sigma^2)
  FitResult fit;
};

// Weighted Levenberg-Marquardt fit of y = A exp(-(x-c)^2/s^2). Abscissa and
// ordinate are shifted/scaled internally so the normal equations stay well
// conditioned for rad/s-scale inputs and arbitrary amplitudes; parameters are
// mapped back before returning.
inline GaussianPeakFit fit_gaussian_peak(std::span<const double> x, std::span<const double> y_in,
                                         std::span<const double> w_in) {
  const std::size_t n = x.size();
  if (y_in.size() != n || w_in.size() != n)
    throw std::invalid_argument("fit_gaussian_peak: size mismatch");
  if (n < 4) throw fit_error("fit_gaussian_peak: need at least 4 points");

  double xmin = x[0], xmax = x[0];
  std::size_t imax = 0;
  for (std::size_t i = 0; i < n; ++i) {
    xmin = std::min(xmin, x[i]);
    xmax = std::max(xmax, x[i]);
    if (y_in[i] > y_in[imax]) imax = i;
  }
  const double xscale = xmax > xmin ? 0.5 * (xmax - xmin) : 1.0;
  const double xmid = 0.5 * (xmax + xmin);
  if (y_in[imax] <= 0.0) throw fit_error("fit_gaussian_peak: no positive peak");
  const double yscale = y_in[imax];
  std::vector<double> y(n), w(n);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = y_in[i] / yscale;
    w[i] = w_in[i] * yscale * yscale;
  }

  // Moment-based starting point in scaled coordinates.
  double sw = 0.0, swx = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double yi = std::max(0.0, y[i]);
    sw += yi;
    swx += yi * (x[i] - xmid) / xscale;
  }
  double c = sw > 0.0 ? swx / sw : (x[imax] - xmid) / xscale;
  double swxx = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double u = (x[i] - xmid) / xscale - c;
    swxx += std::max(0.0, y[i]) * u * u;
  }
  double s = sw > 0.0 ? std::sqrt(std::max(1e-12, 2.0 * swxx / sw)) : 0.5;
  double a = y[imax];

  std::vector<double> xs(n);
  for (std::size_t i = 0; i < n; ++i) xs[i] = (x[i] - xmid) / xscale;

  auto chi2_of = [&](double pa, double pc, double ps) {
    double chi2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double u = (xs[i] - pc) / ps;
      const double r = y[i] - pa * std::exp(-u * u);
      chi2 += w[i] * r * r;
    }
    return chi2;
  };

  double lambda = 1e-3;
  double chi2 = chi2_of(a, c, s);
  bool converged = false;
  for (int iter = 0; iter < 400; ++iter) {
    // Normal equations for parameters (A, c, s).
    std::vector<double> jtj(9, 0.0), jtr(3, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double u = (xs[i] - c) / s;
      const double e = std::exp(-u * u);
      const double f = a * e;
      const double j0 = e;
      const double j1 = f * 2.0 * u / s;
      const double j2 = f * 2.0 * u * u / s;
      const double r = y[i] - f;
      const double wi = w[i];
      const double j[3] = {j0, j1, j2};
      for (int p = 0; p < 3; ++p) {
        jtr[p] += wi * j[p] * r;
        for (int q = p; q < 3; ++q) jtj[p * 3 + q] += wi * j[p] * j[q];
      }
    }
    jtj[3] = jtj[1];
    jtj[6] = jtj[2];
    jtj[7] = jtj[5];

    std::vector<double> damped = jtj;
    for (int p = 0; p < 3; ++p) damped[p * 3 + p] *= (1.0 + lambda);
    std::vector<double> step;
    try {
      step = detail::solve_spd(damped, jtr, 3);
    } catch (const fit_error&) {
      throw fit_error("fit_gaussian_peak: singular step (flat or degenerate data)");
    }
    const double na = a + step[0], nc = c + step[1], ns = s + step[2];
    if (!(ns > 0.0) || !std::isfinite(na) || !std::isfinite(nc) || !std::isfinite(ns)) {
      lambda *= 10.0;
      if (lambda > 1e12) throw fit_error("fit_gaussian_peak: diverged");
      continue;
    }
    const double nchi2 = chi2_of(na, nc, ns);
    if (nchi2 <= chi2) {
      const double rel = std::abs(chi2 - nchi2) / (chi2 > 0.0 ? chi2 : 1.0);
      const double step_norm = std::abs(step[0] / std::max(1e-300, std::abs(a))) +
                               std::abs(step[1]) + std::abs(step[2] / s);
      a = na;
      c = nc;
      s = ns;
      chi2 = nchi2;
      lambda = std::max(1e-12, lambda * 0.3);
      if (rel < 1e-14 || step_norm < 1e-13) {
        converged = true;
        break;
      }
    } else {
      lambda *= 10.0;
      if (lambda > 1e12) {
        converged = true;  // stuck in a flat valley: accept current optimum
        break;
      }
    }
  }
  if (!converged) throw fit_error("fit_gaussian_peak: no convergence after 400 iterations");
  if (a <= 0.0) throw fit_error("fit_gaussian_peak: non-positive fitted amplitude");
  // scaled data span is 2; a width many times beyond it means the data show
  // no peak the fit could constrain
  if (s > 10.0) throw fit_error("fit_gaussian_peak: no resolvable peak within the sampled range");

  // Covariance at the optimum, mapped back to unscaled coordinates.
  std::vector<double> jtj(9, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = (xs[i] - c) / s;
    const double e = std::exp(-u * u);
    const double f = a * e;
    const double j[3] = {e, f * 2.0 * u / s, f * 2.0 * u * u / s};
    for (int p = 0; p < 3; ++p)
      for (int q = p; q < 3; ++q) jtj[p * 3 + q] += w[i] * j[p] * j[q];
  }
  jtj[3] = jtj[1];
  jtj[6] = jtj[2];
  jtj[7] = jtj[5];

  GaussianPeakFit out;
  out.amplitude = a * yscale;
  out.center = xmid + c * xscale;
  out.sigma = s * xscale;
  out.fit.coefficients = {out.amplitude, out.center, out.sigma};
  out.fit.n_points = n;
  out.fit.n_params = 3;
  out.fit.reduced_chi2 = n > 3 ? chi2 / static_cast<double>(n - 3) : 0.0;
  try {
    auto cov = detail::invert_spd(jtj, 3);
    const double scale[3] = {yscale, xscale, xscale};
    out.fit.covariance.assign(9, 0.0);
    for (int r = 0; r < 3; ++r)
      for (int cidx = 0; cidx < 3; ++cidx)
        out.fit.covariance[r * 3 + cidx] = cov[r * 3 + cidx] * scale[r] * scale[cidx];
  } catch (const fit_error&) {
    out.fit.covariance.assign(9, 0.0);
  }
  return out;
}

}  // namespace pairqe
