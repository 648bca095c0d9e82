#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <optional>
#include <vector>

#include "pairqe/calibration.hpp"
#include "pairqe/counting.hpp"

using namespace pairqe;

namespace {

CountRecord record(double p_mw, std::uint64_t gates, std::uint64_t s, std::uint64_t i,
                   std::uint64_t c) {
  CountRecord r;
  r.p_ave_mw = p_mw;
  r.gates = gates;
  r.singles_signal = s;
  r.singles_idler = i;
  r.coincidences_raw = c;
  return r;
}

ChannelSpec channel(double eta_t) {
  ChannelSpec c;
  c.transmission_efficiency = eta_t;
  c.filter = FilterSpec::from_fwhm_nm(1550.7, 0.6, 1);
  return c;
}

DetectorSpec detector(double eta_d, double dark = 0.0) {
  DetectorSpec d;
  d.quantum_efficiency = eta_d;
  d.dark_count_prob = dark;
  return d;
}

}  // namespace

TEST_CASE("true coincidence subtracts computed accidentals", "[calibration]") {
  // pure accidentals cancel exactly
  const auto pure = record(0.2, 1000000, 10000, 10000, 100);
  CHECK(true_coincidence(pure, {0.0, 0.0}) == 0.0);

  const auto r = record(0.2, 1000000, 10000, 10000, 1000);
  CHECK_THAT(true_coincidence(r, {0.0, 0.0}), Catch::Matchers::WithinRel(9.0e-4, 1e-12));
}

TEST_CASE("true coincidence honors the measured-accidental mode", "[calibration]") {
  auto r = record(0.2, 1000000, 10000, 10000, 1000);
  r.accidentals_measured = 250;
  CHECK_THAT(true_coincidence(r, {0.0, 0.0}, AccidentalMode::measured),
             Catch::Matchers::WithinRel(7.5e-4, 1e-12));
  r.accidentals_measured.reset();
  CHECK_THROWS_AS(true_coincidence(r, {0.0, 0.0}, AccidentalMode::measured),
                  std::invalid_argument);
}

TEST_CASE("true coincidence restores darks on corrected records", "[calibration]") {
  // identical underlying data, once raw and once dark-subtracted: the
  // accidental estimate must be the same
  const DarkProbs dark{1e-3, 2e-3};
  const auto raw = record(0.2, 1000000, 11000, 12000, 900);
  auto corrected = record(0.2, 1000000, 10000, 10000, 900);
  corrected.dark_corrected = true;
  CHECK_THAT(true_coincidence(raw, dark), Catch::Matchers::WithinRel(
                                              true_coincidence(corrected, dark), 1e-12));
}

TEST_CASE("true coincidence requires gates", "[calibration]") {
  CHECK_THROWS_AS(true_coincidence(record(0.2, 0, 0, 0, 0), {0.0, 0.0}), std::domain_error);
}

TEST_CASE("sfwm extraction", "[calibration]") {
  // N_T exactly the Raman prediction
  const double eta_ti = 0.1, s1p = 83.5, p = 1.2;
  const double raman = eta_ti * s1p * 1e-3 * p;  // 0.01002 per pulse
  const auto exact = record(p, 1000000, 0, static_cast<std::uint64_t>(raman * 1000000), 0);
  const auto zero = extract_sfwm_rate(exact, {0.0, 0.0}, s1p, eta_ti);
  CHECK_THAT(zero.value, Catch::Matchers::WithinAbs(0.0, 1e-12));
  CHECK_FALSE(zero.negative_warning);

  const auto r = record(p, 1000000, 0, 20000, 0);  // N_T = 0.02 per pulse
  const auto sfwm = extract_sfwm_rate(r, {0.0, 0.0}, s1p, eta_ti);
  CHECK_THAT(sfwm.value, Catch::Matchers::WithinRel(0.00998, 1e-10));

  // below the Raman line: flagged, not clamped
  const auto low = record(p, 1000000, 0, 5000, 0);
  const auto neg = extract_sfwm_rate(low, {0.0, 0.0}, s1p, eta_ti);
  CHECK(neg.value < 0.0);
  CHECK(neg.negative_warning);
  CHECK_THAT(neg.value, Catch::Matchers::WithinRel(0.005 - raman, 1e-10));
}

TEST_CASE("raman fit on exact synthetic data", "[calibration]") {
  const double eta_ti = 0.1, s1p = 11.93;
  std::vector<CountRecord> records;
  for (double p : {0.5, 1.0, 1.5, 2.0}) {
    const std::uint64_t gates = 20000000;
    const double rate = eta_ti * s1p * 1e-3 * p;
    records.push_back(record(p, gates, 0, static_cast<std::uint64_t>(std::llround(rate * gates)), 0));
  }
  const auto fit = fit_raman(records, {0.0, 0.0}, eta_ti);
  CHECK_THAT(fit.s1_prime, Catch::Matchers::WithinRel(s1p, 1e-10));
}

TEST_CASE("raman fit error paths", "[calibration]") {
  std::vector<CountRecord> zero = {record(0.5, 1000, 0, 0, 0), record(1.0, 1000, 0, 0, 0),
                                   record(1.5, 1000, 0, 0, 0)};
  CHECK_THROWS_AS(fit_raman(zero, {0.0, 0.0}, 0.1), fit_error);
  std::vector<CountRecord> few = {record(0.5, 1000, 0, 10, 0), record(1.0, 1000, 0, 20, 0)};
  CHECK_THROWS_AS(fit_raman(few, {0.0, 0.0}, 0.1), std::invalid_argument);
}

TEST_CASE("raman fit recovers simulated coefficients", "[calibration]") {
  const double eta_ti = 0.2, eta_di = 0.5;
  SourceCoefficients source{40.0, 500.0, false};  // pump in the normal-dispersion regime
  const std::vector<double> powers{0.4, 0.8, 1.2, 1.6};
  const auto sweep = simulate_power_sweep(source, 0.5, channel(0.2), channel(eta_ti),
                                          detector(0.2, 1e-5), detector(eta_di, 2e-5), powers,
                                          2000000, 4242);
  const auto fit = fit_raman(sweep, {1e-5, 2e-5}, eta_ti);
  CHECK(std::abs(fit.s1_prime - source.s1 * eta_di) <= 3.0 * fit.std_dev);
}

TEST_CASE("power sweep fit is exact on exact data", "[calibration]") {
  const double eta_ti = 0.1, s1p = 83.5, s2 = 61.0;
  std::vector<CountRecord> records;
  for (double p : {0.25, 0.5, 0.75, 1.0, 1.25}) {
    const std::uint64_t gates = 40000000;
    const double rate = eta_ti * s1p * 1e-3 * p + s2 * 1e-3 * p * p;
    records.push_back(record(p, gates, 0, static_cast<std::uint64_t>(std::llround(rate * gates)), 0));
  }
  const auto both_free = fit_power_sweep(records, {0.0, 0.0}, eta_ti);
  CHECK_THAT(both_free.s1_prime, Catch::Matchers::WithinRel(s1p, 1e-6));
  CHECK_THAT(both_free.s2, Catch::Matchers::WithinRel(s2, 1e-6));

  const auto fixed = fit_power_sweep(records, {0.0, 0.0}, eta_ti, s1p);
  CHECK(fixed.s1_fixed);
  CHECK_THAT(fixed.s2, Catch::Matchers::WithinRel(s2, 1e-8));

  // linear-only data: the quadratic coefficient vanishes
  std::vector<CountRecord> linear;
  for (double p : {0.25, 0.5, 0.75, 1.0}) {
    const std::uint64_t gates = 40000000;
    const double rate = eta_ti * s1p * 1e-3 * p;
    linear.push_back(record(p, gates, 0, static_cast<std::uint64_t>(std::llround(rate * gates)), 0));
  }
  const auto lfit = fit_power_sweep(linear, {0.0, 0.0}, eta_ti, s1p);
  CHECK_THAT(lfit.s2, Catch::Matchers::WithinAbs(0.0, 1e-8));
}

TEST_CASE("power sweep fit rejects rank deficiency", "[calibration]") {
  std::vector<CountRecord> same;
  for (int k = 0; k < 4; ++k) same.push_back(record(0.8, 1000000, 0, 5000, 0));
  CHECK_THROWS_AS(fit_power_sweep(same, {0.0, 0.0}, 0.1), fit_error);
}

TEST_CASE("qe deduction", "[calibration]") {
  const auto qe = deduce_qe(5.80e-5, 0.496, 0.01, 0.1);
  CHECK_THAT(qe.eta_ut, Catch::Matchers::WithinAbs(0.117, 1e-4));
  CHECK_FALSE(qe.unphysical_warning);

  CHECK(deduce_qe(0.0, 0.496, 0.01, 0.1).eta_ut == 0.0);

  // continuous-wave reduction: xi = 1 recovers the configured efficiency
  const double eta = 0.37, eta_ts = 0.21, r_if = 3.3e-3;
  const auto cw = deduce_qe(eta * eta_ts * r_if, 1.0, r_if, eta_ts);
  CHECK_THAT(cw.eta_ut, Catch::Matchers::WithinRel(eta, 1e-12));

  CHECK(deduce_qe(0.95, 1.0, 0.9, 1.0).unphysical_warning);
  CHECK_THROWS_AS(deduce_qe(1e-5, 0.0, 0.01, 0.1), std::domain_error);
  CHECK_THROWS_AS(deduce_qe(1e-5, 0.5, 0.0, 0.1), std::domain_error);
  CHECK_THROWS_AS(deduce_qe(1e-5, 0.5, 0.01, 1.5), std::domain_error);
}

TEST_CASE("zeta fit", "[calibration]") {
  std::vector<double> x{1e-4, 2e-4, 3e-4, 5e-4}, y;
  for (double v : x) y.push_back(0.123 * v);
  const auto zf = fit_zeta(x, y);
  CHECK_THAT(zf.zeta, Catch::Matchers::WithinRel(0.123, 1e-10));

  std::vector<double> degenerate{0.0, 0.0, 0.0};
  CHECK_THROWS_AS(fit_zeta(degenerate, degenerate), fit_error);
  std::vector<double> two{1.0, 2.0};
  CHECK_THROWS_AS(fit_zeta(two, two), std::invalid_argument);
}

TEST_CASE("qe from zeta", "[calibration]") {
  CHECK_THAT(qe_from_zeta(0.123, 0.99), Catch::Matchers::WithinAbs(0.124, 5e-4));
  CHECK(qe_from_zeta(0.0, 0.5) == 0.0);
  CHECK_THROWS_AS(qe_from_zeta(0.1, 0.0), std::domain_error);
  CHECK_THROWS_AS(qe_from_zeta(0.1, 1.2), std::domain_error);
}

TEST_CASE("multipair ratio values and limits", "[calibration]") {
  CHECK(multipair_ratio({0.0, 0.01, 0.01}) == 1.0);
  CHECK_THAT(multipair_ratio({0.03, 0.01, 0.01}), Catch::Matchers::WithinAbs(1.0290, 1e-4));

  // small-loss limit: ratio ~ 1 + n_bar
  for (double n : {0.005, 0.01, 0.03}) {
    for (double prod : {1e-3, 5e-3, 1e-2}) {
      const double r = multipair_ratio({n, prod, prod});
      CHECK(std::abs(r - (1.0 + n)) < 1e-3);
      CHECK(r >= 1.0);
    }
  }

  // monotone increasing in n_bar for small loss products
  double prev = 1.0;
  for (double n : {0.0, 0.01, 0.02, 0.05, 0.1}) {
    const double r = multipair_ratio({n, 0.01, 0.01});
    CHECK(r >= prev);
    prev = r;
  }
  CHECK_THROWS_AS(multipair_ratio({-0.1, 0.01, 0.01}), std::domain_error);
  CHECK_THROWS_AS(multipair_ratio({0.1, 1.0, 0.01}), std::domain_error);
}

TEST_CASE("cw reference qe", "[calibration]") {
  CHECK(cw_reference_qe(0.1, 2.5, 0.62, 0.0) == 0.0);
  CHECK_THAT(cw_reference_qe(0.1, 2.5, 0.62, 2.898e-3), Catch::Matchers::WithinAbs(0.117, 1e-3));

  // exact round trip with the forward model
  for (double eta : {0.05, 0.117, 0.5, 0.9}) {
    const double p = cw_click_probability(eta, 0.1, 2.5, 0.62);
    CHECK_THAT(cw_reference_qe(0.1, 2.5, 0.62, p), Catch::Matchers::WithinRel(eta, 1e-10));
  }

  // only the product mu * effective/nominal matters
  const double p_click = 2.898e-3;
  CHECK_THAT(cw_reference_qe(0.1, 2.5, 0.62, p_click),
             Catch::Matchers::WithinRel(cw_reference_qe(0.05, 1.25, 0.62, p_click), 1e-12));

  CHECK_THROWS_AS(cw_reference_qe(0.1, 2.5, 0.62, 1.0), std::domain_error);
  CHECK_THROWS_AS(cw_reference_qe(0.0, 2.5, 0.62, 0.1), std::domain_error);
}

TEST_CASE("scaling invariance of the record-level pipeline", "[calibration]") {
  const auto base = record(0.8, 1000000, 5000, 40000, 90);
  auto scaled = base;
  const std::uint64_t f = 7;
  scaled.gates *= f;
  scaled.singles_signal *= f;
  scaled.singles_idler *= f;
  scaled.coincidences_raw *= f;

  const DarkProbs dark{1e-5, 2e-5};
  CHECK_THAT(true_coincidence(base, dark),
             Catch::Matchers::WithinRel(true_coincidence(scaled, dark), 1e-12));
  const auto a = extract_sfwm_rate(base, dark, 20.0, 0.1);
  const auto b = extract_sfwm_rate(scaled, dark, 20.0, 0.1);
  CHECK_THAT(a.value, Catch::Matchers::WithinRel(b.value, 1e-12));
  const double qa = deduce_qe(true_coincidence(base, dark), 0.5, a.value, 0.1).eta_ut;
  const double qb = deduce_qe(true_coincidence(scaled, dark), 0.5, b.value, 0.1).eta_ut;
  CHECK_THAT(qa, Catch::Matchers::WithinRel(qb, 1e-12));
}

TEST_CASE("qe deduction inverts the analytic rate model exactly", "[calibration]") {
  SourceCoefficients source{30.0, 80.0, true};
  const double xi = 0.496, eta_ts = 0.1, eta_ti = 0.12, eta_ds = 0.117, eta_di = 0.25;
  const auto rates = expected_rates(source, xi, channel(eta_ts), channel(eta_ti),
                                    detector(eta_ds), detector(eta_di), 0.9);
  const double r_if = source.s2 * 1e-3 * 0.9 * 0.9 * eta_ti * eta_di;
  const auto qe = deduce_qe(rates.coincidence, xi, r_if, eta_ts);
  CHECK_THAT(qe.eta_ut, Catch::Matchers::WithinRel(eta_ds, 1e-12));
}

TEST_CASE("closed-loop calibration recovers the configured efficiency", "[calibration]") {
  const double eta_ds = 0.12, eta_di = 0.9, eta_ts = 0.1, eta_ti = 0.1;
  const double xi = 0.496;
  const double s1_source = 83.5 / eta_di;  // normalized coefficient comes out at 83.5
  SourceCoefficients source{s1_source, 10.0, true};
  SourceCoefficients raman_source{s1_source, 10.0, false};
  const std::vector<double> powers{0.4, 0.55, 0.7, 0.85, 1.0};

  const auto counts = simulate_power_sweep(source, xi, channel(eta_ts), channel(eta_ti),
                                           detector(eta_ds, 1.7e-5), detector(eta_di, 3e-5),
                                           powers, 10000000, 20260801);
  const auto raman = simulate_power_sweep(raman_source, xi, channel(eta_ts), channel(eta_ti),
                                          detector(eta_ds, 1.7e-5), detector(eta_di, 3e-5),
                                          powers, 10000000, 555);

  CalibrationSettings settings;
  settings.eta_ts = eta_ts;
  settings.eta_ti = eta_ti;
  settings.trigger_qe = eta_di;
  settings.dark = {1.7e-5, 3e-5};
  settings.xi_mode = XiMode::fixed;
  settings.xi_fixed = xi;
  settings.pair_rate_cap = 0.03;

  const auto result = run_calibration(counts, raman, {}, settings);
  REQUIRE(result.eta_ut > 0.0);
  const double combined = result.eta_ut * result.eta_ut_rel_dev;
  CHECK(std::abs(result.eta_ut - eta_ds) <= 3.0 * combined);
  CHECK(std::abs(result.s1_prime - 83.5) <= 3.0 * result.s1_prime_std);
  // the pooled slope agrees too
  CHECK(std::abs(result.eta_from_zeta - eta_ds) <= 4.0 * combined);
  CHECK(result.pair_rate <= 0.011);
}
