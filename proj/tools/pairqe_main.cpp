// Command-line front end: simulation, calibration, per-stage fits and
// uncertainty budgets over the CSV/config formats described in the README.
//
// Exit codes: 0 success, 2 usage, 3 malformed input, 4 numerical failure.

#include <CLI11.hpp>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "pairqe/calibration.hpp"
#include "pairqe/config.hpp"
#include "pairqe/counting.hpp"
#include "pairqe/csv.hpp"
#include "pairqe/errors.hpp"
#include "pairqe/jsa.hpp"
#include "pairqe/uncertainty.hpp"

namespace {

using namespace pairqe;

constexpr int kExitUsage = 2;
constexpr int kExitInput = 3;
constexpr int kExitNumerical = 4;

void emit(const std::string& out_path, const std::string& content) {
  if (out_path.empty() || out_path == "-") {
    std::cout << content;
  } else {
    write_file_atomic(out_path, content);
  }
}

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(10);
  os << v;
  return os.str();
}

std::vector<double> log_spaced(double lo, double hi, std::size_t n) {
  std::vector<double> out;
  out.reserve(n);
  const double l0 = std::log(lo), l1 = std::log(hi);
  for (std::size_t i = 0; i < n; ++i)
    out.push_back(std::exp(l0 + (l1 - l0) * static_cast<double>(i) / static_cast<double>(n - 1)));
  return out;
}

int shape_order(const std::string& shape) {
  if (shape == "gaussian") return 1;
  if (shape == "supergaussian6") return 3;
  throw input_error("shape must be gaussian or supergaussian6");
}

// ---------------------------------------------------------------------------
// xi-curve
// ---------------------------------------------------------------------------

struct XiCurveArgs {
  std::string shape = "gaussian";
  std::vector<double> ratios;
  double ratio_min = 0.1, ratio_max = 10.0;
  std::size_t points = 0;
  std::string out;
};

int cmd_xi_curve(const XiCurveArgs& args) {
  std::vector<double> ratios = args.ratios;
  if (ratios.empty() && args.points > 0)
    ratios = log_spaced(args.ratio_min, args.ratio_max, args.points);
  if (ratios.empty()) throw usage_error("xi-curve: no ratios given (use --ratios or --points)");
  const auto curve = xi_curve(shape_order(args.shape), ratios);
  std::ostringstream os;
  os << kCurveHeader << "\n";
  for (const auto& [r, xi] : curve) os << format_double(r) << "," << format_double(xi) << "\n";
  emit(args.out, os.str());
  return 0;
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

struct SimulateArgs {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> gates;
  std::vector<double> powers;
  bool raman_only = false;
  bool verify = false;
};

int cmd_simulate(const SimulateArgs& args) {
  RunConfig rc = RunConfig::load(args.config);
  if (args.seed) rc.seed = *args.seed;
  if (args.gates) rc.gates_per_point = *args.gates;
  if (!args.powers.empty()) rc.powers_mw = args.powers;
  if (args.raman_only) rc.source.sfwm_enabled = false;

  const double xi = rc.simulation_xi();
  const auto records =
      simulate_power_sweep(rc.source, xi, rc.signal_channel, rc.idler_channel, rc.signal_detector,
                           rc.idler_detector, rc.powers_mw, rc.gates_per_point, rc.seed);
  emit(args.out, counts_to_csv(records));

  if (!args.verify) return 0;
  // consistency of the run against the closed-form means: 3 sigma counting
  // statistics plus a first-order allowance for dead-time losses, which the
  // closed forms exclude
  bool ok = true;
  for (const auto& rec : records) {
    const auto exp = expected_rates(rc.source, xi, rc.signal_channel, rc.idler_channel,
                                    rc.signal_detector, rc.idler_detector, rec.p_ave_mw);
    const double gates = static_cast<double>(rec.gates);
    auto check = [&](const char* what, double measured, double expected, double dead_loss) {
      const double sigma = std::sqrt(std::max(expected * gates, 1.0)) / gates;
      const double tol = 3.0 * sigma + dead_loss * expected;
      const bool pass = std::abs(measured - expected) <= tol;
      ok = ok && pass;
      std::cerr << (pass ? "ok   " : "FAIL ") << what << " P=" << rec.p_ave_mw
                << " mW: measured " << measured << " expected " << expected << " tol " << tol
                << "\n";
    };
    const double loss_s =
        exp.singles_signal * static_cast<double>(rc.signal_detector.blocked_gates());
    const double loss_i =
        exp.singles_idler * static_cast<double>(rc.idler_detector.blocked_gates());
    check("singles_signal", static_cast<double>(rec.singles_signal) / gates, exp.singles_signal,
          loss_s);
    check("singles_idler", static_cast<double>(rec.singles_idler) / gates, exp.singles_idler,
          loss_i);
    check("true_coincidence",
          true_coincidence(rec, {rc.signal_detector.dark_count_prob,
                                 rc.idler_detector.dark_count_prob}),
          exp.coincidence, loss_s + loss_i);
  }
  if (!ok) throw numerics_error("simulate --verify: record out of the expected band");
  return 0;
}

// ---------------------------------------------------------------------------
// calibrate
// ---------------------------------------------------------------------------

struct CalibrateArgs {
  std::string config;
  std::string counts;
  std::string raman;
  std::string scan;
  std::optional<double> xi_override;
  std::string out;
  std::string budget_out;
  std::string plot_dir;
};

std::string calibration_report(const CalibrationResult& r, const RunConfig& rc) {
  std::ostringstream os;
  os.precision(10);
  os << "eta_ut = " << r.eta_ut << "\n";
  os << "eta_ut_rel_dev = " << r.eta_ut_rel_dev << "\n";
  os << "eta_ut_abs_dev = " << r.eta_ut * r.eta_ut_rel_dev << "\n";
  os << "unphysical_warning = " << (r.unphysical_warning ? "true" : "false") << "\n";
  os << "xi_s = " << r.xi_s << "\n";
  if (r.sigma0 > 0.0) {
    os << "sigma0_rad_s = " << r.sigma0 << "\n";
    os << "sigma0_nm = " << width_nm_from_rad_s(r.sigma0, rc.signal_filter.center_wavelength_nm)
       << "\n";
  }
  os << "operating_power_mw = " << r.p_ave_mw << "\n";
  os << "operating_index = " << r.operating_index << "\n";
  os << "c_c_per_pulse = " << r.c_c << "\n";
  os << "c_c_rel_dev = " << r.c_c_rel_dev << "\n";
  os << "r_if_per_pulse = " << r.r_if << "\n";
  os << "r_if_rel_dev = " << r.r_if_rel_dev << "\n";
  os << "n_t_per_pulse = " << r.n_t << "\n";
  os << "pair_rate_per_pulse = " << r.pair_rate << "\n";
  os << "pair_rate_flagged = " << (r.pair_rate_flagged ? "true" : "false") << "\n";
  os << "eta_ts = " << r.eta_ts << "\n";
  os << "eta_ti = " << r.eta_ti << "\n";
  os << "s1_prime_milli = " << r.s1_prime << "\n";
  os << "s1_prime_milli_dev = " << r.s1_prime_std << "\n";
  os << "s2_milli = " << r.s2 << "\n";
  os << "s2_milli_dev = " << r.s2_std << "\n";
  os << "zeta = " << r.zeta << "\n";
  os << "zeta_dev = " << r.zeta_std << "\n";
  os << "eta_from_zeta = " << r.eta_from_zeta << "\n";
  os << "multipair_ratio_bound = "
     << multipair_ratio({r.pair_rate, r.eta_ts * r.eta_ut, r.eta_ti * rc.idler_detector.quantum_efficiency})
     << "\n";
  for (std::size_t i = 0; i < r.warnings.size(); ++i)
    os << "warning_" << i << " = " << r.warnings[i] << "\n";
  return os.str();
}

std::string budget_csv(const CalibrationResult& r, const std::string& label) {
  const SystematicBounds bounds;
  std::ostringstream os;
  os.precision(10);
  os << "configuration,term,relative_dev\n";
  os << label << ",c_c," << r.budget_inputs.rel_c_c << "\n";
  os << label << ",xi_s," << r.budget_inputs.rel_xi_s << "\n";
  os << label << ",r_if," << r.r_if_rel_dev << "\n";
  os << label << ",eta_ts," << r.budget_inputs.rel_eta_ts << "\n";
  os << label << ",s1_prime," << propagate_s1prime(r.budget_inputs) << "\n";
  os << label << ",total," << r.eta_ut_rel_dev << "\n";
  os << label << ",unpropagated_bound_timing_drift," << bounds.timing_drift << "\n";
  os << label << ",unpropagated_bound_afterpulse," << bounds.afterpulse << "\n";
  os << label << ",unpropagated_bound_multi_pair," << bounds.multi_pair << "\n";
  return os.str();
}

void emit_plot_data(const std::string& dir, const CalibrationResult& r, const RunConfig& rc,
                    std::span<const CountRecord> counts, std::span<const ScanRecord> scan) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  auto path = [&](const char* name) { return (fs::path(dir) / name).string(); };

  // collection-efficiency curves for both filter shapes
  for (const auto& [name, order] :
       {std::pair<const char*, int>{"xi_curve_gaussian.csv", 1},
        std::pair<const char*, int>{"xi_curve_supergaussian6.csv", 3}}) {
    const auto curve = xi_curve(order, log_spaced(0.1, 10.0, 121));
    std::ostringstream os;
    os << kCurveHeader << "\n";
    for (const auto& [x, v] : curve) os << format_double(x) << "," << format_double(v) << "\n";
    write_file_atomic(path(name), os.str());
  }

  // power sweep with its decomposition
  {
    std::ostringstream os;
    os << "p_ave_mw,n_t_per_pulse,raman_component,sfwm_component,fit_total\n";
    const DarkProbs dark{rc.signal_detector.dark_count_prob, rc.idler_detector.dark_count_prob};
    for (const auto& rec : counts) {
      const double n_t = dark_subtracted_idler_rate(rec, dark);
      const double raman = rc.idler_channel.transmission_efficiency * r.s1_prime * 1e-3 *
                           rec.p_ave_mw;
      const double sfwm = r.s2 * 1e-3 * rec.p_ave_mw * rec.p_ave_mw;
      os << rec.p_ave_mw << "," << format_double(n_t) << "," << format_double(raman) << ","
         << format_double(sfwm) << "," << format_double(raman + sfwm) << "\n";
    }
    write_file_atomic(path("power_sweep.csv"), os.str());
  }

  // true coincidence against the filtered SFWM rate, with the fitted slope
  {
    std::ostringstream os;
    os << "eta_ts_r_if,c_c,fit\n";
    for (std::size_t i = 0; i < counts.size(); ++i) {
      const double x = r.eta_ts * r.record_r_if[i];
      os << format_double(x) << "," << format_double(r.record_c_c[i]) << ","
         << format_double(r.zeta * x) << "\n";
    }
    write_file_atomic(path("coincidence_vs_sfwm.csv"), os.str());
  }

  // scan profile and its fit
  if (!scan.empty() && r.sigma0 > 0.0) {
    const double sigma_s = rc.signal_filter.width_a;
    const double sigma_prime = std::sqrt(r.sigma0 * r.sigma0 + sigma_s * sigma_s);
    // re-fit center for the plotted curve
    std::ostringstream os;
    os << "lambda_s0_prime_nm,cc_normalized,fit\n";
    double peak = 0.0, center = 0.0;
    for (const auto& s : scan)
      if (s.cc_normalized > peak) {
        peak = s.cc_normalized;
        center = angular_frequency_from_wavelength_nm(s.lambda_s0_prime_nm);
      }
    for (const auto& s : scan) {
      const double omega = angular_frequency_from_wavelength_nm(s.lambda_s0_prime_nm);
      const double u = (omega - center) / sigma_prime;
      os << s.lambda_s0_prime_nm << "," << format_double(s.cc_normalized) << ","
         << format_double(peak * std::exp(-u * u)) << "\n";
    }
    write_file_atomic(path("scan_fit.csv"), os.str());
  }

  // zeta against the width ratio: theory curve plus this configuration's point
  if (r.sigma0 > 0.0) {
    std::ostringstream os;
    os << "ratio,zeta_theory,zeta_measured\n";
    const double ratio_meas = rc.signal_filter.width_a / r.sigma0;
    for (double ratio : log_spaced(0.2, 3.0, 61)) {
      FilterSpec f = rc.signal_filter;
      f.width_a = ratio;
      f.center_wavelength_nm = rc.signal_filter.center_wavelength_nm;
      const double xi = collection_efficiency(f, ConditionalSpectrum::analytic_gaussian(1.0));
      os << format_double(ratio) << "," << format_double(xi * r.eta_ut) << ",";
      os << "\n";
    }
    os << format_double(ratio_meas) << ",," << format_double(r.zeta) << "\n";
    write_file_atomic(path("zeta_vs_ratio.csv"), os.str());
  }

  // one row per configuration; concatenated across runs by the caller
  {
    std::ostringstream os;
    os << "ratio,eta_ut,eta_ut_abs_dev\n";
    const double ratio = r.sigma0 > 0.0 ? rc.signal_filter.width_a / r.sigma0 : 0.0;
    os << format_double(ratio) << "," << format_double(r.eta_ut) << ","
       << format_double(r.eta_ut * r.eta_ut_rel_dev) << "\n";
    write_file_atomic(path("eta_by_configuration.csv"), os.str());
  }
}

int cmd_calibrate(const CalibrateArgs& args) {
  RunConfig rc = RunConfig::load(args.config);
  const auto counts = read_counts_csv(args.counts);
  const auto raman = read_counts_csv(args.raman);
  std::vector<ScanRecord> scan;
  if (!args.scan.empty()) scan = read_scan_csv(args.scan);

  CalibrationSettings settings = rc.calibration_settings();
  if (args.xi_override) {
    settings.xi_mode = XiMode::fixed;
    settings.xi_fixed = *args.xi_override;
  } else if (!scan.empty()) {
    settings.xi_mode = XiMode::scan;
  } else if (settings.xi_mode == XiMode::scan) {
    throw input_error("calibrate: config requests scan-based xi but no --scan file was given");
  }

  const auto result = run_calibration(counts, raman, scan, settings);
  emit(args.out, calibration_report(result, rc));
  if (!args.budget_out.empty()) emit(args.budget_out, budget_csv(result, "run"));
  if (!args.plot_dir.empty()) emit_plot_data(args.plot_dir, result, rc, counts, scan);
  return 0;
}

// ---------------------------------------------------------------------------
// scan-fit
// ---------------------------------------------------------------------------

struct ScanFitArgs {
  std::string scan;
  double signal_fwhm_nm = 0.0;
  double signal_a_nm = 0.0;
  std::string out;
};

int cmd_scan_fit(const ScanFitArgs& args) {
  const auto scan = read_scan_csv(args.scan);
  if (scan.empty()) throw input_error("scan-fit: empty scan file");
  if ((args.signal_fwhm_nm > 0.0) == (args.signal_a_nm > 0.0))
    throw input_error("scan-fit: give exactly one of --signal-fwhm-nm or --signal-a-nm");
  const double mid_lambda = scan[scan.size() / 2].lambda_s0_prime_nm;
  const double a_nm = args.signal_a_nm > 0.0 ? args.signal_a_nm
                                             : width_param_from_fwhm(args.signal_fwhm_nm, 1);
  const double sigma_s = width_rad_s_from_nm(a_nm, mid_lambda);
  const auto d = deduce_sigma0_from_scan(scan, sigma_s);
  const double center_nm = wavelength_nm_from_angular_frequency(d.center_omega);
  std::ostringstream os;
  os.precision(10);
  os << "sigma0_prime_rad_s = " << d.sigma0_prime << "\n";
  os << "sigma0_prime_nm = " << width_nm_from_rad_s(d.sigma0_prime, center_nm) << "\n";
  os << "sigma0_rad_s = " << d.sigma0 << "\n";
  os << "sigma0_nm = " << width_nm_from_rad_s(d.sigma0, center_nm) << "\n";
  os << "center_nm = " << center_nm << "\n";
  os << "xi_s = " << d.xi_s << "\n";
  emit(args.out, os.str());
  return 0;
}

// ---------------------------------------------------------------------------
// raman-fit
// ---------------------------------------------------------------------------

struct RamanFitArgs {
  std::string counts;
  double eta_ti = 0.0;
  double dark_idler = 0.0;
  std::string out;
};

int cmd_raman_fit(const RamanFitArgs& args) {
  const auto records = read_counts_csv(args.counts);
  const auto fit = fit_raman(records, {0.0, args.dark_idler}, args.eta_ti);
  std::ostringstream os;
  os.precision(10);
  os << "s1_prime_milli = " << fit.s1_prime << "\n";
  os << "s1_prime_milli_dev = " << fit.std_dev << "\n";
  os << "reduced_chi2 = " << fit.fit.reduced_chi2 << "\n";
  os << "points = " << fit.fit.n_points << "\n";
  emit(args.out, os.str());
  return 0;
}

// ---------------------------------------------------------------------------
// uncertainty
// ---------------------------------------------------------------------------

struct UncertaintyArgs {
  UncertaintyInputs inputs;
  std::uint64_t mc_draws = 0;
  std::uint64_t seed = 1;
  std::string out;
};

int cmd_uncertainty(const UncertaintyArgs& args) {
  const auto& in = args.inputs;
  const double rel_s1 = propagate_s1prime(in);
  const auto rif = propagate_rif(in);
  const double rel_eta = propagate_qe(in.rel_c_c, in.rel_xi_s, rif.relative, in.rel_eta_ts);
  std::ostringstream os;
  os.precision(10);
  os << "rel_s1_prime = " << rel_s1 << "\n";
  os << "rel_r_if = " << rif.relative << "\n";
  os << "abs_r_if = " << rif.absolute << "\n";
  os << "rel_eta_ut = " << rel_eta << "\n";
  const SystematicBounds bounds;
  os << "unpropagated_bound_timing_drift = " << bounds.timing_drift << "\n";
  os << "unpropagated_bound_afterpulse = " << bounds.afterpulse << "\n";
  os << "unpropagated_bound_multi_pair = " << bounds.multi_pair << "\n";
  if (args.mc_draws > 0) {
    const double mc = mc_resample_relative_qe_dev(in, args.mc_draws, args.seed);
    os << "rel_eta_ut_resampled = " << mc << "\n";
    os << "resample_relative_gap = " << (rel_eta > 0.0 ? std::abs(mc - rel_eta) / rel_eta : 0.0)
       << "\n";
  }
  emit(args.out, os.str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"photon-pair quantum-efficiency calibration toolkit"};
  app.require_subcommand(1);
  std::function<int()> run;

  // xi-curve
  XiCurveArgs xi;
  auto* xi_cmd = app.add_subcommand(
      "xi-curve", "collection efficiency versus the filter/spectrum width ratio");
  xi_cmd->add_option("--shape", xi.shape, "gaussian or supergaussian6")
      ->check(CLI::IsMember({"gaussian", "supergaussian6"}));
  xi_cmd->add_option("--ratios", xi.ratios, "explicit sigma_s/sigma_0 ratios")->delimiter(',');
  xi_cmd->add_option("--ratio-min", xi.ratio_min, "start of a log-spaced ratio range");
  xi_cmd->add_option("--ratio-max", xi.ratio_max, "end of a log-spaced ratio range");
  xi_cmd->add_option("--points", xi.points, "number of log-spaced ratios");
  xi_cmd->add_option("--out", xi.out, "output CSV ('-' = stdout)");
  xi_cmd->callback([&] { run = [&] { return cmd_xi_curve(xi); }; });

  // simulate
  SimulateArgs sim;
  auto* sim_cmd =
      app.add_subcommand("simulate", "generate gated photon-counting records from a config");
  sim_cmd->add_option("--config", sim.config, "experiment config file")->required();
  sim_cmd->add_option("--out", sim.out, "counts CSV ('-' = stdout)");
  std::uint64_t seed_opt = 0, gates_opt = 0;
  auto* seed_flag = sim_cmd->add_option("--seed", seed_opt, "override simulation.seed");
  auto* gates_flag = sim_cmd->add_option("--gates", gates_opt, "override gates per point");
  sim_cmd->add_option("--powers", sim.powers, "override the power list (mW)")->delimiter(',');
  sim_cmd->add_flag("--raman-only", sim.raman_only,
                    "disable SFWM (pump in the normal-dispersion regime)");
  sim_cmd->add_flag("--verify", sim.verify, "check the run against the closed-form means");
  sim_cmd->callback([&, seed_flag, gates_flag] {
    run = [&, seed_flag, gates_flag] {
      if (seed_flag->count()) sim.seed = seed_opt;
      if (gates_flag->count()) sim.gates = gates_opt;
      return cmd_simulate(sim);
    };
  });

  // calibrate
  CalibrateArgs cal;
  auto* cal_cmd = app.add_subcommand("calibrate", "run the full analysis chain on count records");
  cal_cmd->add_option("--config", cal.config, "experiment config file")->required();
  cal_cmd->add_option("--counts", cal.counts, "power-sweep counts CSV")->required();
  cal_cmd->add_option("--raman", cal.raman, "SFWM-disabled counts CSV")->required();
  cal_cmd->add_option("--scan", cal.scan, "filter-center scan CSV (switches xi to scan mode)");
  double xi_override = 0.0;
  auto* xi_flag = cal_cmd->add_option("--xi", xi_override, "fixed collection efficiency");
  cal_cmd->add_option("--out", cal.out, "report file ('-' = stdout)");
  cal_cmd->add_option("--budget-out", cal.budget_out, "uncertainty budget CSV");
  cal_cmd->add_option("--emit-plot-data", cal.plot_dir, "directory for figure-ready CSVs");
  cal_cmd->callback([&, xi_flag] {
    run = [&, xi_flag] {
      if (xi_flag->count()) cal.xi_override = xi_override;
      return cmd_calibrate(cal);
    };
  });

  // scan-fit
  ScanFitArgs scan;
  auto* scan_cmd =
      app.add_subcommand("scan-fit", "deduce the conditional-spectrum width from a filter scan");
  scan_cmd->add_option("--scan", scan.scan, "scan CSV")->required();
  scan_cmd->add_option("--signal-fwhm-nm", scan.signal_fwhm_nm, "scanning filter FWHM (nm)");
  scan_cmd->add_option("--signal-a-nm", scan.signal_a_nm, "scanning filter 1/e half-width (nm)");
  scan_cmd->add_option("--out", scan.out, "report file ('-' = stdout)");
  scan_cmd->callback([&] { run = [&] { return cmd_scan_fit(scan); }; });

  // raman-fit
  RamanFitArgs raman;
  auto* raman_cmd =
      app.add_subcommand("raman-fit", "normalized Raman coefficient from an SFWM-disabled sweep");
  raman_cmd->add_option("--counts", raman.counts, "counts CSV")->required();
  raman_cmd->add_option("--eta-ti", raman.eta_ti, "idler transmission efficiency")->required();
  raman_cmd->add_option("--dark-idler", raman.dark_idler, "idler dark probability per gate");
  raman_cmd->add_option("--out", raman.out, "report file ('-' = stdout)");
  raman_cmd->callback([&] { run = [&] { return cmd_raman_fit(raman); }; });

  // uncertainty
  UncertaintyArgs unc;
  auto* unc_cmd = app.add_subcommand("uncertainty", "propagate a deviation budget");
  unc_cmd->add_option("--rel-eta-ti", unc.inputs.rel_eta_ti, "relative dev of eta_ti");
  unc_cmd->add_option("--rel-eta-ts", unc.inputs.rel_eta_ts, "relative dev of eta_ts");
  unc_cmd->add_option("--rel-p-ave", unc.inputs.rel_p_ave, "relative dev of the pump power");
  unc_cmd->add_option("--rel-n-t", unc.inputs.rel_n_t, "relative dev of the total idler rate");
  unc_cmd->add_option("--rel-r-ri", unc.inputs.rel_r_ri, "relative dev of the Raman rate");
  unc_cmd->add_option("--rel-c-c", unc.inputs.rel_c_c, "relative dev of the true coincidence");
  unc_cmd->add_option("--rel-xi-s", unc.inputs.rel_xi_s, "relative dev of the collection efficiency");
  unc_cmd->add_option("--n-t", unc.inputs.n_t, "total idler rate, photons/pulse")->required();
  unc_cmd->add_option("--eta-ti", unc.inputs.eta_ti, "idler transmission")->required();
  unc_cmd->add_option("--s1-prime", unc.inputs.s1_prime, "normalized Raman coefficient")
      ->required();
  unc_cmd->add_option("--p-ave", unc.inputs.p_ave_mw, "average pump power, mW")->required();
  unc_cmd->add_option("--r-if", unc.inputs.r_if, "SFWM rate, photons/pulse")->required();
  unc_cmd->add_option("--mc-draws", unc.mc_draws, "also run the resampling oracle");
  unc_cmd->add_option("--seed", unc.seed, "oracle seed");
  unc_cmd->add_option("--out", unc.out, "report file ('-' = stdout)");
  unc_cmd->callback([&] { run = [&] { return cmd_uncertainty(unc); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    return run();
  } catch (const usage_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const input_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  }
}
