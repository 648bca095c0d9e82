#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "pairqe/calibration.hpp"
#include "pairqe/counting.hpp"
#include "pairqe/errors.hpp"
#include "pairqe/spectral.hpp"

namespace pairqe {

// Sectioned key-value config file. Physical quantities carry unit-suffixed
// keys (fwhm_nm, dead_time_us, ...). Unknown keys are rejected so a typo
// cannot silently fall back to a default.
class ConfigFile {
 public:
  static ConfigFile parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw input_error(path + ": cannot open config file");
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_text(buf.str(), path);
  }

  static ConfigFile parse_text(const std::string& text, const std::string& path = "<config>") {
    ConfigFile cfg;
    cfg.path_ = path;
    std::istringstream in(text);
    std::string line, section;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      const std::size_t comment = line.find_first_of("#;");
      if (comment != std::string::npos) line.erase(comment);
      const std::string t = trim(line);
      if (t.empty()) continue;
      if (t.front() == '[') {
        if (t.back() != ']')
          throw input_error(loc(path, line_no) + ": malformed section header");
        section = trim(t.substr(1, t.size() - 2));
        if (section.empty()) throw input_error(loc(path, line_no) + ": empty section name");
        continue;
      }
      const std::size_t eq = t.find('=');
      if (eq == std::string::npos)
        throw input_error(loc(path, line_no) + ": expected 'key = value'");
      const std::string key = trim(t.substr(0, eq));
      const std::string value = trim(t.substr(eq + 1));
      if (key.empty()) throw input_error(loc(path, line_no) + ": empty key");
      const std::string full = section + "." + key;
      if (cfg.values_.count(full))
        throw input_error(loc(path, line_no) + ": duplicate key '" + full + "'");
      cfg.values_[full] = value;
      cfg.lines_[full] = line_no;
    }
    return cfg;
  }

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::string get_string(const std::string& key) {
    auto it = values_.find(key);
    if (it == values_.end()) throw input_error(path_ + ": missing required key '" + key + "'");
    consumed_.insert(key);
    return it->second;
  }

  std::string get_string(const std::string& key, const std::string& fallback) {
    return has(key) ? get_string(key) : fallback;
  }

  double get_double(const std::string& key) { return to_double(key, get_string(key)); }

  double get_double(const std::string& key, double fallback) {
    return has(key) ? get_double(key) : fallback;
  }

  std::int64_t get_int(const std::string& key) {
    const double v = get_double(key);
    if (v != std::floor(v)) throw input_error(key_loc(key) + ": expected an integer");
    return static_cast<std::int64_t>(v);
  }

  std::int64_t get_int(const std::string& key, std::int64_t fallback) {
    return has(key) ? get_int(key) : fallback;
  }

  bool get_bool(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    const std::string v = get_string(key);
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw input_error(key_loc(key) + ": expected true/false");
  }

  std::vector<double> get_double_list(const std::string& key) {
    const std::string raw = get_string(key);
    std::vector<double> out;
    std::string cur;
    auto flush = [&] {
      const std::string t = trim(cur);
      if (!t.empty()) out.push_back(to_double(key, t));
      cur.clear();
    };
    for (char c : raw) {
      if (c == ',')
        flush();
      else
        cur += c;
    }
    flush();
    if (out.empty()) throw input_error(key_loc(key) + ": empty list");
    return out;
  }

  // Call once every known key has been pulled; any leftover is a typo.
  void reject_unknown_keys() const {
    for (const auto& [key, value] : values_) {
      if (!consumed_.count(key))
        throw input_error(key_loc(key) + ": unknown key '" + key + "'");
    }
  }

 private:
  static std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
  }

  static std::string loc(const std::string& path, std::size_t line) {
    return path + ":" + std::to_string(line);
  }

  std::string key_loc(const std::string& key) const {
    auto it = lines_.find(key);
    return it == lines_.end() ? path_ : loc(path_, it->second);
  }

  double to_double(const std::string& key, const std::string& value) const {
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(value.c_str(), &end);
    if (end != value.c_str() + value.size() || errno == ERANGE)
      throw input_error(key_loc(key) + ": cannot parse '" + value + "' as a number");
    return v;
  }

  std::string path_;
  std::map<std::string, std::string> values_;
  std::map<std::string, std::size_t> lines_;
  mutable std::set<std::string> consumed_;
};

// Everything one experiment run needs: spectra, channels, detectors, source
// strengths, simulation controls and pipeline options.
struct RunConfig {
  PumpSpec pump;
  FiberSpec fiber;
  FilterSpec signal_filter;
  FilterSpec idler_filter;
  ChannelSpec signal_channel;
  ChannelSpec idler_channel;
  DetectorSpec signal_detector;
  DetectorSpec idler_detector;
  SourceCoefficients source;

  std::uint64_t seed = 1;
  std::uint64_t gates_per_point = 1000000;
  std::vector<double> powers_mw;
  AccidentalMode accidental_mode = AccidentalMode::computed;

  XiMode xi_mode = XiMode::analytic;
  double xi_fixed = 1.0;
  double xi_simulated = 0.0;  // 0 = compute from the analytic conditional spectrum
  double pair_rate_cap = 0.03;

  double rel_eta_ts = 0.0;
  double rel_eta_ti = 0.0;
  double rel_p_ave = 0.0;
  double rel_xi_s = 0.0;

  double simulation_xi() const {
    if (xi_simulated > 0.0) return xi_simulated;
    return collection_efficiency(signal_filter,
                                 conditional_spectrum_analytic(pump, idler_filter));
  }

  CalibrationSettings calibration_settings() const {
    CalibrationSettings s;
    s.eta_ts = signal_channel.transmission_efficiency;
    s.eta_ti = idler_channel.transmission_efficiency;
    s.trigger_qe = idler_detector.quantum_efficiency;
    s.dark = {signal_detector.dark_count_prob, idler_detector.dark_count_prob};
    s.accidental_mode = accidental_mode;
    s.xi_mode = xi_mode;
    s.xi_fixed = xi_fixed;
    s.pair_rate_cap = pair_rate_cap;
    s.pump = pump;
    s.signal_filter = signal_filter;
    s.idler_filter = idler_filter;
    s.rel_eta_ts = rel_eta_ts;
    s.rel_eta_ti = rel_eta_ti;
    s.rel_p_ave = rel_p_ave;
    s.rel_xi_s = rel_xi_s;
    return s;
  }

  static RunConfig load(const std::string& path) {
    ConfigFile cfg = ConfigFile::parse_file(path);
    RunConfig rc;
    try {
      rc.pump = PumpSpec::make(cfg.get_double("pump.center_wavelength_nm"),
                               read_width_nm(cfg, "pump", 1),
                               cfg.get_double("pump.average_power_mw"),
                               cfg.get_double("pump.repetition_rate_hz"),
                               cfg.get_double("pump.pulse_duration_s"),
                               cfg.get_double("pump.peak_power_w", 0.0));
      rc.fiber = FiberSpec::make(cfg.get_double("fiber.length_m"),
                                 cfg.get_double("fiber.gamma_per_w_m"),
                                 cfg.get_double("fiber.zero_dispersion_wavelength_nm"),
                                 cfg.get_double("fiber.k2_s2_per_m", 0.0),
                                 cfg.get_double("fiber.k3_s3_per_m", 0.0));
      rc.signal_filter = read_filter(cfg, "signal_filter");
      rc.idler_filter = read_filter(cfg, "idler_filter");
      rc.signal_channel = {cfg.get_double("signal_channel.transmission_efficiency"),
                           rc.signal_filter};
      rc.idler_channel = {cfg.get_double("idler_channel.transmission_efficiency"),
                          rc.idler_filter};
      rc.signal_channel.validate();
      rc.idler_channel.validate();
      rc.signal_detector = read_detector(cfg, "signal_detector");
      rc.idler_detector = read_detector(cfg, "idler_detector");
      rc.source.s1 = cfg.get_double("source.s1_milli_per_pulse_mw");
      rc.source.s2 = cfg.get_double("source.s2_milli_per_pulse_mw2", 0.0);
      rc.source.sfwm_enabled = cfg.get_bool("source.sfwm_enabled", true);
      rc.source.validate();

      rc.seed = static_cast<std::uint64_t>(cfg.get_int("simulation.seed", 1));
      rc.gates_per_point =
          static_cast<std::uint64_t>(cfg.get_int("simulation.gates_per_point", 1000000));
      rc.powers_mw = cfg.get_double_list("simulation.powers_mw");
      rc.xi_simulated = cfg.get_double("simulation.xi_s", 0.0);
      const std::string acc = cfg.get_string("simulation.accidental_mode", "computed");
      if (acc == "computed")
        rc.accidental_mode = AccidentalMode::computed;
      else if (acc == "measured")
        rc.accidental_mode = AccidentalMode::measured;
      else
        throw input_error("simulation.accidental_mode must be computed or measured");

      const std::string xi = cfg.get_string("pipeline.xi_mode", "analytic");
      if (xi == "analytic")
        rc.xi_mode = XiMode::analytic;
      else if (xi == "scan")
        rc.xi_mode = XiMode::scan;
      else if (xi == "fixed")
        rc.xi_mode = XiMode::fixed;
      else
        throw input_error("pipeline.xi_mode must be analytic, scan or fixed");
      rc.xi_fixed = cfg.get_double("pipeline.xi_fixed", 1.0);
      rc.pair_rate_cap = cfg.get_double("pipeline.pair_rate_cap", 0.03);

      rc.rel_eta_ts = cfg.get_double("uncertainty.rel_eta_ts", 0.0);
      rc.rel_eta_ti = cfg.get_double("uncertainty.rel_eta_ti", 0.0);
      rc.rel_p_ave = cfg.get_double("uncertainty.rel_p_ave", 0.0);
      rc.rel_xi_s = cfg.get_double("uncertainty.rel_xi_s", 0.0);
    } catch (const input_error&) {
      throw;
    } catch (const std::exception& e) {
      throw input_error(path + ": " + e.what());
    }
    cfg.reject_unknown_keys();
    return rc;
  }

 private:
  static double read_width_nm(ConfigFile& cfg, const std::string& section, int order_m) {
    const bool has_a = cfg.has(section + ".width_a_nm");
    const bool has_fwhm = cfg.has(section + ".fwhm_nm");
    if (has_a == has_fwhm)
      throw input_error(section + ": specify exactly one of width_a_nm or fwhm_nm");
    if (has_a) return cfg.get_double(section + ".width_a_nm");
    return width_param_from_fwhm(cfg.get_double(section + ".fwhm_nm"), order_m);
  }

  static FilterSpec read_filter(ConfigFile& cfg, const std::string& section) {
    const int order = static_cast<int>(cfg.get_int(section + ".order_m", 1));
    return FilterSpec::from_width_nm(cfg.get_double(section + ".center_wavelength_nm"),
                                     read_width_nm(cfg, section, order), order,
                                     cfg.get_double(section + ".peak_transmittance", 1.0));
  }

  static DetectorSpec read_detector(ConfigFile& cfg, const std::string& section) {
    DetectorSpec d;
    d.quantum_efficiency = cfg.get_double(section + ".quantum_efficiency");
    d.dark_count_prob = cfg.get_double(section + ".dark_count_prob", 0.0);
    d.afterpulse_prob = cfg.get_double(section + ".afterpulse_prob", 0.0);
    d.gate_width_ns = cfg.get_double(section + ".gate_width_ns", 2.5);
    d.effective_gate_width_ns =
        cfg.get_double(section + ".effective_gate_width_ns", d.gate_width_ns);
    d.dead_time_us = cfg.get_double(section + ".dead_time_us", 0.0);
    d.gate_rate_hz = cfg.get_double(section + ".gate_rate_hz", 1.29e6);
    d.validate();
    return d;
  }
};

}  // namespace pairqe
