#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "pairqe/rng.hpp"
#include "pairqe/spectral.hpp"

namespace pairqe {

// Gated Geiger-mode single-photon detector.
struct DetectorSpec {
  double quantum_efficiency = 0.0;   // (0, 1]
  double dark_count_prob = 0.0;      // per gate
  double afterpulse_prob = 0.0;      // on the first live gate after a click's dead time
  double gate_width_ns = 2.5;
  double effective_gate_width_ns = 2.5;
  double dead_time_us = 0.0;
  double gate_rate_hz = 1.29e6;

  void validate() const {
    if (quantum_efficiency < 0.0 || quantum_efficiency > 1.0)
      throw std::invalid_argument("DetectorSpec: quantum efficiency must be in [0, 1]");
    if (dark_count_prob < 0.0 || dark_count_prob >= 1.0)
      throw std::invalid_argument("DetectorSpec: dark count probability must be in [0, 1)");
    if (afterpulse_prob < 0.0 || afterpulse_prob >= 1.0)
      throw std::invalid_argument("DetectorSpec: afterpulse probability must be in [0, 1)");
    if (effective_gate_width_ns > gate_width_ns)
      throw std::invalid_argument("DetectorSpec: effective gate width exceeds gate width");
    if (dead_time_us < 0.0) throw std::invalid_argument("DetectorSpec: dead time must be >= 0");
    if (gate_rate_hz <= 0.0) throw std::invalid_argument("DetectorSpec: gate rate must be > 0");
  }

  // Number of subsequent gates suppressed after a click. A gate at offset n
  // from the click is suppressed while n / gate_rate < dead_time.
  std::uint64_t blocked_gates() const {
    const double gates = dead_time_us * 1e-6 * gate_rate_hz;
    const double c = std::ceil(gates);
    return c >= 1.0 ? static_cast<std::uint64_t>(c) - 1 : 0;
  }
};

struct ChannelSpec {
  double transmission_efficiency = 1.0;  // (0, 1]
  FilterSpec filter;

  void validate() const {
    if (transmission_efficiency <= 0.0 || transmission_efficiency > 1.0)
      throw std::invalid_argument("ChannelSpec: transmission efficiency must be in (0, 1]");
  }
};

// Source strengths at the channel inputs, in the units the power-sweep fits
// use: s1 in 1e-3 photons/pulse/mW (each channel), s2 in 1e-3 pairs/pulse/mW^2.
// sfwm_enabled = false emulates moving the pump into the normal-dispersion
// regime, where only Raman scattering survives.
struct SourceCoefficients {
  double s1 = 0.0;
  double s2 = 0.0;
  bool sfwm_enabled = true;

  void validate() const {
    if (s1 < 0.0 || s2 < 0.0) throw std::invalid_argument("SourceCoefficients: s1, s2 must be >= 0");
  }
};

// One power point of a counting run.
struct CountRecord {
  double p_ave_mw = 0.0;
  std::uint64_t gates = 0;
  std::uint64_t singles_signal = 0;
  std::uint64_t singles_idler = 0;
  std::uint64_t coincidences_raw = 0;
  std::optional<std::uint64_t> accidentals_measured;
  bool dark_corrected = false;

  void validate() const {
    if (coincidences_raw > singles_signal || coincidences_raw > singles_idler)
      throw std::invalid_argument("CountRecord: coincidences exceed a singles count");
  }
};

// Per-gate closed-form means, excluding dead time and afterpulsing (those
// only reduce the sampling rate / add a sub-percent bias; see the simulator
// for the full model). The coincidence field is the linearized true
// coincidence of the pair process, xi_s eta_ds eta_ts * R_iF with R_iF the
// detected idler pair rate; accidental is the same-gate product of the
// total singles probabilities.
struct ExpectedRates {
  double singles_signal = 0.0;
  double singles_idler = 0.0;
  double coincidence = 0.0;
  double accidental = 0.0;
};

inline ExpectedRates expected_rates(const SourceCoefficients& source, double xi_s,
                                    const ChannelSpec& signal_channel,
                                    const ChannelSpec& idler_channel,
                                    const DetectorSpec& signal_detector,
                                    const DetectorSpec& idler_detector, double p_ave_mw) {
  source.validate();
  signal_channel.validate();
  idler_channel.validate();
  signal_detector.validate();
  idler_detector.validate();
  const double mu_pair = source.sfwm_enabled ? source.s2 * 1e-3 * p_ave_mw * p_ave_mw : 0.0;
  const double mu_raman = source.s1 * 1e-3 * p_ave_mw;
  const double p_pair_s =
      xi_s * signal_channel.transmission_efficiency * signal_detector.quantum_efficiency;
  const double p_pair_i =
      idler_channel.transmission_efficiency * idler_detector.quantum_efficiency;
  const double p_raman_s =
      signal_channel.transmission_efficiency * signal_detector.quantum_efficiency;
  const double p_raman_i =
      idler_channel.transmission_efficiency * idler_detector.quantum_efficiency;

  const double lambda_s = mu_pair * p_pair_s + mu_raman * p_raman_s;
  const double lambda_i = mu_pair * p_pair_i + mu_raman * p_raman_i;
  ExpectedRates r;
  r.singles_signal = 1.0 - (1.0 - signal_detector.dark_count_prob) * std::exp(-lambda_s);
  r.singles_idler = 1.0 - (1.0 - idler_detector.dark_count_prob) * std::exp(-lambda_i);
  r.coincidence = mu_pair * p_pair_s * p_pair_i;
  r.accidental = r.singles_signal * r.singles_idler;
  return r;
}

namespace detail {

// Salts of the per-gate hashed substreams. Photon-generation draws never
// depend on detector state, so the arrival stream for a given seed is fixed
// and dead-time gating acts purely downstream of it.
enum GateSalt : std::uint64_t {
  kPhotonCount = 0,
  kDarkPair = 1,
  kAfterpulseSignal = 2,
  kAfterpulseIdler = 3,
  kPerPhotonBase = 8,  // 3 draws per photon: class, signal thinning, idler thinning
};

struct DetectorState {
  std::uint64_t next_live = 0;
  std::uint64_t afterpulse_gate = ~0ULL;
  std::uint64_t blocked = 0;
  double afterpulse_prob = 0.0;
  double dark_prob = 0.0;
};

}  // namespace detail

// Simulate one power point gate by gate. Deterministic for a fixed stream
// seed; use rng::derive_stream(seed, point_index) across points.
inline CountRecord simulate_count_point(const SourceCoefficients& source, double xi_s,
                                        const ChannelSpec& signal_channel,
                                        const ChannelSpec& idler_channel,
                                        const DetectorSpec& signal_detector,
                                        const DetectorSpec& idler_detector, double p_ave_mw,
                                        std::uint64_t gates, std::uint64_t stream_seed) {
  if (gates == 0) throw std::domain_error("simulate_count_point: gates must be > 0");
  if (p_ave_mw <= 0.0) throw std::domain_error("simulate_count_point: power must be > 0");
  if (xi_s < 0.0 || xi_s > 1.0)
    throw std::invalid_argument("simulate_count_point: xi_s must be in [0, 1]");
  source.validate();
  signal_channel.validate();
  idler_channel.validate();
  signal_detector.validate();
  idler_detector.validate();

  const double mu_pair = source.sfwm_enabled ? source.s2 * 1e-3 * p_ave_mw * p_ave_mw : 0.0;
  const double mu_raman = source.s1 * 1e-3 * p_ave_mw;
  const double mu_total = mu_pair + 2.0 * mu_raman;
  const double p_no_photons = std::exp(-mu_total);
  // classification of one photon-process event among {pair, raman-signal, raman-idler}
  const double f_pair = mu_total > 0.0 ? mu_pair / mu_total : 0.0;
  const double f_pair_or_rs = mu_total > 0.0 ? (mu_pair + mu_raman) / mu_total : 0.0;

  const double p_pair_s =
      xi_s * signal_channel.transmission_efficiency * signal_detector.quantum_efficiency;
  const double p_pair_i =
      idler_channel.transmission_efficiency * idler_detector.quantum_efficiency;
  const double p_raman_s =
      signal_channel.transmission_efficiency * signal_detector.quantum_efficiency;
  const double p_raman_i =
      idler_channel.transmission_efficiency * idler_detector.quantum_efficiency;

  const double dark_s = signal_detector.dark_count_prob;
  const double dark_i = idler_detector.dark_count_prob;
  // joint Bernoulli pair from one uniform: [0, ds*di) both, [ds*di, ds) signal
  // only, [ds, ds + di*(1-ds)) idler only
  const double cut_both = dark_s * dark_i;
  const double cut_s = dark_s;
  const double cut_i = dark_s + dark_i * (1.0 - dark_s);
  const bool any_dark = dark_s > 0.0 || dark_i > 0.0;

  detail::DetectorState st_s{0, ~0ULL, signal_detector.blocked_gates(),
                             signal_detector.afterpulse_prob, dark_s};
  detail::DetectorState st_i{0, ~0ULL, idler_detector.blocked_gates(),
                             idler_detector.afterpulse_prob, dark_i};

  CountRecord rec;
  rec.p_ave_mw = p_ave_mw;
  rec.gates = gates;
  rec.accidentals_measured = 0;

  bool prev_idler_click = false;
  std::uint64_t accidentals = 0;

  for (std::uint64_t g = 0; g < gates; ++g) {
    bool photon_s = false;
    bool photon_i = false;
    const double u_photon = rng::uniform(stream_seed, g, detail::kPhotonCount);
    if (u_photon >= p_no_photons) {
      const int n = rng::poisson_from_uniform(u_photon, mu_total);
      for (int j = 0; j < n; ++j) {
        const std::uint64_t base = detail::kPerPhotonBase + 3ULL * static_cast<std::uint64_t>(j);
        const double u_class = rng::uniform(stream_seed, g, base);
        if (u_class < f_pair) {
          if (!photon_s && rng::uniform(stream_seed, g, base + 1) < p_pair_s) photon_s = true;
          if (!photon_i && rng::uniform(stream_seed, g, base + 2) < p_pair_i) photon_i = true;
        } else if (u_class < f_pair_or_rs) {
          if (!photon_s && rng::uniform(stream_seed, g, base + 1) < p_raman_s) photon_s = true;
        } else {
          if (!photon_i && rng::uniform(stream_seed, g, base + 2) < p_raman_i) photon_i = true;
        }
      }
    }

    bool dark_click_s = false;
    bool dark_click_i = false;
    if (any_dark) {
      const double u_dark = rng::uniform(stream_seed, g, detail::kDarkPair);
      if (u_dark < cut_both) {
        dark_click_s = dark_click_i = true;
      } else if (u_dark < cut_s) {
        dark_click_s = true;
      } else if (u_dark < cut_i) {
        dark_click_i = true;
      }
    }

    auto resolve = [&](detail::DetectorState& st, bool photon, bool dark,
                       std::uint64_t ap_salt) -> bool {
      if (g < st.next_live) return false;
      bool click = photon || dark;
      if (g == st.afterpulse_gate) {
        if (!click && st.afterpulse_prob > 0.0 &&
            rng::uniform(stream_seed, g, ap_salt) < st.afterpulse_prob)
          click = true;
        st.afterpulse_gate = ~0ULL;
      }
      if (click) {
        st.next_live = g + 1 + st.blocked;
        st.afterpulse_gate = st.next_live;
      }
      return click;
    };

    const bool click_s = resolve(st_s, photon_s, dark_click_s, detail::kAfterpulseSignal);
    const bool click_i = resolve(st_i, photon_i, dark_click_i, detail::kAfterpulseIdler);

    rec.singles_signal += click_s;
    rec.singles_idler += click_i;
    rec.coincidences_raw += click_s && click_i;
    accidentals += click_s && prev_idler_click;
    prev_idler_click = click_i;
  }
  rec.accidentals_measured = accidentals;
  rec.validate();
  return rec;
}

// Full power sweep; each point runs on an independently derived stream so
// results are identical no matter how points are scheduled.
inline std::vector<CountRecord> simulate_power_sweep(
    const SourceCoefficients& source, double xi_s, const ChannelSpec& signal_channel,
    const ChannelSpec& idler_channel, const DetectorSpec& signal_detector,
    const DetectorSpec& idler_detector, std::span<const double> powers_mw,
    std::uint64_t gates_per_point, std::uint64_t seed) {
  if (gates_per_point == 0) throw std::domain_error("simulate_power_sweep: gates must be > 0");
  std::vector<CountRecord> out;
  out.reserve(powers_mw.size());
  for (std::size_t k = 0; k < powers_mw.size(); ++k) {
    out.push_back(simulate_count_point(source, xi_s, signal_channel, idler_channel,
                                       signal_detector, idler_detector, powers_mw[k],
                                       gates_per_point, rng::derive_stream(seed, k)));
  }
  return out;
}

}  // namespace pairqe
