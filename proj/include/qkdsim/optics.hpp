#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "qkdsim/rng.hpp"

namespace qkdsim {

inline constexpr double fwhm_to_sigma = 0.4246609001440095;  // 1 / (2 sqrt(2 ln 2))

inline double deg_to_rad(double deg) { return deg * std::numbers::pi / 180.0; }

inline double transmittance_from_db(double loss_db) {
  if (loss_db < 0.0)
    throw std::invalid_argument("transmittance_from_db: loss must be nonnegative");
  return std::pow(10.0, -loss_db / 10.0);
}

// Weak coherent source: two lasers driven NRZ at the clock rate, one per bit
// value, emitting linearly polarized pulses at two non-orthogonal angles.
struct SourceParams {
  double mean_photon_number = 0.1;
  double clock_frequency_hz = 1e9;
  double pulse_timing_fwhm_s = 0.0;  // extra source response beyond the lumped detector jitter
  double angle_bit0_deg = 0.0;
  double angle_bit1_deg = 45.0;
  bool fixed_photon_number = false;  // exactly round(mean) photons per pulse instead of Poisson
};

struct ChannelParams {
  double length_km = 0.0;
  double attenuation_db_per_km = 2.2;
  double extra_attenuation_db = 0.0;  // programmable attenuator emulating extra fiber
  double dispersion_ps_per_nm_km = 100.0;
  double source_linewidth_nm = 0.1;
  double polarization_drift_deg_per_sqrt_s = 0.0;

  double total_loss_db() const { return length_km * attenuation_db_per_km + extra_attenuation_db; }
  double transmittance() const { return transmittance_from_db(total_loss_db()); }
  // chromatic broadening D * linewidth * length, in seconds
  double dispersion_sigma_s() const {
    return dispersion_ps_per_nm_km * source_linewidth_nm * length_km * 1e-12;
  }
};

struct DetectorParams {
  double efficiency = 0.40;
  double dark_rate_hz = 180.0;
  double jitter_fwhm_s = 350e-12;  // lumped source+detector temporal response
  double dead_time_s = 50e-9;
  double afterpulse_prob = 0.0;
};

// Passive receiver: 50:50 coupler into two polarizing beam splitters whose
// pass axes are crossed with the two signal states, one SPAD per channel.
struct ReceiverParams {
  double coupler_split = 0.5;  // probability of routing to channel 0
  double pbs_extinction = 0.002;
  double analyzer_ch0_deg = -45.0;
  double analyzer_ch1_deg = 90.0;
  double insertion_loss_db = 7.0;  // receiver excess loss beyond coupler/PBS/detector
  std::array<DetectorParams, 2> detectors{};

  double analyzer_deg(int channel) const {
    return channel == 0 ? analyzer_ch0_deg : analyzer_ch1_deg;
  }
};

enum class EventOrigin : std::uint8_t { signal = 0, leakage = 1, dark = 2, eve_resend = 3 };

struct Pulse {
  std::int64_t slot_index = 0;
  std::uint8_t bit = 0;
  double slot_start_s = 0.0;
  double polarization_deg = 0.0;
  bool eve_resent = false;
  std::vector<double> photon_offsets_s;  // emission offsets relative to slot start

  bool empty() const { return photon_offsets_s.empty(); }
};

struct DetectionEvent {
  double timestamp_s = 0.0;
  std::int64_t slot_index = -1;  // assigned by the session engine from the timestamp
  std::uint8_t channel = 0;
  EventOrigin origin = EventOrigin::signal;
  std::uint8_t truth_bit = 0;  // sender's bit for the slot the event falls in
};

// Malus transmission of an analyzer with residual extinction: a photon at
// angular distance delta from the pass axis passes with (1-2e)cos^2(delta)+e.
// At delta = 45 deg this is exactly 1/2 for every extinction value.
inline double analyzer_pass_probability(double delta_deg, double extinction) {
  const double c = std::cos(deg_to_rad(delta_deg));
  return (1.0 - 2.0 * extinction) * c * c + extinction;
}

namespace detail {

inline Pulse make_pulse_with_count(std::uint8_t bit, std::int64_t slot, const SourceParams& sp,
                                   int photon_count, CounterRng& rng) {
  const double width = 1.0 / sp.clock_frequency_hz;
  Pulse p;
  p.slot_index = slot;
  p.bit = bit & 1u;
  p.slot_start_s = static_cast<double>(slot) * width;
  p.polarization_deg = p.bit ? sp.angle_bit1_deg : sp.angle_bit0_deg;
  p.photon_offsets_s.reserve(static_cast<std::size_t>(photon_count));
  const double src_sigma = sp.pulse_timing_fwhm_s * fwhm_to_sigma;
  for (int i = 0; i < photon_count; ++i) {
    double t = rng.uniform() * width;  // NRZ: emission is flat across the on period
    if (src_sigma > 0.0) t += src_sigma * rng.gaussian();
    p.photon_offsets_s.push_back(t);
  }
  return p;
}

}  // namespace detail

inline Pulse emit_pulse(std::uint8_t bit, std::int64_t slot, const SourceParams& sp,
                        CounterRng& rng) {
  if (sp.clock_frequency_hz <= 0.0)
    throw std::invalid_argument("emit_pulse: clock frequency must be positive");
  const int n = sp.fixed_photon_number
                    ? static_cast<int>(std::llround(sp.mean_photon_number))
                    : rng.poisson(sp.mean_photon_number);
  return detail::make_pulse_with_count(bit, slot, sp, n, rng);
}

// Shared polarization rotation seen by every pulse: a Gaussian random walk
// sampled on a fixed epoch grid so that the angle at time t is a pure
// function of (seed, rate, duration), independent of evaluation order.
class PolarizationDrift {
 public:
  PolarizationDrift() = default;

  PolarizationDrift(std::uint64_t seed, double rate_deg_per_sqrt_s, double duration_s) {
    if (rate_deg_per_sqrt_s <= 0.0 || duration_s <= 0.0) return;
    const std::size_t epochs = static_cast<std::size_t>(
        std::clamp(std::ceil(duration_s / 1e-3), 1.0, 4.0e6));
    epoch_s_ = duration_s / static_cast<double>(epochs);
    cumulative_.resize(epochs, 0.0);
    const double step_sigma = rate_deg_per_sqrt_s * std::sqrt(epoch_s_);
    double acc = 0.0;
    for (std::size_t k = 0; k < epochs; ++k) {
      cumulative_[k] = acc;  // walk value at the start of epoch k
      CounterRng rng(seed, k, rng_domain::drift);
      acc += step_sigma * rng.gaussian();
    }
  }

  double angle_deg(double t) const {
    if (cumulative_.empty()) return 0.0;
    const double idx = std::floor(t / epoch_s_);
    const std::size_t k = idx <= 0.0 ? 0
                                     : std::min(cumulative_.size() - 1,
                                                static_cast<std::size_t>(idx));
    return cumulative_[k];
  }

  bool active() const { return !cumulative_.empty(); }

 private:
  std::vector<double> cumulative_;
  double epoch_s_ = 0.0;
};

// Fiber transport: each photon survives the total loss independently and
// picks up a chromatic-dispersion time perturbation; the polarization is
// rotated by the shared drift walk evaluated at `elapsed_s`.
inline Pulse propagate(Pulse pulse, const ChannelParams& ch, double elapsed_s, CounterRng& rng,
                       const PolarizationDrift* drift = nullptr) {
  const double survive = ch.transmittance();
  const double sigma_cd = ch.dispersion_sigma_s();
  std::vector<double> kept;
  kept.reserve(pulse.photon_offsets_s.size());
  for (double t : pulse.photon_offsets_s) {
    if (!rng.bernoulli(survive)) continue;
    if (sigma_cd > 0.0) t += sigma_cd * rng.gaussian();
    kept.push_back(t);
  }
  pulse.photon_offsets_s = std::move(kept);
  if (drift != nullptr && drift->active())
    pulse.polarization_deg += drift->angle_deg(elapsed_s);
  return pulse;
}

namespace detail {

// Non-paralyzable dead time: a click opens a blank window on its detector.
// Assumes events are sorted by timestamp.
inline void suppress_dead_time(std::vector<DetectionEvent>& events,
                               const std::array<DetectorParams, 2>& detectors) {
  std::array<double, 2> last{-1e300, -1e300};
  std::size_t out = 0;
  for (const DetectionEvent& ev : events) {
    const double dead = detectors[ev.channel].dead_time_s;
    if (dead > 0.0 && ev.timestamp_s - last[ev.channel] < dead) continue;
    last[ev.channel] = ev.timestamp_s;
    events[out++] = ev;
  }
  events.resize(out);
}

}  // namespace detail

// Receiver Monte Carlo for one arriving pulse: coupler split, analyzer test,
// excess insertion loss, detector efficiency, timing jitter and (optionally)
// per-pulse dead-time suppression. The session engine re-applies dead time
// globally across pulses and dark counts.
inline std::vector<DetectionEvent> detect(const Pulse& pulse, const ReceiverParams& rx,
                                          CounterRng& rng, bool apply_dead_time = true) {
  std::vector<DetectionEvent> out;
  const double t_insertion =
      rx.insertion_loss_db > 0.0 ? transmittance_from_db(rx.insertion_loss_db) : 1.0;
  for (double t0 : pulse.photon_offsets_s) {
    const int ch = rng.bernoulli(rx.coupler_split) ? 0 : 1;
    const double delta = pulse.polarization_deg - rx.analyzer_deg(ch);
    if (!rng.bernoulli(analyzer_pass_probability(delta, rx.pbs_extinction))) continue;
    if (t_insertion < 1.0 && !rng.bernoulli(t_insertion)) continue;
    const DetectorParams& det = rx.detectors[ch];
    if (det.efficiency < 1.0 && !rng.bernoulli(det.efficiency)) continue;
    double t = pulse.slot_start_s + t0;
    const double jitter_sigma = det.jitter_fwhm_s * fwhm_to_sigma;
    if (jitter_sigma > 0.0) t += jitter_sigma * rng.gaussian();
    DetectionEvent ev;
    ev.timestamp_s = t;
    ev.slot_index = pulse.slot_index;
    ev.channel = static_cast<std::uint8_t>(ch);
    ev.origin = pulse.eve_resent
                    ? EventOrigin::eve_resend
                    : (ch == pulse.bit ? EventOrigin::signal : EventOrigin::leakage);
    ev.truth_bit = pulse.bit;
    out.push_back(ev);
  }
  if (apply_dead_time && out.size() > 1) {
    std::sort(out.begin(), out.end(), [](const DetectionEvent& a, const DetectionEvent& b) {
      return a.timestamp_s < b.timestamp_s;
    });
    detail::suppress_dead_time(out, {rx.detectors[0], rx.detectors[1]});
  }
  return out;
}

// Homogeneous Poisson process of thermally generated false counts.
inline std::vector<DetectionEvent> dark_events(const DetectorParams& det, double duration_s,
                                               std::uint8_t channel, CounterRng& rng) {
  if (duration_s <= 0.0) throw std::invalid_argument("dark_events: duration must be positive");
  std::vector<DetectionEvent> out;
  if (det.dark_rate_hz <= 0.0) return out;
  out.reserve(static_cast<std::size_t>(det.dark_rate_hz * duration_s * 1.1) + 16);
  double t = 0.0;
  for (;;) {
    t += rng.exponential(det.dark_rate_hz);
    if (t >= duration_s) break;
    DetectionEvent ev;
    ev.timestamp_s = t;
    ev.channel = channel;
    ev.origin = EventOrigin::dark;
    out.push_back(ev);
  }
  return out;
}

}  // namespace qkdsim
