#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "qkdsim/optics.hpp"
#include "qkdsim/rng.hpp"

namespace qkdsim {

// Intercept-resend attack on the two-state protocol: Eve measures each pulse
// with optimal unambiguous state discrimination and forwards a fresh photon
// in the identified state only on conclusive outcomes, routing it through a
// substitute channel of her choosing.
struct AttackConfig {
  bool enabled = false;
  double theta_deg = 45.0;  // separation of the two signal states
  double angle_bit0_deg = 0.0;
  double angle_bit1_deg = 45.0;
  double substitute_loss_db = 0.0;  // Eve's replacement channel, 0 = lossless
  int resend_photon_number = 1;
};

struct AttackOutcome {
  std::uint64_t intercepted = 0;  // nonempty pulses Eve measured
  std::uint64_t unambiguous = 0;  // conclusive USD outcomes
  std::uint64_t resent = 0;
  std::vector<std::pair<std::int64_t, std::uint8_t>> eve_known_bits;
  // Filled by the attack experiment once a baseline run is available:
  double rate_ratio = 0.0;          // Bob's click rate with attack / without
  double induced_qber_delta = 0.0;  // QBER(attack) - QBER(baseline)
  double eve_information_fraction = 0.0;  // share of the sifted key Eve knows

  void merge(const AttackOutcome& other) {
    intercepted += other.intercepted;
    unambiguous += other.unambiguous;
    resent += other.resent;
    eve_known_bits.insert(eve_known_bits.end(), other.eve_known_bits.begin(),
                          other.eve_known_bits.end());
  }
};

enum class UsdOutcome : std::uint8_t { bit0 = 0, bit1 = 1, inconclusive = 2 };

// Optimal USD of two states separated by theta: conclusive with probability
// 1 - cos(theta), and a conclusive outcome never misidentifies the state.
inline UsdOutcome usd_measure(double state_angle_deg, const AttackConfig& cfg, CounterRng& rng) {
  const double p_success = 1.0 - std::cos(deg_to_rad(cfg.theta_deg));
  if (!rng.bernoulli(p_success)) return UsdOutcome::inconclusive;
  const double d0 = std::fabs(state_angle_deg - cfg.angle_bit0_deg);
  const double d1 = std::fabs(state_angle_deg - cfg.angle_bit1_deg);
  return d0 <= d1 ? UsdOutcome::bit0 : UsdOutcome::bit1;
}

struct AttackPulseResult {
  Pulse pulse;
  bool forwarded = false;
  UsdOutcome outcome = UsdOutcome::inconclusive;
};

// One pulse through Eve: vacuum passes as vacuum, inconclusive outcomes are
// absorbed, conclusive outcomes are re-emitted in the exact identified state
// with the original photon timing preserved.
inline AttackPulseResult apply_attack_pulse(const Pulse& in, const AttackConfig& cfg,
                                            CounterRng& rng) {
  AttackPulseResult res;
  if (in.empty()) {
    res.pulse = in;
    return res;
  }
  res.outcome = usd_measure(in.polarization_deg, cfg, rng);
  if (res.outcome == UsdOutcome::inconclusive) {
    res.pulse = in;
    res.pulse.photon_offsets_s.clear();
    return res;
  }
  Pulse re;
  re.slot_index = in.slot_index;
  re.slot_start_s = in.slot_start_s;
  re.bit = res.outcome == UsdOutcome::bit1 ? 1 : 0;
  re.polarization_deg = re.bit ? cfg.angle_bit1_deg : cfg.angle_bit0_deg;
  re.eve_resent = true;
  re.photon_offsets_s.assign(static_cast<std::size_t>(std::max(1, cfg.resend_photon_number)),
                             in.photon_offsets_s.front());
  res.pulse = std::move(re);
  res.forwarded = true;
  return res;
}

// Stream form used by tests and standalone studies; the session engine
// integrates the per-pulse transform directly with per-slot substreams.
inline std::pair<std::vector<Pulse>, AttackOutcome> apply_attack(std::span<const Pulse> pulses,
                                                                 const AttackConfig& cfg,
                                                                 std::uint64_t seed) {
  if (!cfg.enabled) throw std::invalid_argument("apply_attack: attack is not enabled");
  std::vector<Pulse> out;
  out.reserve(pulses.size());
  AttackOutcome outcome;
  for (const Pulse& p : pulses) {
    CounterRng rng(seed, static_cast<std::uint64_t>(p.slot_index), rng_domain::eavesdrop);
    if (!p.empty()) ++outcome.intercepted;
    AttackPulseResult r = apply_attack_pulse(p, cfg, rng);
    if (r.forwarded) {
      ++outcome.unambiguous;
      ++outcome.resent;
      outcome.eve_known_bits.emplace_back(p.slot_index, r.pulse.bit);
    }
    out.push_back(std::move(r.pulse));
  }
  return {std::move(out), std::move(outcome)};
}

inline ChannelParams substitute_channel(const AttackConfig& cfg) {
  ChannelParams ch;
  ch.length_km = 0.0;
  ch.extra_attenuation_db = cfg.substitute_loss_db;
  return ch;
}

enum class AttackVerdict { clear, suspect };

// Rate monitoring on Bob's side: flag when the observed arrival rate drops
// more than `tolerance` below the expected baseline.
inline AttackVerdict detect_attack(double baseline_rate, double observed_rate, double tolerance) {
  if (baseline_rate <= 0.0)
    throw std::invalid_argument("detect_attack: baseline rate must be positive");
  return observed_rate < baseline_rate * (1.0 - tolerance) ? AttackVerdict::suspect
                                                           : AttackVerdict::clear;
}

}  // namespace qkdsim
