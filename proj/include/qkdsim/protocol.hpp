#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <thread>
#include <utility>
#include <vector>

#include "qkdsim/adversary.hpp"
#include "qkdsim/bitseq.hpp"
#include "qkdsim/errors.hpp"
#include "qkdsim/optics.hpp"
#include "qkdsim/rng.hpp"

namespace qkdsim {

inline constexpr double sync_input_limit_hz = 200e6;  // acquisition card ceiling

// Everything that defines one characterization run. Two runs with equal
// configs produce byte-identical records regardless of thread count.
struct SessionConfig {
  BitSequence bit_sequence;  // must hold at least one full period
  double clock_hz = 1e9;
  double collection_time_s = 60.0;
  SourceParams source;
  ChannelParams channel;
  ReceiverParams receiver;
  std::uint32_t sync_divisor = 0;  // 0 = derive from the sequence kind
  std::uint64_t seed = 1;
  // When positive, keep only events landing in the first N bit positions of
  // each pattern repetition (the acquisition card's collection window).
  std::int64_t analysis_window_bits = 0;
  AttackConfig attack;
};

struct TimeSlot {
  std::int64_t index = 0;
  double start_s = 0.0;
  double center_s = 0.0;
  double width_s = 0.0;
};

inline TimeSlot time_slot(std::int64_t index, double clock_hz) {
  const double width = 1.0 / clock_hz;
  return {index, index * width, index * width + width / 2.0, width};
}

// Sync laser runs at a sub-multiple of the clock so the acquisition card can
// follow it: 1/16 of the clock for the 8-bit word, 1/(16 * (2^15 - 1)) for
// the pseudo-random sequence.
inline std::uint32_t sync_divisor_for(const BitSequence& seq) {
  switch (seq.kind) {
    case SequenceKind::word8:
      return 16;
    case SequenceKind::prbs15:
      return 16u * 32767u;
    default:
      return static_cast<std::uint32_t>(2 * seq.period);
  }
}

inline double sync_frequency(double clock_hz, SequenceKind kind) {
  if (clock_hz <= 0.0) throw std::invalid_argument("sync_frequency: clock must be positive");
  const double divisor = (kind == SequenceKind::prbs15) ? 16.0 * 32767.0 : 16.0;
  const double f = clock_hz / divisor;
  if (f > sync_input_limit_hz)
    throw config_error("sync_frequency: result exceeds the 200 MHz synchronization input limit");
  return f;
}

inline std::pair<std::int64_t, double> slot_of_event(double timestamp_s, double clock_hz) {
  if (timestamp_s < 0.0) throw std::invalid_argument("slot_of_event: negative timestamp");
  const double width = 1.0 / clock_hz;
  auto slot = static_cast<std::int64_t>(std::floor(timestamp_s * clock_hz));
  double offset = timestamp_s - static_cast<double>(slot) * width;
  if (offset < 0.0) {
    --slot;
    offset = timestamp_s - static_cast<double>(slot) * width;
  } else if (offset >= width && timestamp_s > 0.0) {
    ++slot;
    offset = timestamp_s - static_cast<double>(slot) * width;
  }
  return {slot, offset};
}

struct SessionRecord {
  SessionConfig config;
  std::vector<DetectionEvent> events;  // time-sorted, slot-tagged
  double duration_s = 0.0;
  std::int64_t n_slots = 0;
  double sync_period_s = 0.0;
  std::int64_t n_sync = 0;
  AttackOutcome attack;  // zeros unless the attack was enabled

  double slot_width_s() const { return 1.0 / config.clock_hz; }
  std::uint8_t alice_bit(std::int64_t slot) const {
    return config.bit_sequence.bit(static_cast<std::size_t>(
        slot % static_cast<std::int64_t>(config.bit_sequence.period)));
  }
  double sync_timestamp(std::int64_t k) const { return static_cast<double>(k) * sync_period_s; }
};

struct SiftedKey {
  std::vector<std::int64_t> accepted_slots;
  std::vector<std::uint8_t> alice_key;
  std::vector<std::uint8_t> bob_key;
  double window_fraction = 1.0;
};

inline bool offset_gated(double offset_s, double width_s, double window_fraction) {
  return std::fabs(offset_s - width_s / 2.0) <= window_fraction * width_s / 2.0;
}

namespace detail {

inline void validate_session(const SessionConfig& cfg) {
  if (!cfg.bit_sequence.has_full_period())
    throw config_error("session: bit sequence must contain at least one full period");
  if (cfg.clock_hz <= 0.0) throw config_error("session: clock frequency must be positive");
  if (cfg.collection_time_s <= 0.0) throw config_error("session: collection time must be positive");
  if (cfg.source.mean_photon_number <= 0.0)
    throw config_error("session: mean photon number must be positive");
  if (cfg.receiver.pbs_extinction < 0.0 || cfg.receiver.pbs_extinction >= 0.5)
    throw config_error("session: pbs extinction must lie in [0, 0.5)");
  if (cfg.receiver.coupler_split <= 0.0 || cfg.receiver.coupler_split >= 1.0)
    throw config_error("session: coupler split must lie in (0, 1)");
  for (const DetectorParams& det : cfg.receiver.detectors) {
    if (det.efficiency < 0.0 || det.efficiency > 1.0)
      throw config_error("session: detector efficiency must lie in [0, 1]");
    if (det.dark_rate_hz < 0.0) throw config_error("session: dark rate must be nonnegative");
    if (det.dead_time_s < 0.0) throw config_error("session: dead time must be nonnegative");
    if (det.afterpulse_prob < 0.0 || det.afterpulse_prob >= 1.0)
      throw config_error("session: afterpulse probability must lie in [0, 1)");
  }
  const std::uint32_t divisor =
      cfg.sync_divisor > 0 ? cfg.sync_divisor : sync_divisor_for(cfg.bit_sequence);
  if (divisor < 1) throw config_error("session: sync divisor must be at least 1");
  if (cfg.clock_hz / divisor > sync_input_limit_hz)
    throw config_error("session: sync frequency exceeds the 200 MHz acquisition input limit");
  if (cfg.analysis_window_bits < 0 ||
      (cfg.analysis_window_bits > 0 &&
       cfg.analysis_window_bits >= static_cast<std::int64_t>(cfg.bit_sequence.period)))
    throw config_error("session: analysis window must be shorter than the pattern period");
}

struct EnginePlan {
  bool skip_empty_slots = false;  // geometric occupancy skipping enabled
  double occupancy = 1.0;         // probability that a slot needs photon work
  double mu_conditioned = 0.0;    // Poisson mean of pre-surviving photons per slot
  bool thinned = false;           // channel/receiver losses pre-applied to the photon count
  ChannelParams residual_channel;
  ReceiverParams residual_receiver;
};

// Loss thinning: fiber loss, receiver insertion loss and (when both channels
// match) detector efficiency are independent per-photon Bernoulli trials, so
// photons surviving them form a Poisson process with a scaled mean. Slots
// with no surviving photon are skipped geometrically; the surviving photons
// then run through the regular propagate/detect pipeline with those loss
// factors stripped, which leaves every distribution unchanged.
inline EnginePlan make_plan(const SessionConfig& cfg) {
  EnginePlan plan;
  const double mu = cfg.source.mean_photon_number;
  if (cfg.attack.enabled) {
    // Eve intercepts at the transmitter output; only pulse vacancy can be
    // pre-applied because she replaces the channel.
    plan.skip_empty_slots = !cfg.source.fixed_photon_number;
    plan.occupancy = plan.skip_empty_slots ? 1.0 - std::exp(-mu) : 1.0;
    plan.mu_conditioned = mu;
    return plan;
  }
  if (cfg.source.fixed_photon_number) return plan;  // exact pipeline, every slot
  const double eta0 = cfg.receiver.detectors[0].efficiency;
  const double eta1 = cfg.receiver.detectors[1].efficiency;
  const double eta_common = (eta0 == eta1) ? eta0 : 1.0;
  const double p_pre = cfg.channel.transmittance() *
                       transmittance_from_db(cfg.receiver.insertion_loss_db) * eta_common;
  plan.skip_empty_slots = true;
  plan.thinned = true;
  plan.mu_conditioned = mu * p_pre;
  plan.occupancy = 1.0 - std::exp(-plan.mu_conditioned);
  plan.residual_channel = cfg.channel;
  plan.residual_channel.attenuation_db_per_km = 0.0;
  plan.residual_channel.extra_attenuation_db = 0.0;
  plan.residual_receiver = cfg.receiver;
  plan.residual_receiver.insertion_loss_db = 0.0;
  if (eta_common > 0.0) {
    plan.residual_receiver.detectors[0].efficiency = eta0 / eta_common;
    plan.residual_receiver.detectors[1].efficiency = eta1 / eta_common;
  }
  return plan;
}

inline constexpr std::int64_t engine_chunk_slots = 1 << 16;

struct ChunkResult {
  std::vector<DetectionEvent> events;
  AttackOutcome attack;
};

// One fixed-size range of slots. Chunk boundaries are independent of the
// thread count, and all randomness is keyed by (seed, slot) or (seed, chunk),
// so serial and parallel execution produce identical event streams.
inline ChunkResult process_chunk(const SessionConfig& cfg, const EnginePlan& plan,
                                 std::int64_t chunk_index, std::int64_t n_slots,
                                 const PolarizationDrift* drift) {
  ChunkResult result;
  const std::int64_t begin = chunk_index * engine_chunk_slots;
  const std::int64_t end = std::min(begin + engine_chunk_slots, n_slots);
  const auto period = static_cast<std::int64_t>(cfg.bit_sequence.period);
  const double width = 1.0 / cfg.clock_hz;
  const std::int64_t window = cfg.analysis_window_bits;
  CounterRng occupancy_rng(cfg.seed, static_cast<std::uint64_t>(chunk_index),
                           rng_domain::occupancy);

  std::int64_t slot = begin;
  while (slot < end) {
    if (plan.skip_empty_slots) {
      slot += occupancy_rng.geometric_skips(plan.occupancy);
      if (slot >= end) break;
    }
    const std::int64_t pos = slot % period;
    // With a collection window, only source slots that can land events inside
    // it need photon work: the window itself plus one guard bit on each side.
    if (window > 0 && pos > window && pos != period - 1) {
      ++slot;
      continue;
    }
    const std::uint8_t bit = cfg.bit_sequence.bits[static_cast<std::size_t>(pos)];
    CounterRng slot_rng(cfg.seed, static_cast<std::uint64_t>(slot), rng_domain::slot_detail);
    const double elapsed = static_cast<double>(slot) * width;

    if (cfg.attack.enabled) {
      const int n = cfg.source.fixed_photon_number
                        ? static_cast<int>(std::llround(cfg.source.mean_photon_number))
                        : slot_rng.poisson_at_least_one(plan.mu_conditioned);
      Pulse pulse = make_pulse_with_count(bit, slot, cfg.source, n, slot_rng);
      if (!pulse.empty()) {
        ++result.attack.intercepted;
        CounterRng eve_rng(cfg.seed, static_cast<std::uint64_t>(slot), rng_domain::eavesdrop);
        AttackPulseResult eve = apply_attack_pulse(pulse, cfg.attack, eve_rng);
        if (eve.forwarded) {
          ++result.attack.unambiguous;
          ++result.attack.resent;
          result.attack.eve_known_bits.emplace_back(slot, eve.pulse.bit);
          Pulse arrived =
              propagate(std::move(eve.pulse), substitute_channel(cfg.attack), elapsed, slot_rng);
          auto events = detect(arrived, cfg.receiver, slot_rng, false);
          result.events.insert(result.events.end(), events.begin(), events.end());
        }
      }
    } else if (plan.thinned) {
      const int n = slot_rng.poisson_at_least_one(plan.mu_conditioned);
      Pulse pulse = make_pulse_with_count(bit, slot, cfg.source, n, slot_rng);
      pulse = propagate(std::move(pulse), plan.residual_channel, elapsed, slot_rng, drift);
      auto events = detect(pulse, plan.residual_receiver, slot_rng, false);
      result.events.insert(result.events.end(), events.begin(), events.end());
    } else {
      Pulse pulse = emit_pulse(bit, slot, cfg.source, slot_rng);
      if (!pulse.empty()) {
        pulse = propagate(std::move(pulse), cfg.channel, elapsed, slot_rng, drift);
        auto events = detect(pulse, cfg.receiver, slot_rng, false);
        result.events.insert(result.events.end(), events.begin(), events.end());
      }
    }
    ++slot;
  }
  return result;
}

inline void sort_events(std::vector<DetectionEvent>& events) {
  std::stable_sort(events.begin(), events.end(),
                   [](const DetectionEvent& a, const DetectionEvent& b) {
                     if (a.timestamp_s != b.timestamp_s) return a.timestamp_s < b.timestamp_s;
                     if (a.channel != b.channel) return a.channel < b.channel;
                     return static_cast<int>(a.origin) < static_cast<int>(b.origin);
                   });
}

// Dead-time sweep over the merged event stream, with first-order afterpulse
// generation: an accepted click may seed one correlated false count shortly
// after its dead window reopens.
inline void apply_detector_response(std::vector<DetectionEvent>& events,
                                    const SessionConfig& cfg) {
  const std::array<DetectorParams, 2>& det = cfg.receiver.detectors;
  const bool afterpulsing = det[0].afterpulse_prob > 0.0 || det[1].afterpulse_prob > 0.0;
  if (!afterpulsing) {
    suppress_dead_time(events, det);
    return;
  }
  std::array<CounterRng, 2> ap_rng{CounterRng(cfg.seed, 4, rng_domain::dark),
                                   CounterRng(cfg.seed, 5, rng_domain::dark)};
  std::vector<DetectionEvent> extra;
  std::array<double, 2> last{-1e300, -1e300};
  std::size_t out = 0;
  for (const DetectionEvent& ev : events) {
    const DetectorParams& d = det[ev.channel];
    if (d.dead_time_s > 0.0 && ev.timestamp_s - last[ev.channel] < d.dead_time_s) continue;
    last[ev.channel] = ev.timestamp_s;
    events[out++] = ev;
    CounterRng& rng = ap_rng[ev.channel];
    if (rng.bernoulli(d.afterpulse_prob)) {
      const double tail = d.dead_time_s > 0.0 ? d.dead_time_s : 100e-9;
      DetectionEvent ap = ev;
      ap.origin = EventOrigin::dark;  // trap-release avalanche, a false count
      ap.timestamp_s = ev.timestamp_s + d.dead_time_s + rng.exponential(1.0 / tail);
      extra.push_back(ap);
    }
  }
  events.resize(out);
  if (!extra.empty()) {
    events.insert(events.end(), extra.begin(), extra.end());
    sort_events(events);
    suppress_dead_time(events, det);
  }
}

}  // namespace detail

// Full characterization run: clocks the pattern, drives the optics Monte
// Carlo slot by slot, merges dark counts, applies dead time, assigns slot
// indices and ground-truth bits. Deterministic for a fixed config; `threads`
// is an execution policy and does not change the result.
inline SessionRecord run_session(const SessionConfig& cfg, int threads = 1) {
  detail::validate_session(cfg);
  SessionRecord record;
  record.config = cfg;
  record.config.sync_divisor =
      cfg.sync_divisor > 0 ? cfg.sync_divisor : sync_divisor_for(cfg.bit_sequence);
  // Keep the source clock in lockstep with the protocol clock.
  record.config.source.clock_frequency_hz = cfg.clock_hz;
  const SessionConfig& c = record.config;

  const double width = 1.0 / c.clock_hz;
  const auto n_slots = static_cast<std::int64_t>(std::llround(c.collection_time_s * c.clock_hz));
  record.n_slots = std::max<std::int64_t>(n_slots, 1);
  record.duration_s = static_cast<double>(record.n_slots) * width;
  record.sync_period_s = static_cast<double>(c.sync_divisor) * width;
  record.n_sync = static_cast<std::int64_t>(std::floor(record.duration_s / record.sync_period_s));

  const detail::EnginePlan plan = detail::make_plan(c);
  PolarizationDrift drift(c.seed, c.channel.polarization_drift_deg_per_sqrt_s, record.duration_s);
  const PolarizationDrift* drift_ptr = drift.active() ? &drift : nullptr;

  const std::int64_t n_chunks =
      (record.n_slots + detail::engine_chunk_slots - 1) / detail::engine_chunk_slots;

  if (threads <= 1 || n_chunks == 1) {
    for (std::int64_t chunk = 0; chunk < n_chunks; ++chunk) {
      detail::ChunkResult r = detail::process_chunk(c, plan, chunk, record.n_slots, drift_ptr);
      record.events.insert(record.events.end(), r.events.begin(), r.events.end());
      record.attack.merge(r.attack);
    }
  } else {
    std::vector<detail::ChunkResult> results(static_cast<std::size_t>(n_chunks));
    std::atomic<std::int64_t> next{0};
    auto worker = [&] {
      for (;;) {
        const std::int64_t chunk = next.fetch_add(1);
        if (chunk >= n_chunks) break;
        results[static_cast<std::size_t>(chunk)] =
            detail::process_chunk(c, plan, chunk, record.n_slots, drift_ptr);
      }
    };
    std::vector<std::thread> pool;
    const int n_workers = std::min<int>(threads, static_cast<int>(n_chunks));
    pool.reserve(static_cast<std::size_t>(n_workers));
    for (int i = 0; i < n_workers; ++i) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
    for (detail::ChunkResult& r : results) {
      record.events.insert(record.events.end(), r.events.begin(), r.events.end());
      record.attack.merge(r.attack);
    }
  }

  // Dark counts are per-detector Poisson processes over the whole session.
  for (std::uint8_t ch = 0; ch < 2; ++ch) {
    CounterRng rng(c.seed, ch, rng_domain::dark);
    auto darks = dark_events(c.receiver.detectors[ch], record.duration_s, ch, rng);
    record.events.insert(record.events.end(), darks.begin(), darks.end());
  }

  detail::sort_events(record.events);
  detail::apply_detector_response(record.events, c);

  // Slot assignment from measured timestamps; ground truth follows the slot
  // an event lands in, which is what makes timing spill an error source.
  const auto period = static_cast<std::int64_t>(c.bit_sequence.period);
  std::size_t out = 0;
  for (DetectionEvent ev : record.events) {
    if (ev.timestamp_s < 0.0 || ev.timestamp_s >= record.duration_s) continue;
    const auto slot = static_cast<std::int64_t>(std::floor(ev.timestamp_s * c.clock_hz));
    if (slot < 0 || slot >= record.n_slots) continue;
    const std::int64_t pos = slot % period;
    if (c.analysis_window_bits > 0 && pos >= c.analysis_window_bits) continue;
    ev.slot_index = slot;
    ev.truth_bit = c.bit_sequence.bits[static_cast<std::size_t>(pos)];
    record.events[out++] = ev;
  }
  record.events.resize(out);
  return record;
}

// Time-window sifting: a click is accepted when it falls within the window
// centered on the bit-period midpoint; slots with exactly one clicked channel
// contribute a key bit, slots with clicks on both channels are discarded.
inline SiftedKey sift(const SessionRecord& record, double window_fraction) {
  if (window_fraction <= 0.0 || window_fraction > 1.0)
    throw std::invalid_argument("sift: window fraction must lie in (0, 1]");
  SiftedKey key;
  key.window_fraction = window_fraction;
  const double width = record.slot_width_s();

  std::int64_t current = -1;
  bool clicked[2] = {false, false};
  std::uint8_t truth = 0;
  auto flush = [&]() {
    if (current < 0) return;
    if (clicked[0] != clicked[1]) {
      key.accepted_slots.push_back(current);
      key.alice_key.push_back(truth);
      key.bob_key.push_back(clicked[1] ? 1 : 0);
    }
    clicked[0] = clicked[1] = false;
  };
  for (const DetectionEvent& ev : record.events) {
    const double offset = ev.timestamp_s - static_cast<double>(ev.slot_index) * width;
    if (!offset_gated(offset, width, window_fraction)) continue;
    if (ev.slot_index != current) {
      flush();
      current = ev.slot_index;
      truth = ev.truth_bit;
    }
    clicked[ev.channel] = true;
  }
  flush();
  return key;
}

}  // namespace qkdsim
