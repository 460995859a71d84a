#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "qkdsim/errors.hpp"
#include "qkdsim/optics.hpp"
#include "qkdsim/protocol.hpp"

namespace qkdsim {

// TCSPC-style histogram: timestamps folded modulo one synchronization period.
struct Histogram {
  double bin_width_s = 0.0;
  double period_s = 0.0;
  double collection_time_s = 0.0;
  std::vector<std::uint64_t> ch0;
  std::vector<std::uint64_t> ch1;

  std::size_t bins() const { return ch0.size(); }
  std::uint64_t total() const {
    std::uint64_t n = 0;
    for (std::uint64_t v : ch0) n += v;
    for (std::uint64_t v : ch1) n += v;
    return n;
  }
};

inline Histogram accumulate_histogram(std::span<const DetectionEvent> events,
                                      double sync_period_s, double bin_width_s,
                                      double collection_time_s = 0.0) {
  if (sync_period_s <= 0.0 || bin_width_s <= 0.0)
    throw std::invalid_argument("accumulate_histogram: period and bin width must be positive");
  const double ratio = sync_period_s / bin_width_s;
  const auto n_bins = static_cast<std::size_t>(std::llround(ratio));
  if (n_bins < 1 || std::fabs(ratio - static_cast<double>(n_bins)) > 1e-6 * ratio)
    throw std::invalid_argument("accumulate_histogram: bin width must divide the sync period");
  Histogram h;
  h.bin_width_s = bin_width_s;
  h.period_s = sync_period_s;
  h.collection_time_s = collection_time_s;
  h.ch0.assign(n_bins, 0);
  h.ch1.assign(n_bins, 0);
  for (const DetectionEvent& ev : events) {
    double folded = std::fmod(ev.timestamp_s, sync_period_s);
    if (folded < 0.0) folded += sync_period_s;
    auto bin = static_cast<std::size_t>(folded / bin_width_s);
    if (bin >= n_bins) bin = n_bins - 1;
    (ev.channel == 0 ? h.ch0 : h.ch1)[bin] += 1;
  }
  return h;
}

// Gated counts inside one time window, the raw material of the rate and
// error figures. "Correct" means the clicked channel matches the sender's
// bit for the slot the click landed in.
struct WindowStats {
  double window_fraction = 1.0;
  std::uint64_t correct = 0;
  std::uint64_t incorrect = 0;
  std::int64_t n_slots = 0;
  double collection_time_s = 0.0;

  std::uint64_t total() const { return correct + incorrect; }
};

inline WindowStats window_stats(const SessionRecord& record, double window_fraction) {
  if (window_fraction <= 0.0 || window_fraction > 1.0)
    throw std::invalid_argument("window_stats: window fraction must lie in (0, 1]");
  WindowStats ws;
  ws.window_fraction = window_fraction;
  ws.n_slots = record.n_slots;
  ws.collection_time_s = record.duration_s;
  const double width = record.slot_width_s();
  for (const DetectionEvent& ev : record.events) {
    const double offset = ev.timestamp_s - static_cast<double>(ev.slot_index) * width;
    if (!offset_gated(offset, width, window_fraction)) continue;
    if (ev.channel == ev.truth_bit)
      ++ws.correct;
    else
      ++ws.incorrect;
  }
  return ws;
}

// Raw arrival rate from the loss budget: transmittances of the system and
// the fiber times the mean photon number times the clock.
inline double raw_rate(double system_loss_db, double fiber_loss_db, double mu, double clock_hz) {
  if (mu <= 0.0 || clock_hz <= 0.0)
    throw std::invalid_argument("raw_rate: mu and clock must be positive");
  return transmittance_from_db(system_loss_db) * transmittance_from_db(fiber_loss_db) * mu *
         clock_hz;
}

inline double sift_rate(const WindowStats& ws) {
  if (ws.collection_time_s <= 0.0)
    throw std::invalid_argument("sift_rate: collection time must be positive");
  return static_cast<double>(ws.total()) / ws.collection_time_s;
}

inline double qber(const WindowStats& ws) {
  if (ws.total() == 0) throw no_counts_error("qber: no gated counts collected");
  return static_cast<double>(ws.incorrect) / static_cast<double>(ws.total());
}

// Worst-case information an eavesdropper gains per bit from optimal
// unambiguous discrimination of two states separated by theta: 1 - cos(theta).
inline double eavesdropper_info(double theta_deg) {
  if (theta_deg < 0.0 || theta_deg > 90.0)
    throw std::invalid_argument("eavesdropper_info: theta must lie in [0, 90] degrees");
  return 1.0 - std::cos(deg_to_rad(theta_deg));
}

// Net rate estimate after error correction and privacy amplification. The
// bracket goes negative once the error rate is too high for any secret key;
// such reports are clamped to zero and flagged insecure.
inline double net_rate_bracket(double q, double i_ae) {
  if (q < 0.0 || q >= 1.0) throw std::invalid_argument("net_rate: QBER must lie in [0, 1)");
  const double q_term = q > 0.0 ? q * std::log2(q) : 0.0;
  const double comp_term = q < 1.0 ? (1.0 - q) * std::log2(1.0 - q) : 0.0;
  return 1.0 + q_term - 3.5 * q - i_ae * (1.0 - comp_term - 3.5 * q);
}

inline bool net_rate_secure(double q, double i_ae) { return net_rate_bracket(q, i_ae) > 0.0; }

inline double net_rate(double q, double sift_rate_bits, double i_ae) {
  return std::max(0.0, net_rate_bracket(q, i_ae)) * sift_rate_bits;
}

// Error budget of the gated incorrect counts, split by physical origin:
// polarization leakage at the splitters, detector dark counts, and timing
// spill into the wrong bit period from the source/detector response.
struct ErrorBudget {
  double leak_rate = 0.0;
  double dark_rate = 0.0;
  double timing_rate = 0.0;
  double sift_rate = 0.0;

  double total_error_rate() const { return leak_rate + dark_rate + timing_rate; }
  double qber() const { return sift_rate > 0.0 ? total_error_rate() / sift_rate : 0.0; }
};

inline ErrorBudget error_budget(const SessionRecord& record, double window_fraction) {
  if (window_fraction <= 0.0 || window_fraction > 1.0)
    throw std::invalid_argument("error_budget: window fraction must lie in (0, 1]");
  const double width = record.slot_width_s();
  const double T = record.duration_s;
  std::uint64_t leak = 0;
  std::uint64_t dark = 0;
  std::uint64_t timing = 0;
  std::uint64_t total = 0;
  for (const DetectionEvent& ev : record.events) {
    const double offset = ev.timestamp_s - static_cast<double>(ev.slot_index) * width;
    if (!offset_gated(offset, width, window_fraction)) continue;
    ++total;
    if (ev.channel == ev.truth_bit) continue;
    switch (ev.origin) {
      case EventOrigin::leakage:
        ++leak;
        break;
      case EventOrigin::dark:
        ++dark;
        break;
      default:  // signal or resent photons landing in the wrong bit period
        ++timing;
        break;
    }
  }
  ErrorBudget b;
  b.leak_rate = static_cast<double>(leak) / T;
  b.dark_rate = static_cast<double>(dark) / T;
  b.timing_rate = static_cast<double>(timing) / T;
  b.sift_rate = static_cast<double>(total) / T;
  return b;
}

// One row of a characterization table.
struct RateReport {
  double distance_km = 0.0;
  double clock_hz = 0.0;
  double window_fraction = 1.0;
  double raw_rate = 0.0;
  double sift_rate = 0.0;
  double net_rate = 0.0;
  double qber = 0.0;  // fraction; NaN when no gated counts were collected
  double i_ae = 0.0;
  double theta_deg = 45.0;
  bool insecure = false;

  bool qber_defined() const { return !std::isnan(qber); }
};

inline RateReport report_for_window(const SessionRecord& record, double window_fraction,
                                    double distance_km) {
  const SessionConfig& cfg = record.config;
  RateReport r;
  r.distance_km = distance_km;
  r.clock_hz = cfg.clock_hz;
  r.window_fraction = window_fraction;
  r.theta_deg = std::fabs(cfg.source.angle_bit1_deg - cfg.source.angle_bit0_deg);
  r.i_ae = eavesdropper_info(r.theta_deg);
  r.raw_rate = static_cast<double>(record.events.size()) / record.duration_s;
  const WindowStats ws = window_stats(record, window_fraction);
  r.sift_rate = sift_rate(ws);
  if (ws.total() == 0) {
    r.qber = std::numeric_limits<double>::quiet_NaN();
    r.net_rate = 0.0;
    r.insecure = true;
    return r;
  }
  r.qber = qber(ws);
  r.insecure = !net_rate_secure(r.qber, r.i_ae);
  r.net_rate = net_rate(r.qber, r.sift_rate, r.i_ae);
  return r;
}

// Evaluate a window grid on one record and pick the net-rate optimum.
inline std::pair<double, std::vector<RateReport>> optimize_window(const SessionRecord& record,
                                                                  std::span<const double> grid) {
  if (grid.empty()) throw std::invalid_argument("optimize_window: empty window grid");
  const double distance = record.config.channel.attenuation_db_per_km > 0.0
                              ? record.config.channel.length_km +
                                    record.config.channel.extra_attenuation_db /
                                        record.config.channel.attenuation_db_per_km
                              : record.config.channel.length_km;
  std::vector<RateReport> reports;
  reports.reserve(grid.size());
  double best = grid.front();
  double best_net = -1.0;
  for (double w : grid) {
    if (w <= 0.0 || w > 1.0)
      throw std::invalid_argument("optimize_window: window fractions must lie in (0, 1]");
    RateReport r = report_for_window(record, w, distance);
    if (r.qber_defined() && r.net_rate > best_net) {
      best_net = r.net_rate;
      best = w;
    }
    reports.push_back(r);
  }
  if (best_net < 0.0) throw no_counts_error("optimize_window: no gated counts at any window");
  return {best, std::move(reports)};
}

}  // namespace qkdsim
