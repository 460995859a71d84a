#include <doctest.h>

#include <cmath>
#include <vector>

#include "qkdsim/analytics.hpp"
#include "qkdsim/bitseq.hpp"
#include "qkdsim/protocol.hpp"

using namespace qkdsim;

namespace {

DetectionEvent make_event(double t, int channel, EventOrigin origin, std::int64_t slot,
                          int truth) {
  DetectionEvent ev;
  ev.timestamp_s = t;
  ev.channel = static_cast<std::uint8_t>(channel);
  ev.origin = origin;
  ev.slot_index = slot;
  ev.truth_bit = static_cast<std::uint8_t>(truth);
  return ev;
}

constexpr double i_ae_45 = 0.29289321881345254;  // 1 - cos(45 deg)

}  // namespace

TEST_CASE("histogram folding") {
  std::vector<DetectionEvent> events;
  // Two events in the same phase of different sync frames end up in one bin.
  events.push_back(make_event(1.5e-9, 0, EventOrigin::signal, 1, 0));
  events.push_back(make_event(17.5e-9, 0, EventOrigin::signal, 17, 0));
  events.push_back(make_event(5.0e-9, 1, EventOrigin::signal, 5, 1));
  const Histogram h = accumulate_histogram(events, 16e-9, 1e-9);
  REQUIRE(h.bins() == 16);
  CHECK(h.ch0[1] == 2);
  CHECK(h.ch1[5] == 1);
  CHECK(h.total() == events.size());
}

TEST_CASE("histogram rejects a non-dividing bin width") {
  std::vector<DetectionEvent> events;
  CHECK_THROWS_AS(accumulate_histogram(events, 16e-9, 3e-9), std::invalid_argument);
  CHECK_THROWS_AS(accumulate_histogram(events, 0.0, 1e-9), std::invalid_argument);
}

TEST_CASE("histogram of an empty event list is all zeros") {
  const Histogram h = accumulate_histogram({}, 16e-9, 1e-9);
  CHECK(h.total() == 0);
  REQUIRE(h.bins() == 16);
}

TEST_CASE("word8 at 1 GHz folds into an alternating peak/valley pattern") {
  SessionConfig cfg;
  cfg.bit_sequence = generate_sequence(SequenceKind::word8, 8);
  cfg.clock_hz = 1e9;
  cfg.source.clock_frequency_hz = 1e9;
  cfg.collection_time_s = 2e-4;
  cfg.seed = 31;
  for (DetectorParams& d : cfg.receiver.detectors) {
    d.jitter_fwhm_s = 0.0;
    d.dark_rate_hz = 0.0;
  }
  const SessionRecord record = run_session(cfg);
  const Histogram h = accumulate_histogram(record.events, record.sync_period_s, 1e-9);
  REQUIRE(h.bins() == 16);
  for (std::size_t i = 0; i < 16; ++i) {
    if (i % 2 == 0) {
      CHECK(h.ch1[i] > 10 * std::max<std::uint64_t>(h.ch0[i], 1));  // bit 1 slots
    } else {
      CHECK(h.ch0[i] > 10 * std::max<std::uint64_t>(h.ch1[i], 1));  // bit 0 slots
    }
  }
}

TEST_CASE("raw_rate closed form") {
  CHECK(raw_rate(17.0, 0.0, 0.1, 1e9) == doctest::Approx(1.995e6).epsilon(3e-4));
  CHECK(raw_rate(17.0, 300.0, 0.1, 1e9) < 1e-20);  // opaque channel
  CHECK(raw_rate(17.0, 5.0, 0.1, 2e9) ==
        doctest::Approx(2.0 * raw_rate(17.0, 5.0, 0.1, 1e9)));
  CHECK_THROWS_AS(raw_rate(17.0, 0.0, 0.0, 1e9), std::invalid_argument);
}

TEST_CASE("sift_rate and qber from window stats") {
  WindowStats ws;
  ws.window_fraction = 0.5;
  ws.collection_time_s = 60.0;
  ws.correct = static_cast<std::uint64_t>(1009000) * 60;
  ws.incorrect = static_cast<std::uint64_t>(16000) * 60;
  // The published 0 km cell at this gate is about 1.01e6 accepted counts/s.
  CHECK(sift_rate(ws) == doctest::Approx(1025000.0));
  CHECK(qber(ws) == doctest::Approx(16000.0 / 1025000.0));

  WindowStats tiny;
  tiny.collection_time_s = 1.0;
  tiny.correct = 996;
  tiny.incorrect = 4;
  CHECK(qber(tiny) == doctest::Approx(0.004));
  tiny.incorrect = 0;
  CHECK(qber(tiny) == doctest::Approx(0.0));
  // qber + correct share is exactly one
  tiny.incorrect = 37;
  CHECK(qber(tiny) + static_cast<double>(tiny.correct) / static_cast<double>(tiny.total()) ==
        doctest::Approx(1.0));

  WindowStats empty;
  empty.collection_time_s = 1.0;
  CHECK(sift_rate(empty) == doctest::Approx(0.0));
  CHECK_THROWS_AS(qber(empty), no_counts_error);
}

TEST_CASE("eavesdropper_info endpoints") {
  CHECK(eavesdropper_info(45.0) == doctest::Approx(0.29289).epsilon(1e-4));
  CHECK(eavesdropper_info(0.0) == doctest::Approx(0.0));
  CHECK(eavesdropper_info(90.0) == doctest::Approx(1.0));
  CHECK_THROWS_AS(eavesdropper_info(-1.0), std::invalid_argument);
  CHECK_THROWS_AS(eavesdropper_info(91.0), std::invalid_argument);
}

TEST_CASE("net_rate reproduces published cells within 2.5 percent") {
  CHECK(net_rate(0.016, 1011117.0, i_ae_45) == doctest::Approx(570123.0).epsilon(0.025));
  CHECK(net_rate(0.004, 61948.0, i_ae_45) == doctest::Approx(41147.0).epsilon(0.025));
}

TEST_CASE("net_rate structure") {
  // Bracket equals exactly one when q = 0 and there is no eavesdropper term.
  CHECK(net_rate(0.0, 12345.0, 0.0) == doctest::Approx(12345.0));
  CHECK(net_rate_bracket(0.0, 0.0) == doctest::Approx(1.0));
  // Continuity at q -> 0.
  CHECK(net_rate_bracket(1e-12, i_ae_45) ==
        doctest::Approx(net_rate_bracket(0.0, i_ae_45)).epsilon(1e-6));
  // High error rates clamp to zero and flag the insecure regime.
  CHECK(net_rate(0.25, 1000.0, i_ae_45) == doctest::Approx(0.0));
  CHECK_FALSE(net_rate_secure(0.25, i_ae_45));
  CHECK(net_rate_secure(0.01, i_ae_45));
  CHECK_THROWS_AS(net_rate(1.0, 1.0, 0.0), std::invalid_argument);
}

TEST_CASE("error budget partitions the incorrect gated counts exactly") {
  SessionConfig cfg;
  cfg.bit_sequence = generate_sequence(SequenceKind::word8, 8);
  cfg.clock_hz = 1e9;
  cfg.source.clock_frequency_hz = 1e9;
  cfg.collection_time_s = 1e-3;
  cfg.seed = 32;
  const SessionRecord record = run_session(cfg);
  const double w = 0.98;
  const ErrorBudget budget = error_budget(record, w);
  const WindowStats ws = window_stats(record, w);
  const double total_err = static_cast<double>(ws.incorrect) / record.duration_s;
  CHECK(budget.total_error_rate() == doctest::Approx(total_err));
  CHECK(budget.sift_rate == doctest::Approx(sift_rate(ws)));
  CHECK(budget.total_error_rate() <= budget.sift_rate);
  CHECK(budget.qber() == doctest::Approx(qber(ws)));
}

TEST_CASE("error budget: leakage is the only source when jitter and darks are off") {
  SessionConfig cfg;
  cfg.bit_sequence = generate_sequence(SequenceKind::word8, 8);
  cfg.clock_hz = 1e9;
  cfg.source.clock_frequency_hz = 1e9;
  cfg.collection_time_s = 5e-3;
  cfg.seed = 33;
  cfg.receiver.pbs_extinction = 0.002;
  for (DetectorParams& d : cfg.receiver.detectors) {
    d.jitter_fwhm_s = 0.0;
    d.dark_rate_hz = 0.0;
  }
  const SessionRecord record = run_session(cfg);
  const ErrorBudget budget = error_budget(record, 0.5);
  CHECK(budget.dark_rate == doctest::Approx(0.0));
  CHECK(budget.timing_rate == doctest::Approx(0.0));
  CHECK(budget.leak_rate > 0.0);
}

TEST_CASE("error budget: dark counts are the only source in the dark-limited regime") {
  SessionConfig cfg;
  cfg.bit_sequence = generate_sequence(SequenceKind::word8, 8);
  cfg.clock_hz = 100e6;
  cfg.source.clock_frequency_hz = 100e6;
  cfg.collection_time_s = 20.0;
  cfg.seed = 34;
  cfg.channel.extra_attenuation_db = 400.0;  // no signal photons survive
  const SessionRecord record = run_session(cfg);
  const ErrorBudget budget = error_budget(record, 0.5);
  CHECK(budget.leak_rate == doctest::Approx(0.0));
  CHECK(budget.timing_rate == doctest::Approx(0.0));
  CHECK(budget.dark_rate > 0.0);
  // Symmetric channels: dark-limited QBER converges to one half.
  const WindowStats ws = window_stats(record, 0.5);
  const double q = qber(ws);
  const double sigma = std::sqrt(0.25 / static_cast<double>(ws.total()));
  CHECK(std::fabs(q - 0.5) < 3.5 * sigma);
}

TEST_CASE("timing spill grows with the clock at fixed hardware") {
  // Same 350 ps response at 100 MHz vs 1 GHz: the error component from
  // counts landing in the wrong bit period must rise sharply.
  auto budget_at = [](double clock) {
    SessionConfig cfg;
    cfg.bit_sequence = generate_sequence(SequenceKind::word8, 8);
    cfg.clock_hz = clock;
    cfg.source.clock_frequency_hz = clock;
    cfg.collection_time_s = 2e7 / clock;  // same slot count at both clocks
    cfg.seed = 35;
    for (DetectorParams& d : cfg.receiver.detectors) d.dark_rate_hz = 0.0;
    cfg.receiver.pbs_extinction = 0.0;
    const SessionRecord record = run_session(cfg);
    const ErrorBudget b = error_budget(record, 0.5);
    return b.timing_rate / b.sift_rate;
  };
  const double slow = budget_at(100e6);
  const double fast = budget_at(1e9);
  CHECK(fast > 10.0 * std::max(slow, 1e-9));
  CHECK(slow < 1e-3);  // negligible at 100 MHz
}

TEST_CASE("optimize_window: noiseless record prefers the widest window") {
  SessionConfig cfg;
  cfg.bit_sequence = generate_sequence(SequenceKind::word8, 8);
  cfg.clock_hz = 1e9;
  cfg.source.clock_frequency_hz = 1e9;
  cfg.collection_time_s = 1e-3;
  cfg.seed = 36;
  cfg.source.fixed_photon_number = true;
  cfg.source.mean_photon_number = 1.0;
  cfg.channel.dispersion_ps_per_nm_km = 0.0;
  cfg.receiver.pbs_extinction = 0.0;
  cfg.receiver.insertion_loss_db = 0.0;
  for (DetectorParams& d : cfg.receiver.detectors) {
    d.efficiency = 1.0;
    d.dark_rate_hz = 0.0;
    d.jitter_fwhm_s = 0.0;
    d.dead_time_s = 0.0;
  }
  const SessionRecord record = run_session(cfg);
  const std::vector<double> grid{0.2, 0.4, 0.6, 0.8, 1.0};
  const auto [best, reports] = optimize_window(record, grid);
  CHECK(best == doctest::Approx(1.0));
  for (std::size_t i = 1; i < reports.size(); ++i)
    CHECK(reports[i].sift_rate >= reports[i - 1].sift_rate);  // nested gating
  CHECK_THROWS_AS(optimize_window(record, std::vector<double>{}), std::invalid_argument);
}
