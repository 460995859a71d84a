#include <doctest.h>

#include <cmath>
#include <sstream>
#include <string>

#include "qkdsim/config.hpp"
#include "qkdsim/experiment.hpp"
#include "qkdsim/io.hpp"

using namespace qkdsim;

TEST_CASE("minimal config resolves all documented defaults") {
  const ExperimentSpec spec = parse_config("clock = 1e9\n");
  CHECK(spec.session.clock_hz == doctest::Approx(1e9));
  CHECK(spec.session.source.mean_photon_number == doctest::Approx(0.1));
  CHECK(spec.session.channel.attenuation_db_per_km == doctest::Approx(2.2));
  CHECK(spec.session.channel.dispersion_ps_per_nm_km == doctest::Approx(100.0));
  CHECK(spec.session.receiver.pbs_extinction == doctest::Approx(0.002));
  CHECK(spec.session.receiver.insertion_loss_db == doctest::Approx(7.0));
  CHECK(spec.session.receiver.detectors[0].efficiency == doctest::Approx(0.40));
  CHECK(spec.session.receiver.detectors[0].dark_rate_hz == doctest::Approx(180.0));
  CHECK(spec.session.receiver.detectors[0].jitter_fwhm_s == doctest::Approx(350e-12));
  CHECK(spec.session.receiver.detectors[0].dead_time_s == doctest::Approx(50e-9));
  CHECK(spec.session.collection_time_s == doctest::Approx(60.0));  // 8-bit word default
  CHECK(spec.session.bit_sequence.kind == SequenceKind::word8);
  CHECK(spec.windows.size() == 2);
}

TEST_CASE("prbs15 pattern defaults") {
  const ExperimentSpec spec = parse_config("protocol.pattern = prbs15\n");
  CHECK(spec.session.collection_time_s == doctest::Approx(600.0));
  CHECK(spec.session.analysis_window_bits == 127);
  CHECK(spec.session.bit_sequence.period == 32767);
  CHECK(spec.session.bit_sequence.has_full_period());
}

TEST_CASE("out-of-range values are rejected with the key name") {
  try {
    parse_config("pbs_extinction = 0.7\n");
    FAIL("expected config_error");
  } catch (const config_error& e) {
    const std::string msg = e.what();
    CHECK(msg.find("pbs_extinction") != std::string::npos);
    CHECK(msg.find("line 1") != std::string::npos);
  }
}

TEST_CASE("unknown keys are rejected with line context") {
  try {
    parse_config("clock = 1e9\nnot_a_key = 3\n");
    FAIL("expected config_error");
  } catch (const config_error& e) {
    const std::string msg = e.what();
    CHECK(msg.find("not_a_key") != std::string::npos);
    CHECK(msg.find("line 2") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_config("lonely line without equals\n"), config_error);
}

TEST_CASE("published distance ladder parses as a sweep list") {
  const ExperimentSpec spec = parse_config(
      "run.mode = sweep\n"
      "distances = 0, 2.15, 3.75, 4.19, 6.16, 8.08, 9.96, 11.07, 11.85\n");
  REQUIRE(spec.distances_km.size() == 9);
  CHECK(spec.distances_km.front() == doctest::Approx(0.0));
  CHECK(spec.distances_km.back() == doctest::Approx(11.85));
  CHECK_THROWS_AS(parse_config("run.mode = sweep\n"), config_error);  // empty ladder
}

TEST_CASE("config serialization round-trips") {
  const ExperimentSpec spec = parse_config(
      "run.mode = sweep\n"
      "run.seed = 99\n"
      "clock = 1e9\n"
      "protocol.windows = 0.5, 0.98\n"
      "source.mean_photon_number = 0.1\n"
      "channel.length_km = 4.19\n"
      "receiver.detector.efficiency = 0.4\n"
      "distances = 0, 4.19\n"
      "attack.theta_deg = 45\n");
  const std::string text = serialize_config(spec);
  const ExperimentSpec back = parse_config(text);
  CHECK(serialize_config(back) == text);
  CHECK(back.session.seed == 99);
  CHECK(back.session.channel.length_km == doctest::Approx(4.19));
  CHECK(back.distances_km.size() == 2);
}

TEST_CASE("events csv round-trips") {
  SessionConfig cfg;
  cfg.bit_sequence = generate_sequence(SequenceKind::word8, 8);
  cfg.clock_hz = 1e9;
  cfg.source.clock_frequency_hz = 1e9;
  cfg.collection_time_s = 5e-5;
  cfg.seed = 71;
  const SessionRecord record = run_session(cfg);
  REQUIRE(!record.events.empty());
  std::stringstream ss;
  io::write_events_csv(ss, record.events);
  const auto back = io::read_events_csv(ss);
  REQUIRE(back.size() == record.events.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    // timestamps round to integer picoseconds on the wire
    CHECK(std::fabs(back[i].timestamp_s - record.events[i].timestamp_s) <= 0.5e-12);
    CHECK(back[i].channel == record.events[i].channel);
    CHECK(back[i].slot_index == record.events[i].slot_index);
    CHECK(back[i].origin == record.events[i].origin);
    CHECK(back[i].truth_bit == record.events[i].truth_bit);
  }
}

TEST_CASE("session record save/load") {
  ExperimentSpec spec = default_experiment();
  spec.session.collection_time_s = 5e-5;
  spec.session.seed = 72;
  const SessionRecord record = run_single(spec);
  std::stringstream ss;
  io::save_session_record(ss, record, spec);
  const SessionRecord back = io::load_session_record(ss);
  CHECK(back.n_slots == record.n_slots);
  CHECK(back.duration_s == doctest::Approx(record.duration_s));
  CHECK(back.sync_period_s == doctest::Approx(record.sync_period_s));
  CHECK(back.config.seed == record.config.seed);
  REQUIRE(back.events.size() == record.events.size());
  for (std::size_t i = 0; i < back.events.size(); ++i)
    CHECK(back.events[i].slot_index == record.events[i].slot_index);
}

TEST_CASE("sifted key save/load") {
  ExperimentSpec spec = default_experiment();
  spec.session.collection_time_s = 5e-5;
  spec.session.seed = 73;
  const SessionRecord record = run_single(spec);
  const SiftedKey key = sift(record, 0.5);
  REQUIRE(!key.accepted_slots.empty());
  std::stringstream ss;
  io::write_sifted_key(ss, key);
  const SiftedKey back = io::read_sifted_key(ss);
  CHECK(back.window_fraction == doctest::Approx(key.window_fraction));
  CHECK(back.alice_key == key.alice_key);
  CHECK(back.bob_key == key.bob_key);
  CHECK(back.accepted_slots == key.accepted_slots);
}

TEST_CASE("report csv formatting") {
  RateReport r;
  r.distance_km = 4.19;
  r.clock_hz = 1e9;
  r.window_fraction = 0.5;
  r.raw_rate = 307738.4;
  r.sift_rate = 228251.2;
  r.net_rate = 132350.7;
  r.qber = 0.014;
  r.i_ae = 0.2928932;
  RateReport blank = r;
  blank.insecure = true;
  blank.qber = 0.25;
  std::stringstream ss;
  io::write_reports_csv(ss, std::vector<RateReport>{r, blank});
  std::string line;
  std::getline(ss, line);
  CHECK(line == "distance_km,clock_hz,window_fraction,r_raw,r_sift,r_net,qber_percent,insecure");
  std::getline(ss, line);
  CHECK(line == "4.19,1000000000,0.5,307738,228251,132351,1.4,0");
  std::getline(ss, line);
  // insecure cells leave the net rate blank and set the flag
  CHECK(line == "4.19,1000000000,0.5,307738,228251,,25.0,1");
}

TEST_CASE("sweep emits one row per distance and window, deterministically") {
  ExperimentSpec spec = parse_config(
      "run.mode = sweep\n"
      "clock = 1e9\n"
      "protocol.collection_time_s = 2e-4\n"
      "distances = 0, 2.15, 3.75\n"
      "windows = 0.5, 0.98\n");
  const auto reports = run_sweep(spec);
  CHECK(reports.size() == 6);
  for (std::size_t i = 1; i < reports.size(); ++i) {
    const bool ordered =
        reports[i - 1].distance_km < reports[i].distance_km ||
        (reports[i - 1].distance_km == reports[i].distance_km &&
         reports[i - 1].window_fraction < reports[i].window_fraction);
    CHECK(ordered);
  }
  std::stringstream a;
  std::stringstream b;
  io::write_reports_csv(a, reports);
  io::write_reports_csv(b, run_sweep(spec));
  CHECK(a.str() == b.str());
}

TEST_CASE("histogram csv header") {
  Histogram h;
  h.bin_width_s = 1e-9;
  h.period_s = 4e-9;
  h.ch0 = {1, 2, 3, 4};
  h.ch1 = {5, 6, 7, 8};
  std::stringstream ss;
  io::write_histogram_csv(ss, h);
  std::string line;
  std::getline(ss, line);
  CHECK(line == "bin_start_ps,ch0,ch1");
  std::getline(ss, line);
  CHECK(line == "0,1,5");
  std::getline(ss, line);
  CHECK(line == "1000,2,6");
}
