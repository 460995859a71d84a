#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "qkdsim/analytics.hpp"
#include "qkdsim/config.hpp"
#include "qkdsim/errors.hpp"
#include "qkdsim/protocol.hpp"
#include "qkdsim/version.hpp"

namespace qkdsim::io {

inline const char* origin_name(EventOrigin o) {
  switch (o) {
    case EventOrigin::signal:
      return "signal";
    case EventOrigin::leakage:
      return "leakage";
    case EventOrigin::dark:
      return "dark";
    default:
      return "eve_resend";
  }
}

inline EventOrigin origin_from_name(const std::string& name) {
  if (name == "signal") return EventOrigin::signal;
  if (name == "leakage") return EventOrigin::leakage;
  if (name == "dark") return EventOrigin::dark;
  if (name == "eve_resend") return EventOrigin::eve_resend;
  throw io_error("unknown event origin '" + name + "'");
}

// Detection events as CSV with integer-picosecond timestamps.
inline void write_events_csv(std::ostream& os, std::span<const DetectionEvent> events) {
  os << "channel,timestamp_ps,slot,origin,truth_bit\n";
  for (const DetectionEvent& ev : events) {
    os << static_cast<int>(ev.channel) << ',' << std::llround(ev.timestamp_s * 1e12) << ','
       << ev.slot_index << ',' << origin_name(ev.origin) << ','
       << static_cast<int>(ev.truth_bit) << '\n';
  }
}

inline std::vector<DetectionEvent> read_events_csv(std::istream& is) {
  std::vector<DetectionEvent> events;
  std::string line;
  if (!std::getline(is, line)) throw io_error("event csv: missing header");
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    DetectionEvent ev;
    std::getline(ss, field, ',');
    ev.channel = static_cast<std::uint8_t>(std::stoi(field));
    std::getline(ss, field, ',');
    ev.timestamp_s = static_cast<double>(std::stoll(field)) * 1e-12;
    std::getline(ss, field, ',');
    ev.slot_index = std::stoll(field);
    std::getline(ss, field, ',');
    ev.origin = origin_from_name(field);
    if (!std::getline(ss, field, ',')) throw io_error("event csv: truncated row");
    ev.truth_bit = static_cast<std::uint8_t>(std::stoi(field));
    events.push_back(ev);
  }
  return events;
}

inline void write_histogram_csv(std::ostream& os, const Histogram& h) {
  os << "bin_start_ps,ch0,ch1\n";
  for (std::size_t i = 0; i < h.bins(); ++i) {
    os << std::llround(static_cast<double>(i) * h.bin_width_s * 1e12) << ',' << h.ch0[i] << ','
       << h.ch1[i] << '\n';
  }
}

namespace detail {

inline std::string qber_percent_str(const RateReport& r) {
  if (!r.qber_defined()) return "";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f", r.qber * 100.0);
  return buf;
}

inline std::string number_str(double v) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace detail

// Table rows: rates as integer counts per second, QBER as percent with one
// decimal, net rate left empty in the insecure regime (flag column set).
inline void write_reports_csv(std::ostream& os, std::span<const RateReport> reports) {
  os << "distance_km,clock_hz,window_fraction,r_raw,r_sift,r_net,qber_percent,insecure\n";
  for (const RateReport& r : reports) {
    os << detail::number_str(r.distance_km) << ',' << std::llround(r.clock_hz) << ','
       << detail::number_str(r.window_fraction) << ',' << std::llround(r.raw_rate) << ','
       << std::llround(r.sift_rate) << ',';
    if (!r.insecure) os << std::llround(r.net_rate);
    os << ',' << detail::qber_percent_str(r) << ',' << (r.insecure ? 1 : 0) << '\n';
  }
}

inline nlohmann::ordered_json report_json(const RateReport& r) {
  nlohmann::ordered_json j;
  j["distance_km"] = r.distance_km;
  j["clock_hz"] = r.clock_hz;
  j["window_fraction"] = r.window_fraction;
  j["r_raw"] = std::llround(r.raw_rate);
  j["r_sift"] = std::llround(r.sift_rate);
  if (r.insecure)
    j["r_net"] = nullptr;
  else
    j["r_net"] = std::llround(r.net_rate);
  if (r.qber_defined()) {
    j["qber"] = r.qber;
    j["qber_percent"] = detail::qber_percent_str(r);
  } else {
    j["qber"] = nullptr;
    j["qber_percent"] = "";
  }
  j["i_ae"] = r.i_ae;
  j["theta_deg"] = r.theta_deg;
  j["insecure"] = r.insecure;
  return j;
}

inline nlohmann::ordered_json config_echo_json(const ExperimentSpec& spec) {
  nlohmann::ordered_json j;
  std::istringstream ss(serialize_config(spec));
  std::string line;
  while (std::getline(ss, line)) {
    const auto eq = line.find(" = ");
    if (eq == std::string::npos) continue;
    j[line.substr(0, eq)] = line.substr(eq + 3);
  }
  return j;
}

inline nlohmann::ordered_json make_run_report(const ExperimentSpec& spec, const char* mode) {
  nlohmann::ordered_json j;
  j["tool"] = "qkdsim";
  j["version"] = qkdsim::version;
  j["mode"] = mode;
  j["seed"] = spec.session.seed;
  j["config"] = config_echo_json(spec);
  return j;
}

// Session record: config header as commented key=value lines, then the
// event CSV. Loadable back into an equivalent record.
inline void save_session_record(std::ostream& os, const SessionRecord& record,
                                const ExperimentSpec& spec) {
  // Execution policy does not affect the record; normalize it so identical
  // sessions save identical files regardless of how they were scheduled.
  ExperimentSpec echo = spec;
  echo.threads = 1;
  std::istringstream cfg(serialize_config(echo));
  std::string line;
  while (std::getline(cfg, line)) os << "# " << line << '\n';
  os << "# session.duration_s = " << detail::number_str(record.duration_s) << '\n';
  os << "# session.n_slots = " << record.n_slots << '\n';
  os << "# session.sync_period_s = " << detail::number_str(record.sync_period_s) << '\n';
  os << "# session.n_sync = " << record.n_sync << '\n';
  write_events_csv(os, record.events);
}

inline SessionRecord load_session_record(std::istream& is) {
  std::string config_text;
  std::string line;
  SessionRecord record;
  double duration = 0.0;
  std::int64_t n_slots = 0;
  // Collect the commented header, then hand the rest to the event reader.
  while (is.peek() == '#') {
    std::getline(is, line);
    std::string body = line.substr(1);
    const std::string trimmed = qkdsim::detail::trim(body);
    if (trimmed.rfind("session.", 0) == 0) {
      const auto eq = trimmed.find('=');
      const std::string key = qkdsim::detail::trim(std::string_view(trimmed).substr(0, eq));
      const std::string value = qkdsim::detail::trim(std::string_view(trimmed).substr(eq + 1));
      if (key == "session.duration_s") duration = std::stod(value);
      if (key == "session.n_slots") n_slots = std::stoll(value);
    } else {
      config_text += trimmed;
      config_text += '\n';
    }
  }
  ExperimentSpec spec = parse_config(config_text);
  record.config = spec.session;
  record.config.sync_divisor = spec.session.sync_divisor > 0
                                   ? spec.session.sync_divisor
                                   : sync_divisor_for(spec.session.bit_sequence);
  record.duration_s = duration;
  record.n_slots = n_slots;
  record.sync_period_s = record.config.sync_divisor / record.config.clock_hz;
  record.n_sync =
      static_cast<std::int64_t>(std::floor(record.duration_s / record.sync_period_s));
  record.events = read_events_csv(is);
  return record;
}

inline void write_sifted_key(std::ostream& os, const SiftedKey& key) {
  os << "window = " << detail::number_str(key.window_fraction) << '\n';
  os << "alice = ";
  for (std::uint8_t b : key.alice_key) os << (b ? '1' : '0');
  os << '\n' << "bob = ";
  for (std::uint8_t b : key.bob_key) os << (b ? '1' : '0');
  os << '\n' << "slots = ";
  for (std::size_t i = 0; i < key.accepted_slots.size(); ++i) {
    if (i > 0) os << ',';
    os << key.accepted_slots[i];
  }
  os << '\n';
}

inline SiftedKey read_sifted_key(std::istream& is) {
  SiftedKey key;
  std::string line;
  auto bits_of = [](const std::string& s) {
    std::vector<std::uint8_t> out;
    for (char c : s)
      if (c == '0' || c == '1') out.push_back(c == '1' ? 1 : 0);
    return out;
  };
  while (std::getline(is, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    const std::string k = qkdsim::detail::trim(std::string_view(line).substr(0, eq));
    const std::string v = qkdsim::detail::trim(std::string_view(line).substr(eq + 1));
    if (k == "window") key.window_fraction = std::stod(v);
    if (k == "alice") key.alice_key = bits_of(v);
    if (k == "bob") key.bob_key = bits_of(v);
    if (k == "slots" && !v.empty()) {
      std::stringstream ss(v);
      std::string item;
      while (std::getline(ss, item, ',')) key.accepted_slots.push_back(std::stoll(item));
    }
  }
  return key;
}

}  // namespace qkdsim::io
