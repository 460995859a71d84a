#pragma once

#include <charconv>
#include <cstdint>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "qkdsim/errors.hpp"
#include "qkdsim/protocol.hpp"

namespace qkdsim {

enum class RunMode { simulate, sweep, histogram, attack, optimize_window };

enum class OutputFormat { csv, json };

// A parsed experiment: one session template plus the sweep/output policy.
struct ExperimentSpec {
  SessionConfig session;
  RunMode mode = RunMode::simulate;
  std::vector<double> distances_km;
  std::vector<double> windows{0.5, 0.98};
  bool distance_as_attenuation = true;  // emulate length with the attenuator
  double duration_scale = 1.0;
  int threads = 1;
  std::string output_path = "-";
  OutputFormat format = OutputFormat::csv;
  double histogram_bin_s = 0.0;  // 0 = sync period / 1024
  double attack_rate_tolerance = 0.1;

  // Pattern bookkeeping needed to rebuild the bit sequence on round trips.
  SequenceKind pattern = SequenceKind::word8;
  std::uint16_t prbs_seed = Prbs15::default_seed;
  std::string custom_bits;
};

namespace detail {

inline std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

inline double parse_double_value(const std::string& key, const std::string& value, int line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw config_error("config line " + std::to_string(line) + ": key '" + key +
                       "' expects a number, got '" + value + "'");
  }
}

inline std::vector<double> parse_list_value(const std::string& key, const std::string& value,
                                            int line) {
  std::vector<double> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const std::string t = trim(item);
    if (t.empty())
      throw config_error("config line " + std::to_string(line) + ": key '" + key +
                         "' has an empty list element");
    out.push_back(parse_double_value(key, t, line));
  }
  if (out.empty())
    throw config_error("config line " + std::to_string(line) + ": key '" + key +
                       "' expects a comma separated list");
  return out;
}

inline bool parse_bool_value(const std::string& key, const std::string& value, int line) {
  if (value == "true" || value == "1" || value == "yes" || value == "on") return true;
  if (value == "false" || value == "0" || value == "no" || value == "off") return false;
  throw config_error("config line " + std::to_string(line) + ": key '" + key +
                     "' expects true/false, got '" + value + "'");
}

inline void check_range(const std::string& key, double v, double lo, double hi, bool lo_open,
                        bool hi_open, int line) {
  const bool ok = (lo_open ? v > lo : v >= lo) && (hi_open ? v < hi : v <= hi);
  if (!ok)
    throw config_error("config line " + std::to_string(line) + ": key '" + key + "' value " +
                       std::to_string(v) + " is out of range");
}

inline std::string format_double(double v) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace detail

inline const char* run_mode_name(RunMode m) {
  switch (m) {
    case RunMode::simulate:
      return "simulate";
    case RunMode::sweep:
      return "sweep";
    case RunMode::histogram:
      return "histogram";
    case RunMode::attack:
      return "attack";
    default:
      return "optimize-window";
  }
}

inline RunMode run_mode_from_name(const std::string& name) {
  if (name == "simulate") return RunMode::simulate;
  if (name == "sweep") return RunMode::sweep;
  if (name == "histogram") return RunMode::histogram;
  if (name == "attack") return RunMode::attack;
  if (name == "optimize-window") return RunMode::optimize_window;
  throw config_error("unknown run mode '" + name + "'");
}

inline const char* sequence_kind_name(SequenceKind k) {
  switch (k) {
    case SequenceKind::word8:
      return "word8";
    case SequenceKind::prbs15:
      return "prbs15";
    default:
      return "custom";
  }
}

// Resolve defaults that depend on other keys and materialize the sequence.
inline void finalize_spec(ExperimentSpec& spec, bool collection_time_set,
                          bool analysis_window_set) {
  if (spec.pattern == SequenceKind::custom) {
    spec.session.bit_sequence = from_text(spec.custom_bits);
  } else {
    spec.session.bit_sequence =
        generate_sequence(spec.pattern, canonical_period(spec.pattern), spec.prbs_seed);
  }
  if (!collection_time_set)
    spec.session.collection_time_s = spec.pattern == SequenceKind::prbs15 ? 600.0 : 60.0;
  if (!analysis_window_set && spec.pattern == SequenceKind::prbs15)
    spec.session.analysis_window_bits = 127;
  spec.session.source.clock_frequency_hz = spec.session.clock_hz;
  spec.session.attack.angle_bit0_deg = spec.session.source.angle_bit0_deg;
  spec.session.attack.angle_bit1_deg = spec.session.source.angle_bit1_deg;
  for (double w : spec.windows)
    if (w <= 0.0 || w > 1.0) throw config_error("windows: fractions must lie in (0, 1]");
  if (spec.mode == RunMode::sweep && spec.distances_km.empty())
    throw config_error("sweep mode requires a nonempty distances list");
  if (spec.duration_scale <= 0.0 || spec.duration_scale > 1.0)
    throw config_error("duration_scale must lie in (0, 1]");
}

// Flat key=value document with section prefixes. Unknown keys are rejected;
// a bare key is accepted when it unambiguously names a canonical key's final
// segment (so "clock = 1e9" resolves to protocol.clock_hz).
inline ExperimentSpec parse_config(std::string_view text) {
  ExperimentSpec spec;
  bool collection_time_set = false;
  bool analysis_window_set = false;

  using Setter = std::function<void(ExperimentSpec&, const std::string&, int)>;
  std::map<std::string, Setter> keys;
  auto add = [&keys](const char* key, Setter fn) { keys.emplace(key, std::move(fn)); };

  add("run.mode", [](ExperimentSpec& s, const std::string& v, int) {
    s.mode = run_mode_from_name(v);
  });
  add("run.seed", [](ExperimentSpec& s, const std::string& v, int line) {
    try {
      s.session.seed = std::stoull(v);
    } catch (const std::exception&) {
      throw config_error("config line " + std::to_string(line) + ": run.seed expects an integer");
    }
  });
  add("run.threads", [](ExperimentSpec& s, const std::string& v, int line) {
    const double t = detail::parse_double_value("run.threads", v, line);
    detail::check_range("run.threads", t, 1, 1024, false, false, line);
    s.threads = static_cast<int>(t);
  });
  add("run.duration_scale", [](ExperimentSpec& s, const std::string& v, int line) {
    s.duration_scale = detail::parse_double_value("run.duration_scale", v, line);
    detail::check_range("run.duration_scale", s.duration_scale, 0, 1, true, false, line);
  });
  add("output.path",
      [](ExperimentSpec& s, const std::string& v, int) { s.output_path = v; });
  add("output.format", [](ExperimentSpec& s, const std::string& v, int line) {
    if (v == "csv")
      s.format = OutputFormat::csv;
    else if (v == "json")
      s.format = OutputFormat::json;
    else
      throw config_error("config line " + std::to_string(line) +
                         ": output.format expects csv or json");
  });

  add("protocol.pattern", [](ExperimentSpec& s, const std::string& v, int line) {
    if (v == "word8")
      s.pattern = SequenceKind::word8;
    else if (v == "prbs15")
      s.pattern = SequenceKind::prbs15;
    else
      throw config_error("config line " + std::to_string(line) +
                         ": protocol.pattern expects word8 or prbs15");
  });
  add("protocol.custom_bits", [](ExperimentSpec& s, const std::string& v, int) {
    s.pattern = SequenceKind::custom;
    s.custom_bits = v;
  });
  add("protocol.prbs_seed", [](ExperimentSpec& s, const std::string& v, int line) {
    const double x = detail::parse_double_value("protocol.prbs_seed", v, line);
    detail::check_range("protocol.prbs_seed", x, 1, 32767, false, false, line);
    s.prbs_seed = static_cast<std::uint16_t>(x);
  });
  add("protocol.clock_hz", [](ExperimentSpec& s, const std::string& v, int line) {
    s.session.clock_hz = detail::parse_double_value("protocol.clock_hz", v, line);
    detail::check_range("protocol.clock_hz", s.session.clock_hz, 0, 1e12, true, false, line);
  });
  add("protocol.collection_time_s", [&collection_time_set](ExperimentSpec& s,
                                                           const std::string& v, int line) {
    s.session.collection_time_s =
        detail::parse_double_value("protocol.collection_time_s", v, line);
    detail::check_range("protocol.collection_time_s", s.session.collection_time_s, 0, 1e9, true,
                        false, line);
    collection_time_set = true;
  });
  add("protocol.sync_divisor", [](ExperimentSpec& s, const std::string& v, int line) {
    const double x = detail::parse_double_value("protocol.sync_divisor", v, line);
    detail::check_range("protocol.sync_divisor", x, 0, 4e9, false, false, line);  // 0 = derive
    s.session.sync_divisor = static_cast<std::uint32_t>(x);
  });
  add("protocol.analysis_window_bits", [&analysis_window_set](ExperimentSpec& s,
                                                              const std::string& v, int line) {
    const double x = detail::parse_double_value("protocol.analysis_window_bits", v, line);
    detail::check_range("protocol.analysis_window_bits", x, 0, 4e9, false, false, line);
    s.session.analysis_window_bits = static_cast<std::int64_t>(x);
    analysis_window_set = true;
  });
  add("protocol.windows", [](ExperimentSpec& s, const std::string& v, int line) {
    s.windows = detail::parse_list_value("protocol.windows", v, line);
  });

  add("source.mean_photon_number", [](ExperimentSpec& s, const std::string& v, int line) {
    s.session.source.mean_photon_number =
        detail::parse_double_value("source.mean_photon_number", v, line);
    detail::check_range("source.mean_photon_number", s.session.source.mean_photon_number, 0, 100,
                        true, false, line);
  });
  add("source.fixed_photon_number", [](ExperimentSpec& s, const std::string& v, int line) {
    s.session.source.fixed_photon_number =
        detail::parse_bool_value("source.fixed_photon_number", v, line);
  });
  add("source.pulse_timing_fwhm_ps", [](ExperimentSpec& s, const std::string& v, int line) {
    const double ps = detail::parse_double_value("source.pulse_timing_fwhm_ps", v, line);
    detail::check_range("source.pulse_timing_fwhm_ps", ps, 0, 1e9, false, false, line);
    s.session.source.pulse_timing_fwhm_s = ps * 1e-12;
  });
  add("source.pulse_timing_fwhm_s", [](ExperimentSpec& s, const std::string& v, int line) {
    s.session.source.pulse_timing_fwhm_s =
        detail::parse_double_value("source.pulse_timing_fwhm_s", v, line);
    detail::check_range("source.pulse_timing_fwhm_s", s.session.source.pulse_timing_fwhm_s, 0,
                        1e-3, false, false, line);
  });
  add("source.angle_bit0_deg", [](ExperimentSpec& s, const std::string& v, int line) {
    s.session.source.angle_bit0_deg = detail::parse_double_value("source.angle_bit0_deg", v, line);
  });
  add("source.angle_bit1_deg", [](ExperimentSpec& s, const std::string& v, int line) {
    s.session.source.angle_bit1_deg = detail::parse_double_value("source.angle_bit1_deg", v, line);
  });

  add("channel.length_km", [](ExperimentSpec& s, const std::string& v, int line) {
    s.session.channel.length_km = detail::parse_double_value("channel.length_km", v, line);
    detail::check_range("channel.length_km", s.session.channel.length_km, 0, 1e5, false, false,
                        line);
  });
  add("channel.attenuation_db_per_km", [](ExperimentSpec& s, const std::string& v, int line) {
    s.session.channel.attenuation_db_per_km =
        detail::parse_double_value("channel.attenuation_db_per_km", v, line);
    detail::check_range("channel.attenuation_db_per_km", s.session.channel.attenuation_db_per_km,
                        0, 1e3, false, false, line);
  });
  add("channel.extra_attenuation_db", [](ExperimentSpec& s, const std::string& v, int line) {
    s.session.channel.extra_attenuation_db =
        detail::parse_double_value("channel.extra_attenuation_db", v, line);
    detail::check_range("channel.extra_attenuation_db", s.session.channel.extra_attenuation_db, 0,
                        1e4, false, false, line);
  });
  add("channel.dispersion_ps_nm_km", [](ExperimentSpec& s, const std::string& v, int line) {
    s.session.channel.dispersion_ps_per_nm_km =
        detail::parse_double_value("channel.dispersion_ps_nm_km", v, line);
    detail::check_range("channel.dispersion_ps_nm_km",
                        s.session.channel.dispersion_ps_per_nm_km, 0, 1e6, false, false, line);
  });
  add("channel.linewidth_nm", [](ExperimentSpec& s, const std::string& v, int line) {
    s.session.channel.source_linewidth_nm =
        detail::parse_double_value("channel.linewidth_nm", v, line);
    detail::check_range("channel.linewidth_nm", s.session.channel.source_linewidth_nm, 0, 1e3,
                        false, false, line);
  });
  add("channel.drift_deg_per_sqrt_s", [](ExperimentSpec& s, const std::string& v, int line) {
    s.session.channel.polarization_drift_deg_per_sqrt_s =
        detail::parse_double_value("channel.drift_deg_per_sqrt_s", v, line);
    detail::check_range("channel.drift_deg_per_sqrt_s",
                        s.session.channel.polarization_drift_deg_per_sqrt_s, 0, 1e6, false, false,
                        line);
  });

  add("receiver.pbs_extinction", [](ExperimentSpec& s, const std::string& v, int line) {
    s.session.receiver.pbs_extinction =
        detail::parse_double_value("receiver.pbs_extinction", v, line);
    detail::check_range("receiver.pbs_extinction", s.session.receiver.pbs_extinction, 0, 0.5,
                        false, true, line);
  });
  add("receiver.insertion_loss_db", [](ExperimentSpec& s, const std::string& v, int line) {
    s.session.receiver.insertion_loss_db =
        detail::parse_double_value("receiver.insertion_loss_db", v, line);
    detail::check_range("receiver.insertion_loss_db", s.session.receiver.insertion_loss_db, 0,
                        1e3, false, false, line);
  });
  add("receiver.analyzer_ch0_deg", [](ExperimentSpec& s, const std::string& v, int line) {
    s.session.receiver.analyzer_ch0_deg =
        detail::parse_double_value("receiver.analyzer_ch0_deg", v, line);
  });
  add("receiver.analyzer_ch1_deg", [](ExperimentSpec& s, const std::string& v, int line) {
    s.session.receiver.analyzer_ch1_deg =
        detail::parse_double_value("receiver.analyzer_ch1_deg", v, line);
  });
  add("receiver.detector.efficiency", [](ExperimentSpec& s, const std::string& v, int line) {
    const double x = detail::parse_double_value("receiver.detector.efficiency", v, line);
    detail::check_range("receiver.detector.efficiency", x, 0, 1, false, false, line);
    for (DetectorParams& d : s.session.receiver.detectors) d.efficiency = x;
  });
  add("receiver.detector.dark_rate_hz", [](ExperimentSpec& s, const std::string& v, int line) {
    const double x = detail::parse_double_value("receiver.detector.dark_rate_hz", v, line);
    detail::check_range("receiver.detector.dark_rate_hz", x, 0, 1e12, false, false, line);
    for (DetectorParams& d : s.session.receiver.detectors) d.dark_rate_hz = x;
  });
  add("receiver.detector.jitter_fwhm_ps", [](ExperimentSpec& s, const std::string& v, int line) {
    const double x = detail::parse_double_value("receiver.detector.jitter_fwhm_ps", v, line);
    detail::check_range("receiver.detector.jitter_fwhm_ps", x, 0, 1e9, false, false, line);
    for (DetectorParams& d : s.session.receiver.detectors) d.jitter_fwhm_s = x * 1e-12;
  });
  add("receiver.detector.jitter_fwhm_s", [](ExperimentSpec& s, const std::string& v, int line) {
    const double x = detail::parse_double_value("receiver.detector.jitter_fwhm_s", v, line);
    detail::check_range("receiver.detector.jitter_fwhm_s", x, 0, 1e-3, false, false, line);
    for (DetectorParams& d : s.session.receiver.detectors) d.jitter_fwhm_s = x;
  });
  add("receiver.detector.dead_time_ns", [](ExperimentSpec& s, const std::string& v, int line) {
    const double x = detail::parse_double_value("receiver.detector.dead_time_ns", v, line);
    detail::check_range("receiver.detector.dead_time_ns", x, 0, 1e12, false, false, line);
    for (DetectorParams& d : s.session.receiver.detectors) d.dead_time_s = x * 1e-9;
  });
  add("receiver.detector.dead_time_s", [](ExperimentSpec& s, const std::string& v, int line) {
    const double x = detail::parse_double_value("receiver.detector.dead_time_s", v, line);
    detail::check_range("receiver.detector.dead_time_s", x, 0, 1e3, false, false, line);
    for (DetectorParams& d : s.session.receiver.detectors) d.dead_time_s = x;
  });
  add("receiver.detector.afterpulse_prob", [](ExperimentSpec& s, const std::string& v, int line) {
    const double x = detail::parse_double_value("receiver.detector.afterpulse_prob", v, line);
    detail::check_range("receiver.detector.afterpulse_prob", x, 0, 1, false, true, line);
    for (DetectorParams& d : s.session.receiver.detectors) d.afterpulse_prob = x;
  });

  add("sweep.distances_km", [](ExperimentSpec& s, const std::string& v, int line) {
    s.distances_km = detail::parse_list_value("sweep.distances_km", v, line);
    for (double d : s.distances_km)
      detail::check_range("sweep.distances_km", d, 0, 1e5, false, false, line);
  });
  add("sweep.distance_mode", [](ExperimentSpec& s, const std::string& v, int line) {
    if (v == "attenuation")
      s.distance_as_attenuation = true;
    else if (v == "physical")
      s.distance_as_attenuation = false;
    else
      throw config_error("config line " + std::to_string(line) +
                         ": sweep.distance_mode expects attenuation or physical");
  });

  add("histogram.bin_width_ps", [](ExperimentSpec& s, const std::string& v, int line) {
    const double x = detail::parse_double_value("histogram.bin_width_ps", v, line);
    detail::check_range("histogram.bin_width_ps", x, 0, 1e12, true, false, line);
    s.histogram_bin_s = x * 1e-12;
  });
  add("histogram.bin_width_s", [](ExperimentSpec& s, const std::string& v, int line) {
    s.histogram_bin_s = detail::parse_double_value("histogram.bin_width_s", v, line);
    detail::check_range("histogram.bin_width_s", s.histogram_bin_s, 0, 1e3, true, false, line);
  });

  add("attack.enabled", [](ExperimentSpec& s, const std::string& v, int line) {
    s.session.attack.enabled = detail::parse_bool_value("attack.enabled", v, line);
  });
  add("attack.theta_deg", [](ExperimentSpec& s, const std::string& v, int line) {
    s.session.attack.theta_deg = detail::parse_double_value("attack.theta_deg", v, line);
    detail::check_range("attack.theta_deg", s.session.attack.theta_deg, 0, 90, false, false,
                        line);
  });
  add("attack.substitute_loss_db", [](ExperimentSpec& s, const std::string& v, int line) {
    s.session.attack.substitute_loss_db =
        detail::parse_double_value("attack.substitute_loss_db", v, line);
    detail::check_range("attack.substitute_loss_db", s.session.attack.substitute_loss_db, 0, 1e4,
                        false, false, line);
  });
  add("attack.resend_photons", [](ExperimentSpec& s, const std::string& v, int line) {
    const double x = detail::parse_double_value("attack.resend_photons", v, line);
    detail::check_range("attack.resend_photons", x, 1, 1000, false, false, line);
    s.session.attack.resend_photon_number = static_cast<int>(x);
  });
  add("attack.rate_tolerance", [](ExperimentSpec& s, const std::string& v, int line) {
    s.attack_rate_tolerance = detail::parse_double_value("attack.rate_tolerance", v, line);
    detail::check_range("attack.rate_tolerance", s.attack_rate_tolerance, 0, 1, false, true,
                        line);
  });

  // Parse the document.
  int line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t nl = text.find('\n', start);
    std::string_view raw =
        text.substr(start, nl == std::string_view::npos ? std::string_view::npos : nl - start);
    start = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    const std::size_t hash = raw.find('#');
    if (hash != std::string_view::npos) raw = raw.substr(0, hash);
    const std::string stripped = detail::trim(raw);
    if (stripped.empty()) continue;
    const std::size_t eq = stripped.find('=');
    if (eq == std::string::npos)
      throw config_error("config line " + std::to_string(line_no) + ": expected key = value");
    std::string key = detail::trim(std::string_view(stripped).substr(0, eq));
    const std::string value = detail::trim(std::string_view(stripped).substr(eq + 1));
    if (key.empty())
      throw config_error("config line " + std::to_string(line_no) + ": empty key");

    auto it = keys.find(key);
    if (it == keys.end() && key.find('.') == std::string::npos) {
      // Bare keys resolve against the final segment of canonical names.
      std::vector<std::string> matches;
      for (const auto& [canon, _] : keys) {
        const std::string tail = canon.substr(canon.rfind('.') + 1);
        if (tail == key || (tail.size() > key.size() && tail.compare(0, key.size(), key) == 0 &&
                            tail[key.size()] == '_'))
          matches.push_back(canon);
      }
      if (matches.size() == 1) it = keys.find(matches.front());
      else if (matches.size() > 1) {
        std::string msg = "config line " + std::to_string(line_no) + ": key '" + key +
                          "' is ambiguous between";
        for (const std::string& m : matches) msg += " " + m;
        throw config_error(msg);
      }
    }
    if (it == keys.end())
      throw config_error("config line " + std::to_string(line_no) + ": unknown key '" + key +
                         "'");
    it->second(spec, value, line_no);
  }

  finalize_spec(spec, collection_time_set, analysis_window_set);
  return spec;
}

// Canonical serialization: every key explicit, fixed order. parse_config of
// the result reproduces an equivalent spec.
inline std::string serialize_config(const ExperimentSpec& spec) {
  using detail::format_double;
  std::string out;
  auto kv = [&out](const std::string& k, const std::string& v) {
    out += k;
    out += " = ";
    out += v;
    out += "\n";
  };
  kv("run.mode", run_mode_name(spec.mode));
  kv("run.seed", std::to_string(spec.session.seed));
  kv("run.threads", std::to_string(spec.threads));
  kv("run.duration_scale", format_double(spec.duration_scale));
  kv("output.path", spec.output_path);
  kv("output.format", spec.format == OutputFormat::csv ? "csv" : "json");
  kv("protocol.pattern", sequence_kind_name(spec.pattern));
  if (spec.pattern == SequenceKind::custom) kv("protocol.custom_bits", spec.custom_bits);
  kv("protocol.prbs_seed", std::to_string(spec.prbs_seed));
  kv("protocol.clock_hz", format_double(spec.session.clock_hz));
  kv("protocol.collection_time_s", format_double(spec.session.collection_time_s));
  kv("protocol.sync_divisor", std::to_string(spec.session.sync_divisor));
  kv("protocol.analysis_window_bits", std::to_string(spec.session.analysis_window_bits));
  {
    std::string list;
    for (std::size_t i = 0; i < spec.windows.size(); ++i) {
      if (i > 0) list += ", ";
      list += format_double(spec.windows[i]);
    }
    kv("protocol.windows", list);
  }
  kv("source.mean_photon_number", format_double(spec.session.source.mean_photon_number));
  kv("source.fixed_photon_number", spec.session.source.fixed_photon_number ? "true" : "false");
  kv("source.pulse_timing_fwhm_s", format_double(spec.session.source.pulse_timing_fwhm_s));
  kv("source.angle_bit0_deg", format_double(spec.session.source.angle_bit0_deg));
  kv("source.angle_bit1_deg", format_double(spec.session.source.angle_bit1_deg));
  kv("channel.length_km", format_double(spec.session.channel.length_km));
  kv("channel.attenuation_db_per_km",
     format_double(spec.session.channel.attenuation_db_per_km));
  kv("channel.extra_attenuation_db", format_double(spec.session.channel.extra_attenuation_db));
  kv("channel.dispersion_ps_nm_km",
     format_double(spec.session.channel.dispersion_ps_per_nm_km));
  kv("channel.linewidth_nm", format_double(spec.session.channel.source_linewidth_nm));
  kv("channel.drift_deg_per_sqrt_s",
     format_double(spec.session.channel.polarization_drift_deg_per_sqrt_s));
  kv("receiver.pbs_extinction", format_double(spec.session.receiver.pbs_extinction));
  kv("receiver.insertion_loss_db", format_double(spec.session.receiver.insertion_loss_db));
  kv("receiver.analyzer_ch0_deg", format_double(spec.session.receiver.analyzer_ch0_deg));
  kv("receiver.analyzer_ch1_deg", format_double(spec.session.receiver.analyzer_ch1_deg));
  kv("receiver.detector.efficiency",
     format_double(spec.session.receiver.detectors[0].efficiency));
  kv("receiver.detector.dark_rate_hz",
     format_double(spec.session.receiver.detectors[0].dark_rate_hz));
  kv("receiver.detector.jitter_fwhm_s",
     format_double(spec.session.receiver.detectors[0].jitter_fwhm_s));
  kv("receiver.detector.dead_time_s",
     format_double(spec.session.receiver.detectors[0].dead_time_s));
  kv("receiver.detector.afterpulse_prob",
     format_double(spec.session.receiver.detectors[0].afterpulse_prob));
  if (!spec.distances_km.empty()) {
    std::string list;
    for (std::size_t i = 0; i < spec.distances_km.size(); ++i) {
      if (i > 0) list += ", ";
      list += format_double(spec.distances_km[i]);
    }
    kv("sweep.distances_km", list);
  }
  kv("sweep.distance_mode", spec.distance_as_attenuation ? "attenuation" : "physical");
  if (spec.histogram_bin_s > 0.0)
    kv("histogram.bin_width_s", format_double(spec.histogram_bin_s));
  kv("attack.enabled", spec.session.attack.enabled ? "true" : "false");
  kv("attack.theta_deg", format_double(spec.session.attack.theta_deg));
  kv("attack.substitute_loss_db", format_double(spec.session.attack.substitute_loss_db));
  kv("attack.resend_photons", std::to_string(spec.session.attack.resend_photon_number));
  kv("attack.rate_tolerance", format_double(spec.attack_rate_tolerance));
  return out;
}

inline ExperimentSpec default_experiment(SequenceKind kind = SequenceKind::word8) {
  ExperimentSpec spec;
  spec.pattern = kind;
  finalize_spec(spec, false, false);
  return spec;
}

}  // namespace qkdsim
