// Command-line front end: runs single sessions, distance sweeps, histogram
// collection, attack studies, window optimization and the built-in
// reproduction of the published characterization tables.

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "qkdsim.hpp"

namespace {

struct CommonOpts {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> format;
  std::optional<double> duration_scale;
  std::optional<int> threads;
};

void add_common(CLI::App* cmd, CommonOpts& opts, bool config_required) {
  auto* c = cmd->add_option("--config", opts.config_path, "experiment config (key = value lines)");
  if (config_required) c->required();
  cmd->add_option("--seed", opts.seed, "override the config seed");
  cmd->add_option("--out", opts.out, "output path ('-' = stdout)");
  cmd->add_option("--format", opts.format, "output format: csv or json")
      ->check(CLI::IsMember({"csv", "json"}));
  cmd->add_option("--duration-scale", opts.duration_scale,
                  "rate-preserving reduction of the collection time, in (0, 1]");
  cmd->add_option("--threads", opts.threads, "worker threads (results are thread-count invariant)");
}

qkdsim::ExperimentSpec load_spec(const CommonOpts& opts) {
  qkdsim::ExperimentSpec spec;
  if (!opts.config_path.empty()) {
    std::ifstream in(opts.config_path);
    if (!in) throw qkdsim::io_error("cannot read config file '" + opts.config_path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    spec = qkdsim::parse_config(ss.str());
  } else {
    spec = qkdsim::default_experiment();
  }
  if (opts.seed) spec.session.seed = *opts.seed;
  if (opts.out) spec.output_path = *opts.out;
  if (opts.format) spec.format = *opts.format == "json" ? qkdsim::OutputFormat::json
                                                        : qkdsim::OutputFormat::csv;
  if (opts.duration_scale) {
    if (*opts.duration_scale <= 0.0 || *opts.duration_scale > 1.0)
      throw qkdsim::config_error("--duration-scale must lie in (0, 1]");
    spec.duration_scale = *opts.duration_scale;
  }
  if (opts.threads) {
    if (*opts.threads < 1) throw qkdsim::config_error("--threads must be at least 1");
    spec.threads = *opts.threads;
  }
  return spec;
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw qkdsim::io_error("cannot write output file '" + path + "'");
  out << text;
  if (!out) throw qkdsim::io_error("error while writing '" + path + "'");
}

void ensure_counts(const std::vector<qkdsim::RateReport>& reports) {
  for (const qkdsim::RateReport& r : reports)
    if (r.qber_defined()) return;
  throw qkdsim::no_counts_error("no gated counts collected in any report cell");
}

std::string reports_text(const qkdsim::ExperimentSpec& spec,
                         const std::vector<qkdsim::RateReport>& reports, const char* mode) {
  if (spec.format == qkdsim::OutputFormat::csv) {
    std::ostringstream os;
    qkdsim::io::write_reports_csv(os, reports);
    return os.str();
  }
  nlohmann::ordered_json j = qkdsim::io::make_run_report(spec, mode);
  auto arr = nlohmann::ordered_json::array();
  for (const qkdsim::RateReport& r : reports) arr.push_back(qkdsim::io::report_json(r));
  j["reports"] = arr;
  return j.dump(2) + "\n";
}

int run_simulate(const CommonOpts& opts, const std::string& events_path,
                 const std::string& record_path, const std::string& key_path,
                 double sift_window) {
  qkdsim::ExperimentSpec spec = load_spec(opts);
  const qkdsim::SessionRecord record = qkdsim::run_single(spec);
  std::vector<qkdsim::RateReport> reports;
  const double distance = spec.session.channel.attenuation_db_per_km > 0.0
                              ? spec.session.channel.length_km +
                                    spec.session.channel.extra_attenuation_db /
                                        spec.session.channel.attenuation_db_per_km
                              : spec.session.channel.length_km;
  for (double w : spec.windows)
    reports.push_back(qkdsim::report_for_window(record, w, distance));
  ensure_counts(reports);

  if (!events_path.empty()) {
    std::ostringstream os;
    qkdsim::io::write_events_csv(os, record.events);
    write_text(events_path, os.str());
  }
  if (!record_path.empty()) {
    std::ostringstream os;
    qkdsim::io::save_session_record(os, record, spec);
    write_text(record_path, os.str());
  }
  if (!key_path.empty()) {
    std::ostringstream os;
    qkdsim::io::write_sifted_key(os, qkdsim::sift(record, sift_window));
    write_text(key_path, os.str());
  }

  if (spec.format == qkdsim::OutputFormat::json) {
    nlohmann::ordered_json j = qkdsim::io::make_run_report(spec, "simulate");
    j["n_slots"] = record.n_slots;
    j["duration_s"] = record.duration_s;
    j["n_events"] = record.events.size();
    j["sync_period_s"] = record.sync_period_s;
    auto arr = nlohmann::ordered_json::array();
    for (const qkdsim::RateReport& r : reports) {
      nlohmann::ordered_json rj = qkdsim::io::report_json(r);
      const qkdsim::ErrorBudget budget = qkdsim::error_budget(record, r.window_fraction);
      rj["error_budget"] = {{"leak_rate", budget.leak_rate},
                            {"dark_rate", budget.dark_rate},
                            {"timing_rate", budget.timing_rate}};
      arr.push_back(rj);
    }
    j["reports"] = arr;
    write_text(spec.output_path, j.dump(2) + "\n");
  } else {
    write_text(spec.output_path, reports_text(spec, reports, "simulate"));
  }
  return 0;
}

int run_sweep_cmd(const CommonOpts& opts) {
  qkdsim::ExperimentSpec spec = load_spec(opts);
  const auto reports = qkdsim::run_sweep(spec);
  ensure_counts(reports);
  write_text(spec.output_path, reports_text(spec, reports, "sweep"));
  return 0;
}

int run_histogram_cmd(const CommonOpts& opts) {
  qkdsim::ExperimentSpec spec = load_spec(opts);
  const qkdsim::Histogram h = qkdsim::run_histogram(spec);
  if (spec.format == qkdsim::OutputFormat::json) {
    nlohmann::ordered_json j = qkdsim::io::make_run_report(spec, "histogram");
    j["bin_width_s"] = h.bin_width_s;
    j["period_s"] = h.period_s;
    j["collection_time_s"] = h.collection_time_s;
    j["ch0"] = h.ch0;
    j["ch1"] = h.ch1;
    write_text(spec.output_path, j.dump(2) + "\n");
  } else {
    std::ostringstream os;
    qkdsim::io::write_histogram_csv(os, h);
    write_text(spec.output_path, os.str());
  }
  return 0;
}

int run_attack_cmd(const CommonOpts& opts, std::optional<double> tolerance) {
  qkdsim::ExperimentSpec spec = load_spec(opts);
  if (tolerance) spec.attack_rate_tolerance = *tolerance;
  const qkdsim::AttackRunResult res = qkdsim::run_attack(spec);
  nlohmann::ordered_json j = qkdsim::io::make_run_report(spec, "attack");
  j["baseline_click_rate"] =
      static_cast<double>(res.baseline.events.size()) / res.baseline.duration_s;
  j["attacked_click_rate"] =
      static_cast<double>(res.attacked.events.size()) / res.attacked.duration_s;
  j["intercepted"] = res.outcome.intercepted;
  j["unambiguous"] = res.outcome.unambiguous;
  j["resent"] = res.outcome.resent;
  j["rate_ratio"] = res.outcome.rate_ratio;
  j["induced_qber_delta"] = res.outcome.induced_qber_delta;
  j["eve_information_fraction"] = res.outcome.eve_information_fraction;
  j["rate_tolerance"] = res.tolerance;
  j["verdict"] = res.verdict == qkdsim::AttackVerdict::suspect ? "suspect" : "clear";
  auto sample = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < res.outcome.eve_known_bits.size() && i < 32; ++i)
    sample.push_back({{"slot", res.outcome.eve_known_bits[i].first},
                      {"bit", res.outcome.eve_known_bits[i].second}});
  j["eve_known_bits_sample"] = sample;
  write_text(spec.output_path, j.dump(2) + "\n");
  return 0;
}

int run_optimize_cmd(const CommonOpts& opts) {
  qkdsim::ExperimentSpec spec = load_spec(opts);
  const qkdsim::OptimizeResult res = qkdsim::run_optimize(spec);
  if (spec.format == qkdsim::OutputFormat::csv) {
    std::ostringstream os;
    qkdsim::io::write_reports_csv(os, res.reports);
    os << "# best_window = " << res.best_window << "\n";
    write_text(spec.output_path, os.str());
  } else {
    nlohmann::ordered_json j = qkdsim::io::make_run_report(spec, "optimize-window");
    j["best_window"] = res.best_window;
    auto arr = nlohmann::ordered_json::array();
    for (const qkdsim::RateReport& r : res.reports) arr.push_back(qkdsim::io::report_json(r));
    j["reports"] = arr;
    write_text(spec.output_path, j.dump(2) + "\n");
  }
  return 0;
}

int run_tables_cmd(const CommonOpts& opts, const std::string& loss_model) {
  qkdsim::ExperimentSpec spec = load_spec(opts);
  const bool fitted = loss_model != "nominal";
  const auto reports = qkdsim::run_reference_tables(fitted, spec.duration_scale,
                                                    spec.session.seed, spec.threads);
  write_text(spec.output_path, reports_text(spec, reports, "tables"));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"qkdsim: photon-level Monte Carlo for a polarization encoded B92 QKD link"};
  app.require_subcommand(1);

  CommonOpts sim_opts;
  std::string events_path;
  std::string record_path;
  std::string key_path;
  double sift_window = 0.5;
  auto* sim = app.add_subcommand("simulate", "run one session and report rates per window");
  add_common(sim, sim_opts, false);
  sim->add_option("--events", events_path, "also write the detection-event CSV");
  sim->add_option("--record", record_path, "also write the full session record");
  sim->add_option("--sifted-key", key_path, "also write the sifted key");
  sim->add_option("--sift-window", sift_window, "window fraction for --sifted-key");

  CommonOpts sweep_opts;
  auto* sweep = app.add_subcommand("sweep", "rates and QBER over a distance ladder");
  add_common(sweep, sweep_opts, true);

  CommonOpts hist_opts;
  auto* hist = app.add_subcommand("histogram", "fold detections over one sync period");
  add_common(hist, hist_opts, false);

  CommonOpts attack_opts;
  std::optional<double> tolerance;
  auto* attack = app.add_subcommand("attack", "intercept-resend study with and without Eve");
  add_common(attack, attack_opts, false);
  attack->add_option("--tolerance", tolerance, "rate-monitoring tolerance for the verdict");

  CommonOpts opt_opts;
  auto* opt = app.add_subcommand("optimize-window", "scan window fractions for the best net rate");
  add_common(opt, opt_opts, false);

  CommonOpts tables_opts;
  std::string loss_model = "fitted";
  auto* tables = app.add_subcommand("tables",
                                    "reproduce the published 100 MHz / 1 GHz rate tables");
  add_common(tables, tables_opts, false);
  tables->add_option("--loss-model", loss_model, "fitted (from measured rates) or nominal")
      ->check(CLI::IsMember({"fitted", "nominal"}));

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed())
      return run_simulate(sim_opts, events_path, record_path, key_path, sift_window);
    if (sweep->parsed()) return run_sweep_cmd(sweep_opts);
    if (hist->parsed()) return run_histogram_cmd(hist_opts);
    if (attack->parsed()) return run_attack_cmd(attack_opts, tolerance);
    if (opt->parsed()) return run_optimize_cmd(opt_opts);
    if (tables->parsed()) return run_tables_cmd(tables_opts, loss_model);
  } catch (const qkdsim::config_error& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 1;
  } catch (const qkdsim::io_error& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return 2;
  } catch (const qkdsim::no_counts_error& e) {
    std::cerr << "undefined statistic: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
