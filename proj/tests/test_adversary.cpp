#include <doctest.h>

#include <cmath>
#include <vector>

#include "qkdsim/adversary.hpp"
#include "qkdsim/analytics.hpp"
#include "qkdsim/bitseq.hpp"
#include "qkdsim/experiment.hpp"
#include "qkdsim/protocol.hpp"

using namespace qkdsim;

namespace {

constexpr double usd_success_45 = 0.29289321881345254;  // 1 - cos(45 deg)

ExperimentSpec attack_spec(double original_loss_db, double substitute_loss_db,
                           double collection_s, std::uint64_t seed) {
  ExperimentSpec spec = default_experiment(SequenceKind::word8);
  spec.session.clock_hz = 1e9;
  spec.session.source.clock_frequency_hz = 1e9;
  spec.session.collection_time_s = collection_s;
  spec.session.seed = seed;
  spec.session.source.fixed_photon_number = true;
  spec.session.source.mean_photon_number = 1.0;
  spec.session.channel.extra_attenuation_db = original_loss_db;
  spec.session.channel.dispersion_ps_per_nm_km = 0.0;
  spec.session.receiver.pbs_extinction = 0.0;
  spec.session.receiver.insertion_loss_db = 0.0;
  for (DetectorParams& d : spec.session.receiver.detectors) {
    d.efficiency = 1.0;
    d.dark_rate_hz = 0.0;
    d.jitter_fwhm_s = 0.0;
    d.dead_time_s = 0.0;
  }
  spec.session.attack.enabled = true;
  spec.session.attack.substitute_loss_db = substitute_loss_db;
  return spec;
}

}  // namespace

TEST_CASE("usd_measure: success probability at 45 degrees") {
  AttackConfig cfg;
  CounterRng rng(41, 0);
  const int n = 1000000;
  int conclusive = 0;
  for (int i = 0; i < n; ++i)
    conclusive += usd_measure(i % 2 ? 45.0 : 0.0, cfg, rng) != UsdOutcome::inconclusive;
  const double sigma = std::sqrt(usd_success_45 * (1.0 - usd_success_45) / n);
  CHECK(std::fabs(static_cast<double>(conclusive) / n - usd_success_45) < 3.5 * sigma);
}

TEST_CASE("usd_measure: conclusive outcomes are never wrong") {
  AttackConfig cfg;
  CounterRng rng(42, 0);
  for (int i = 0; i < 200000; ++i) {
    const int bit = i % 2;
    const UsdOutcome o = usd_measure(bit ? 45.0 : 0.0, cfg, rng);
    if (o == UsdOutcome::inconclusive) continue;
    REQUIRE(static_cast<int>(o) == bit);
  }
}

TEST_CASE("usd_measure: orthogonal states are always conclusive") {
  AttackConfig cfg;
  cfg.theta_deg = 90.0;
  cfg.angle_bit1_deg = 90.0;
  CounterRng rng(43, 0);
  for (int i = 0; i < 10000; ++i)
    CHECK(usd_measure(i % 2 ? 90.0 : 0.0, cfg, rng) != UsdOutcome::inconclusive);
}

TEST_CASE("apply_attack: vacuum passes, inconclusive blocks, conclusive resends") {
  AttackConfig cfg;
  cfg.enabled = true;
  std::vector<Pulse> pulses;
  SourceParams sp;
  sp.fixed_photon_number = true;
  sp.mean_photon_number = 1.0;
  for (int i = 0; i < 100000; ++i) {
    CounterRng rng(44, i, rng_domain::slot_detail);
    pulses.push_back(emit_pulse(i % 2, i, sp, rng));
  }
  pulses[0].photon_offsets_s.clear();  // one vacuum pulse
  const auto [forwarded, outcome] = apply_attack(pulses, cfg, 44);
  CHECK(outcome.intercepted == pulses.size() - 1);
  CHECK(outcome.resent == outcome.unambiguous);
  CHECK(forwarded[0].empty());
  std::size_t nonempty = 0;
  for (std::size_t i = 0; i < forwarded.size(); ++i) {
    if (forwarded[i].empty()) continue;
    ++nonempty;
    REQUIRE(forwarded[i].eve_resent);
    REQUIRE(forwarded[i].photon_offsets_s.size() == 1);
    // Resent photons keep the measured timing and carry the exact state.
    REQUIRE(forwarded[i].bit == pulses[i].bit);
    REQUIRE(forwarded[i].polarization_deg ==
            doctest::Approx(pulses[i].bit ? 45.0 : 0.0));
  }
  CHECK(nonempty == outcome.resent);
  const double frac = static_cast<double>(nonempty) / static_cast<double>(pulses.size() - 1);
  CHECK(frac == doctest::Approx(usd_success_45).epsilon(0.02));
}

TEST_CASE("apply_attack: a degenerate state separation forwards nothing") {
  AttackConfig cfg;
  cfg.enabled = true;
  cfg.theta_deg = 0.0;
  SourceParams sp;
  sp.fixed_photon_number = true;
  sp.mean_photon_number = 1.0;
  std::vector<Pulse> pulses;
  for (int i = 0; i < 10000; ++i) {
    CounterRng rng(45, i, rng_domain::slot_detail);
    pulses.push_back(emit_pulse(i % 2, i, sp, rng));
  }
  const auto [forwarded, outcome] = apply_attack(pulses, cfg, 45);
  CHECK(outcome.unambiguous == 0);
  for (const Pulse& p : forwarded) CHECK(p.empty());
}

TEST_CASE("run_attack: lossless substitution over a lossless line") {
  const ExperimentSpec spec = attack_spec(0.0, 0.0, 1e-3, 46);
  const AttackRunResult res = run_attack(spec);
  // Bob's arrival rate drops to the conclusive fraction; Eve induces no
  // polarization errors, so the QBER shift is statistical noise only.
  CHECK(res.outcome.rate_ratio == doctest::Approx(usd_success_45).epsilon(0.02));
  const WindowStats base = window_stats(res.baseline, 1.0);
  const WindowStats att = window_stats(res.attacked, 1.0);
  const double sigma = std::sqrt(qber(base) * (1 - qber(base)) / base.total() +
                                 qber(att) * (1 - qber(att)) / att.total() + 1e-12);
  CHECK(std::fabs(res.outcome.induced_qber_delta) <= 3.5 * sigma + 1e-9);
  CHECK(res.verdict == AttackVerdict::suspect);
  // Under full interception Eve knows every bit of the sifted key.
  CHECK(res.outcome.eve_information_fraction == doctest::Approx(1.0));
}

TEST_CASE("run_attack: channel substitution masks the rate signature") {
  // Original loss beyond 10*log10(1/(1-cos45)) = 5.33 dB: Eve's lossless
  // substitute more than compensates her inconclusive losses.
  const ExperimentSpec spec = attack_spec(6.0, 0.0, 2e-3, 47);
  const AttackRunResult res = run_attack(spec);
  const double expected = usd_success_45 / transmittance_from_db(6.0);
  CHECK(expected > 1.0);
  CHECK(res.outcome.rate_ratio == doctest::Approx(expected).epsilon(0.05));
  CHECK(res.verdict == AttackVerdict::clear);
}

TEST_CASE("run_attack: rate ratio follows the substitution transmittance") {
  const ExperimentSpec spec = attack_spec(3.0, 2.0, 2e-3, 48);
  const AttackRunResult res = run_attack(spec);
  const double expected =
      usd_success_45 * transmittance_from_db(2.0) / transmittance_from_db(3.0);
  CHECK(res.outcome.rate_ratio == doctest::Approx(expected).epsilon(0.05));
}

TEST_CASE("detect_attack verdicts") {
  CHECK(detect_attack(18278.0, 5355.0, 0.1) == AttackVerdict::suspect);
  CHECK(detect_attack(18278.0, 18278.0, 0.1) == AttackVerdict::clear);
  CHECK(detect_attack(100.0, 95.0, 0.1) == AttackVerdict::clear);
  CHECK(detect_attack(100.0, 89.9, 0.1) == AttackVerdict::suspect);
  CHECK_THROWS_AS(detect_attack(0.0, 1.0, 0.1), std::invalid_argument);
}
