// Acceptance checks. Prints one PASS/FAIL line per check and exits non-zero
// if any check fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "qkdlink/calibration.hpp"
#include "qkdlink/config.hpp"
#include "qkdlink/engine.hpp"
#include "qkdlink/experiment.hpp"
#include "qkdlink/keyrate.hpp"
#include "qkdlink/sifting.hpp"

using namespace qkdlink;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(bool ok, const std::string& id, const std::string& detail) {
  std::printf("%s %s: %s\n", ok ? "PASS" : "FAIL", id.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void check_within(const std::string& id, double value, double target, double rel_tol,
                  const char* unit) {
  const double lo = target * (1 - rel_tol), hi = target * (1 + rel_tol);
  report(value >= lo && value <= hi, id,
         fmt("%.6g %s, expected %.6g %s +/- %.0f%% [%.6g, %.6g]", value, unit, target, unit,
             rel_tol * 100, lo, hi));
}

// Combined row of one analytic point with the default configuration.
PointRow analytic_point(double db, Direction direction, double* elapsed_s) {
  Config c;
  c.experiment.seed = 1;
  c.experiment.direction = direction;
  c.experiment.sweep_start_db = c.experiment.sweep_stop_db = db;
  c.experiment.threads = 1;
  const auto t0 = std::chrono::steady_clock::now();
  auto rows = compute_points(c);
  *elapsed_s = seconds_since(t0);
  return rows.at(0);
}

void table_regression() {
  double worst = 0, t = 0;
  struct Case {
    const char* id;
    double db;
    double target;
    double tol;
  };
  for (const Case& k : {Case{"1a.skr_10db_bidirectional", 10.0, 1.82e6, 0.25},
                        Case{"1b.skr_50km_bidirectional", 9.3, 2.37e6, 0.25},
                        Case{"1c.skr_180km_bidirectional", 31.3, 14.1e3, 0.30}}) {
    const auto row = analytic_point(k.db, Direction::Bidirectional, &t);
    worst = std::max(worst, t);
    check_within(k.id, row.skr_asymptotic_bps, k.target, k.tol, "bps");
  }
  const auto row = analytic_point(44.0, Direction::Unidirectional, &t);
  worst = std::max(worst, t);
  check_within("1d.skr_250km_unidirectional", row.skr_asymptotic_bps, 186, 0.20, "bps");
  report(row.qber >= 0.030 && row.qber <= 0.048, "1e.qber_250km",
         fmt("%.4f%%, expected [3.0%%, 4.8%%]", row.qber * 100));
  report(worst < 1.0, "1f.runtime_per_point", fmt("max %.4f s, limit 1 s", worst));
}

void finite_key_regression() {
  const ProtocolParams p;
  const auto t0 = std::chrono::steady_clock::now();
  const Config c;
  const auto link = calibrate_to_measurement(p, c.link(Direction::Unidirectional, ChannelSpec::emulated(0)),
                                             1120.0, 0.0389);
  const auto f = finite_key_length(tallies_for_block(p, link, 1.04e7), p);
  const double elapsed = seconds_since(t0);
  check_within("2a.finite_key_250km_block_1.04e7", f.length_bits, 623e3, 0.25, "bits");
  report(elapsed < 1.0, "2b.runtime", fmt("%.4f s, limit 1 s", elapsed));
}

void shape_checks() {
  const ProtocolParams p;
  const Config c;
  for (Direction d : {Direction::Bidirectional, Direction::Unidirectional}) {
    const std::string tag(to_string(d));
    bool monotone = true;
    double prev = INFINITY, at43 = 0, at50 = 0;
    for (int db = 0; db <= 50; ++db) {
      const double r =
          evaluate_key_rate(run_analytic(p, c.link(d, ChannelSpec::emulated(db))), p).skr_asymptotic_bps;
      if (r > prev) monotone = false;
      prev = r;
      if (db == 43) at43 = r;
      if (db == 50) at50 = r;
    }
    report(monotone, "3a.monotone_0_50db_" + tag, "SKR non-increasing in 1 dB steps");
    report(at43 > 0, "3b.positive_at_43db_" + tag, fmt("%.6g bps per direction", at43));
    report(at50 == 0, "3c.zero_by_50db_" + tag, fmt("%.6g bps per direction", at50));
  }
}

void oracle_equivalence() {
  const ProtocolParams p;
  const Config cfg;
  for (double db : {10.0, 20.0, 30.0}) {
    const auto link = cfg.link(Direction::Bidirectional, ChannelSpec::emulated(db));
    MonteCarloConfig c;
    c.n_slots = 100'000'000;
    c.seed = 1000 + static_cast<std::uint64_t>(db);
    const auto t0 = std::chrono::steady_clock::now();
    const auto mc = run_montecarlo(p, link, c);
    const double elapsed = seconds_since(t0);
    const auto an = run_analytic(p, link, mc.tallies.duration_s);
    const auto gm = gains_from_tallies(mc.tallies, BasisSelection::X);
    const auto ga = gains_from_tallies(an, BasisSelection::X);
    const std::string at = fmt("%gdb", db);
    auto zq = [&](int i) {
      const double q = ga[i]->q;
      return (gm[i]->q - q) / std::sqrt(q * (1 - q) / gm[i]->sent);
    };
    const double z_mu = zq(0), z_nu = zq(1);
    const double e = *ga[0]->e;
    const double z_e = (*gm[0]->e - e) / std::sqrt(e * (1 - e) / gm[0]->clicks);
    report(std::fabs(z_mu) < 5, "4a.q_mu_" + at,
           fmt("MC %.6e vs analytic %.6e, z = %+.2f", gm[0]->q, ga[0]->q, z_mu));
    report(std::fabs(z_nu) < 5, "4b.q_nu_" + at,
           fmt("MC %.6e vs analytic %.6e, z = %+.2f", gm[1]->q, ga[1]->q, z_nu));
    report(std::fabs(z_e) < 5, "4c.e_mu_" + at,
           fmt("MC %.6f vs analytic %.6f, z = %+.2f", *gm[0]->e, e, z_e));
    report(elapsed <= 60, "4d.runtime_" + at, fmt("%.2f s for 1e8 slots, limit 60 s", elapsed));
  }
}

void bound_validity() {
  const ProtocolParams p;
  std::mt19937_64 gen(20240611);
  std::uniform_real_distribution<double> u(0, 1);
  constexpr int kRuns = 24;
  int ok = 0;
  std::string worst;
  for (int run = 0; run < kRuns; ++run) {
    Config cfg;
    cfg.visibility = 0.95 + 0.05 * u(gen);
    cfg.detector.dark_rate_hz = 1000 * u(gen);
    const double db = 40 * u(gen);
    const auto d = run % 2 ? Direction::Bidirectional : Direction::Unidirectional;
    MonteCarloConfig c;
    c.n_slots = 10'000'000;
    c.seed = 500 + run;
    const auto r = run_montecarlo(p, cfg.link(d, ChannelSpec::emulated(db)), c);
    bool held = true;
    for (Basis b : kBases) {
      const auto bounds = finite_decoy_bounds(r.tallies, p, b);
      const double y1 = r.tags.y1(b), e1 = r.tags.e1(b);
      if (bounds.y1_lower > y1) held = false;
      if (!std::isnan(e1) && bounds.e1_upper < e1) held = false;
    }
    if (held) ++ok;
    else worst += fmt(" run %d (%.1f dB, V %.4f, dark %.0f Hz)", run, db, cfg.visibility,
                      cfg.detector.dark_rate_hz);
  }
  report(ok == kRuns, "5.bound_validity",
         fmt("%d/%d randomized runs hold Y1_lower <= Y1 and e1_upper >= e1 in both bases", ok,
             kRuns) + worst);
}

void stabilization() {
  const ProtocolParams p;
  const Config cfg;
  const auto link = cfg.link(Direction::Unidirectional, ChannelSpec::emulated(10));
  const double q0 = sifted_from_tallies(run_analytic(p, link, 1.0)).qber_majority;

  StabilityConfig c;
  c.duration_s = 1e4;
  c.drift = DriftProfile::linear(1.0);
  c.seed = 11;
  const auto closed = run_stability(p, link, c);
  double worst = 0;
  Tallies all;
  for (const auto& i : closed) {
    all.merge(i.tallies);
    if (i.t_start_s >= 100) worst = std::max(worst, std::fabs(i.residual_ps()));
  }
  const double q = sifted_from_tallies(all).qber_majority;
  report(worst <= 10, "6a.closed_loop_offset",
         fmt("max |offset| %.2f ps after 100 s settling, limit 10 ps", worst));
  report(std::fabs(q - q0) <= 0.002, "6b.closed_loop_qber",
         fmt("%.4f%% vs drift-free %.4f%%, limit 0.2 pp", q * 100, q0 * 100));

  c.stabilized = false;
  double first = -1, peak = 0;
  for (const auto& i : run_stability(p, link, c)) {
    const double qi = sifted_from_tallies(i.tallies).qber_majority;
    peak = std::max(peak, qi);
    if (first < 0 && qi > 0.05) first = i.t_start_s;
  }
  report(first >= 0, "6c.open_loop_qber",
         fmt("peak %.2f%%, first above 5%% at t = %.0f s", peak * 100, first));
}

void loss_budget() {
  const double total = total_insertion_loss(default_receiver_budget());
  report(total >= 7.6 && total <= 8.1, "7a.default_budget",
         fmt("%.4f dB, expected [7.6, 8.1]", total));
  const double empty = total_insertion_loss(std::vector<ComponentLoss>{});
  report(empty == 0.0, "7b.empty_budget", fmt("%g dB", empty));
}

std::string data_rows(const fs::path& csv) {
  std::ifstream in(csv);
  std::string header, rest;
  std::getline(in, header);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void determinism() {
  const fs::path dir = fs::temp_directory_path() / "qkdlink-acceptance";
  fs::remove_all(dir);
  fs::create_directories(dir);

  Config sweep;
  sweep.experiment.seed = 77;

  Config mc = sweep;
  mc.experiment.engine = EngineKind::MonteCarlo;
  mc.experiment.sweep_start_db = 10;
  mc.experiment.sweep_stop_db = 40;
  mc.experiment.sweep_step_db = 10;
  mc.experiment.n_slots = 5'000'000;

  Config stab = sweep;
  stab.experiment.mode = Mode::StabilityRun;
  stab.experiment.duration_s = 600;
  stab.stability.drift = DriftProfile::random_walk(2.0, 1.0, 3);

  Config fk = sweep;
  fk.experiment.mode = Mode::FiniteKey;
  fk.experiment.block_events = 1e7;

  Config budget = sweep;
  budget.experiment.mode = Mode::LossBudget;

  const std::pair<const char*, Config*> runs[] = {
      {"sweep_db", &sweep}, {"sweep_db_montecarlo", &mc}, {"stability_run", &stab},
      {"finite_key", &fk}, {"loss_budget", &budget}};
  for (auto [name, cfg] : runs) {
    std::string rows[2];
    bool ran = true;
    for (int k = 0; k < 2; ++k) {
      const auto out = dir / fmt("%s_%d.csv", name, k);
      cfg->experiment.output_path = out.string();
      ran = ran && run_experiment(*cfg).exit_code == 0;
      rows[k] = data_rows(out);
    }
    report(ran && !rows[0].empty() && rows[0] == rows[1], std::string("8.determinism_") + name,
           fmt("%zu bytes of data rows, identical across two runs with seed 77", rows[0].size()));
  }
  fs::remove_all(dir);
}

}  // namespace

int main() {
  table_regression();
  finite_key_regression();
  shape_checks();
  oracle_equivalence();
  bound_validity();
  stabilization();
  loss_budget();
  determinism();
  std::printf("%s: %d check(s) failed\n", failures ? "FAILED" : "ALL PASSED", failures);
  return failures ? 1 : 0;
}
