#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "qkdlink/config.hpp"
#include "qkdlink/keyrate.hpp"

namespace qkdlink {

/// One CSV row of a sweep, fibre point or finite-key run. Bidirectional rows
/// hold combined values: rates summed over both directions, QBER over the
/// pooled X-basis signal bits.
struct PointRow {
  double channel_db = 0.0;
  Direction direction = Direction::Bidirectional;
  double raw_bps = 0.0;
  double qber = 0.0;
  double skr_asymptotic_bps = 0.0;
  double skr_finite_bps = 0.0;
  std::string reason;  ///< empty when both rates are positive
  std::uint64_t n_slots = 0;  ///< Monte Carlo slots per direction, 0 for analytic
  std::vector<KeyRateReport> reports;  ///< one per direction
};

inline constexpr const char* kPointCsvHeader =
    "channel_db,direction,raw_bps,qber,skr_asymptotic_bps,skr_finite_bps,reason";

/// Evaluates every point of a sweep_db, fiber_point or finite_key experiment,
/// in sweep order. Points run on up to `threads` workers. Warnings (capped
/// Monte Carlo slot counts) are appended to `warnings`.
std::vector<PointRow> compute_points(const Config& config,
                                     std::vector<std::string>* warnings = nullptr);

std::string point_csv(const std::vector<PointRow>& rows);

/// Stability run as CSV with 1 s and 60 s aggregated rows, header
/// "t_s,window_s,drift_ps,delay_ps,residual_ps,raw_bps,qber,qber_minority,skr_asymptotic_bps,stabilizer".
std::string stability_csv(const Config& config);

/// Per-circuit loss table with a total row per circuit, header
/// "circuit,component,loss_db".
std::string loss_budget_csv(const Config& config);

struct RunResult {
  int exit_code = 0;
  std::vector<std::string> diagnostics;
  std::vector<std::filesystem::path> written;
};

/// Validates the config, runs the experiment and writes the CSV at
/// experiment.output_path plus "<output>.manifest" (every parameter and seed;
/// the timestamp sits alone on the second line) and, for point modes,
/// "<output>.reports.jsonl". Exit code 2 on invalid config, with nothing
/// written; 1 on I/O failure.
RunResult run_experiment(const Config& config);

}  // namespace qkdlink
