#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "qkdlink/rng.hpp"

namespace qkdlink {

enum class DriftKind { None, Linear, RandomWalk, Sinusoid };

std::string_view to_string(DriftKind kind);
DriftKind parse_drift_kind(std::string_view s);

/// Slow change of photon arrival time at the receiver, e.g. from thermal
/// expansion of a fibre spool.
struct DriftProfile {
  DriftKind kind = DriftKind::None;
  double rate_ps_per_s = 0.0;    ///< Linear
  double amplitude_ps = 0.0;     ///< Sinusoid
  double period_s = 0.0;         ///< Sinusoid
  double walk_sigma_ps = 0.0;    ///< RandomWalk: std-dev per knot step
  double walk_step_s = 1.0;      ///< RandomWalk: knot spacing
  std::uint64_t seed = 0;

  static DriftProfile none() { return {}; }
  static DriftProfile linear(double rate_ps_per_s);
  static DriftProfile sinusoid(double amplitude_ps, double period_s);
  static DriftProfile random_walk(double sigma_ps, double step_s, std::uint64_t seed);

  void validate() const;
};

/// Profiles used when checking the stabilizer: 1 ps/s linear, 50 ps / 600 s
/// sinusoid, and a 2 ps-per-second random walk.
std::vector<DriftProfile> default_drift_profiles();

/// Arrival-time offset in ps at time t. Continuous in t and deterministic
/// given the profile (random walks interpolate linearly between seeded knots).
double drift_offset(const DriftProfile& profile, double t_s);

/// Detection arrival times folded onto one clock period.
struct ArrivalHistogram {
  double origin_ps = 0.0;
  double bin_width_ps = 10.0;
  double period_ps = 1000.0;
  std::vector<std::uint64_t> counts;

  /// Empty histogram of ceil(period / bin) bins starting at `origin_ps`.
  static ArrivalHistogram covering(double period_ps, double bin_width_ps,
                                   double origin_ps);

  void add(double arrival_ps, std::uint64_t n = 1);
  std::uint64_t total() const;
  double bin_center(std::size_t i) const;
  ArrivalHistogram& merge(const ArrivalHistogram& other);
};

enum class StepStatus { Moved, Deadband, InsufficientCounts };

std::string_view to_string(StepStatus s);

struct StabilizerStep {
  double delay_ps = 0.0;
  double peak_ps = 0.0;
  StepStatus status = StepStatus::InsufficientCounts;
};

/// One iteration of the lock-on loop: estimate the arrival peak and move the
/// receiver delay one `step_ps` increment toward it, unless it is already
/// within `deadband_ps`.
///
/// Throws std::invalid_argument if the histogram does not cover one full
/// period or its bins are wider than 10 ps.
StabilizerStep stabilize_step(const ArrivalHistogram& histogram,
                              double current_delay_ps, double step_ps = 10.0,
                              double deadband_ps = 5.0);

/// Wraps x into [-period/2, period/2).
double wrap_centered(double x, double period);

/// Poisson-sampled histogram for a Gaussian arrival peak over a flat
/// background, as seen by free-running detectors during one control interval.
ArrivalHistogram sample_arrival_histogram(CounterRng& rng, double period_ps,
                                          double bin_width_ps,
                                          double signal_counts, double peak_ps,
                                          double sigma_ps,
                                          double background_counts);

}  // namespace qkdlink
