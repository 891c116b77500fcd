#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "qkdlink/optics.hpp"
#include "qkdlink/protocol.hpp"
#include "qkdlink/stabilizer.hpp"

namespace qkdlink {

/// Receiver outcome for one slot. At most one event per slot: double clicks
/// are resolved to a random bit and `detector` holds the resolved port.
struct DetectionEvent {
  std::uint64_t slot_index = 0;
  std::uint8_t detector = 0;
  Basis rx_basis = Basis::X;
  /// Emitted photon number. Only the Monte Carlo knows it; analysis code must
  /// not read it.
  std::uint32_t true_photon_number = 0;

  friend bool operator==(const DetectionEvent&, const DetectionEvent&) = default;
};

struct TallyCell {
  double sent = 0.0;
  double clicks = 0.0;
  double errors = 0.0;

  friend bool operator==(const TallyCell&, const TallyCell&) = default;
};

/// Counts per (intensity, tx basis, rx basis). Integer Monte Carlo counts are
/// stored as doubles, exact up to 2^53; analytic runs store expected counts.
class Tallies {
 public:
  TallyCell& cell(Intensity i, Basis tx, Basis rx) { return cells_[slot(i, tx, rx)]; }
  const TallyCell& cell(Intensity i, Basis tx, Basis rx) const {
    return cells_[slot(i, tx, rx)];
  }

  double duration_s = 0.0;
  double pulses_total = 0.0;

  /// Adds counts, duration and pulse totals. Associative and commutative.
  Tallies& merge(const Tallies& other);

  /// Every count multiplied by `factor` (duration too).
  Tallies scaled(double factor) const;

  double total_sent() const;
  double total_clicks() const;

  /// errors <= clicks <= sent in every cell and sum(sent) == pulses_total,
  /// with `rel_tol` slack for expected-value tallies.
  bool conserved(double rel_tol = 0.0) const;

  friend bool operator==(const Tallies&, const Tallies&) = default;

 private:
  static constexpr std::size_t slot(Intensity i, Basis tx, Basis rx) {
    return index(i) * 4 + index(tx) * 2 + index(rx);
  }
  std::array<TallyCell, 12> cells_{};
};

/// Expected counts over `duration_s` from the closed-form rate model.
Tallies run_analytic(const ProtocolParams& params, const LinkModel& link,
                     double duration_s = 1.0, double timing_offset_ps = 0.0);

/// Photon-number tagged counts, for checking decoy bounds against the truth.
struct PhotonTagStats {
  std::array<TallyCell, 12> single{};  ///< slots that emitted exactly one photon
  std::array<TallyCell, 12> empty{};   ///< slots that emitted none

  PhotonTagStats& merge(const PhotonTagStats& other);

  /// Single-photon yield in matched `basis`, pooled over intensities.
  double y1(Basis basis) const;
  /// Single-photon error rate in matched `basis`; NaN when there are no clicks.
  double e1(Basis basis) const;
  double y0(Basis basis) const;
};

struct MonteCarloConfig {
  std::uint64_t n_slots = 1'000'000;
  std::uint64_t seed = 0;
  DriftProfile drift;
  bool stabilized = false;
  double initial_delay_ps = 0.0;
  /// Slots between stabilizer updates (10 ms at 1 GHz).
  std::uint64_t control_interval_slots = 10'000'000;
  bool record_events = false;
  /// Worker threads per control interval; 0 picks hardware concurrency.
  unsigned threads = 0;
};

struct TimingSample {
  double t_s = 0.0;
  double drift_ps = 0.0;
  double delay_ps = 0.0;
  StepStatus status = StepStatus::InsufficientCounts;
};

struct MonteCarloResult {
  Tallies tallies;
  std::vector<DetectionEvent> events;
  /// Transmitter record for every slot that produced an event, same order.
  std::vector<Symbol> tx_record;
  PhotonTagStats tags;
  std::vector<TimingSample> timing;
};

/// Slot-by-slot simulation. The outcome of slot i depends only on
/// (seed, i, receiver delay), so results do not depend on `threads`.
/// Control intervals run in order because each stabilizer update feeds the
/// next interval's delay.
MonteCarloResult run_montecarlo(const ProtocolParams& params, const LinkModel& link,
                                const MonteCarloConfig& config);

struct StabilityConfig {
  double duration_s = 1e4;
  double interval_s = 1.0;
  DriftProfile drift;
  bool stabilized = true;
  std::uint64_t seed = 0;
  double initial_delay_ps = 0.0;
  double histogram_bin_ps = 10.0;
};

struct StabilityInterval {
  double t_start_s = 0.0;
  double drift_ps = 0.0;
  double delay_ps = 0.0;  ///< delay in force during the interval
  Tallies tallies;
  StepStatus status = StepStatus::InsufficientCounts;

  double residual_ps() const { return drift_ps - delay_ps; }
};

/// Long-duration run stepped per control interval. Each interval's counts are
/// Poisson-sampled from the analytic model at the current timing residual and
/// the stabilizer sees a sampled free-running arrival histogram.
std::vector<StabilityInterval> run_stability(const ProtocolParams& params,
                                             const LinkModel& link,
                                             const StabilityConfig& config);

}  // namespace qkdlink
