#pragma once

#include <cstdint>

#include "qkdlink/engine.hpp"
#include "qkdlink/optics.hpp"
#include "qkdlink/protocol.hpp"

namespace qkdlink {

/// Fits a link to a measured operating point.
///
/// Keeps every receiver and detector setting of `base` and solves the analytic
/// model for the two unknowns a field measurement pins down: the channel loss
/// (from the X-basis signal raw rate) and an extra per-detector background
/// (from the signal QBER above the optical floor). The channel is returned in
/// emulated-dB form. Throws std::invalid_argument when the point is out of
/// reach, e.g. a QBER below the intrinsic error or a rate above the 0 dB rate.
LinkModel calibrate_to_measurement(const ProtocolParams& params, const LinkModel& base,
                                   double raw_bps, double qber);

/// Expected tallies for a block that holds `block_events` X-basis signal
/// detections, i.e. `block_events` raw key bits.
Tallies tallies_for_block(const ProtocolParams& params, const LinkModel& link,
                          double block_events);

struct SlotChoice {
  std::uint64_t n_slots = 0;
  /// Predicted relative standard error of the asymptotic rate at n_slots.
  double predicted_rel_error = 0.0;
  /// True when the target needs more than the cap, or there is no key to aim at.
  bool capped = false;
};

/// Smallest Monte Carlo slot count whose asymptotic-rate standard error,
/// propagated from the binomial spread of the X-basis gains and error rates,
/// is below `target_rel_error`.
SlotChoice choose_slot_count(const ProtocolParams& params, const LinkModel& link,
                             double target_rel_error = 0.05,
                             std::uint64_t cap = 1'000'000'000);

}  // namespace qkdlink
