#pragma once

#include <array>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>

#include "qkdlink/engine.hpp"
#include "qkdlink/protocol.hpp"

namespace qkdlink {

/// Transmitter record and detection events disagree about a slot.
class MisalignmentError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SiftCell {
  double sifted_bits = 0.0;
  double error_bits = 0.0;
};

/// Matched-basis statistics per (intensity, basis).
///
/// qber_majority / qber_minority are the signal-intensity error rates in X and
/// Y. raw_bit_rate counts X-basis signal bits only; decoy and vacuum bits are
/// kept for estimation.
struct SiftedStats {
  std::array<SiftCell, 6> cells{};
  double duration_s = 0.0;
  double raw_bit_rate = 0.0;
  double qber_majority = 0.0;
  double qber_minority = 0.0;

  SiftCell& at(Intensity i, Basis b) { return cells[index(i) * 2 + index(b)]; }
  const SiftCell& at(Intensity i, Basis b) const { return cells[index(i) * 2 + index(b)]; }

  /// Adds counts and durations, then recomputes the derived rates.
  SiftedStats& merge(const SiftedStats& other);
  void finalize();
};

/// Basis sifting of an event stream against the transmitter's record.
///
/// `tx_record` must be sorted by slot and contain every slot that appears in
/// `events`; it may contain extra slots. Event order does not matter.
/// Throws MisalignmentError for an event without a transmitter entry or for
/// two events in one slot.
SiftedStats sift(std::span<const Symbol> tx_record,
                 std::span<const DetectionEvent> events, double duration_s);

/// The same statistics read from aggregate counts.
SiftedStats sifted_from_tallies(const Tallies& tallies);

/// Probability that a slot is kept in the majority basis: P(X)^2.
double sifting_factor(const ProtocolParams& params);

struct Gain {
  double q = 0.0;
  std::optional<double> e;  ///< absent when there were no clicks
  double sent = 0.0;
  double clicks = 0.0;
  double errors = 0.0;
};

enum class BasisSelection { Matched, X, Y };

/// Per-intensity gains; an intensity with nothing sent is absent.
using Gains = std::array<std::optional<Gain>, 3>;

/// Q = clicks / sent and E = errors / clicks over the selected matched-basis
/// cells, in double precision.
Gains gains_from_tallies(const Tallies& tallies,
                         BasisSelection selection = BasisSelection::Matched);

}  // namespace qkdlink
