#pragma once

#include <span>
#include <string_view>
#include <vector>

namespace qkdlink {

enum class LossKind { FibreSiNFacet, SiNInPFacet, SiNPropagation, InPSection };

std::string_view to_string(LossKind kind);
LossKind parse_loss_kind(std::string_view s);

/// One contribution to the receiver's fibre-to-fibre insertion loss.
struct ComponentLoss {
  LossKind kind = LossKind::InPSection;
  double loss_db = 0.0;
  double length_cm = 0.0;  ///< propagation sections only

  /// Throws std::invalid_argument on negative loss.
  static ComponentLoss fixed(LossKind kind, double loss_db);
  static ComponentLoss propagation(double db_per_cm, double length_cm);
};

/// Average receiver circuit: two fibre-SiN facets (0.66 dB each), two SiN-InP
/// facets (0.90 dB each), 10 cm of SiN delay line at 0.14 dB/cm and a 3.5 dB
/// InP modulator section. Sums to 8.02 dB.
std::vector<ComponentLoss> default_receiver_budget();

double total_insertion_loss(std::span<const ComponentLoss> budget);

struct ChannelSpec {
  enum class Mode { EmulatedDb, FiberKm };

  Mode mode = Mode::EmulatedDb;
  double attenuation_db = 0.0;
  double length_km = 0.0;
  double fiber_loss_db_per_km = 0.176;

  static ChannelSpec emulated(double db);
  static ChannelSpec fiber(double km, double db_per_km = 0.176);

  double loss_db() const;
  void validate() const;
};

double channel_transmittance(const ChannelSpec& spec);

struct DetectorSpec {
  double efficiency = 0.85;
  double dark_rate_hz = 100.0;
  double gate_width_ps = 300.0;
  int count = 2;
};

/// Everything between the transmitter output and a detector click.
struct LinkModel {
  std::vector<ComponentLoss> receiver_budget = default_receiver_budget();
  ChannelSpec channel;
  DetectorSpec detector;
  double visibility = 0.9868;
  /// Fraction of receiver-AMZI output flux in the interfering (central) bin.
  double central_bin_fraction = 0.5;
  /// Background from the counter-propagating circuit, per detector.
  double crosstalk_rate_hz = 0.0;
  /// Flat QBER increment from electrical cross-talk.
  double crosstalk_qber_delta = 0.0;
  /// Unattributed background per detector (stray light); set by calibration.
  double extra_background_hz = 0.0;
  /// Width of the Gaussian gate-overlap factor.
  double timing_sigma_ps = 60.0;

  /// Cross-talk free link, as when only one circuit is running.
  static LinkModel unidirectional(ChannelSpec channel);
  /// Link with the other direction's cross-talk enabled.
  static LinkModel bidirectional(ChannelSpec channel);

  /// Throws std::invalid_argument naming the offending field.
  void validate(double clock_period_ps) const;

  double receiver_loss_db() const { return total_insertion_loss(receiver_budget); }
};

/// exp(-offset^2 / (2 sigma^2)).
double gate_overlap(double offset_ps, double sigma_ps);

/// Chained efficiency from transmitter output to a detector click, per photon.
double system_efficiency(const LinkModel& link, double timing_offset_ps = 0.0);

/// Visibility with the cross-talk QBER increment folded in:
/// (1 - V_eff)/2 = (1 - V)/2 + crosstalk_qber_delta.
double effective_visibility(const LinkModel& link);

/// Intrinsic error probability of a signal click in matched bases.
double intrinsic_error(const LinkModel& link);

/// Per-gate, per-detector probability of a background click.
double background_click_prob(const LinkModel& link);

struct ClickProbabilities {
  double det0 = 0.0;
  double det1 = 0.0;
};

/// Click probability at each detector port for a pulse with the given mean
/// photon number and relative encode/measure phase.
ClickProbabilities click_probabilities(double delta_phi, double mean_photons,
                                       const LinkModel& link,
                                       double timing_offset_ps = 0.0);

}  // namespace qkdlink
