#pragma once

#include <string_view>

#include "qkdlink/engine.hpp"
#include "qkdlink/protocol.hpp"
#include "qkdlink/sifting.hpp"

namespace qkdlink {

/// H2(p) in bits; H2(0) = H2(1) = 0. Throws std::domain_error outside [0,1].
double binary_entropy(double p);

/// Why a rate is what it is. Every clamp at zero carries one of these.
enum class KeyStatus {
  Ok,
  MissingGains,           ///< an intensity had nothing sent, or decoy had no clicks
  DecoyEstimationFailed,  ///< Y1 lower bound <= 0
  NoExtractableKey,       ///< leakage and phase error exceed the single-photon term
  FiniteSizePenalty,      ///< positive asymptotically, but not for this block
};

std::string_view to_string(KeyStatus s);

/// Vacuum + weak decoy estimates. Raw values are kept unclamped for
/// diagnostics; y1_lower and e1_upper are clamped to [0,1] and [0,0.5].
struct DecoyBounds {
  double y0 = 0.0;
  double y1_lower = 0.0;
  double e1_upper = 0.5;
  double y1_lower_raw = 0.0;
  double e1_upper_raw = 0.5;
  KeyStatus status = KeyStatus::MissingGains;

  bool valid() const { return status == KeyStatus::Ok; }
};

/// Lower bound on Y1 and upper bound on e1 from signal/decoy gains, with Y0
/// taken as the gain of the vacuum class. Requires mu > nu > 0.
DecoyBounds decoy_bounds(double q_mu, double q_nu, double e_nu, double y0,
                         double mu, double nu);
DecoyBounds decoy_bounds(const Gains& gains, double mu, double nu);

struct AsymptoticKey {
  double rate_bps = 0.0;
  double rate_unclamped_bps = 0.0;
  double q1_lower = 0.0;
  double q_mu = 0.0;
  double e_mu = 0.0;
  DecoyBounds bounds;
  KeyStatus status = KeyStatus::MissingGains;
};

/// Secure key rate for infinite statistics, X-basis key:
/// R = P(X)^2 P(signal) f_clk [Q1 (1 - H2(e1)) - f_ec Q_mu H2(E_mu)], >= 0.
AsymptoticKey asymptotic_skr(const Tallies& tallies, const ProtocolParams& params);
/// Same, from X-basis gains.
AsymptoticKey asymptotic_skr(const Gains& x_gains, const ProtocolParams& params);

/// Composable key length for the block the tallies describe.
///
/// Construction:
///   * eps_sec is split evenly over kFiniteEpsilonTerms terms; each count
///     estimate below gets eps_sec / kFiniteEpsilonTerms.
///   * Every observed count n gets a Hoeffding deviation
///     sqrt(n/2 * ln(1/eps_i)), applied in the direction that weakens the
///     bound. Upward deviations are never smaller than ln(1/eps_i), the
///     exact Poisson bound for an observed zero, so an empty error class
///     does not pin e1 to zero. Each basis is bounded from its own counts: signal, decoy and
///     vacuum gains in X give Y1 for the key bits; the same in Y, plus the
///     Y-basis error counts, give the phase error. Y0 is taken high when
///     bounding Y1 and low when bounding e1.
///   * The phase error of the X-basis single-photon bits is bounded from the
///     Y-basis statistics, taking the smaller of the decoy-route and
///     signal-route e1 bounds.
///   * l = s1 (1 - H2(phi)) - f_ec n_mu H2(E_mu) - 6 log2(19/eps) - log2(2/eps).
struct FiniteKey {
  double length_bits = 0.0;
  double length_unclamped_bits = 0.0;
  double block_size = 0.0;  ///< X-basis signal detections (raw key bits)
  double s1_lower = 0.0;
  double y1_lower = 0.0;
  double phase_error_upper = 0.5;
  double leak_ec_bits = 0.0;
  double correction_bits = 0.0;
  KeyStatus status = KeyStatus::MissingGains;
};

inline constexpr int kFiniteEpsilonTerms = 11;

/// Single-photon bounds for one basis with the finite-size deviations above.
/// The count deviations are the usual large-count approximation, so the
/// nominal failure probability 6 eps_sec / kFiniteEpsilonTerms is only
/// approached for counts well above ln(1/eps). e1_upper is 0.5 when Y1
/// cannot be bounded.
struct FiniteBasisBounds {
  double y1_lower = 0.0;
  double y1_lower_raw = 0.0;
  double e1_upper = 0.5;
  bool valid = false;  ///< false when an intensity had nothing sent
};

FiniteBasisBounds finite_decoy_bounds(const Tallies& tallies, const ProtocolParams& params,
                                      Basis basis);

FiniteKey finite_key_length(const Tallies& tallies, const ProtocolParams& params);

/// Everything the CLI reports for one channel point.
struct KeyRateReport {
  double y0 = 0.0;
  double y1_lower = 0.0;
  double e1_upper = 0.5;
  double q1_lower = 0.0;
  double q_mu = 0.0;
  double e_mu = 0.0;
  double raw_bps = 0.0;
  double skr_asymptotic_bps = 0.0;
  double skr_asymptotic_unclamped_bps = 0.0;
  KeyStatus asymptotic_status = KeyStatus::MissingGains;
  double key_length_finite_bits = 0.0;
  double key_length_finite_unclamped_bits = 0.0;
  double phase_error_upper_finite = 0.5;
  double block_size = 0.0;
  double duration_s = 0.0;
  KeyStatus finite_status = KeyStatus::MissingGains;
  ProtocolParams params_used;

  double skr_finite_bps() const {
    return duration_s > 0 ? key_length_finite_bits / duration_s : 0.0;
  }
};

KeyRateReport evaluate_key_rate(const Tallies& tallies, const ProtocolParams& params);

}  // namespace qkdlink
