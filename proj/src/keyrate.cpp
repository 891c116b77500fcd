#include "qkdlink/keyrate.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace qkdlink {

double binary_entropy(double p) {
  if (!(p >= 0.0 && p <= 1.0))
    throw std::domain_error("binary_entropy: p outside [0,1]");
  if (p == 0.0 || p == 1.0) return 0.0;
  return -p * std::log2(p) - (1.0 - p) * std::log2(1.0 - p);
}

std::string_view to_string(KeyStatus s) {
  switch (s) {
    case KeyStatus::Ok: return "ok";
    case KeyStatus::MissingGains: return "missing gains";
    case KeyStatus::DecoyEstimationFailed: return "decoy estimation failed";
    case KeyStatus::NoExtractableKey: return "no extractable key";
    case KeyStatus::FiniteSizePenalty: return "finite-size penalty";
  }
  return "?";
}

namespace {

double y1_lower_bound(double q_mu, double q_nu, double y0, double mu, double nu) {
  return mu / (mu * nu - nu * nu) *
         (q_nu * std::exp(nu) - q_mu * std::exp(mu) * nu * nu / (mu * mu) -
          (mu * mu - nu * nu) / (mu * mu) * y0);
}

double h2_clamped(double p) { return binary_entropy(std::clamp(p, 0.0, 1.0)); }

}  // namespace

DecoyBounds decoy_bounds(double q_mu, double q_nu, double e_nu, double y0,
                         double mu, double nu) {
  if (!(mu > nu && nu > 0))
    throw std::invalid_argument("decoy_bounds: need mu > nu > 0");

  DecoyBounds b;
  b.y0 = y0;
  b.y1_lower_raw = y1_lower_bound(q_mu, q_nu, y0, mu, nu);
  if (!(b.y1_lower_raw > 0)) {
    b.status = KeyStatus::DecoyEstimationFailed;
    b.y1_lower = 0.0;
    b.e1_upper_raw = 0.5;
    b.e1_upper = 0.5;
    return b;
  }
  b.y1_lower = std::min(1.0, b.y1_lower_raw);
  b.e1_upper_raw = (e_nu * q_nu * std::exp(nu) - 0.5 * y0) / (b.y1_lower_raw * nu);
  b.e1_upper = std::clamp(b.e1_upper_raw, 0.0, 0.5);
  b.status = KeyStatus::Ok;
  return b;
}

DecoyBounds decoy_bounds(const Gains& gains, double mu, double nu) {
  const auto& s = gains[index(Intensity::Signal)];
  const auto& d = gains[index(Intensity::Decoy)];
  const auto& v = gains[index(Intensity::Vacuum)];
  if (!s || !d || !v || !d->e) {
    DecoyBounds b;
    b.status = KeyStatus::MissingGains;
    return b;
  }
  return decoy_bounds(s->q, d->q, *d->e, v->q, mu, nu);
}

AsymptoticKey asymptotic_skr(const Tallies& tallies, const ProtocolParams& params) {
  return asymptotic_skr(gains_from_tallies(tallies, BasisSelection::X), params);
}

AsymptoticKey asymptotic_skr(const Gains& gains, const ProtocolParams& params) {
  params.validate();
  AsymptoticKey out;
  out.bounds = decoy_bounds(gains, params.mu, params.nu);
  const auto& s = gains[index(Intensity::Signal)];
  if (s) {
    out.q_mu = s->q;
    out.e_mu = s->e.value_or(0.0);
  }
  if (!out.bounds.valid() || !s || !s->e) {
    out.status = out.bounds.valid() ? KeyStatus::MissingGains : out.bounds.status;
    return out;
  }

  const double mu = params.mu;
  out.q1_lower = out.bounds.y1_lower * mu * std::exp(-mu);
  const double per_pulse = out.q1_lower * (1.0 - binary_entropy(out.bounds.e1_upper)) -
                           params.f_ec * out.q_mu * binary_entropy(out.e_mu);
  const double scale = sifting_factor(params) *
                       params.intensity_probability(Intensity::Signal) *
                       params.clock_rate_hz;
  out.rate_unclamped_bps = scale * per_pulse;
  if (out.rate_unclamped_bps > 0) {
    out.rate_bps = out.rate_unclamped_bps;
    out.status = KeyStatus::Ok;
  } else {
    out.status = KeyStatus::NoExtractableKey;
  }
  return out;
}

namespace {

struct Deviation {
  double log_term;

  double dev(double n) const { return std::sqrt(std::max(0.0, n) / 2.0 * log_term); }
  // Floored at the zero-count Poisson bound: seeing nothing still allows
  // ln(1/eps) expected events.
  double upper(double n, double sent) const {
    return std::min(1.0, (n + std::max(dev(n), log_term)) / sent);
  }
  double lower(double n, double sent) const { return std::max(0.0, (n - dev(n)) / sent); }
};

Deviation deviation_for(const ProtocolParams& params) {
  return {std::log(kFiniteEpsilonTerms / params.eps_sec)};
}

}  // namespace

FiniteBasisBounds finite_decoy_bounds(const Tallies& tallies, const ProtocolParams& params,
                                      Basis basis) {
  params.validate();
  const Deviation d = deviation_for(params);
  const double mu = params.mu;
  const double nu = params.nu;
  const auto& s = tallies.cell(Intensity::Signal, basis, basis);
  const auto& w = tallies.cell(Intensity::Decoy, basis, basis);
  const auto& v = tallies.cell(Intensity::Vacuum, basis, basis);

  FiniteBasisBounds out;
  if (!(s.sent > 0 && w.sent > 0 && v.sent > 0)) return out;
  out.valid = true;
  out.y1_lower_raw = y1_lower_bound(d.upper(s.clicks, s.sent), d.lower(w.clicks, w.sent),
                                    d.upper(v.clicks, v.sent), mu, nu);
  out.y1_lower = std::clamp(out.y1_lower_raw, 0.0, 1.0);
  if (out.y1_lower_raw > 0) {
    const double y0_low = d.lower(v.clicks, v.sent);
    const double via_decoy =
        (d.upper(w.errors, w.sent) * std::exp(nu) - 0.5 * y0_low) / (out.y1_lower_raw * nu);
    const double via_signal =
        (d.upper(s.errors, s.sent) * std::exp(mu) - 0.5 * y0_low) / (out.y1_lower_raw * mu);
    out.e1_upper = std::clamp(std::min(via_decoy, via_signal), 0.0, 0.5);
  }
  return out;
}

FiniteKey finite_key_length(const Tallies& tallies, const ProtocolParams& params) {
  params.validate();
  FiniteKey out;
  const double eps = params.eps_sec;
  const auto& xs = tallies.cell(Intensity::Signal, Basis::X, Basis::X);
  out.block_size = xs.clicks;
  out.correction_bits = 6.0 * std::log2(19.0 / eps) + std::log2(2.0 / eps);

  const auto x = finite_decoy_bounds(tallies, params, Basis::X);
  const auto y = finite_decoy_bounds(tallies, params, Basis::Y);
  if (!x.valid || !y.valid || !(xs.clicks > 0)) {
    out.status = KeyStatus::MissingGains;
    return out;
  }

  out.y1_lower = x.y1_lower;
  out.phase_error_upper = y.e1_upper;
  out.s1_lower = xs.sent * params.mu * std::exp(-params.mu) * x.y1_lower;
  out.leak_ec_bits = params.f_ec * xs.clicks * h2_clamped(xs.errors / xs.clicks);
  out.length_unclamped_bits = out.s1_lower * (1.0 - binary_entropy(out.phase_error_upper)) -
                              out.leak_ec_bits - out.correction_bits;
  if (out.length_unclamped_bits > 0) {
    out.length_bits = std::floor(out.length_unclamped_bits);
    out.status = KeyStatus::Ok;
    return out;
  }

  const auto asym = asymptotic_skr(tallies, params);
  out.status = asym.status == KeyStatus::Ok ? KeyStatus::FiniteSizePenalty : asym.status;
  return out;
}

KeyRateReport evaluate_key_rate(const Tallies& tallies, const ProtocolParams& params) {
  KeyRateReport r;
  r.params_used = params;
  r.duration_s = tallies.duration_s;
  const auto asym = asymptotic_skr(tallies, params);
  r.y0 = asym.bounds.y0;
  r.y1_lower = asym.bounds.y1_lower_raw;
  r.e1_upper = asym.bounds.e1_upper_raw;
  r.q1_lower = asym.q1_lower;
  r.q_mu = asym.q_mu;
  r.e_mu = asym.e_mu;
  r.skr_asymptotic_bps = asym.rate_bps;
  r.skr_asymptotic_unclamped_bps = asym.rate_unclamped_bps;
  r.asymptotic_status = asym.status;

  const auto fin = finite_key_length(tallies, params);
  r.key_length_finite_bits = fin.length_bits;
  r.key_length_finite_unclamped_bits = fin.length_unclamped_bits;
  r.phase_error_upper_finite = fin.phase_error_upper;
  r.block_size = fin.block_size;
  r.finite_status = fin.status;

  const auto sifted = sifted_from_tallies(tallies);
  r.raw_bps = sifted.raw_bit_rate;
  return r;
}

}  // namespace qkdlink
