#include "qkdlink/calibration.hpp"

#include <array>
#include <cmath>
#include <stdexcept>

#include "qkdlink/keyrate.hpp"
#include "qkdlink/sifting.hpp"

namespace qkdlink {

LinkModel calibrate_to_measurement(const ProtocolParams& params, const LinkModel& base,
                                   double raw_bps, double qber) {
  params.validate();
  const double e_d = intrinsic_error(base);
  if (!(raw_bps > 0)) throw std::invalid_argument("calibrate: raw rate must be positive");
  if (!(qber > e_d && qber < 0.5))
    throw std::invalid_argument("calibrate: QBER must lie between the intrinsic error and 0.5");

  const double signal_pulses_per_s = sifting_factor(params) *
                                     params.intensity_probability(Intensity::Signal) *
                                     params.clock_rate_hz;
  const double gain = raw_bps / signal_pulses_per_s;

  // Q = b + s and E Q = b/2 + e_d s, so b = s (E - e_d) / (1/2 - E).
  const double ratio = (qber - e_d) / (0.5 - qber);
  const double s = gain / (1.0 + ratio);
  const double b = gain - s;
  if (!(s < 1.0)) throw std::invalid_argument("calibrate: raw rate too high");

  LinkModel link = base;
  link.channel = ChannelSpec::emulated(0.0);
  link.extra_background_hz = 0.0;
  const double eta_0db = system_efficiency(link);
  const double eta = -std::log1p(-s) / params.mu;
  if (!(eta < eta_0db)) throw std::invalid_argument("calibrate: raw rate above the 0 dB rate");
  link.channel = ChannelSpec::emulated(-10.0 * std::log10(eta / eta_0db));

  const double gate_s = base.detector.gate_width_ps * 1e-12;
  link.extra_background_hz =
      b / 2.0 / gate_s - base.detector.dark_rate_hz - base.crosstalk_rate_hz;
  if (link.extra_background_hz < 0)
    throw std::invalid_argument("calibrate: QBER below what the configured background gives");
  link.validate(params.clock_period_ps());
  return link;
}

Tallies tallies_for_block(const ProtocolParams& params, const LinkModel& link,
                          double block_events) {
  const Tallies per_second = run_analytic(params, link, 1.0);
  const double rate = per_second.cell(Intensity::Signal, Basis::X, Basis::X).clicks;
  if (!(rate > 0)) throw std::invalid_argument("tallies_for_block: no signal detections");
  return run_analytic(params, link, block_events / rate);
}

SlotChoice choose_slot_count(const ProtocolParams& params, const LinkModel& link,
                             double target_rel_error, std::uint64_t cap) {
  if (!(target_rel_error > 0)) throw std::invalid_argument("target error must be positive");
  const Tallies t = run_analytic(params, link, 1.0 / params.clock_rate_hz);
  const Gains base = gains_from_tallies(t, BasisSelection::X);
  for (const auto& g : base)
    if (!g || !g->e) return {cap, INFINITY, true};

  // Parameters: Q and E per intensity. Variances are per slot.
  auto eval = [&](const std::array<double, 6>& x) {
    Gains g = base;
    for (std::size_t i = 0; i < 3; ++i) {
      g[i]->q = x[2 * i];
      g[i]->e = x[2 * i + 1];
    }
    return asymptotic_skr(g, params).rate_unclamped_bps;
  };
  std::array<double, 6> x{};
  std::array<double, 6> var{};
  for (Intensity i : kIntensities) {
    const auto k = index(i);
    const double q = base[k]->q;
    const double e = *base[k]->e;
    const double share = params.intensity_probability(i) *
                         std::pow(params.basis_probability(Basis::X), 2);
    x[2 * k] = q;
    x[2 * k + 1] = e;
    var[2 * k] = q * (1 - q) / share;
    var[2 * k + 1] = e * (1 - e) / (q * share);
  }

  const double r = eval(x);
  if (!(r > 0)) return {cap, INFINITY, true};
  double var_r = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double h = 1e-5 * x[j];
    if (h == 0) continue;
    auto up = x;
    auto dn = x;
    up[j] += h;
    dn[j] -= h;
    const double grad = (eval(up) - eval(dn)) / (2 * h);
    var_r += grad * grad * var[j];
  }
  const double per_slot = std::sqrt(var_r) / r;
  const double needed = std::ceil(std::pow(per_slot / target_rel_error, 2));
  if (needed > static_cast<double>(cap))
    return {cap, per_slot / std::sqrt(static_cast<double>(cap)), true};
  const auto n = static_cast<std::uint64_t>(std::max(needed, 1.0));
  return {n, per_slot / std::sqrt(static_cast<double>(n)), false};
}

}  // namespace qkdlink
