#include "qkdlink/protocol.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace qkdlink {

namespace {

void require(bool ok, const char* field, const std::string& what) {
  if (!ok) throw std::invalid_argument(std::string(field) + ": " + what);
}

}  // namespace

std::string_view to_string(Basis b) { return b == Basis::X ? "X" : "Y"; }

std::string_view to_string(Intensity i) {
  switch (i) {
    case Intensity::Signal: return "signal";
    case Intensity::Decoy: return "decoy";
    case Intensity::Vacuum: return "vacuum";
  }
  return "?";
}

Basis parse_basis(std::string_view s) {
  if (s == "X" || s == "x") return Basis::X;
  if (s == "Y" || s == "y") return Basis::Y;
  throw std::invalid_argument("unknown basis '" + std::string(s) + "'");
}

Intensity parse_intensity(std::string_view s) {
  if (s == "signal") return Intensity::Signal;
  if (s == "decoy") return Intensity::Decoy;
  if (s == "vacuum") return Intensity::Vacuum;
  throw std::invalid_argument("unknown intensity '" + std::string(s) + "'");
}

void ProtocolParams::validate() const {
  require(std::isfinite(clock_rate_hz) && clock_rate_hz > 0, "clock_rate_hz",
          "must be positive");
  require(basis_majority > 0 && basis_minority >= 0 &&
              basis_majority >= basis_minority,
          "basis_bias", "need majority > 0, 0 <= minority <= majority");
  double wsum = 0;
  for (double w : intensity_weights) {
    require(std::isfinite(w) && w >= 0, "intensity_probs", "weights must be >= 0");
    wsum += w;
  }
  require(wsum > 0, "intensity_probs", "weights must not all be zero");
  require(mu > nu && nu > vacuum_mu && vacuum_mu >= 0, "mu/nu/vacuum_mu",
          "need mu > nu > vacuum_mu >= 0");
  require(vacuum_mu <= 1e-4 * mu, "vacuum_mu", "must be <= 1e-4 * mu");
  require(time_bin_separation_ps > 0, "time_bin_separation_ps", "must be positive");
  require(pulse_width_ps > 0, "pulse_width_ps", "must be positive");
  require(f_ec >= 1.0, "f_ec", "must be >= 1");
  require(eps_sec > 0 && eps_sec < 1, "eps_sec", "must lie in (0,1)");
}

double ProtocolParams::basis_probability(Basis b) const {
  const double total = basis_majority + basis_minority;
  return (b == Basis::X ? basis_majority : basis_minority) / total;
}

double ProtocolParams::intensity_probability(Intensity i) const {
  const double total =
      intensity_weights[0] + intensity_weights[1] + intensity_weights[2];
  return intensity_weights[index(i)] / total;
}

double ProtocolParams::mean_photon_number(Intensity i) const {
  switch (i) {
    case Intensity::Signal: return mu;
    case Intensity::Decoy: return nu;
    case Intensity::Vacuum: return vacuum_mu;
  }
  return 0.0;
}

Basis draw_basis(CounterRng& rng, const ProtocolParams& params) {
  return rng.uniform() < params.basis_probability(Basis::X) ? Basis::X : Basis::Y;
}

Symbol draw_symbol(CounterRng& rng, const ProtocolParams& params,
                   std::uint64_t slot_index) {
  Symbol s;
  s.slot_index = slot_index;
  s.basis = draw_basis(rng, params);

  const double u = rng.uniform();
  const double p_signal = params.intensity_probability(Intensity::Signal);
  const double p_decoy = params.intensity_probability(Intensity::Decoy);
  if (u < p_signal) {
    s.intensity = Intensity::Signal;
  } else if (u < p_signal + p_decoy) {
    s.intensity = Intensity::Decoy;
  } else {
    s.intensity = Intensity::Vacuum;
  }

  s.bit = static_cast<std::uint8_t>(rng.next_u64() >> 63);
  return s;
}

double encode_phase(const Symbol& symbol) {
  constexpr double pi = std::numbers::pi;
  const double base = symbol.basis == Basis::X ? 0.0 : pi / 2;
  return base + (symbol.bit ? pi : 0.0);
}

double measurement_phase(Basis basis) {
  return basis == Basis::X ? 0.0 : std::numbers::pi / 2;
}

double relative_phase(const Symbol& symbol, Basis rx_basis) {
  constexpr double two_pi = 2 * std::numbers::pi;
  double d = encode_phase(symbol) - measurement_phase(rx_basis);
  if (d < 0) d += two_pi;
  return d;
}

SymbolSource::SymbolSource(ProtocolParams params, std::uint64_t seed)
    : SymbolSource(std::move(params), seed, {}) {}

SymbolSource::SymbolSource(ProtocolParams params, std::uint64_t seed,
                           std::vector<Symbol> pattern)
    : params_(std::move(params)), seed_(seed), pattern_(std::move(pattern)) {
  params_.validate();
}

SymbolSource SymbolSource::replay(ProtocolParams params,
                                  std::vector<Symbol> pattern) {
  if (pattern.empty()) throw std::invalid_argument("replay pattern is empty");
  return SymbolSource(std::move(params), 0, std::move(pattern));
}

Symbol SymbolSource::at(std::uint64_t slot_index) const {
  if (!pattern_.empty()) {
    Symbol s = pattern_[slot_index % pattern_.size()];
    s.slot_index = slot_index;
    return s;
  }
  CounterRng rng = slot_rng(seed_, slot_index);
  return draw_symbol(rng, params_, slot_index);
}

Symbol SymbolSource::next() { return at(next_slot_++); }

}  // namespace qkdlink
