#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "qkdlink/rng.hpp"

namespace qkdlink {

/// Measurement basis. X is the majority (key) basis.
enum class Basis : std::uint8_t { X = 0, Y = 1 };

enum class Intensity : std::uint8_t { Signal = 0, Decoy = 1, Vacuum = 2 };

inline constexpr std::array<Basis, 2> kBases{Basis::X, Basis::Y};
inline constexpr std::array<Intensity, 3> kIntensities{
    Intensity::Signal, Intensity::Decoy, Intensity::Vacuum};

constexpr std::size_t index(Basis b) { return static_cast<std::size_t>(b); }
constexpr std::size_t index(Intensity i) { return static_cast<std::size_t>(i); }

std::string_view to_string(Basis b);
std::string_view to_string(Intensity i);
Basis parse_basis(std::string_view s);
Intensity parse_intensity(std::string_view s);

/// One emitted pulse pair.
struct Symbol {
  Basis basis = Basis::X;
  std::uint8_t bit = 0;
  Intensity intensity = Intensity::Signal;
  std::uint64_t slot_index = 0;

  friend bool operator==(const Symbol&, const Symbol&) = default;
};

/// Transmitter and receiver protocol settings.
///
/// Basis bias and intensity weights are stored as ratios and normalized on
/// use, so 15:1 and 14:1:1 can be written as they are usually quoted.
struct ProtocolParams {
  double clock_rate_hz = 1e9;
  double basis_majority = 15.0;
  double basis_minority = 1.0;
  std::array<double, 3> intensity_weights{14.0, 1.0, 1.0};
  double mu = 0.5;
  double nu = 0.15;
  double vacuum_mu = 5e-6;
  double time_bin_separation_ps = 500.0;
  double pulse_width_ps = 100.0;
  double f_ec = 1.25;
  double eps_sec = 1e-10;

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;

  double clock_period_ps() const { return 1e12 / clock_rate_hz; }
  double basis_probability(Basis b) const;
  double intensity_probability(Intensity i) const;
  double mean_photon_number(Intensity i) const;

  friend bool operator==(const ProtocolParams&, const ProtocolParams&) = default;
};

/// Draws one symbol. Consumes exactly three uniforms from `rng`.
Symbol draw_symbol(CounterRng& rng, const ProtocolParams& params,
                   std::uint64_t slot_index);

/// Draws a basis with the configured bias. Consumes one uniform.
Basis draw_basis(CounterRng& rng, const ProtocolParams& params);

/// Early-bin phase applied by the transmitter:
/// (X,0)->0, (X,1)->pi, (Y,0)->pi/2, (Y,1)->3pi/2.
double encode_phase(const Symbol& symbol);

/// Early-bin rotation applied by the receiver: X->0, Y->pi/2.
double measurement_phase(Basis basis);

/// encode_phase - measurement_phase, wrapped to [0, 2pi).
double relative_phase(const Symbol& symbol, Basis rx_basis);

/// Per-slot symbol generator.
///
/// In seeded mode the symbol for slot i depends only on (seed, i) and is the
/// same symbol the Monte Carlo engine emits for that slot. Replay mode cycles
/// a fixed pattern, for regression fixtures.
class SymbolSource {
 public:
  SymbolSource(ProtocolParams params, std::uint64_t seed);
  static SymbolSource replay(ProtocolParams params, std::vector<Symbol> pattern);

  Symbol next();
  Symbol at(std::uint64_t slot_index) const;
  std::uint64_t position() const { return next_slot_; }

 private:
  SymbolSource(ProtocolParams params, std::uint64_t seed,
               std::vector<Symbol> pattern);

  ProtocolParams params_;
  std::uint64_t seed_;
  std::vector<Symbol> pattern_;
  std::uint64_t next_slot_ = 0;
};

/// Seed-to-slot keying shared by SymbolSource and the Monte Carlo engine.
inline CounterRng slot_rng(std::uint64_t seed, std::uint64_t slot_index) {
  return CounterRng(seed, slot_index);
}

}  // namespace qkdlink
