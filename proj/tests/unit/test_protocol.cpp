#include <doctest.h>

#include <array>
#include <cmath>
#include <stdexcept>
#include <numbers>

#include "qkdlink/protocol.hpp"

using namespace qkdlink;

namespace {

constexpr double kPi = std::numbers::pi;

// chi-square critical value, 2 degrees of freedom, alpha = 0.001: -2 ln(0.001).
const double kChi2Crit2 = -2.0 * std::log(0.001);

}  // namespace

TEST_CASE("basis fraction over 16e6 draws matches 15:1") {
  const ProtocolParams p;
  SymbolSource src(p, 2024);
  const std::uint64_t n = 16'000'000;
  std::uint64_t x = 0;
  for (std::uint64_t i = 0; i < n; ++i) x += src.next().basis == Basis::X;
  const double frac = static_cast<double>(x) / n;
  const double sigma = std::sqrt(0.9375 * 0.0625 / n);
  CHECK(std::fabs(frac - 0.9375) <= 3 * sigma);
}

TEST_CASE("intensity counts pass chi-square against 14:1:1") {
  CHECK(kChi2Crit2 == doctest::Approx(13.815510557964274));
  const ProtocolParams p;
  SymbolSource src(p, 77);
  const std::uint64_t n = 16'000'000;
  std::array<double, 3> counts{};
  for (std::uint64_t i = 0; i < n; ++i) counts[index(src.next().intensity)] += 1;
  const std::array<double, 3> expected{n * 14.0 / 16, n * 1.0 / 16, n * 1.0 / 16};
  double chi2 = 0;
  for (int k = 0; k < 3; ++k) chi2 += std::pow(counts[k] - expected[k], 2) / expected[k];
  CHECK(chi2 < kChi2Crit2);
}

TEST_CASE("frequencies within 5 sigma for several seeds and biases") {
  for (const auto& [maj, min] : {std::pair{15.0, 1.0}, {1.0, 1.0}, {3.0, 1.0}}) {
    ProtocolParams p;
    p.basis_majority = maj;
    p.basis_minority = min;
    p.intensity_weights = {6, 3, 1};
    for (std::uint64_t seed : {1u, 99u, 123456u}) {
      SymbolSource src(p, seed);
      const std::uint64_t n = 1'000'000;
      double x = 0, bit = 0;
      std::array<double, 3> inten{};
      for (std::uint64_t i = 0; i < n; ++i) {
        const auto s = src.next();
        x += s.basis == Basis::X;
        bit += s.bit;
        inten[index(s.intensity)] += 1;
      }
      auto within = [n](double count, double prob) {
        return std::fabs(count / n - prob) <= 5 * std::sqrt(prob * (1 - prob) / n);
      };
      CHECK(within(x, maj / (maj + min)));
      CHECK(within(bit, 0.5));
      CHECK(within(inten[0], 0.6));
      CHECK(within(inten[1], 0.3));
      CHECK(within(inten[2], 0.1));
    }
  }
}

TEST_CASE("symbol streams are reproducible and slot-addressable") {
  const ProtocolParams p;
  SymbolSource a(p, 5), b(p, 5), c(p, 6);
  bool differs = false;
  for (std::uint64_t i = 0; i < 1000; ++i) {
    const auto s = a.next();
    CHECK(s == b.next());
    CHECK(s == a.at(i));
    CHECK(s.slot_index == i);
    differs |= !(s == c.next());
  }
  CHECK(differs);
}

TEST_CASE("replay mode cycles the pattern with increasing slots") {
  const ProtocolParams p;
  const std::vector<Symbol> pattern{{Basis::X, 0, Intensity::Signal, 0},
                                    {Basis::Y, 1, Intensity::Decoy, 0}};
  auto src = SymbolSource::replay(p, pattern);
  for (std::uint64_t i = 0; i < 5; ++i) {
    const auto s = src.next();
    CHECK(s.slot_index == i);
    CHECK(s.basis == pattern[i % 2].basis);
    CHECK(s.bit == pattern[i % 2].bit);
    CHECK(s.intensity == pattern[i % 2].intensity);
  }
  CHECK_THROWS_AS(SymbolSource::replay(p, {}), std::invalid_argument);
}

TEST_CASE("phase conventions") {
  CHECK(encode_phase({Basis::X, 0, Intensity::Signal, 0}) == 0.0);
  CHECK(encode_phase({Basis::X, 1, Intensity::Signal, 0}) == doctest::Approx(kPi));
  CHECK(encode_phase({Basis::Y, 0, Intensity::Signal, 0}) == doctest::Approx(kPi / 2));
  CHECK(encode_phase({Basis::Y, 1, Intensity::Signal, 0}) == doctest::Approx(3 * kPi / 2));
  CHECK(measurement_phase(Basis::X) == 0.0);
  CHECK(measurement_phase(Basis::Y) == doctest::Approx(kPi / 2));
  CHECK(relative_phase({Basis::X, 0, Intensity::Signal, 0}, Basis::X) == 0.0);
}

TEST_CASE("matched bases give 0 or pi, mismatched give pi/2 or 3pi/2") {
  for (Basis tx : kBases)
    for (std::uint8_t bit : {0, 1})
      for (Basis rx : kBases) {
        const double d = relative_phase({tx, bit, Intensity::Signal, 0}, rx);
        CHECK(d >= 0.0);
        CHECK(d < 2 * kPi);
        if (tx == rx) {
          CHECK(std::fabs(std::cos(d)) == doctest::Approx(1.0));
          CHECK(std::cos(d) == doctest::Approx(bit == 0 ? 1.0 : -1.0));
        } else {
          CHECK(std::fabs(std::cos(d)) < 1e-12);
        }
      }
}

TEST_CASE("parameter validation") {
  ProtocolParams p;
  CHECK_NOTHROW(p.validate());
  CHECK(p.basis_probability(Basis::X) == doctest::Approx(15.0 / 16));
  CHECK(p.intensity_probability(Intensity::Decoy) == doctest::Approx(1.0 / 16));
  CHECK(p.mean_photon_number(Intensity::Vacuum) == 5e-6);

  auto bad = [](auto mutate) {
    ProtocolParams q;
    mutate(q);
    return q;
  };
  CHECK_THROWS_AS(bad([](auto& q) { q.nu = 0.6; }).validate(), std::invalid_argument);
  CHECK_THROWS_AS(bad([](auto& q) { q.vacuum_mu = 1e-3; }).validate(), std::invalid_argument);
  CHECK_THROWS_AS(bad([](auto& q) { q.intensity_weights = {1, -1, 1}; }).validate(),
                  std::invalid_argument);
  CHECK_THROWS_AS(bad([](auto& q) { q.f_ec = 0.9; }).validate(), std::invalid_argument);
  CHECK_THROWS_AS(bad([](auto& q) { q.eps_sec = 1.0; }).validate(), std::invalid_argument);
  CHECK_THROWS_AS(bad([](auto& q) { q.clock_rate_hz = 0; }).validate(), std::invalid_argument);
  CHECK_THROWS_AS(SymbolSource(bad([](auto& q) { q.mu = 0.1; }), 1), std::invalid_argument);
}

TEST_CASE("enum names round-trip") {
  for (Basis b : kBases) CHECK(parse_basis(to_string(b)) == b);
  for (Intensity i : kIntensities) CHECK(parse_intensity(to_string(i)) == i);
  CHECK_THROWS_AS(parse_basis("Z"), std::invalid_argument);
}
