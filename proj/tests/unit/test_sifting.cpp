#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "qkdlink/engine.hpp"
#include "qkdlink/sifting.hpp"

using namespace qkdlink;

namespace {

// Transmitter record plus a matching receiver stream in which every
// `flip_every`-th kept event has the wrong detector (0 = never).
struct Fixture {
  std::vector<Symbol> tx;
  std::vector<DetectionEvent> events;
};

Fixture synthetic(std::size_t n, std::size_t flip_every, Basis rx_basis_for_odd = Basis::X) {
  const ProtocolParams p;
  SymbolSource src(p, 31);
  Fixture f;
  for (std::size_t i = 0; i < n; ++i) {
    const Symbol s = src.next();
    f.tx.push_back(s);
    DetectionEvent e;
    e.slot_index = s.slot_index;
    e.rx_basis = i % 2 ? rx_basis_for_odd : s.basis;
    e.detector = s.bit;
    if (flip_every && (i + 1) % flip_every == 0) e.detector ^= 1;
    f.events.push_back(e);
  }
  return f;
}

}  // namespace

TEST_CASE("sifting factor") {
  ProtocolParams p;
  CHECK(sifting_factor(p) == doctest::Approx(225.0 / 256));
  p.basis_majority = 1;
  CHECK(sifting_factor(p) == doctest::Approx(0.25));
  p.basis_minority = 0;
  CHECK(sifting_factor(p) == 1.0);
}

TEST_CASE("error-free stream has zero QBER everywhere") {
  const auto f = synthetic(100'000, 0, Basis::X);
  const auto s = sift(f.tx, f.events, 1.0);
  for (Intensity i : kIntensities)
    for (Basis b : kBases) CHECK(s.at(i, b).error_bits == 0.0);
  CHECK(s.qber_majority == 0.0);
  CHECK(s.qber_minority == 0.0);
}

TEST_CASE("every 20th bit flipped gives 5% QBER") {
  // All events in the transmitter's basis so every event is kept.
  auto f = synthetic(400'000, 0);
  for (auto& e : f.events) e.rx_basis = f.tx[e.slot_index].basis;
  for (std::size_t i = 19; i < f.events.size(); i += 20) f.events[i].detector ^= 1;
  const auto s = sift(f.tx, f.events, 1.0);
  double bits = 0, errors = 0;
  for (const auto& c : s.cells) {
    bits += c.sifted_bits;
    errors += c.error_bits;
  }
  CHECK(bits == 400'000);
  const double q = errors / bits;
  CHECK(std::fabs(q - 0.05) <= 5 * std::sqrt(0.05 * 0.95 / bits));
}

TEST_CASE("mismatched events are discarded") {
  auto f = synthetic(10'000, 0);
  for (auto& e : f.events)
    e.rx_basis = f.tx[e.slot_index].basis == Basis::X ? Basis::Y : Basis::X;
  const auto s = sift(f.tx, f.events, 1.0);
  for (const auto& c : s.cells) CHECK(c.sifted_bits == 0.0);
}

TEST_CASE("sift ignores event arrival order") {
  const auto f = synthetic(50'000, 7);
  const auto ref = sift(f.tx, f.events, 2.0);
  auto shuffled = f.events;
  std::mt19937_64 gen(4);
  for (int k = 0; k < 5; ++k) {
    std::shuffle(shuffled.begin(), shuffled.end(), gen);
    const auto s = sift(f.tx, shuffled, 2.0);
    for (std::size_t c = 0; c < s.cells.size(); ++c) {
      CHECK(s.cells[c].sifted_bits == ref.cells[c].sifted_bits);
      CHECK(s.cells[c].error_bits == ref.cells[c].error_bits);
    }
    CHECK(s.raw_bit_rate == ref.raw_bit_rate);
  }
}

TEST_CASE("raw bit rate times duration equals X-basis signal bits") {
  const auto f = synthetic(80'000, 9);
  for (double duration : {0.5, 1.0, 3.0}) {
    const auto s = sift(f.tx, f.events, duration);
    CHECK(s.raw_bit_rate * duration == s.at(Intensity::Signal, Basis::X).sifted_bits);
  }
}

TEST_CASE("misaligned streams are a hard error") {
  auto f = synthetic(100, 0);
  SUBCASE("event without a transmitter entry") {
    f.events.push_back({1000, 0, Basis::X, 0});
    CHECK_THROWS_AS(sift(f.tx, f.events, 1.0), MisalignmentError);
  }
  SUBCASE("two events in one slot") {
    f.events.push_back(f.events[3]);
    CHECK_THROWS_AS(sift(f.tx, f.events, 1.0), MisalignmentError);
  }
  SUBCASE("unsorted transmitter record") {
    std::swap(f.tx[1], f.tx[2]);
    CHECK_THROWS_AS(sift(f.tx, f.events, 1.0), MisalignmentError);
  }
}

TEST_CASE("sifting events agrees with sifting tallies") {
  const ProtocolParams p;
  MonteCarloConfig c;
  c.n_slots = 1'000'000;
  c.seed = 12;
  c.record_events = true;
  const auto r = run_montecarlo(p, LinkModel::bidirectional(ChannelSpec::emulated(4)), c);
  const auto a = sift(r.tx_record, r.events, r.tallies.duration_s);
  const auto b = sifted_from_tallies(r.tallies);
  for (std::size_t i = 0; i < a.cells.size(); ++i) {
    CHECK(a.cells[i].sifted_bits == b.cells[i].sifted_bits);
    CHECK(a.cells[i].error_bits == b.cells[i].error_bits);
  }
  CHECK(a.raw_bit_rate == doctest::Approx(b.raw_bit_rate));
  CHECK(a.qber_minority == doctest::Approx(b.qber_minority));
}

TEST_CASE("without the cross-talk increment both bases show the same QBER") {
  const ProtocolParams p;
  auto l = LinkModel::bidirectional(ChannelSpec::emulated(3));
  l.crosstalk_qber_delta = 0;
  MonteCarloConfig c;
  c.n_slots = 20'000'000;
  c.seed = 13;
  const auto s = sifted_from_tallies(run_montecarlo(p, l, c).tallies);
  const double nx = s.at(Intensity::Signal, Basis::X).sifted_bits;
  const double ny = s.at(Intensity::Signal, Basis::Y).sifted_bits;
  const double q = s.qber_majority;
  const double sigma = std::sqrt(q * (1 - q) * (1 / nx + 1 / ny));
  CHECK(std::fabs(s.qber_majority - s.qber_minority) < 5 * sigma);
}

TEST_CASE("sifted stats merge") {
  const auto f = synthetic(20'000, 11);
  const auto half = f.tx.size() / 2;
  const std::span<const Symbol> tx(f.tx);
  const std::span<const DetectionEvent> ev(f.events);
  auto a = sift(tx.first(half), ev.first(half), 1.0);
  a.merge(sift(tx.subspan(half), ev.subspan(half), 1.0));
  const auto whole = sift(f.tx, f.events, 2.0);
  for (std::size_t i = 0; i < whole.cells.size(); ++i)
    CHECK(a.cells[i].sifted_bits == whole.cells[i].sifted_bits);
  CHECK(a.raw_bit_rate == doctest::Approx(whole.raw_bit_rate));
  CHECK(a.qber_majority == doctest::Approx(whole.qber_majority));
}

TEST_CASE("gains from tallies") {
  const ProtocolParams p;
  SUBCASE("no clicks: Q = 0, E absent") {
    Tallies t;
    t.cell(Intensity::Signal, Basis::X, Basis::X).sent = 100;
    const auto g = gains_from_tallies(t);
    REQUIRE(g[0]);
    CHECK(g[0]->q == 0.0);
    CHECK_FALSE(g[0]->e);
    CHECK_FALSE(g[1]);
  }
  SUBCASE("analytic tallies reproduce the closed-form gain") {
    const auto l = LinkModel::unidirectional(ChannelSpec::emulated(20));
    const auto g = gains_from_tallies(run_analytic(p, l, 1.0));
    const double eta = std::pow(10.0, -(20 + 8.02) / 10) * 0.5 * 0.85;
    CHECK(g[0]->q == doctest::Approx(6e-8 - std::expm1(-eta * 0.5)).epsilon(1e-12));
    CHECK(g[2]->q == doctest::Approx(6e-8).epsilon(1e-3));
  }
  SUBCASE("basis selection") {
    const auto t = run_analytic(p, LinkModel::unidirectional(ChannelSpec::emulated(20)));
    const auto x = gains_from_tallies(t, BasisSelection::X);
    const auto y = gains_from_tallies(t, BasisSelection::Y);
    CHECK(x[0]->sent == doctest::Approx(1e9 * 14 / 16 * 225 / 256));
    CHECK(y[0]->sent == doctest::Approx(1e9 * 14 / 16 / 256));
  }
}
