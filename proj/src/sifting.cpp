#include "qkdlink/sifting.hpp"

#include <algorithm>
#include <unordered_set>

namespace qkdlink {

void SiftedStats::finalize() {
  const auto& x = at(Intensity::Signal, Basis::X);
  const auto& y = at(Intensity::Signal, Basis::Y);
  raw_bit_rate = duration_s > 0 ? x.sifted_bits / duration_s : 0.0;
  qber_majority = x.sifted_bits > 0 ? x.error_bits / x.sifted_bits : 0.0;
  qber_minority = y.sifted_bits > 0 ? y.error_bits / y.sifted_bits : 0.0;
}

SiftedStats& SiftedStats::merge(const SiftedStats& other) {
  for (std::size_t i = 0; i < cells.size(); ++i) {
    cells[i].sifted_bits += other.cells[i].sifted_bits;
    cells[i].error_bits += other.cells[i].error_bits;
  }
  duration_s += other.duration_s;
  finalize();
  return *this;
}

SiftedStats sift(std::span<const Symbol> tx_record,
                 std::span<const DetectionEvent> events, double duration_s) {
  if (!std::is_sorted(tx_record.begin(), tx_record.end(),
                      [](const Symbol& a, const Symbol& b) {
                        return a.slot_index < b.slot_index;
                      }))
    throw MisalignmentError("transmitter record is not sorted by slot");

  SiftedStats out;
  out.duration_s = duration_s;
  std::unordered_set<std::uint64_t> seen;
  seen.reserve(events.size());
  for (const auto& ev : events) {
    if (!seen.insert(ev.slot_index).second)
      throw MisalignmentError("two events in slot " + std::to_string(ev.slot_index));
    const auto it = std::lower_bound(
        tx_record.begin(), tx_record.end(), ev.slot_index,
        [](const Symbol& s, std::uint64_t slot) { return s.slot_index < slot; });
    if (it == tx_record.end() || it->slot_index != ev.slot_index)
      throw MisalignmentError("no transmitter record for slot " +
                              std::to_string(ev.slot_index));
    if (it->basis != ev.rx_basis) continue;
    auto& cell = out.at(it->intensity, it->basis);
    cell.sifted_bits += 1;
    if (ev.detector != it->bit) cell.error_bits += 1;
  }
  out.finalize();
  return out;
}

SiftedStats sifted_from_tallies(const Tallies& tallies) {
  SiftedStats out;
  out.duration_s = tallies.duration_s;
  for (Intensity i : kIntensities) {
    for (Basis b : kBases) {
      const auto& c = tallies.cell(i, b, b);
      out.at(i, b) = {c.clicks, c.errors};
    }
  }
  out.finalize();
  return out;
}

double sifting_factor(const ProtocolParams& params) {
  const double px = params.basis_probability(Basis::X);
  return px * px;
}

Gains gains_from_tallies(const Tallies& tallies, BasisSelection selection) {
  Gains gains;
  for (Intensity i : kIntensities) {
    Gain g;
    for (Basis b : kBases) {
      if (selection == BasisSelection::X && b != Basis::X) continue;
      if (selection == BasisSelection::Y && b != Basis::Y) continue;
      const auto& c = tallies.cell(i, b, b);
      g.sent += c.sent;
      g.clicks += c.clicks;
      g.errors += c.errors;
    }
    if (!(g.sent > 0)) continue;
    g.q = g.clicks / g.sent;
    if (g.clicks > 0) g.e = g.errors / g.clicks;
    gains[index(i)] = g;
  }
  return gains;
}

}  // namespace qkdlink
