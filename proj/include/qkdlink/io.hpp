#pragma once

#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "qkdlink/engine.hpp"
#include "qkdlink/keyrate.hpp"
#include "qkdlink/optics.hpp"
#include "qkdlink/sifting.hpp"

namespace qkdlink {

/// Malformed input file. The message carries the line number when known.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Event logs. Text: header "slot_index,detector,rx_basis" then one row per
// event. Binary: "QKEV", u16 version, u16 reserved, u64 count, then 10-byte
// little-endian records (u64 slot, u8 detector, u8 basis).
void write_events_text(std::ostream& os, std::span<const DetectionEvent> events);
std::vector<DetectionEvent> read_events_text(std::istream& is);
void write_events_binary(std::ostream& os, std::span<const DetectionEvent> events);
std::vector<DetectionEvent> read_events_binary(std::istream& is);

inline constexpr std::uint16_t kEventLogVersion = 1;

// Tallies: "#duration_s=<v>" and "#pulses_total=<v>" lines, then the header
// "intensity,tx_basis,rx_basis,sent,clicks,errors" and twelve rows. Values are
// written with 17 significant digits, so a round trip is exact.
void write_tallies(std::ostream& os, const Tallies& tallies);
Tallies read_tallies(std::istream& is);

/// One JSON object per call, on a single line.
std::string report_json(const KeyRateReport& report, double channel_db,
                        std::string_view direction);

/// Per-circuit loss table with header
/// "circuit,component,loss_db,db_per_cm,length_cm". Fixed components fill
/// loss_db; sin_propagation rows fill db_per_cm and length_cm. Circuits keep
/// file order within each entry.
std::map<std::string, std::vector<ComponentLoss>> read_budget_table(std::istream& is);
void write_budget_table(std::ostream& os,
                        const std::map<std::string, std::vector<ComponentLoss>>& table);

/// "%.<digits>g" in the C locale, for byte-stable text output.
std::string format_number(double v, int digits = 10);

}  // namespace qkdlink
