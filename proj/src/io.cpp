#include "qkdlink/io.hpp"

#include <array>
#include <charconv>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

#include <json.hpp>

namespace qkdlink {

namespace {

std::vector<std::string> split(const std::string& line, char sep = ',') {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

[[noreturn]] void fail(std::size_t line_no, const std::string& what) {
  throw FormatError("line " + std::to_string(line_no) + ": " + what);
}

double parse_double(const std::string& s, std::size_t line_no) {
  double v = 0;
  const auto* end = s.data() + s.size();
  auto [p, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || p != end) fail(line_no, "bad number '" + s + "'");
  return v;
}

std::uint64_t parse_u64(const std::string& s, std::size_t line_no) {
  std::uint64_t v = 0;
  const auto* end = s.data() + s.size();
  auto [p, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || p != end) fail(line_no, "bad integer '" + s + "'");
  return v;
}

template <typename T>
void put_le(std::ostream& os, T v) {
  std::array<char, sizeof(T)> b{};
  for (std::size_t i = 0; i < sizeof(T); ++i)
    b[i] = static_cast<char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xff);
  os.write(b.data(), b.size());
}

template <typename T>
T get_le(std::istream& is) {
  std::array<unsigned char, sizeof(T)> b{};
  if (!is.read(reinterpret_cast<char*>(b.data()), b.size()))
    throw FormatError("event log truncated");
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= std::uint64_t{b[i]} << (8 * i);
  return static_cast<T>(v);
}

}  // namespace

std::string format_number(double v, int digits) {
  std::array<char, 64> buf{};
  std::snprintf(buf.data(), buf.size(), "%.*g", digits, v);
  return buf.data();
}

void write_events_text(std::ostream& os, std::span<const DetectionEvent> events) {
  os << "slot_index,detector,rx_basis\n";
  for (const auto& e : events)
    os << e.slot_index << ',' << int{e.detector} << ',' << to_string(e.rx_basis) << '\n';
}

std::vector<DetectionEvent> read_events_text(std::istream& is) {
  std::vector<DetectionEvent> out;
  std::string line;
  std::size_t n = 0;
  if (!std::getline(is, line) || split(line) != std::vector<std::string>{
                                                   "slot_index", "detector", "rx_basis"})
    fail(1, "expected header slot_index,detector,rx_basis");
  n = 1;
  while (std::getline(is, line)) {
    ++n;
    if (line.empty() || line == "\r") continue;
    const auto f = split(line);
    if (f.size() != 3) fail(n, "expected 3 fields");
    DetectionEvent e;
    e.slot_index = parse_u64(f[0], n);
    const auto det = parse_u64(f[1], n);
    if (det > 1) fail(n, "detector must be 0 or 1");
    e.detector = static_cast<std::uint8_t>(det);
    try {
      e.rx_basis = parse_basis(f[2]);
    } catch (const std::invalid_argument& ex) {
      fail(n, ex.what());
    }
    out.push_back(e);
  }
  return out;
}

void write_events_binary(std::ostream& os, std::span<const DetectionEvent> events) {
  os.write("QKEV", 4);
  put_le<std::uint16_t>(os, kEventLogVersion);
  put_le<std::uint16_t>(os, 0);
  put_le<std::uint64_t>(os, events.size());
  for (const auto& e : events) {
    put_le<std::uint64_t>(os, e.slot_index);
    put_le<std::uint8_t>(os, e.detector);
    put_le<std::uint8_t>(os, static_cast<std::uint8_t>(e.rx_basis));
  }
}

std::vector<DetectionEvent> read_events_binary(std::istream& is) {
  std::array<char, 4> magic{};
  if (!is.read(magic.data(), 4) || std::string_view(magic.data(), 4) != "QKEV")
    throw FormatError("not an event log (bad magic)");
  const auto version = get_le<std::uint16_t>(is);
  if (version != kEventLogVersion)
    throw FormatError("unsupported event log version " + std::to_string(version));
  get_le<std::uint16_t>(is);
  const auto count = get_le<std::uint64_t>(is);
  std::vector<DetectionEvent> out;
  out.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(count, 1u << 24)));
  for (std::uint64_t i = 0; i < count; ++i) {
    DetectionEvent e;
    e.slot_index = get_le<std::uint64_t>(is);
    e.detector = get_le<std::uint8_t>(is);
    const auto basis = get_le<std::uint8_t>(is);
    if (e.detector > 1 || basis > 1)
      throw FormatError("bad record " + std::to_string(i));
    e.rx_basis = static_cast<Basis>(basis);
    out.push_back(e);
  }
  return out;
}

void write_tallies(std::ostream& os, const Tallies& t) {
  os << "#duration_s=" << format_number(t.duration_s, 17) << '\n';
  os << "#pulses_total=" << format_number(t.pulses_total, 17) << '\n';
  os << "intensity,tx_basis,rx_basis,sent,clicks,errors\n";
  for (Intensity i : kIntensities)
    for (Basis tx : kBases)
      for (Basis rx : kBases) {
        const auto& c = t.cell(i, tx, rx);
        os << to_string(i) << ',' << to_string(tx) << ',' << to_string(rx) << ','
           << format_number(c.sent, 17) << ',' << format_number(c.clicks, 17) << ','
           << format_number(c.errors, 17) << '\n';
      }
}

Tallies read_tallies(std::istream& is) {
  Tallies t;
  std::string line;
  std::size_t n = 0;
  bool header = false;
  bool have_duration = false;
  bool have_pulses = false;
  while (std::getline(is, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto eq = line.find('=');
      if (eq == std::string::npos) fail(n, "expected #key=value");
      const auto key = line.substr(1, eq - 1);
      const double v = parse_double(line.substr(eq + 1), n);
      if (key == "duration_s") {
        t.duration_s = v;
        have_duration = true;
      } else if (key == "pulses_total") {
        t.pulses_total = v;
        have_pulses = true;
      } else {
        fail(n, "unknown key '" + key + "'");
      }
      continue;
    }
    if (!header) {
      if (line != "intensity,tx_basis,rx_basis,sent,clicks,errors")
        fail(n, "expected header intensity,tx_basis,rx_basis,sent,clicks,errors");
      header = true;
      continue;
    }
    const auto f = split(line);
    if (f.size() != 6) fail(n, "expected 6 fields");
    try {
      auto& c = t.cell(parse_intensity(f[0]), parse_basis(f[1]), parse_basis(f[2]));
      c.sent = parse_double(f[3], n);
      c.clicks = parse_double(f[4], n);
      c.errors = parse_double(f[5], n);
    } catch (const std::invalid_argument& ex) {
      fail(n, ex.what());
    }
  }
  if (!header || !have_duration || !have_pulses)
    throw FormatError("tallies: missing header or #duration_s/#pulses_total");
  return t;
}

std::string report_json(const KeyRateReport& r, double channel_db,
                        std::string_view direction) {
  const auto& p = r.params_used;
  nlohmann::ordered_json j;
  j["channel_db"] = channel_db;
  j["direction"] = direction;
  j["duration_s"] = r.duration_s;
  j["raw_bps"] = r.raw_bps;
  j["Y0"] = r.y0;
  j["Y1_lower"] = r.y1_lower;
  j["e1_upper"] = r.e1_upper;
  j["Q1_lower"] = r.q1_lower;
  j["Q_mu"] = r.q_mu;
  j["E_mu"] = r.e_mu;
  j["skr_asymptotic_bps"] = r.skr_asymptotic_bps;
  j["skr_asymptotic_unclamped_bps"] = r.skr_asymptotic_unclamped_bps;
  j["asymptotic_status"] = to_string(r.asymptotic_status);
  j["key_length_finite"] = r.key_length_finite_bits;
  j["key_length_finite_unclamped"] = r.key_length_finite_unclamped_bits;
  j["phase_error_upper_finite"] = r.phase_error_upper_finite;
  j["block_size"] = r.block_size;
  j["finite_status"] = to_string(r.finite_status);
  j["params_used"] = {
      {"clock_rate_hz", p.clock_rate_hz},
      {"basis_majority", p.basis_majority},
      {"basis_minority", p.basis_minority},
      {"intensity_weights", p.intensity_weights},
      {"mu", p.mu},
      {"nu", p.nu},
      {"vacuum_mu", p.vacuum_mu},
      {"f_ec", p.f_ec},
      {"eps_sec", p.eps_sec},
  };
  return j.dump();
}

std::map<std::string, std::vector<ComponentLoss>> read_budget_table(std::istream& is) {
  std::map<std::string, std::vector<ComponentLoss>> out;
  std::string line;
  std::size_t n = 0;
  bool header = false;
  while (std::getline(is, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      if (line != "circuit,component,loss_db,db_per_cm,length_cm")
        fail(n, "expected header circuit,component,loss_db,db_per_cm,length_cm");
      header = true;
      continue;
    }
    const auto f = split(line);
    if (f.size() != 5) fail(n, "expected 5 fields");
    if (f[0].empty()) fail(n, "empty circuit name");
    try {
      const LossKind kind = parse_loss_kind(f[1]);
      if (kind == LossKind::SiNPropagation) {
        if (f[3].empty() || f[4].empty())
          fail(n, "sin_propagation needs db_per_cm and length_cm");
        out[f[0]].push_back(
            ComponentLoss::propagation(parse_double(f[3], n), parse_double(f[4], n)));
      } else {
        if (f[2].empty()) fail(n, "fixed component needs loss_db");
        out[f[0]].push_back(ComponentLoss::fixed(kind, parse_double(f[2], n)));
      }
    } catch (const std::invalid_argument& ex) {
      fail(n, ex.what());
    }
  }
  if (!header) throw FormatError("budget table: missing header");
  return out;
}

void write_budget_table(std::ostream& os,
                        const std::map<std::string, std::vector<ComponentLoss>>& table) {
  os << "circuit,component,loss_db,db_per_cm,length_cm\n";
  for (const auto& [name, parts] : table)
    for (const auto& c : parts) {
      os << name << ',' << to_string(c.kind) << ',';
      if (c.kind == LossKind::SiNPropagation)
        os << ','
           << format_number(c.length_cm > 0 ? c.loss_db / c.length_cm : 0.0, 17) << ','
           << format_number(c.length_cm, 17) << '\n';
      else
        os << format_number(c.loss_db, 17) << ",,\n";
    }
}

}  // namespace qkdlink
