#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "qkdlink/optics.hpp"
#include "qkdlink/protocol.hpp"
#include "qkdlink/stabilizer.hpp"

namespace qkdlink {

enum class Mode { SweepDb, FiberPoint, StabilityRun, LossBudget, FiniteKey };
enum class Direction { Unidirectional, Bidirectional };
enum class EngineKind { Analytic, MonteCarlo };

std::string_view to_string(Mode m);
std::string_view to_string(Direction d);
std::string_view to_string(EngineKind e);
Mode parse_mode(std::string_view s);
Direction parse_direction(std::string_view s);
EngineKind parse_engine(std::string_view s);

struct ExperimentSpec {
  Mode mode = Mode::SweepDb;
  Direction direction = Direction::Bidirectional;
  EngineKind engine = EngineKind::Analytic;
  double sweep_start_db = 7.0;
  double sweep_stop_db = 43.0;
  double sweep_step_db = 3.0;
  double fiber_km = 50.0;
  /// Acquisition time per point; the finite-key block is what it collects.
  double duration_s = 3600.0;
  /// finite_key mode: block size in raw key bits; overrides duration_s when > 0.
  double block_events = 0.0;
  /// Monte Carlo slots per point; 0 picks a count from target_rel_error.
  std::uint64_t n_slots = 0;
  double target_rel_error = 0.05;
  std::uint64_t slot_cap = 1'000'000'000;
  std::optional<std::uint64_t> seed;
  std::string output_path;
  unsigned threads = 0;

  /// Sweep points in order; empty when start > stop.
  std::vector<double> sweep_points() const;
};

struct StabilitySettings {
  DriftProfile drift = DriftProfile::linear(1.0);
  bool stabilized = true;
  double interval_s = 1.0;
  double initial_delay_ps = 0.0;
  double histogram_bin_ps = 10.0;
};

/// Receiver circuit as flat keys: counts and per-interface losses.
struct ReceiverSpec {
  int fibre_sin_facets = 2;
  double fibre_sin_facet_db = 0.66;
  int sin_inp_facets = 2;
  double sin_inp_facet_db = 0.90;
  double sin_db_per_cm = 0.14;
  double sin_length_cm = 10.0;
  double inp_section_db = 3.5;
  /// Optional per-circuit table; relative paths resolve against the config.
  std::string budget_table;
  std::string budget_circuit;

  std::vector<ComponentLoss> budget() const;
};

struct Config {
  ProtocolParams protocol;
  ReceiverSpec receiver;
  ChannelSpec channel = ChannelSpec::emulated(10.0);
  DetectorSpec detector;
  double visibility = 0.9868;
  double central_bin_fraction = 0.5;
  double bidirectional_crosstalk_rate_hz = 100.0;
  double bidirectional_crosstalk_qber_delta = 0.0015;
  double extra_background_hz = 0.0;
  double timing_sigma_ps = 60.0;
  StabilitySettings stability;
  ExperimentSpec experiment;
  /// Directory relative paths resolve against.
  std::filesystem::path base_dir = ".";
  /// Where each key was read from, "section.key" -> "source:line".
  std::map<std::string, std::string> origins;

  /// The link one direction sees on `channel`. Cross-talk is on only when
  /// both directions run.
  LinkModel link(Direction direction, const ChannelSpec& channel) const;
  LinkModel link(Direction direction) const { return link(direction, channel); }
};

/// Parse or validation failure; what() lists every diagnostic, one per line.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> diagnostics);
  const std::vector<std::string>& diagnostics() const { return diagnostics_; }

 private:
  std::vector<std::string> diagnostics_;
};

/// Parses a config. Unknown sections or keys, duplicate keys and malformed
/// values are errors reported as "<source>:<line>: [section] key: message".
/// Keys left out keep their defaults. Does not check cross-field validity.
Config parse_config(std::istream& is, const std::string& source = "<config>");
Config load_config(const std::filesystem::path& path);

/// Checks every section, including the seed. Throws ConfigError.
void validate_config(const Config& config);

/// Canonical text form; parse_config(serialize_config(c)) reproduces c.
std::string serialize_config(const Config& config);

}  // namespace qkdlink
