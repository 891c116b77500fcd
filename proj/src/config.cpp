#include "qkdlink/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <istream>
#include <limits>
#include <sstream>

#include "qkdlink/io.hpp"

namespace qkdlink {

std::string_view to_string(Mode m) {
  switch (m) {
    case Mode::SweepDb: return "sweep_db";
    case Mode::FiberPoint: return "fiber_point";
    case Mode::StabilityRun: return "stability_run";
    case Mode::LossBudget: return "loss_budget";
    case Mode::FiniteKey: return "finite_key";
  }
  return "?";
}

std::string_view to_string(Direction d) {
  return d == Direction::Bidirectional ? "bidirectional" : "unidirectional";
}

std::string_view to_string(EngineKind e) {
  return e == EngineKind::MonteCarlo ? "montecarlo" : "analytic";
}

Mode parse_mode(std::string_view s) {
  for (Mode m : {Mode::SweepDb, Mode::FiberPoint, Mode::StabilityRun, Mode::LossBudget,
                 Mode::FiniteKey})
    if (to_string(m) == s) return m;
  throw std::invalid_argument("unknown mode '" + std::string(s) + "'");
}

Direction parse_direction(std::string_view s) {
  for (Direction d : {Direction::Unidirectional, Direction::Bidirectional})
    if (to_string(d) == s) return d;
  throw std::invalid_argument("unknown direction '" + std::string(s) + "'");
}

EngineKind parse_engine(std::string_view s) {
  for (EngineKind e : {EngineKind::Analytic, EngineKind::MonteCarlo})
    if (to_string(e) == s) return e;
  throw std::invalid_argument("unknown engine '" + std::string(s) + "'");
}

std::vector<double> ExperimentSpec::sweep_points() const {
  std::vector<double> out;
  if (!(sweep_step_db > 0) || !(sweep_start_db <= sweep_stop_db)) return out;
  // Index-based so the points do not accumulate rounding error.
  const auto n = static_cast<long>(
      std::floor((sweep_stop_db - sweep_start_db) / sweep_step_db + 1e-9));
  for (long i = 0; i <= n; ++i) out.push_back(sweep_start_db + i * sweep_step_db);
  return out;
}

std::vector<ComponentLoss> ReceiverSpec::budget() const {
  if (fibre_sin_facets < 0 || sin_inp_facets < 0)
    throw std::invalid_argument("facet counts must be >= 0");
  std::vector<ComponentLoss> out;
  for (int i = 0; i < fibre_sin_facets; ++i)
    out.push_back(ComponentLoss::fixed(LossKind::FibreSiNFacet, fibre_sin_facet_db));
  for (int i = 0; i < sin_inp_facets; ++i)
    out.push_back(ComponentLoss::fixed(LossKind::SiNInPFacet, sin_inp_facet_db));
  out.push_back(ComponentLoss::propagation(sin_db_per_cm, sin_length_cm));
  out.push_back(ComponentLoss::fixed(LossKind::InPSection, inp_section_db));
  return out;
}

LinkModel Config::link(Direction direction, const ChannelSpec& ch) const {
  LinkModel l;
  l.receiver_budget = receiver.budget();
  if (!receiver.budget_table.empty() && !receiver.budget_circuit.empty()) {
    std::ifstream in(base_dir / receiver.budget_table);
    if (!in) throw std::invalid_argument("budget_table: cannot open " + receiver.budget_table);
    const auto table = read_budget_table(in);
    const auto it = table.find(receiver.budget_circuit);
    if (it == table.end())
      throw std::invalid_argument("budget_circuit: '" + receiver.budget_circuit +
                                  "' not in " + receiver.budget_table);
    l.receiver_budget = it->second;
  }
  l.channel = ch;
  l.detector = detector;
  l.visibility = visibility;
  l.central_bin_fraction = central_bin_fraction;
  l.extra_background_hz = extra_background_hz;
  l.timing_sigma_ps = timing_sigma_ps;
  if (direction == Direction::Bidirectional) {
    l.crosstalk_rate_hz = bidirectional_crosstalk_rate_hz;
    l.crosstalk_qber_delta = bidirectional_crosstalk_qber_delta;
  }
  return l;
}

ConfigError::ConfigError(std::vector<std::string> diagnostics)
    : std::runtime_error([&] {
        std::string s;
        for (const auto& d : diagnostics) s += d + "\n";
        if (!s.empty()) s.pop_back();
        return s;
      }()),
      diagnostics_(std::move(diagnostics)) {}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

double to_double(const std::string& s) {
  double v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size() || !std::isfinite(v))
    throw std::invalid_argument("expected a number, got '" + s + "'");
  return v;
}

std::uint64_t to_u64(const std::string& s) {
  std::uint64_t v = 0;
  // Accept 1e8-style values as long as they are exact integers.
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec == std::errc() && p == s.data() + s.size()) return v;
  const double d = to_double(s);
  if (d < 0 || d != std::floor(d) || d > 1.8e19)
    throw std::invalid_argument("expected a non-negative integer, got '" + s + "'");
  return static_cast<std::uint64_t>(d);
}

bool to_bool(const std::string& s) {
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw std::invalid_argument("expected true/false, got '" + s + "'");
}

std::vector<double> to_ratio(const std::string& s, std::size_t parts) {
  std::vector<double> out;
  std::size_t start = 0;
  while (true) {
    const auto colon = s.find(':', start);
    out.push_back(to_double(trim(s.substr(start, colon - start))));
    if (colon == std::string::npos) break;
    start = colon + 1;
  }
  if (out.size() != parts)
    throw std::invalid_argument("expected a ratio with " + std::to_string(parts) +
                                " parts, got '" + s + "'");
  return out;
}

std::string num(double v) { return format_number(v, 17); }

struct Field {
  std::string_view section;
  std::string_view key;
  std::function<void(Config&, const std::string&)> set;
  std::function<std::string(const Config&)> get;
};

template <typename Acc>
Field real(std::string_view sec, std::string_view key, Acc acc) {
  return {sec, key, [acc](Config& c, const std::string& v) { acc(c) = to_double(v); },
          [acc](const Config& c) { return num(acc(const_cast<Config&>(c))); }};
}

template <typename Acc>
Field integer(std::string_view sec, std::string_view key, Acc acc) {
  return {sec, key,
          [acc](Config& c, const std::string& v) {
            using T = std::remove_reference_t<decltype(acc(c))>;
            const auto u = to_u64(v);
            if (u > static_cast<std::uint64_t>(std::numeric_limits<T>::max()))
              throw std::invalid_argument("value out of range");
            acc(c) = static_cast<T>(u);
          },
          [acc](const Config& c) { return std::to_string(acc(const_cast<Config&>(c))); }};
}

template <typename Acc>
Field boolean(std::string_view sec, std::string_view key, Acc acc) {
  return {sec, key, [acc](Config& c, const std::string& v) { acc(c) = to_bool(v); },
          [acc](const Config& c) {
            return std::string(acc(const_cast<Config&>(c)) ? "true" : "false");
          }};
}

template <typename Acc>
Field text(std::string_view sec, std::string_view key, Acc acc) {
  return {sec, key, [acc](Config& c, const std::string& v) { acc(c) = v; },
          [acc](const Config& c) { return acc(const_cast<Config&>(c)); }};
}

template <typename Acc, typename Parse>
Field enumeration(std::string_view sec, std::string_view key, Acc acc, Parse parse) {
  return {sec, key, [acc, parse](Config& c, const std::string& v) { acc(c) = parse(v); },
          [acc](const Config& c) {
            return std::string(to_string(acc(const_cast<Config&>(c))));
          }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> f = {
      real("protocol", "clock_rate_hz", [](Config& c) -> auto& { return c.protocol.clock_rate_hz; }),
      {"protocol", "basis_ratio",
       [](Config& c, const std::string& v) {
         const auto r = to_ratio(v, 2);
         c.protocol.basis_majority = r[0];
         c.protocol.basis_minority = r[1];
       },
       [](const Config& c) {
         return num(c.protocol.basis_majority) + ":" + num(c.protocol.basis_minority);
       }},
      {"protocol", "intensity_ratio",
       [](Config& c, const std::string& v) {
         const auto r = to_ratio(v, 3);
         c.protocol.intensity_weights = {r[0], r[1], r[2]};
       },
       [](const Config& c) {
         const auto& w = c.protocol.intensity_weights;
         return num(w[0]) + ":" + num(w[1]) + ":" + num(w[2]);
       }},
      real("protocol", "mu", [](Config& c) -> auto& { return c.protocol.mu; }),
      real("protocol", "nu", [](Config& c) -> auto& { return c.protocol.nu; }),
      real("protocol", "vacuum_mu", [](Config& c) -> auto& { return c.protocol.vacuum_mu; }),
      real("protocol", "time_bin_separation_ps", [](Config& c) -> auto& { return c.protocol.time_bin_separation_ps; }),
      real("protocol", "pulse_width_ps", [](Config& c) -> auto& { return c.protocol.pulse_width_ps; }),
      real("protocol", "f_ec", [](Config& c) -> auto& { return c.protocol.f_ec; }),
      real("protocol", "eps_sec", [](Config& c) -> auto& { return c.protocol.eps_sec; }),

      integer("receiver", "fibre_sin_facets", [](Config& c) -> auto& { return c.receiver.fibre_sin_facets; }),
      real("receiver", "fibre_sin_facet_db", [](Config& c) -> auto& { return c.receiver.fibre_sin_facet_db; }),
      integer("receiver", "sin_inp_facets", [](Config& c) -> auto& { return c.receiver.sin_inp_facets; }),
      real("receiver", "sin_inp_facet_db", [](Config& c) -> auto& { return c.receiver.sin_inp_facet_db; }),
      real("receiver", "sin_db_per_cm", [](Config& c) -> auto& { return c.receiver.sin_db_per_cm; }),
      real("receiver", "sin_length_cm", [](Config& c) -> auto& { return c.receiver.sin_length_cm; }),
      real("receiver", "inp_section_db", [](Config& c) -> auto& { return c.receiver.inp_section_db; }),
      text("receiver", "budget_table", [](Config& c) -> auto& { return c.receiver.budget_table; }),
      text("receiver", "budget_circuit", [](Config& c) -> auto& { return c.receiver.budget_circuit; }),

      {"channel", "mode",
       [](Config& c, const std::string& v) {
         if (v == "emulated_db") c.channel.mode = ChannelSpec::Mode::EmulatedDb;
         else if (v == "fiber_km") c.channel.mode = ChannelSpec::Mode::FiberKm;
         else throw std::invalid_argument("expected emulated_db or fiber_km, got '" + v + "'");
       },
       [](const Config& c) {
         return std::string(c.channel.mode == ChannelSpec::Mode::FiberKm ? "fiber_km"
                                                                         : "emulated_db");
       }},
      real("channel", "channel_db", [](Config& c) -> auto& { return c.channel.attenuation_db; }),
      real("channel", "length_km", [](Config& c) -> auto& { return c.channel.length_km; }),
      real("channel", "fiber_loss_db_per_km", [](Config& c) -> auto& { return c.channel.fiber_loss_db_per_km; }),

      real("detector", "efficiency", [](Config& c) -> auto& { return c.detector.efficiency; }),
      real("detector", "dark_rate_hz", [](Config& c) -> auto& { return c.detector.dark_rate_hz; }),
      real("detector", "gate_ps", [](Config& c) -> auto& { return c.detector.gate_width_ps; }),
      integer("detector", "count", [](Config& c) -> auto& { return c.detector.count; }),

      real("link", "visibility", [](Config& c) -> auto& { return c.visibility; }),
      real("link", "central_bin_fraction", [](Config& c) -> auto& { return c.central_bin_fraction; }),
      real("link", "bidirectional_crosstalk_rate_hz", [](Config& c) -> auto& { return c.bidirectional_crosstalk_rate_hz; }),
      real("link", "bidirectional_crosstalk_qber_delta", [](Config& c) -> auto& { return c.bidirectional_crosstalk_qber_delta; }),
      real("link", "extra_background_hz", [](Config& c) -> auto& { return c.extra_background_hz; }),
      real("link", "timing_sigma_ps", [](Config& c) -> auto& { return c.timing_sigma_ps; }),

      enumeration("drift", "kind", [](Config& c) -> auto& { return c.stability.drift.kind; }, parse_drift_kind),
      real("drift", "rate_ps_per_s", [](Config& c) -> auto& { return c.stability.drift.rate_ps_per_s; }),
      real("drift", "amplitude_ps", [](Config& c) -> auto& { return c.stability.drift.amplitude_ps; }),
      real("drift", "period_s", [](Config& c) -> auto& { return c.stability.drift.period_s; }),
      real("drift", "walk_sigma_ps", [](Config& c) -> auto& { return c.stability.drift.walk_sigma_ps; }),
      real("drift", "walk_step_s", [](Config& c) -> auto& { return c.stability.drift.walk_step_s; }),
      integer("drift", "seed", [](Config& c) -> auto& { return c.stability.drift.seed; }),
      boolean("drift", "stabilized", [](Config& c) -> auto& { return c.stability.stabilized; }),
      real("drift", "interval_s", [](Config& c) -> auto& { return c.stability.interval_s; }),
      real("drift", "initial_delay_ps", [](Config& c) -> auto& { return c.stability.initial_delay_ps; }),
      real("drift", "histogram_bin_ps", [](Config& c) -> auto& { return c.stability.histogram_bin_ps; }),

      enumeration("experiment", "mode", [](Config& c) -> auto& { return c.experiment.mode; }, parse_mode),
      enumeration("experiment", "direction", [](Config& c) -> auto& { return c.experiment.direction; }, parse_direction),
      enumeration("experiment", "engine", [](Config& c) -> auto& { return c.experiment.engine; }, parse_engine),
      real("experiment", "sweep_start_db", [](Config& c) -> auto& { return c.experiment.sweep_start_db; }),
      real("experiment", "sweep_stop_db", [](Config& c) -> auto& { return c.experiment.sweep_stop_db; }),
      real("experiment", "sweep_step_db", [](Config& c) -> auto& { return c.experiment.sweep_step_db; }),
      real("experiment", "fiber_km", [](Config& c) -> auto& { return c.experiment.fiber_km; }),
      real("experiment", "duration_s", [](Config& c) -> auto& { return c.experiment.duration_s; }),
      real("experiment", "block_events", [](Config& c) -> auto& { return c.experiment.block_events; }),
      integer("experiment", "n_slots", [](Config& c) -> auto& { return c.experiment.n_slots; }),
      real("experiment", "target_rel_error", [](Config& c) -> auto& { return c.experiment.target_rel_error; }),
      integer("experiment", "slot_cap", [](Config& c) -> auto& { return c.experiment.slot_cap; }),
      {"experiment", "seed",
       [](Config& c, const std::string& v) { c.experiment.seed = to_u64(v); },
       [](const Config& c) {
         return c.experiment.seed ? std::to_string(*c.experiment.seed) : std::string();
       }},
      text("experiment", "output", [](Config& c) -> auto& { return c.experiment.output_path; }),
      integer("experiment", "threads", [](Config& c) -> auto& { return c.experiment.threads; }),
  };
  return f;
}

const Field* find_field(std::string_view section, std::string_view key) {
  for (const auto& f : fields())
    if (f.section == section && f.key == key) return &f;
  return nullptr;
}

bool known_section(std::string_view s) {
  for (const auto& f : fields())
    if (f.section == s) return true;
  return false;
}

}  // namespace

Config parse_config(std::istream& is, const std::string& source) {
  Config c;
  std::vector<std::string> diags;
  std::string section;
  std::string line;
  std::size_t n = 0;
  while (std::getline(is, line)) {
    ++n;
    const std::string where = source + ":" + std::to_string(n);
    std::string s = trim(line);
    if (s.empty() || s[0] == '#' || s[0] == ';') continue;
    if (s.front() == '[') {
      if (s.back() != ']') {
        diags.push_back(where + ": unterminated section header");
        continue;
      }
      section = trim(s.substr(1, s.size() - 2));
      if (!known_section(section)) diags.push_back(where + ": unknown section [" + section + "]");
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) {
      diags.push_back(where + ": expected key = value");
      continue;
    }
    const std::string key = trim(s.substr(0, eq));
    std::string value = trim(s.substr(eq + 1));
    if (const auto hash = value.find(" #"); hash != std::string::npos) value = trim(value.substr(0, hash));
    const std::string prefix = where + ": [" + section + "] " + key;
    if (section.empty()) {
      diags.push_back(where + ": key '" + key + "' outside any section");
      continue;
    }
    const Field* f = find_field(section, key);
    if (!f) {
      if (known_section(section)) diags.push_back(prefix + ": unknown key");
      continue;
    }
    const std::string id = section + "." + key;
    if (c.origins.contains(id)) {
      diags.push_back(prefix + ": duplicate key (first at " + c.origins[id] + ")");
      continue;
    }
    c.origins[id] = where;
    // An empty seed means "not set", like leaving the key out.
    if (value.empty() && id == "experiment.seed") continue;
    try {
      f->set(c, value);
    } catch (const std::exception& ex) {
      diags.push_back(prefix + ": " + ex.what());
    }
  }
  if (!diags.empty()) throw ConfigError(std::move(diags));
  return c;
}

Config load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError({path.string() + ": cannot open"});
  Config c = parse_config(in, path.string());
  c.base_dir = path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path();
  return c;
}

void validate_config(const Config& c) {
  std::vector<std::string> diags;
  // Attach the line a field came from when the message names a config key.
  auto report = [&](std::string_view section, const std::string& msg) {
    const auto colon = msg.find(':');
    std::string key = colon == std::string::npos ? std::string() : msg.substr(0, colon);
    if (key == "gate_width_ps") key = "gate_ps";
    if (key == "detector_count") key = "count";
    if (key == "intensity_probs") key = "intensity_ratio";
    const auto it = c.origins.find(std::string(section) + "." + key);
    const std::string where = it != c.origins.end() ? it->second + ": " : std::string();
    diags.push_back(where + "[" + std::string(section) + "] " + msg);
  };
  auto check = [&](std::string_view section, auto&& fn) {
    try {
      fn();
    } catch (const std::exception& ex) {
      report(section, ex.what());
    }
  };

  check("protocol", [&] { c.protocol.validate(); });
  check("receiver", [&] { c.receiver.budget(); });
  check("channel", [&] { c.channel.validate(); });
  if (diags.empty()) {
    check("link", [&] {
      c.link(Direction::Unidirectional).validate(c.protocol.clock_period_ps());
      c.link(Direction::Bidirectional).validate(c.protocol.clock_period_ps());
    });
  }
  check("drift", [&] { c.stability.drift.validate(); });
  const auto& s = c.stability;
  if (!(s.interval_s > 0)) report("drift", "interval_s: must be positive");
  if (!(s.histogram_bin_ps > 0 && s.histogram_bin_ps <= 10))
    report("drift", "histogram_bin_ps: must lie in (0,10]");

  const auto& e = c.experiment;
  if (!e.seed) report("experiment", "seed: required (set it here or pass --seed)");
  if (e.mode == Mode::SweepDb) {
    if (!(e.sweep_step_db > 0)) report("experiment", "sweep_step_db: must be positive");
    if (!(e.sweep_start_db >= 0)) report("experiment", "sweep_start_db: must be >= 0");
    if (e.sweep_points().empty()) report("experiment", "sweep_start_db: sweep range is empty");
  }
  if (!(e.fiber_km >= 0)) report("experiment", "fiber_km: must be >= 0");
  if (!(e.duration_s > 0)) report("experiment", "duration_s: must be positive");
  if (!(e.block_events >= 0)) report("experiment", "block_events: must be >= 0");
  if (!(e.target_rel_error > 0)) report("experiment", "target_rel_error: must be positive");
  if (e.slot_cap == 0) report("experiment", "slot_cap: must be positive");
  if (!diags.empty()) throw ConfigError(std::move(diags));
}

std::string serialize_config(const Config& c) {
  std::ostringstream os;
  std::string_view section;
  for (const auto& f : fields()) {
    if (f.section != section) {
      if (!section.empty()) os << '\n';
      section = f.section;
      os << '[' << section << "]\n";
    }
    os << f.key << " = " << f.get(c) << '\n';
  }
  return os.str();
}

}  // namespace qkdlink
