#include "qkdlink/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "qkdlink/calibration.hpp"
#include "qkdlink/engine.hpp"
#include "qkdlink/io.hpp"
#include "qkdlink/sifting.hpp"
#include "qkdlink/version.hpp"

namespace qkdlink {

namespace {

struct PointSpec {
  double channel_db = 0.0;
  ChannelSpec channel;
};

std::vector<PointSpec> point_specs(const Config& c) {
  std::vector<PointSpec> out;
  switch (c.experiment.mode) {
    case Mode::SweepDb:
      for (double db : c.experiment.sweep_points())
        out.push_back({db, ChannelSpec::emulated(db)});
      break;
    case Mode::FiberPoint: {
      const auto ch = ChannelSpec::fiber(c.experiment.fiber_km, c.channel.fiber_loss_db_per_km);
      out.push_back({ch.loss_db(), ch});
      break;
    }
    case Mode::FiniteKey:
      out.push_back({c.channel.loss_db(), c.channel});
      break;
    default:
      break;
  }
  return out;
}

std::string reason_for(const std::vector<KeyRateReport>& reports) {
  for (const auto& r : reports)
    if (r.asymptotic_status != KeyStatus::Ok) return std::string(to_string(r.asymptotic_status));
  for (const auto& r : reports)
    if (r.finite_status != KeyStatus::Ok) return std::string(to_string(r.finite_status));
  return {};
}

PointRow evaluate_point(const Config& c, const PointSpec& p, std::size_t point_index,
                        std::vector<std::string>& warnings) {
  const auto& e = c.experiment;
  const auto& params = c.protocol;
  const LinkModel link = c.link(e.direction, p.channel);
  const int directions = e.direction == Direction::Bidirectional ? 2 : 1;

  PointRow row;
  row.channel_db = p.channel_db;
  row.direction = e.direction;
  Tallies pooled;
  for (int d = 0; d < directions; ++d) {
    Tallies t;
    if (e.mode == Mode::FiniteKey && e.block_events > 0) {
      t = tallies_for_block(params, link, e.block_events);
    } else if (e.engine == EngineKind::Analytic) {
      t = run_analytic(params, link, e.duration_s);
    } else {
      std::uint64_t n = e.n_slots;
      if (n == 0) {
        const auto choice = choose_slot_count(params, link, e.target_rel_error, e.slot_cap);
        n = choice.n_slots;
        if (choice.capped && d == 0)
          warnings.push_back("channel_db=" + format_number(p.channel_db) +
                             ": slot count capped at " + std::to_string(n) +
                             ", predicted SKR error " +
                             format_number(choice.predicted_rel_error, 3));
      }
      MonteCarloConfig mc;
      mc.n_slots = n;
      mc.seed = derive_seed(*e.seed, 2 * point_index + static_cast<std::size_t>(d));
      mc.threads = e.threads;
      t = run_montecarlo(params, link, mc).tallies;
      row.n_slots = n;
    }
    row.reports.push_back(evaluate_key_rate(t, params));
    pooled.merge(t);
  }

  for (const auto& r : row.reports) {
    row.raw_bps += r.raw_bps;
    row.skr_asymptotic_bps += r.skr_asymptotic_bps;
    row.skr_finite_bps += r.skr_finite_bps();
  }
  const auto& x = pooled.cell(Intensity::Signal, Basis::X, Basis::X);
  row.qber = x.clicks > 0 ? x.errors / x.clicks : 0.0;
  row.reason = reason_for(row.reports);
  return row;
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct Window {
  double t_s = 0.0;
  double length_s = 0.0;
  double drift_ps = 0.0;
  double delay_ps = 0.0;
  Tallies tallies;
  StepStatus status = StepStatus::InsufficientCounts;
};

std::vector<Window> aggregate(const std::vector<StabilityInterval>& iv, std::size_t k) {
  std::vector<Window> out;
  for (std::size_t i = 0; i < iv.size(); i += k) {
    Window w;
    const std::size_t end = std::min(iv.size(), i + k);
    w.t_s = iv[i].t_start_s;
    for (std::size_t j = i; j < end; ++j) {
      w.drift_ps += iv[j].drift_ps;
      w.delay_ps += iv[j].delay_ps;
      w.tallies.merge(iv[j].tallies);
      w.status = iv[j].status;
    }
    const double m = static_cast<double>(end - i);
    w.drift_ps /= m;
    w.delay_ps /= m;
    w.length_s = w.tallies.duration_s;
    out.push_back(std::move(w));
  }
  return out;
}

}  // namespace

std::vector<PointRow> compute_points(const Config& c, std::vector<std::string>* warnings) {
  const auto specs = point_specs(c);
  std::vector<PointRow> rows(specs.size());
  std::vector<std::vector<std::string>> notes(specs.size());

  // Monte Carlo points already use every core inside the engine.
  unsigned workers = c.experiment.threads;
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  if (c.experiment.engine == EngineKind::MonteCarlo) workers = 1;
  workers = std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(1, specs.size())));

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto work = [&] {
    for (std::size_t i = next++; i < specs.size(); i = next++) {
      try {
        rows[i] = evaluate_point(c, specs[i], i, notes[i]);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    for (unsigned w = 1; w < workers; ++w) pool.emplace_back(work);
    work();
  }
  if (failure) std::rethrow_exception(failure);
  if (warnings)
    for (auto& n : notes) warnings->insert(warnings->end(), n.begin(), n.end());
  return rows;
}

std::string point_csv(const std::vector<PointRow>& rows) {
  std::ostringstream os;
  os << kPointCsvHeader << '\n';
  for (const auto& r : rows) {
    os << format_number(r.channel_db) << ',' << to_string(r.direction) << ','
       << format_number(r.raw_bps) << ',' << format_number(r.qber) << ','
       << format_number(r.skr_asymptotic_bps) << ',' << format_number(r.skr_finite_bps)
       << ',' << r.reason << '\n';
  }
  return os.str();
}

std::string stability_csv(const Config& c) {
  StabilityConfig sc;
  sc.duration_s = c.experiment.duration_s;
  sc.interval_s = c.stability.interval_s;
  sc.drift = c.stability.drift;
  sc.stabilized = c.stability.stabilized;
  sc.seed = *c.experiment.seed;
  sc.initial_delay_ps = c.stability.initial_delay_ps;
  sc.histogram_bin_ps = c.stability.histogram_bin_ps;
  const auto intervals = run_stability(c.protocol, c.link(c.experiment.direction), sc);

  std::ostringstream os;
  os << "t_s,window_s,drift_ps,delay_ps,residual_ps,raw_bps,qber,qber_minority,"
        "skr_asymptotic_bps,stabilizer\n";
  for (double window : {1.0, 60.0}) {
    const auto k = static_cast<std::size_t>(std::max(1.0, std::round(window / sc.interval_s)));
    for (const auto& w : aggregate(intervals, k)) {
      const auto s = sifted_from_tallies(w.tallies);
      const auto a = asymptotic_skr(w.tallies, c.protocol);
      os << format_number(w.t_s) << ',' << format_number(w.length_s) << ','
         << format_number(w.drift_ps) << ',' << format_number(w.delay_ps) << ','
         << format_number(w.drift_ps - w.delay_ps) << ',' << format_number(s.raw_bit_rate)
         << ',' << format_number(s.qber_majority) << ',' << format_number(s.qber_minority)
         << ',' << format_number(a.rate_bps) << ','
         << (c.stability.stabilized ? to_string(w.status) : std::string_view("off")) << '\n';
    }
  }
  return os.str();
}

std::string loss_budget_csv(const Config& c) {
  std::map<std::string, std::vector<ComponentLoss>> table;
  if (!c.receiver.budget_table.empty()) {
    std::ifstream in(c.base_dir / c.receiver.budget_table);
    if (!in) throw std::runtime_error("cannot open " + c.receiver.budget_table);
    table = read_budget_table(in);
  } else {
    table["default"] = c.receiver.budget();
  }
  std::ostringstream os;
  os << "circuit,component,loss_db\n";
  for (const auto& [name, parts] : table) {
    for (const auto& p : parts)
      os << name << ',' << to_string(p.kind) << ',' << format_number(p.loss_db) << '\n';
    os << name << ",total," << format_number(total_insertion_loss(parts)) << '\n';
  }
  return os.str();
}

RunResult run_experiment(const Config& config) {
  RunResult result;
  try {
    validate_config(config);
  } catch (const ConfigError& ex) {
    result.exit_code = 2;
    result.diagnostics = ex.diagnostics();
    return result;
  }
  if (config.experiment.output_path.empty()) {
    result.exit_code = 2;
    result.diagnostics.push_back("[experiment] output: required (set it here or pass --out)");
    return result;
  }

  std::string csv;
  std::string reports;
  std::vector<std::string> warnings;
  std::vector<std::string> point_notes;
  try {
    switch (config.experiment.mode) {
      case Mode::StabilityRun:
        csv = stability_csv(config);
        break;
      case Mode::LossBudget:
        csv = loss_budget_csv(config);
        break;
      default: {
        const auto rows = compute_points(config, &warnings);
        csv = point_csv(rows);
        for (const auto& r : rows) {
          for (std::size_t d = 0; d < r.reports.size(); ++d)
            reports += report_json(r.reports[d], r.channel_db,
                                   r.reports.size() == 1 ? to_string(r.direction)
                                   : d == 0              ? "forward"
                                                         : "backward") +
                       "\n";
          if (r.n_slots > 0)
            point_notes.push_back("channel_db=" + format_number(r.channel_db) +
                                  " n_slots_per_direction=" + std::to_string(r.n_slots));
        }
      }
    }
  } catch (const std::exception& ex) {
    result.exit_code = 1;
    result.diagnostics.push_back(std::string("run failed: ") + ex.what());
    return result;
  }

  std::ostringstream manifest;
  manifest << "# qkdsim run manifest\n";
  manifest << "# created_utc = " << utc_timestamp() << '\n';
  manifest << "# library_version = " << kVersion << '\n';
  for (const auto& n : point_notes) manifest << "# point " << n << '\n';
  for (const auto& w : warnings) manifest << "# warning " << w << '\n';
  manifest << serialize_config(config);

  const std::filesystem::path out = config.experiment.output_path;
  auto write = [&](const std::filesystem::path& path, const std::string& body) {
    std::ofstream f(path, std::ios::binary);
    f << body;
    if (!f) throw std::runtime_error("cannot write " + path.string());
    result.written.push_back(path);
  };
  try {
    if (out.has_parent_path()) std::filesystem::create_directories(out.parent_path());
    write(out, csv);
    write(out.string() + ".manifest", manifest.str());
    if (!reports.empty()) write(out.string() + ".reports.jsonl", reports);
  } catch (const std::exception& ex) {
    result.exit_code = 1;
    result.diagnostics.push_back(ex.what());
    return result;
  }
  for (const auto& w : warnings) result.diagnostics.push_back("warning: " + w);
  return result;
}

}  // namespace qkdlink
