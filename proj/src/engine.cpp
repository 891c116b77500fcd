#include "qkdlink/engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <thread>

namespace qkdlink {

Tallies& Tallies::merge(const Tallies& other) {
  for (std::size_t i = 0; i < cells_.size(); ++i) {
    cells_[i].sent += other.cells_[i].sent;
    cells_[i].clicks += other.cells_[i].clicks;
    cells_[i].errors += other.cells_[i].errors;
  }
  duration_s += other.duration_s;
  pulses_total += other.pulses_total;
  return *this;
}

Tallies Tallies::scaled(double factor) const {
  Tallies out = *this;
  for (auto& c : out.cells_) {
    c.sent *= factor;
    c.clicks *= factor;
    c.errors *= factor;
  }
  out.duration_s *= factor;
  out.pulses_total *= factor;
  return out;
}

double Tallies::total_sent() const {
  double s = 0;
  for (const auto& c : cells_) s += c.sent;
  return s;
}

double Tallies::total_clicks() const {
  double s = 0;
  for (const auto& c : cells_) s += c.clicks;
  return s;
}

bool Tallies::conserved(double rel_tol) const {
  for (const auto& c : cells_) {
    if (c.errors < 0 || c.errors > c.clicks * (1 + rel_tol)) return false;
    if (c.clicks > c.sent * (1 + rel_tol)) return false;
  }
  const double sent = total_sent();
  return std::fabs(sent - pulses_total) <= rel_tol * std::max(1.0, pulses_total);
}

Tallies run_analytic(const ProtocolParams& params, const LinkModel& link,
                     double duration_s, double timing_offset_ps) {
  params.validate();
  link.validate(params.clock_period_ps());
  if (!(duration_s >= 0)) throw std::invalid_argument("duration_s must be >= 0");

  const double eta = system_efficiency(link, timing_offset_ps);
  const double bg_total = 2.0 * background_click_prob(link);
  const double e_d = intrinsic_error(link);
  const double pulses = params.clock_rate_hz * duration_s;

  Tallies t;
  t.duration_s = duration_s;
  for (Intensity i : kIntensities) {
    const double signal = -std::expm1(-eta * params.mean_photon_number(i));
    const double gain = std::min(1.0, bg_total + signal);
    const double error_gain = std::min(gain, 0.5 * bg_total + e_d * signal);
    for (Basis tx : kBases) {
      for (Basis rx : kBases) {
        auto& c = t.cell(i, tx, rx);
        c.sent = pulses * params.intensity_probability(i) *
                 params.basis_probability(tx) * params.basis_probability(rx);
        c.clicks = c.sent * gain;
        c.errors = tx == rx ? c.sent * error_gain : 0.5 * c.clicks;
        t.pulses_total += c.sent;
      }
    }
  }
  return t;
}

PhotonTagStats& PhotonTagStats::merge(const PhotonTagStats& other) {
  for (std::size_t i = 0; i < single.size(); ++i) {
    single[i].sent += other.single[i].sent;
    single[i].clicks += other.single[i].clicks;
    single[i].errors += other.single[i].errors;
    empty[i].sent += other.empty[i].sent;
    empty[i].clicks += other.empty[i].clicks;
    empty[i].errors += other.empty[i].errors;
  }
  return *this;
}

namespace {

constexpr std::size_t tag_slot(Intensity i, Basis tx, Basis rx) {
  return index(i) * 4 + index(tx) * 2 + index(rx);
}

TallyCell pooled(const std::array<TallyCell, 12>& cells, Basis basis) {
  TallyCell sum;
  for (Intensity i : kIntensities) {
    const auto& c = cells[tag_slot(i, basis, basis)];
    sum.sent += c.sent;
    sum.clicks += c.clicks;
    sum.errors += c.errors;
  }
  return sum;
}

}  // namespace

double PhotonTagStats::y1(Basis basis) const {
  const auto c = pooled(single, basis);
  return c.sent > 0 ? c.clicks / c.sent : std::numeric_limits<double>::quiet_NaN();
}

double PhotonTagStats::e1(Basis basis) const {
  const auto c = pooled(single, basis);
  return c.clicks > 0 ? c.errors / c.clicks : std::numeric_limits<double>::quiet_NaN();
}

double PhotonTagStats::y0(Basis basis) const {
  const auto c = pooled(empty, basis);
  return c.sent > 0 ? c.clicks / c.sent : std::numeric_limits<double>::quiet_NaN();
}

namespace {

constexpr std::uint64_t kDriftBlockSlots = 1 << 16;

struct ChunkCounts {
  std::array<std::array<std::uint64_t, 3>, 12> cells{};
  std::array<std::array<std::uint64_t, 3>, 12> single{};
  std::array<std::array<std::uint64_t, 3>, 12> empty{};
  std::vector<DetectionEvent> events;
  std::vector<Symbol> tx_record;
  ArrivalHistogram histogram;
};

/// Per-run constants for the slot loop.
struct SlotKernel {
  const ProtocolParams* params;
  std::uint64_t seed;
  double eta_free;      // efficiency up to the detector, before the gate
  double veff;
  double bg_gate;       // per detector, per gate
  double bg_free;       // per detector, per clock period
  double sigma_ps;
  double gate_ps;
  double period_ps;
  bool record_events;
  bool fill_histogram;

  void run(std::uint64_t slot, double drift_ps, double delay_ps, double overlap,
           ChunkCounts& acc) const {
    CounterRng rng = slot_rng(seed, slot);
    const Symbol sym = draw_symbol(rng, *params, slot);
    const Basis rx = draw_basis(rng, *params);
    const auto n = rng.poisson(params->mean_photon_number(sym.intensity));

    // Quadrant of encode - measure phase; cos is exactly 1, 0, -1, 0.
    const int quadrant =
        (2 * sym.bit + static_cast<int>(index(sym.basis)) - static_cast<int>(index(rx)) + 4) % 4;
    constexpr double kCos[4] = {1.0, 0.0, -1.0, 0.0};
    const double share0 = 0.5 * (1.0 + veff * kCos[quadrant]);

    std::uint64_t k0 = 0;
    std::uint64_t k1 = 0;
    for (std::uint64_t p = 0; p < n; ++p) {
      if (rng.uniform() >= eta_free) continue;
      const double arrival = drift_ps + sigma_ps * rng.normal();
      if (fill_histogram) acc.histogram.add(arrival);
      const bool in_gate = rng.uniform() < overlap;
      const bool port0 = rng.uniform() < share0;
      if (in_gate) (port0 ? k0 : k1) += 1;
    }

    bool bg[2] = {false, false};
    for (int d = 0; d < 2; ++d) {
      const double u = rng.uniform();
      if (u < bg_free) {
        bg[d] = u < bg_gate;
        if (fill_histogram) {
          const double phase = u / bg_free;
          acc.histogram.add(delay_ps - gate_ps / 2 + phase * period_ps);
        }
      }
    }

    const bool c0 = k0 > 0 || bg[0];
    const bool c1 = k1 > 0 || bg[1];
    const std::size_t idx = tag_slot(sym.intensity, sym.basis, rx);
    auto& cell = acc.cells[idx];
    ++cell[0];
    if (n == 1) ++acc.single[idx][0];
    if (n == 0) ++acc.empty[idx][0];
    if (!c0 && !c1) return;

    std::uint8_t bit;
    if (c0 && c1) {
      bit = static_cast<std::uint8_t>(rng.next_u64() >> 63);
    } else {
      bit = c1 ? 1 : 0;
    }
    const bool error = bit != sym.bit;
    ++cell[1];
    cell[2] += error;
    if (n == 1) {
      ++acc.single[idx][1];
      acc.single[idx][2] += error;
    }
    if (n == 0) {
      ++acc.empty[idx][1];
      acc.empty[idx][2] += error;
    }
    if (record_events) {
      acc.events.push_back({slot, bit, rx, static_cast<std::uint32_t>(n)});
      acc.tx_record.push_back(sym);
    }
  }
};

void run_range(const SlotKernel& kernel, const LinkModel& link,
               const DriftProfile& drift, double clock_hz, std::uint64_t begin,
               std::uint64_t end, double delay_ps, ChunkCounts& acc) {
  std::uint64_t slot = begin;
  while (slot < end) {
    const std::uint64_t block_end =
        std::min(end, (slot / kDriftBlockSlots + 1) * kDriftBlockSlots);
    const double t_mid = 0.5 * static_cast<double>(slot + block_end) / clock_hz;
    const double drift_ps = drift_offset(drift, t_mid);
    const double overlap = gate_overlap(drift_ps - delay_ps, link.timing_sigma_ps);
    for (; slot < block_end; ++slot) kernel.run(slot, drift_ps, delay_ps, overlap, acc);
  }
}

void add_counts(std::array<TallyCell, 12>& out,
                const std::array<std::array<std::uint64_t, 3>, 12>& in) {
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i].sent += static_cast<double>(in[i][0]);
    out[i].clicks += static_cast<double>(in[i][1]);
    out[i].errors += static_cast<double>(in[i][2]);
  }
}

}  // namespace

MonteCarloResult run_montecarlo(const ProtocolParams& params, const LinkModel& link,
                                const MonteCarloConfig& config) {
  params.validate();
  link.validate(params.clock_period_ps());
  config.drift.validate();
  if (config.n_slots < 1) throw std::invalid_argument("n_slots must be >= 1");
  if (config.control_interval_slots < 1)
    throw std::invalid_argument("control_interval_slots must be >= 1");

  const double period_ps = params.clock_period_ps();
  const double bg_rate = link.detector.dark_rate_hz + link.crosstalk_rate_hz +
                         link.extra_background_hz;
  SlotKernel kernel{};
  kernel.params = &params;
  kernel.seed = config.seed;
  kernel.eta_free = system_efficiency(link, 0.0);
  kernel.veff = effective_visibility(link);
  kernel.bg_gate = background_click_prob(link);
  kernel.bg_free = std::min(1.0, bg_rate * period_ps * 1e-12);
  kernel.sigma_ps = link.timing_sigma_ps;
  kernel.gate_ps = link.detector.gate_width_ps;
  kernel.period_ps = period_ps;
  kernel.record_events = config.record_events;
  kernel.fill_histogram = config.stabilized;

  unsigned threads = config.threads;
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());

  MonteCarloResult result;
  std::array<TallyCell, 12> cells{};
  double delay_ps = config.initial_delay_ps;

  for (std::uint64_t start = 0; start < config.n_slots;
       start += config.control_interval_slots) {
    const std::uint64_t end =
        std::min(config.n_slots, start + config.control_interval_slots);
    const std::uint64_t span = end - start;
    const unsigned workers =
        static_cast<unsigned>(std::min<std::uint64_t>(threads, std::max<std::uint64_t>(1, span / 4096)));

    std::vector<ChunkCounts> chunks(workers);
    for (auto& c : chunks)
      if (kernel.fill_histogram)
        c.histogram = ArrivalHistogram::covering(period_ps, 10.0, -period_ps / 2);

    auto chunk_bounds = [&](unsigned w) {
      return std::pair{start + span * w / workers, start + span * (w + 1) / workers};
    };
    if (workers == 1) {
      run_range(kernel, link, config.drift, params.clock_rate_hz, start, end,
                delay_ps, chunks[0]);
    } else {
      std::vector<std::jthread> pool;
      pool.reserve(workers);
      for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
          const auto [b, e] = chunk_bounds(w);
          run_range(kernel, link, config.drift, params.clock_rate_hz, b, e,
                    delay_ps, chunks[w]);
        });
      }
    }

    ArrivalHistogram histogram;
    for (auto& c : chunks) {
      add_counts(cells, c.cells);
      add_counts(result.tags.single, c.single);
      add_counts(result.tags.empty, c.empty);
      if (config.record_events) {
        result.events.insert(result.events.end(), c.events.begin(), c.events.end());
        result.tx_record.insert(result.tx_record.end(), c.tx_record.begin(),
                                c.tx_record.end());
      }
      if (kernel.fill_histogram) histogram.merge(c.histogram);
    }

    TimingSample sample;
    sample.t_s = static_cast<double>(start) / params.clock_rate_hz;
    sample.drift_ps = drift_offset(
        config.drift, 0.5 * static_cast<double>(start + end) / params.clock_rate_hz);
    sample.delay_ps = delay_ps;
    if (config.stabilized) {
      const auto step = stabilize_step(histogram, delay_ps);
      sample.status = step.status;
      delay_ps = step.delay_ps;
    }
    result.timing.push_back(sample);
  }

  Tallies& t = result.tallies;
  for (Intensity i : kIntensities)
    for (Basis tx : kBases)
      for (Basis rx : kBases) t.cell(i, tx, rx) = cells[tag_slot(i, tx, rx)];
  t.pulses_total = static_cast<double>(config.n_slots);
  t.duration_s = static_cast<double>(config.n_slots) / params.clock_rate_hz;
  return result;
}

std::vector<StabilityInterval> run_stability(const ProtocolParams& params,
                                             const LinkModel& link,
                                             const StabilityConfig& config) {
  params.validate();
  link.validate(params.clock_period_ps());
  config.drift.validate();
  if (!(config.duration_s > 0) || !(config.interval_s > 0))
    throw std::invalid_argument("stability run needs positive duration and interval");

  const double period_ps = params.clock_period_ps();
  const double eta_free = system_efficiency(link, 0.0);
  const double bg_rate = link.detector.dark_rate_hz + link.crosstalk_rate_hz +
                         link.extra_background_hz;

  double free_rate = 0.0;  // pre-gate signal detections per second
  for (Intensity i : kIntensities)
    free_rate += params.clock_rate_hz * params.intensity_probability(i) *
                 -std::expm1(-eta_free * params.mean_photon_number(i));

  const auto n_intervals =
      static_cast<std::uint64_t>(std::ceil(config.duration_s / config.interval_s - 1e-9));
  std::vector<StabilityInterval> out;
  out.reserve(n_intervals);
  double delay_ps = config.initial_delay_ps;

  for (std::uint64_t k = 0; k < n_intervals; ++k) {
    StabilityInterval iv;
    iv.t_start_s = static_cast<double>(k) * config.interval_s;
    const double dt = std::min(config.interval_s, config.duration_s - iv.t_start_s);
    iv.drift_ps = drift_offset(config.drift, iv.t_start_s + dt / 2);
    iv.delay_ps = delay_ps;

    const Tallies expected = run_analytic(params, link, dt, iv.residual_ps());
    CounterRng rng(config.seed, k);
    iv.tallies.duration_s = dt;
    iv.tallies.pulses_total = expected.pulses_total;
    for (Intensity i : kIntensities) {
      for (Basis tx : kBases) {
        for (Basis rx : kBases) {
          const auto& e = expected.cell(i, tx, rx);
          auto& c = iv.tallies.cell(i, tx, rx);
          const auto errors = static_cast<double>(rng.poisson(e.errors));
          const auto correct = static_cast<double>(rng.poisson(e.clicks - e.errors));
          c.sent = e.sent;
          c.errors = errors;
          c.clicks = std::min(c.sent, errors + correct);
        }
      }
    }

    if (config.stabilized) {
      const auto hist = sample_arrival_histogram(
          rng, period_ps, config.histogram_bin_ps, free_rate * dt, iv.drift_ps,
          link.timing_sigma_ps, 2.0 * bg_rate * dt);
      const auto step = stabilize_step(hist, delay_ps);
      iv.status = step.status;
      delay_ps = step.delay_ps;
    }
    out.push_back(std::move(iv));
  }
  return out;
}

}  // namespace qkdlink
