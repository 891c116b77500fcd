#include "qkdlink/stabilizer.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <string>

namespace qkdlink {

namespace {

// Half-width of the centroid window used to locate the arrival peak.
constexpr double kPeakWindowPs = 150.0;

}  // namespace

std::string_view to_string(DriftKind kind) {
  switch (kind) {
    case DriftKind::None: return "none";
    case DriftKind::Linear: return "linear";
    case DriftKind::RandomWalk: return "random_walk";
    case DriftKind::Sinusoid: return "sinusoid";
  }
  return "?";
}

DriftKind parse_drift_kind(std::string_view s) {
  for (DriftKind k : {DriftKind::None, DriftKind::Linear, DriftKind::RandomWalk,
                      DriftKind::Sinusoid}) {
    if (to_string(k) == s) return k;
  }
  throw std::invalid_argument("unknown drift kind '" + std::string(s) + "'");
}

std::string_view to_string(StepStatus s) {
  switch (s) {
    case StepStatus::Moved: return "moved";
    case StepStatus::Deadband: return "deadband";
    case StepStatus::InsufficientCounts: return "insufficient counts";
  }
  return "?";
}

DriftProfile DriftProfile::linear(double rate_ps_per_s) {
  DriftProfile p;
  p.kind = DriftKind::Linear;
  p.rate_ps_per_s = rate_ps_per_s;
  return p;
}

DriftProfile DriftProfile::sinusoid(double amplitude_ps, double period_s) {
  DriftProfile p;
  p.kind = DriftKind::Sinusoid;
  p.amplitude_ps = amplitude_ps;
  p.period_s = period_s;
  p.validate();
  return p;
}

DriftProfile DriftProfile::random_walk(double sigma_ps, double step_s,
                                       std::uint64_t seed) {
  DriftProfile p;
  p.kind = DriftKind::RandomWalk;
  p.walk_sigma_ps = sigma_ps;
  p.walk_step_s = step_s;
  p.seed = seed;
  p.validate();
  return p;
}

void DriftProfile::validate() const {
  if (!std::isfinite(rate_ps_per_s) || !std::isfinite(amplitude_ps))
    throw std::invalid_argument("drift: rate and amplitude must be finite");
  if (kind == DriftKind::Sinusoid && !(period_s > 0))
    throw std::invalid_argument("drift: sinusoid period must be positive");
  if (kind == DriftKind::RandomWalk && (!(walk_step_s > 0) || walk_sigma_ps < 0))
    throw std::invalid_argument("drift: random walk needs step > 0 and sigma >= 0");
}

std::vector<DriftProfile> default_drift_profiles() {
  return {DriftProfile::linear(1.0), DriftProfile::sinusoid(50.0, 600.0),
          DriftProfile::random_walk(2.0, 1.0, 7)};
}

double drift_offset(const DriftProfile& profile, double t_s) {
  if (t_s < 0) throw std::invalid_argument("drift_offset: t must be >= 0");
  switch (profile.kind) {
    case DriftKind::None:
      return 0.0;
    case DriftKind::Linear:
      return profile.rate_ps_per_s * t_s;
    case DriftKind::Sinusoid:
      return profile.amplitude_ps *
             std::sin(2.0 * std::numbers::pi * t_s / profile.period_s);
    case DriftKind::RandomWalk: {
      const double x = t_s / profile.walk_step_s;
      const auto knots = static_cast<std::uint64_t>(std::floor(x));
      double w = 0.0;
      for (std::uint64_t k = 0; k < knots; ++k) {
        CounterRng rng(profile.seed, k);
        w += profile.walk_sigma_ps * rng.normal();
      }
      CounterRng rng(profile.seed, knots);
      const double next = w + profile.walk_sigma_ps * rng.normal();
      const double frac = x - static_cast<double>(knots);
      return w + frac * (next - w);
    }
  }
  return 0.0;
}

double wrap_centered(double x, double period) {
  double r = std::fmod(x + period / 2, period);
  if (r < 0) r += period;
  return r - period / 2;
}

ArrivalHistogram ArrivalHistogram::covering(double period_ps, double bin_width_ps,
                                            double origin_ps) {
  if (!(period_ps > 0) || !(bin_width_ps > 0))
    throw std::invalid_argument("histogram: period and bin width must be positive");
  ArrivalHistogram h;
  h.origin_ps = origin_ps;
  h.bin_width_ps = bin_width_ps;
  h.period_ps = period_ps;
  h.counts.assign(static_cast<std::size_t>(std::ceil(period_ps / bin_width_ps)), 0);
  return h;
}

void ArrivalHistogram::add(double arrival_ps, std::uint64_t n) {
  double r = std::fmod(arrival_ps - origin_ps, period_ps);
  if (r < 0) r += period_ps;
  auto i = static_cast<std::size_t>(r / bin_width_ps);
  if (i >= counts.size()) i = counts.size() - 1;
  counts[i] += n;
}

std::uint64_t ArrivalHistogram::total() const {
  return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
}

double ArrivalHistogram::bin_center(std::size_t i) const {
  return origin_ps + (static_cast<double>(i) + 0.5) * bin_width_ps;
}

ArrivalHistogram& ArrivalHistogram::merge(const ArrivalHistogram& other) {
  if (counts.empty()) {
    *this = other;
    return *this;
  }
  if (other.counts.size() != counts.size() || other.bin_width_ps != bin_width_ps ||
      other.origin_ps != origin_ps)
    throw std::invalid_argument("histogram merge: incompatible binning");
  for (std::size_t i = 0; i < counts.size(); ++i) counts[i] += other.counts[i];
  return *this;
}

StabilizerStep stabilize_step(const ArrivalHistogram& histogram,
                              double current_delay_ps, double step_ps,
                              double deadband_ps) {
  if (histogram.bin_width_ps > 10.0)
    throw std::invalid_argument("stabilize_step: bins wider than 10 ps");
  if (static_cast<double>(histogram.counts.size()) * histogram.bin_width_ps <
      histogram.period_ps)
    throw std::invalid_argument("stabilize_step: histogram shorter than one period");

  StabilizerStep out;
  out.delay_ps = current_delay_ps;
  if (histogram.total() == 0) {
    out.status = StepStatus::InsufficientCounts;
    return out;
  }

  // Baseline-subtracted centroid in a window that is re-centred on its own
  // result until it stops moving (mean shift). Starting from the fullest bin
  // and iterating removes the pull toward that bin's centre that a single
  // fixed-window centroid has on a peak much wider than a bin.
  const auto& c = histogram.counts;
  std::vector<std::uint64_t> sorted(c.begin(), c.end());
  std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
  const double baseline = static_cast<double>(sorted[sorted.size() / 2]);
  const double period = histogram.period_ps;

  const auto peak_bin = static_cast<std::size_t>(std::max_element(c.begin(), c.end()) - c.begin());
  double estimate = histogram.bin_center(peak_bin);
  for (int iter = 0; iter < 50; ++iter) {
    double weight = 0.0;
    double moment = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i) {
      const double d = wrap_centered(histogram.bin_center(i) - estimate, period);
      if (std::fabs(d) > kPeakWindowPs) continue;
      const double w = std::max(0.0, static_cast<double>(c[i]) - baseline);
      weight += w;
      moment += w * d;
    }
    if (weight <= 0) break;
    const double shift = moment / weight;
    estimate += shift;
    if (std::fabs(shift) < 0.01) break;
  }
  out.peak_ps = wrap_centered(estimate - histogram.origin_ps, period) + histogram.origin_ps;
  if (out.peak_ps < histogram.origin_ps) out.peak_ps += period;

  const double diff = wrap_centered(out.peak_ps - current_delay_ps, histogram.period_ps);
  if (std::fabs(diff) < deadband_ps) {
    out.status = StepStatus::Deadband;
    return out;
  }
  out.delay_ps = current_delay_ps + std::copysign(step_ps, diff);
  out.status = StepStatus::Moved;
  return out;
}

ArrivalHistogram sample_arrival_histogram(CounterRng& rng, double period_ps,
                                          double bin_width_ps,
                                          double signal_counts, double peak_ps,
                                          double sigma_ps,
                                          double background_counts) {
  auto h = ArrivalHistogram::covering(period_ps, bin_width_ps, -period_ps / 2);
  const double per_bin_bg = background_counts / static_cast<double>(h.counts.size());
  const double inv = 1.0 / (sigma_ps * std::sqrt(2.0));
  const double folded_peak = wrap_centered(peak_ps, period_ps);
  for (std::size_t i = 0; i < h.counts.size(); ++i) {
    const double lo = h.origin_ps + static_cast<double>(i) * bin_width_ps;
    const double hi = lo + bin_width_ps;
    // Gaussian mass in the bin, summed over neighbouring periods.
    double mass = 0.0;
    for (int wrap = -1; wrap <= 1; ++wrap) {
      const double c = folded_peak + wrap * period_ps;
      mass += 0.5 * (std::erf((hi - c) * inv) - std::erf((lo - c) * inv));
    }
    h.counts[i] = rng.poisson(signal_counts * mass + per_bin_bg);
  }
  return h;
}

}  // namespace qkdlink
