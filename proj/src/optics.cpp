#include "qkdlink/optics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>

namespace qkdlink {

namespace {

void require(bool ok, const char* field, const char* what) {
  if (!ok) throw std::invalid_argument(std::string(field) + ": " + what);
}

double db_to_linear(double db) { return std::pow(10.0, -db / 10.0); }

}  // namespace

std::string_view to_string(LossKind kind) {
  switch (kind) {
    case LossKind::FibreSiNFacet: return "fibre_sin_facet";
    case LossKind::SiNInPFacet: return "sin_inp_facet";
    case LossKind::SiNPropagation: return "sin_propagation";
    case LossKind::InPSection: return "inp_section";
  }
  return "?";
}

LossKind parse_loss_kind(std::string_view s) {
  for (LossKind k : {LossKind::FibreSiNFacet, LossKind::SiNInPFacet,
                     LossKind::SiNPropagation, LossKind::InPSection}) {
    if (to_string(k) == s) return k;
  }
  throw std::invalid_argument("unknown loss component '" + std::string(s) + "'");
}

ComponentLoss ComponentLoss::fixed(LossKind kind, double loss_db) {
  require(std::isfinite(loss_db) && loss_db >= 0, "loss_db", "must be >= 0");
  return ComponentLoss{kind, loss_db, 0.0};
}

ComponentLoss ComponentLoss::propagation(double db_per_cm, double length_cm) {
  require(std::isfinite(db_per_cm) && db_per_cm >= 0, "db_per_cm", "must be >= 0");
  require(std::isfinite(length_cm) && length_cm >= 0, "length_cm", "must be >= 0");
  return ComponentLoss{LossKind::SiNPropagation, db_per_cm * length_cm, length_cm};
}

std::vector<ComponentLoss> default_receiver_budget() {
  return {
      ComponentLoss::fixed(LossKind::FibreSiNFacet, 0.66),
      ComponentLoss::fixed(LossKind::SiNInPFacet, 0.90),
      ComponentLoss::fixed(LossKind::InPSection, 3.5),
      ComponentLoss::fixed(LossKind::SiNInPFacet, 0.90),
      ComponentLoss::propagation(0.14, 10.0),
      ComponentLoss::fixed(LossKind::FibreSiNFacet, 0.66),
  };
}

double total_insertion_loss(std::span<const ComponentLoss> budget) {
  return std::accumulate(budget.begin(), budget.end(), 0.0,
                         [](double acc, const ComponentLoss& c) {
                           if (!(c.loss_db >= 0))
                             throw std::invalid_argument("negative component loss");
                           return acc + c.loss_db;
                         });
}

ChannelSpec ChannelSpec::emulated(double db) {
  ChannelSpec s;
  s.mode = Mode::EmulatedDb;
  s.attenuation_db = db;
  s.validate();
  return s;
}

ChannelSpec ChannelSpec::fiber(double km, double db_per_km) {
  ChannelSpec s;
  s.mode = Mode::FiberKm;
  s.length_km = km;
  s.fiber_loss_db_per_km = db_per_km;
  s.validate();
  return s;
}

double ChannelSpec::loss_db() const {
  return mode == Mode::EmulatedDb ? attenuation_db : length_km * fiber_loss_db_per_km;
}

void ChannelSpec::validate() const {
  require(std::isfinite(attenuation_db) && attenuation_db >= 0, "channel_db",
          "must be >= 0");
  require(std::isfinite(length_km) && length_km >= 0, "length_km", "must be >= 0");
  require(std::isfinite(fiber_loss_db_per_km) && fiber_loss_db_per_km >= 0,
          "fiber_loss_db_per_km", "must be >= 0");
}

double channel_transmittance(const ChannelSpec& spec) {
  return db_to_linear(spec.loss_db());
}

LinkModel LinkModel::unidirectional(ChannelSpec channel) {
  LinkModel link;
  link.channel = std::move(channel);
  return link;
}

LinkModel LinkModel::bidirectional(ChannelSpec channel) {
  LinkModel link;
  link.channel = std::move(channel);
  link.crosstalk_rate_hz = 100.0;
  link.crosstalk_qber_delta = 0.0015;
  return link;
}

void LinkModel::validate(double clock_period_ps) const {
  channel.validate();
  for (const auto& c : receiver_budget)
    require(std::isfinite(c.loss_db) && c.loss_db >= 0, "receiver_budget",
            "component loss must be >= 0");
  require(detector.efficiency >= 0 && detector.efficiency <= 1, "efficiency",
          "must lie in [0,1]");
  require(std::isfinite(detector.dark_rate_hz) && detector.dark_rate_hz >= 0,
          "dark_rate_hz", "must be >= 0");
  require(detector.gate_width_ps > 0 && detector.gate_width_ps <= clock_period_ps,
          "gate_ps", "must lie in (0, clock period]");
  require(detector.count == 2, "detector_count", "the receiver has two ports");
  require(visibility >= 0 && visibility <= 1, "visibility", "must lie in [0,1]");
  require(central_bin_fraction >= 0 && central_bin_fraction <= 1,
          "central_bin_fraction", "must lie in [0,1]");
  require(std::isfinite(crosstalk_rate_hz) && crosstalk_rate_hz >= 0,
          "crosstalk_rate_hz", "must be >= 0");
  require(crosstalk_qber_delta >= 0 && crosstalk_qber_delta < 0.5,
          "crosstalk_qber_delta", "must lie in [0, 0.5)");
  require(std::isfinite(extra_background_hz) && extra_background_hz >= 0,
          "extra_background_hz", "must be >= 0");
  require(timing_sigma_ps > 0, "timing_sigma_ps", "must be positive");
}

double gate_overlap(double offset_ps, double sigma_ps) {
  const double z = offset_ps / sigma_ps;
  return std::exp(-0.5 * z * z);
}

double system_efficiency(const LinkModel& link, double timing_offset_ps) {
  return channel_transmittance(link.channel) *
         db_to_linear(link.receiver_loss_db()) * link.central_bin_fraction *
         link.detector.efficiency *
         gate_overlap(timing_offset_ps, link.timing_sigma_ps);
}

double effective_visibility(const LinkModel& link) {
  return std::clamp(link.visibility - 2.0 * link.crosstalk_qber_delta, 0.0, 1.0);
}

double intrinsic_error(const LinkModel& link) {
  return (1.0 - effective_visibility(link)) / 2.0;
}

double background_click_prob(const LinkModel& link) {
  const double rate = link.detector.dark_rate_hz + link.crosstalk_rate_hz +
                      link.extra_background_hz;
  return std::min(1.0, rate * link.detector.gate_width_ps * 1e-12);
}

ClickProbabilities click_probabilities(double delta_phi, double mean_photons,
                                       const LinkModel& link,
                                       double timing_offset_ps) {
  const double mu_eff = mean_photons * system_efficiency(link, timing_offset_ps);
  const double contrast = effective_visibility(link) * std::cos(delta_phi);
  const double bg = background_click_prob(link);
  auto port = [&](double share) {
    const double signal = -std::expm1(-mu_eff * std::max(0.0, share));
    return 1.0 - (1.0 - signal) * (1.0 - bg);
  };
  return {port((1.0 + contrast) / 2.0), port((1.0 - contrast) / 2.0)};
}

}  // namespace qkdlink
