#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "qkdlink/calibration.hpp"
#include "qkdlink/engine.hpp"
#include "qkdlink/keyrate.hpp"
#include "qkdlink/optics.hpp"
#include "qkdlink/protocol.hpp"
#include "qkdlink/sifting.hpp"
#include "qkdlink/version.hpp"

namespace py = pybind11;
using namespace qkdlink;

namespace {

py::dict cell_dict(const TallyCell& c) {
  py::dict d;
  d["sent"] = c.sent;
  d["clicks"] = c.clicks;
  d["errors"] = c.errors;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Decoy-state BB84 link simulator";
  m.attr("__version__") = kVersion;

  py::enum_<Basis>(m, "Basis").value("X", Basis::X).value("Y", Basis::Y);
  py::enum_<Intensity>(m, "Intensity")
      .value("Signal", Intensity::Signal)
      .value("Decoy", Intensity::Decoy)
      .value("Vacuum", Intensity::Vacuum);
  py::enum_<KeyStatus>(m, "KeyStatus")
      .value("Ok", KeyStatus::Ok)
      .value("MissingGains", KeyStatus::MissingGains)
      .value("DecoyEstimationFailed", KeyStatus::DecoyEstimationFailed)
      .value("NoExtractableKey", KeyStatus::NoExtractableKey)
      .value("FiniteSizePenalty", KeyStatus::FiniteSizePenalty);

  py::class_<ProtocolParams>(m, "ProtocolParams")
      .def(py::init<>())
      .def_readwrite("clock_rate_hz", &ProtocolParams::clock_rate_hz)
      .def_readwrite("basis_majority", &ProtocolParams::basis_majority)
      .def_readwrite("basis_minority", &ProtocolParams::basis_minority)
      .def_readwrite("intensity_weights", &ProtocolParams::intensity_weights)
      .def_readwrite("mu", &ProtocolParams::mu)
      .def_readwrite("nu", &ProtocolParams::nu)
      .def_readwrite("vacuum_mu", &ProtocolParams::vacuum_mu)
      .def_readwrite("f_ec", &ProtocolParams::f_ec)
      .def_readwrite("eps_sec", &ProtocolParams::eps_sec)
      .def("validate", &ProtocolParams::validate);

  py::class_<ChannelSpec>(m, "ChannelSpec")
      .def_static("emulated", &ChannelSpec::emulated, py::arg("db"))
      .def_static("fiber", &ChannelSpec::fiber, py::arg("km"), py::arg("db_per_km") = 0.176)
      .def("loss_db", &ChannelSpec::loss_db);

  py::class_<ComponentLoss>(m, "ComponentLoss")
      .def_readonly("loss_db", &ComponentLoss::loss_db)
      .def_readonly("length_cm", &ComponentLoss::length_cm)
      .def_property_readonly("kind", [](const ComponentLoss& c) {
        return std::string(to_string(c.kind));
      });

  py::class_<LinkModel>(m, "LinkModel")
      .def_static("unidirectional", &LinkModel::unidirectional, py::arg("channel"))
      .def_static("bidirectional", &LinkModel::bidirectional, py::arg("channel"))
      .def_readwrite("channel", &LinkModel::channel)
      .def_readwrite("visibility", &LinkModel::visibility)
      .def_readwrite("central_bin_fraction", &LinkModel::central_bin_fraction)
      .def_readwrite("crosstalk_rate_hz", &LinkModel::crosstalk_rate_hz)
      .def_readwrite("crosstalk_qber_delta", &LinkModel::crosstalk_qber_delta)
      .def_readwrite("extra_background_hz", &LinkModel::extra_background_hz)
      .def_readwrite("timing_sigma_ps", &LinkModel::timing_sigma_ps)
      .def_property(
          "dark_rate_hz", [](const LinkModel& l) { return l.detector.dark_rate_hz; },
          [](LinkModel& l, double v) { l.detector.dark_rate_hz = v; })
      .def_property(
          "detector_efficiency", [](const LinkModel& l) { return l.detector.efficiency; },
          [](LinkModel& l, double v) { l.detector.efficiency = v; })
      .def("receiver_loss_db", &LinkModel::receiver_loss_db);

  py::class_<Tallies>(m, "Tallies")
      .def(py::init<>())
      .def_readwrite("duration_s", &Tallies::duration_s)
      .def_readwrite("pulses_total", &Tallies::pulses_total)
      .def("cell",
           [](const Tallies& t, Intensity i, Basis tx, Basis rx) {
             return cell_dict(t.cell(i, tx, rx));
           })
      .def("merge", [](Tallies& t, const Tallies& o) { t.merge(o); })
      .def("conserved", &Tallies::conserved, py::arg("rel_tol") = 0.0)
      .def("total_sent", &Tallies::total_sent)
      .def("total_clicks", &Tallies::total_clicks);

  py::class_<SiftedStats>(m, "SiftedStats")
      .def_readonly("raw_bit_rate", &SiftedStats::raw_bit_rate)
      .def_readonly("qber_majority", &SiftedStats::qber_majority)
      .def_readonly("qber_minority", &SiftedStats::qber_minority)
      .def_readonly("duration_s", &SiftedStats::duration_s);

  py::class_<KeyRateReport>(m, "KeyRateReport")
      .def_readonly("y0", &KeyRateReport::y0)
      .def_readonly("y1_lower", &KeyRateReport::y1_lower)
      .def_readonly("e1_upper", &KeyRateReport::e1_upper)
      .def_readonly("q1_lower", &KeyRateReport::q1_lower)
      .def_readonly("q_mu", &KeyRateReport::q_mu)
      .def_readonly("e_mu", &KeyRateReport::e_mu)
      .def_readonly("raw_bps", &KeyRateReport::raw_bps)
      .def_readonly("skr_asymptotic_bps", &KeyRateReport::skr_asymptotic_bps)
      .def_readonly("asymptotic_status", &KeyRateReport::asymptotic_status)
      .def_readonly("key_length_finite_bits", &KeyRateReport::key_length_finite_bits)
      .def_readonly("finite_status", &KeyRateReport::finite_status)
      .def_readonly("block_size", &KeyRateReport::block_size)
      .def_readonly("duration_s", &KeyRateReport::duration_s);

  m.def("total_insertion_loss",
        [](const std::vector<ComponentLoss>& b) { return total_insertion_loss(b); });
  m.def("default_receiver_budget", &default_receiver_budget);
  m.def("channel_transmittance", &channel_transmittance);
  m.def("background_click_prob", &background_click_prob);
  m.def(
      "click_probabilities",
      [](double delta_phi, double mean, const LinkModel& link, double offset) {
        const auto p = click_probabilities(delta_phi, mean, link, offset);
        return py::make_tuple(p.det0, p.det1);
      },
      py::arg("delta_phi"), py::arg("mean_photons"), py::arg("link"),
      py::arg("timing_offset_ps") = 0.0);

  m.def("run_analytic", &run_analytic, py::arg("params"), py::arg("link"),
        py::arg("duration_s") = 1.0, py::arg("timing_offset_ps") = 0.0);
  m.def(
      "run_montecarlo",
      [](const ProtocolParams& params, const LinkModel& link, std::uint64_t n_slots,
         std::uint64_t seed) {
        MonteCarloConfig c;
        c.n_slots = n_slots;
        c.seed = seed;
        py::gil_scoped_release release;
        return run_montecarlo(params, link, c).tallies;
      },
      py::arg("params"), py::arg("link"), py::arg("n_slots"), py::arg("seed"));

  m.def("sifting_factor", &sifting_factor);
  m.def("sifted_from_tallies", &sifted_from_tallies);
  m.def("binary_entropy", &binary_entropy);
  m.def(
      "asymptotic_skr",
      [](const Tallies& t, const ProtocolParams& p) { return asymptotic_skr(t, p).rate_bps; });
  m.def("finite_key_length", [](const Tallies& t, const ProtocolParams& p) {
    return finite_key_length(t, p).length_bits;
  });
  m.def("evaluate_key_rate", &evaluate_key_rate);
  m.def("calibrate_to_measurement", &calibrate_to_measurement, py::arg("params"),
        py::arg("base"), py::arg("raw_bps"), py::arg("qber"));
  m.def("tallies_for_block", &tallies_for_block);
}
