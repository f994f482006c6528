#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "coevo/config.hpp"
#include "coevo/distrib/protocol.hpp"
#include "coevo/errors.hpp"
#include "coevo/evaluation.hpp"
#include "coevo/log.hpp"
#include "coevo/multiobjective.hpp"
#include "coevo/network_ir.hpp"
#include "coevo/runner.hpp"

namespace py = pybind11;
using nlohmann::json;

namespace {

std::vector<coevo::ObjectiveVector> to_objectives(const std::vector<std::pair<double, double>>& points) {
  std::vector<coevo::ObjectiveVector> v;
  v.reserve(points.size());
  for (const auto& [x, y] : points) v.push_back({x, y, -y});
  return v;
}

std::string summary_json(const coevo::RunSummary& s) {
  json j = {{"generations_run", s.generations_run}, {"completed", s.completed}, {"finished", s.finished}};
  if (s.best)
    j["best"] = {{"network_id", s.best->network_id},
                 {"generation", s.best->generation},
                 {"primary", s.best->objectives.primary},
                 {"raw_secondary", s.best->objectives.raw_secondary}};
  return j.dump();
}

coevo::RunOptions options(std::optional<int> stop_after) {
  coevo::RunOptions o;
  o.stop_after = stop_after;
  return o;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Coevolutionary neural architecture search core";
  coevo::log::configure_from_env();

  py::register_exception<coevo::ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<coevo::CheckpointError>(m, "CheckpointError", PyExc_RuntimeError);
  py::register_exception<coevo::NetworkError>(m, "NetworkError", PyExc_ValueError);
  py::register_exception<coevo::ProtocolError>(m, "ProtocolError", PyExc_ValueError);

  m.def(
      "pareto_front",
      [](const std::vector<std::pair<double, double>>& points, bool sort_by_secondary) {
        return coevo::pareto_front(to_objectives(points), sort_by_secondary);
      },
      py::arg("points"), py::arg("sort_by_secondary") = false,
      "Indices of the first Pareto front of (primary, secondary) points, both maximized.");
  m.def(
      "pareto_fronts",
      [](const std::vector<std::pair<double, double>>& points, bool sort_by_secondary) {
        return coevo::pareto_fronts(to_objectives(points), sort_by_secondary);
      },
      py::arg("points"), py::arg("sort_by_secondary") = false, "Successive Pareto fronts as index lists.");

  m.def(
      "count_parameters",
      [](const std::string& network_json) { return coevo::count_parameters(coevo::deserialize_network(network_json)); },
      py::arg("network_json"));
  m.def(
      "validate_network",
      [](const std::string& network_json) { return coevo::validate_dag(coevo::deserialize_network(network_json)); },
      py::arg("network_json"), "Violations of an interchange network; empty when valid.");
  m.def(
      "canonical_network",
      [](const std::string& network_json) { return coevo::serialize_network(coevo::deserialize_network(network_json)); },
      py::arg("network_json"));
  m.def(
      "surrogate_fitness",
      [](const std::string& network_json, const std::string& weights_json) {
        const auto weights = weights_json.empty() ? coevo::SurrogateWeights{}
                                                  : coevo::surrogate_weights_from_json(json::parse(weights_json));
        return coevo::surrogate_fitness(coevo::deserialize_network(network_json), weights);
      },
      py::arg("network_json"), py::arg("weights_json") = "");

  m.def(
      "effective_config",
      [](const std::string& config_json) {
        return coevo::effective_config_json(coevo::parse_run_config(json::parse(config_json))).dump();
      },
      py::arg("config_json"));
  m.def(
      "run",
      [](const std::string& config_json, const std::string& out_dir, std::optional<int> stop_after) {
        const auto config = coevo::parse_run_config(json::parse(config_json));
        py::gil_scoped_release release;
        return summary_json(coevo::run_experiment(config, out_dir, options(stop_after)));
      },
      py::arg("config_json"), py::arg("out_dir"), py::arg("stop_after") = py::none());
  m.def(
      "resume",
      [](const std::string& checkpoint, std::optional<int> stop_after) {
        py::gil_scoped_release release;
        return summary_json(coevo::resume_experiment(checkpoint, std::nullopt, options(stop_after)));
      },
      py::arg("checkpoint"), py::arg("stop_after") = py::none());
  m.def(
      "report",
      [](const std::string& run_dir) {
        std::ostringstream out;
        const auto rows = coevo::report_run(run_dir, out);
        json j = json::array();
        for (const auto& r : rows)
          j.push_back({{"generation", r.generation},
                       {"best_fitness", r.best_fitness},
                       {"best_so_far", r.best_so_far},
                       {"evaluation_time", r.evaluation_time},
                       {"cumulative_evaluation_time", r.cumulative_evaluation_time}});
        return j.dump();
      },
      py::arg("run_dir"));

  m.def(
      "encode_frame", [](const std::string& message_json) { return py::bytes(coevo::distrib::encode_frame(json::parse(message_json))); },
      py::arg("message_json"));
  m.def(
      "decode_frames",
      [](const py::bytes& data) {
        coevo::distrib::FrameDecoder d;
        d.feed(std::string(data));
        std::vector<std::string> out;
        while (auto message = d.next()) out.push_back(message->dump());
        if (d.buffered() != 0) throw coevo::ProtocolError("trailing partial frame");
        return out;
      },
      py::arg("data"));
  m.attr("PROTOCOL_VERSION") = coevo::distrib::kProtocolVersion;
}
