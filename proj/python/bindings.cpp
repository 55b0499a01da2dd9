#include <pybind11/pybind11.h>

#include <sstream>

#include "kara/calibration.hpp"
#include "kara/comparison_graph.hpp"
#include "kara/consensus.hpp"
#include "kara/pos.hpp"
#include "kara/reference_lok.hpp"

namespace py = pybind11;
using namespace kara;

// Every function takes and returns JSON text; the Python package wraps them
// with json.loads / json.dumps.
namespace {

json vector_json(const OneHotVector& v) { return json{{"layout_id", v.layout_id}, {"bits", v.bits}}; }

OneHotVector vector_from(const json& j) {
  OneHotVector v;
  if (j.is_array()) {
    j.get_to(v.bits);
  } else {
    v.layout_id = j.value("layout_id", "");
    j.at("bits").get_to(v.bits);
  }
  return v;
}

LikelihoodRegion region_from(const std::string& text) {
  if (text.empty()) return LikelihoodRegion::default_region();
  auto r = json::parse(text).get<LikelihoodRegion>();
  validate_region(r);
  return r;
}

std::string encode(const std::string& characterization, const std::string& questionnaire) {
  const auto c = json::parse(characterization).get<Characterization>();
  const auto q = json::parse(questionnaire).get<Questionnaire>();
  return vector_json(encode_one_hot(c, q)).dump();
}

double similarity_of(const std::string& a, const std::string& b) {
  return similarity(vector_from(json::parse(a)), vector_from(json::parse(b)));
}

std::string closure_of(const std::string& relations) {
  const auto rels = json::parse(relations).get<std::vector<Relation>>();
  return json(infer_closure(rels)).dump();
}

std::string calibrate_problem(const std::string& problem) {
  return json(calibrate(json::parse(problem).get<CalibrationProblem>())).dump();
}

std::string consensus(const std::string& weights, std::size_t exact_bound) {
  ConsensusOptions opts;
  opts.exact_bound = exact_bound;
  SolverStats stats;
  const auto c = solve_consensus(json::parse(weights).get<PairWeights>(), opts, &stats);
  json out = c;
  out["nodes"] = stats.nodes;
  return out.dump();
}

std::string brute_force(const std::string& weights) {
  std::size_t enumerated = 0;
  json out = brute_force_consensus(json::parse(weights).get<PairWeights>(), &enumerated);
  out["enumerated"] = enumerated;
  return out.dump();
}

std::string intervals(double lok, const std::string& region) {
  return json(allowed_intervals(region_from(region), lok)).dump();
}

std::string validate(double lok, double pos, const std::string& region) {
  const auto v = validate_pos(region_from(region), lok, pos);
  return json{{"accepted", v.accepted}, {"nearest", v.nearest}}.dump();
}

std::string train(const std::string& examples) {
  const auto ex = json::parse(examples).get<std::vector<TrainingExample>>();
  const auto model = train_reference_model(ex);
  json out = model.metadata();
  json predictions = json::array();
  for (const auto& e : ex) predictions.push_back(model.predict(e.vector));
  out["fitted"] = predictions;
  return out.dump();
}

}  // namespace

PYBIND11_MODULE(_kara, m) {
  m.doc() = "Native core of the kara package";
  static py::exception<Error> error(m, "NativeError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      PyErr_SetString(error.ptr(), e.to_json().dump().c_str());
    } catch (const json::exception& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    }
  });
  m.def("encode_one_hot", &encode, py::arg("characterization"), py::arg("questionnaire"));
  m.def("similarity", &similarity_of, py::arg("a"), py::arg("b"));
  m.def("infer_closure", &closure_of, py::arg("relations"));
  m.def("calibrate", &calibrate_problem, py::arg("problem"));
  m.def("solve_consensus", &consensus, py::arg("weights"), py::arg("exact_bound") = 12,
        py::call_guard<py::gil_scoped_release>());
  m.def("brute_force_consensus", &brute_force, py::arg("weights"), py::call_guard<py::gil_scoped_release>());
  m.def("allowed_intervals", &intervals, py::arg("lok"), py::arg("region") = "");
  m.def("validate_pos", &validate, py::arg("lok"), py::arg("pos"), py::arg("region") = "");
  m.def("train_reference_model", &train, py::arg("examples"));
}
