// Acceptance runner: one PASS/FAIL line per criterion, non-zero exit when
// any criterion fails. `--write-golden` regenerates the end-to-end golden
// file instead of comparing against it.

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <unistd.h>

#include "httplib.h"
#include "kara/calibration.hpp"
#include "kara/comparison_graph.hpp"
#include "kara/consensus.hpp"
#include "kara/engine.hpp"
#include "kara/pos.hpp"
#include "kara/reference_lok.hpp"
#include "kara/server.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace kara;
using namespace kara::testing;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(double v, int precision = 3) {
  std::ostringstream os;
  os.precision(precision);
  os << std::fixed << v;
  return os.str();
}

fs::path fresh_dir(const std::string& tag) {
  static int counter = 0;
  auto dir = fs::temp_directory_path() /
             ("kara-acceptance-" + std::to_string(::getpid()) + "-" + tag + "-" + std::to_string(counter++));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

Outcome closure_oracle() {
  std::mt19937 rng(1001);
  const auto start = Clock::now();
  int mismatches = 0, inconsistent = 0;
  for (int i = 0; i < 500; ++i) {
    const auto rels = random_relations(rng, 8);
    const auto expected = naive_saturation(rels);
    try {
      const auto closure = infer_closure(rels);
      if (!expected.consistent || as_facts(closure) != expected.facts) ++mismatches;
    } catch (const ContradictionError&) {
      ++inconsistent;
      if (expected.consistent) ++mismatches;
    }
  }
  const double secs = seconds_since(start);
  return {mismatches == 0 && secs < 5.0,
          "500 sets, " + std::to_string(inconsistent) + " inconsistent, " + std::to_string(mismatches) +
              " mismatches, " + fmt(secs) + " s"};
}

Outcome calibration_oracle() {
  std::mt19937 rng(2002);
  const auto start = Clock::now();
  int bad = 0, infeasible = 0;
  double worst_gap = 0.0;
  for (int i = 0; i < 200; ++i) {
    const auto p = random_problem(rng, 4);
    const auto grid = grid_calibration_min(p);
    try {
      const auto s = calibrate(p);
      const double lp = total_absolute_deviation(p, s.scores);
      const double slack = 2.0 * static_cast<double>(p.ids.size()) * 0.001;
      const bool ok = grid.feasible && satisfies_constraints(p, s.scores, 1e-9) &&
                      std::abs(lp - s.objective) <= 1e-9 && lp <= grid.objective + 1e-9 &&
                      lp >= grid.objective - slack - 1e-9;
      if (grid.feasible) worst_gap = std::max(worst_gap, grid.objective - lp);
      if (!ok) ++bad;
    } catch (const InfeasibleComparisonChain&) {
      ++infeasible;
      if (grid.feasible) ++bad;
    }
  }
  const double secs = seconds_since(start);
  return {bad == 0 && secs < 30.0, "200 problems, " + std::to_string(infeasible) + " infeasible, " +
                                       std::to_string(bad) + " failures, max grid gap " + fmt(worst_gap, 6) +
                                       ", " + fmt(secs) + " s"};
}

Outcome worked_lp() {
  CalibrationProblem p;
  p.ids = {"a", "b"};
  p.reference = {{"a", 0.5}, {"b", 0.5}};
  p.gt = {{"a", "b"}};
  p.t = 0.1;
  const auto s = calibrate(p);
  CalibrationProblem free = p;
  free.gt.clear();
  const auto f = calibrate(free);
  const bool ok = s.objective == 0.1 && f.objective == 0.0 && f.scores == free.reference;
  return {ok, "objective " + fmt(s.objective, 12) + ", no-comparison objective " + fmt(f.objective, 12)};
}

Outcome infeasible_chain() {
  CalibrationProblem p;
  for (int i = 0; i <= 11; ++i) {
    const Id id = "c" + std::to_string(100 + i);
    p.ids.push_back(id);
    p.reference[id] = 0.5;
    if (i > 0) p.gt.push_back({id, p.ids[i - 1]});
  }
  p.t = 0.1;
  try {
    calibrate(p);
    return {false, "no error raised"};
  } catch (const InfeasibleComparisonChain& e) {
    const auto& chain = e.details().at("chain");
    const bool ok = chain.at("length") == 11 && chain.at("path").size() == 12 &&
                    chain.at("path").front() == "c111" && chain.at("path").back() == "c100";
    return {ok, "code " + e.code() + ", chain length " + chain.at("length").dump()};
  }
}

Outcome consensus_oracle() {
  std::mt19937 rng(3003);
  const auto start = Clock::now();
  int bad = 0;
  std::size_t enumerated = 0;
  for (int i = 0; i < 300; ++i) {
    const auto w = random_weights(rng, 5, 4);
    const auto solved = solve_consensus(w);
    std::size_t count = 0;
    const auto brute = brute_force_consensus(w, &count);
    enumerated += count;
    const bool ok = solved.objective() == brute.objective() && consensus_objective(w, solved) == solved.objective() &&
                    satisfies_ip_constraints(solved);
    if (!ok) ++bad;
  }
  const double secs = seconds_since(start);
  return {bad == 0 && secs < 60.0, "300 instances, " + std::to_string(enumerated) + " orderings enumerated, " +
                                       std::to_string(bad) + " mismatches, " + fmt(secs) + " s"};
}

json http_json(const httplib::Result& r, int expected_status, const std::string& what) {
  if (!r) throw std::runtime_error(what + ": no response");
  if (r->status != expected_status)
    throw std::runtime_error(what + ": status " + std::to_string(r->status) + " " + r->body);
  return json::parse(r->body);
}

Outcome worked_ip() {
  PairWeights w({"a", "b"});
  w.add("a", "b", 3, 1, 1);  // two say a<b, one says a=b
  const auto c = solve_consensus(w);
  const bool ip_ok = c.objective() == 1 && c.x_le("a", "b") && !c.x_eq("a", "b");

  // Single expert through the HTTP API.
  const auto dir = fresh_dir("api");
  WorkspaceStore store(dir);
  Engine engine(store);
  HttpServer server(engine, 4);
  const int port = server.bind("127.0.0.1", 0);
  std::thread runner([&] { server.run(); });
  bool api_ok = false;
  std::string detail;
  try {
    httplib::Client cli("127.0.0.1", port);
    cli.set_read_timeout(30, 0);
    const auto doc = load_json(fixture_path("case_study.json"));
    const char* kJson = "application/json";
    http_json(cli.Post("/workspaces", json{{"id", "solo"}}.dump(), kJson), 201, "create");
    http_json(cli.Put("/workspaces/solo/questionnaire", doc["questionnaires"][0].dump(), kJson), 200, "questionnaire");
    http_json(cli.Post("/workspaces/solo/characterizations", doc["characterizations"].dump(), kJson), 200, "chars");
    http_json(cli.Post("/workspaces/solo/experts", json{{"id", "e1"}, {"display_name", "Solo"}}.dump(), kJson), 200,
              "expert");
    const std::array<std::array<const char*, 3>, 4> rels = {
        {{"E", "lt", "A"}, {"A", "lt", "C"}, {"B", "eq", "C"}, {"D", "lt", "C"}}};
    for (const auto& r : rels)
      http_json(cli.Post("/workspaces/solo/experts/e1/comparisons",
                         json{{"a", r[0]}, {"relation", r[1]}, {"b", r[2]}}.dump(), kJson),
                200, "comparison");
    const auto expert = http_json(cli.Get("/workspaces/solo/experts/e1/lok-scale"), 200, "expert scale");
    const auto global = http_json(cli.Get("/workspaces/solo/global-lok-scale"), 200, "global scale");
    api_ok = expert.at("scores") == global.at("scores") && expert.at("objective") == global.at("objective");
    detail = "expert " + expert.at("scores").dump() + " global " + global.at("scores").dump();
  } catch (const std::exception& e) {
    detail = e.what();
  }
  server.stop();
  runner.join();
  fs::remove_all(dir);
  return {ip_ok && api_ok, "ip objective " + std::to_string(c.objective()) + "; " + detail};
}

Outcome reference_determinism() {
  const auto examples = synthetic_training_set();
  const auto m1 = train_reference_model(examples);
  const auto m2 = train_reference_model(examples);
  const bool same = m1.candidate() == m2.candidate() && m1.cv_loss() == m2.cv_loss() && m1.kind() == m2.kind() &&
                    m1.metadata() == m2.metadata();
  const auto k1 = fit_model(ModelCandidate{ModelKind::knn, 1, false, 0.0}, examples);
  int wrong = 0;
  for (const auto& e : examples)
    if (k1.predict(e.vector) != e.lok) ++wrong;
  return {same && wrong == 0, "selected " + m1.candidate().name() + " cv_loss " + fmt(m1.cv_loss(), 6) +
                                  ", knn k=1 label mismatches " + std::to_string(wrong)};
}

Outcome one_hot_fixtures() {
  const auto q = case_study_questionnaire();
  const auto rows = case_study_rows();
  int wrong = 0;
  std::map<Id, OneHotVector> enc;
  for (const auto& [id, bits] : published_vectors()) {
    enc[id] = encode_one_hot(rows.at(id), q);
    if (bits_of(enc[id]) != bits) ++wrong;
  }
  const double s = similarity(enc.at("A"), enc.at("E"));
  return {wrong == 0 && s == 0.75, std::to_string(wrong) + " row mismatches, similarity(A,E) " + fmt(s, 6)};
}

Outcome region_contract() {
  const auto r = LikelihoodRegion::default_region();
  bool half_ok = !validate_pos(r, 1.0, 0.5).accepted;
  for (int i = 0; i <= 500; ++i) half_ok = half_ok && validate_pos(r, i / 1000.0, 0.5).accepted;
  std::mt19937 rng(4004);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int bad = 0;
  for (int i = 0; i < 10000; ++i) {
    const double lok = u(rng), pos = u(rng);
    const auto v = validate_pos(r, lok, pos);
    bool inside = false;
    for (const auto& iv : allowed_intervals(r, lok)) inside = inside || (pos >= iv.lo && pos <= iv.hi);
    bool nearest_ok = false;
    for (const auto& iv : allowed_intervals(r, lok))
      nearest_ok = nearest_ok || (v.nearest >= iv.lo && v.nearest <= iv.hi);
    if (v.accepted != inside || !nearest_ok || (v.accepted && v.nearest != pos)) ++bad;
  }
  return {half_ok && bad == 0, std::string("0.5 contract ") + (half_ok ? "holds" : "broken") + ", " +
                                   std::to_string(bad) + " round-trip failures over 10000 pairs"};
}

// ---- end-to-end CLI run ----

std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) out += c == '\'' ? std::string("'\\''") : std::string(1, c);
  return out + "'";
}

std::pair<int, std::string> run_command(const std::string& cmd) {
  std::FILE* pipe = ::popen(cmd.c_str(), "r");
  if (!pipe) throw std::runtime_error("popen failed: " + cmd);
  std::string out;
  std::array<char, 4096> buf{};
  std::size_t n;
  while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) out.append(buf.data(), n);
  const int status = ::pclose(pipe);
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

json run_e2e() {
  const auto steps = load_json(KARA_E2E_STEPS);
  const auto dir = fresh_dir("e2e");
  json transcript = json::array();
  for (const auto& step : steps) {
    std::string cmd = shell_quote(KARA_CLI) + " --store " + shell_quote(dir.string()) + " --ws e2e";
    for (auto arg : step.at("args")) {
      auto s = arg.get<std::string>();
      if (const auto at = s.find("{fixtures}"); at != std::string::npos) s.replace(at, 10, KARA_FIXTURE_DIR);
      cmd += " " + shell_quote(s);
    }
    const auto [code, out] = run_command(cmd + " 2>/dev/null");
    const int expected = step.value("exit", 0);
    json parsed;
    try {
      parsed = json::parse(out);
    } catch (const json::exception&) {
      parsed = out;
    }
    if (code != expected)
      throw std::runtime_error("step " + step.at("name").get<std::string>() + " exited " + std::to_string(code) +
                               ": " + out);
    transcript.push_back({{"step", step.at("name")}, {"exit", code}, {"output", parsed}});
  }
  fs::remove_all(dir);
  return transcript;
}

// Structural equality with a numeric tolerance; reports the first difference.
bool close_json(const json& a, const json& b, const std::string& path, std::string& diff) {
  if (a.is_number() && b.is_number()) {
    if (std::abs(a.get<double>() - b.get<double>()) <= 1e-9) return true;
    diff = path + ": " + a.dump() + " vs " + b.dump();
    return false;
  }
  if (a.type() != b.type() || a.size() != b.size()) {
    diff = path + ": shape differs";
    return false;
  }
  if (a.is_object()) {
    for (auto it = a.begin(); it != a.end(); ++it) {
      if (!b.contains(it.key())) {
        diff = path + "/" + it.key() + ": missing";
        return false;
      }
      if (!close_json(it.value(), b.at(it.key()), path + "/" + it.key(), diff)) return false;
    }
    return true;
  }
  if (a.is_array()) {
    for (std::size_t i = 0; i < a.size(); ++i)
      if (!close_json(a[i], b[i], path + "/" + std::to_string(i), diff)) return false;
    return true;
  }
  if (a != b) {
    diff = path + ": " + a.dump() + " vs " + b.dump();
    return false;
  }
  return true;
}

Outcome end_to_end(bool write_golden) {
  try {
    const auto first = run_e2e();
    const auto second = run_e2e();
    if (first != second) return {false, "two runs produced different output"};
    if (write_golden) {
      std::ofstream(KARA_E2E_GOLDEN) << first.dump(2) << "\n";
      return {true, "golden written to " + std::string(KARA_E2E_GOLDEN)};
    }
    const auto golden = load_json(KARA_E2E_GOLDEN);
    std::string diff;
    if (!close_json(golden, first, "", diff)) return {false, "golden mismatch at " + diff};
    return {true, std::to_string(first.size()) + " steps match golden, identical across 2 runs"};
  } catch (const std::exception& e) {
    return {false, e.what()};
  }
}

}  // namespace

int main(int argc, char** argv) {
  const bool write_golden = argc > 1 && std::string(argv[1]) == "--write-golden";
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"closure-oracle", closure_oracle},
      {"calibration-lp-oracle", calibration_oracle},
      {"worked-lp-instance", worked_lp},
      {"infeasible-chain", infeasible_chain},
      {"consensus-ip-oracle", consensus_oracle},
      {"worked-ip-instance", worked_ip},
      {"reference-model-determinism", reference_determinism},
      {"one-hot-fixtures", one_hot_fixtures},
      {"region-contract", region_contract},
      {"end-to-end-cli", [&] { return end_to_end(write_golden); }},
  };
  int failed = 0;
  for (const auto& [name, run] : criteria) {
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << "  (" << o.detail << ")" << std::endl;
  }
  std::cout << (criteria.size() - failed) << "/" << criteria.size() << " criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
