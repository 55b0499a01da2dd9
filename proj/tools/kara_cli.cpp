#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "kara/engine.hpp"
#include "kara/oracle.hpp"
#include "kara/server.hpp"

namespace {

using kara::json;

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw kara::IoError("cannot read file", {{"path", path}});
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw kara::ParseError("file is not valid JSON", {{"path", path}, {"byte", e.byte}});
  }
}

std::string default_store() {
  const char* env = std::getenv("KARA_STORAGE");
  return env && *env ? env : "kara-data";
}

kara::HttpServer* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"KaRA risk assessment engine"};
  app.require_subcommand(1);
  std::string store_dir = default_store();
  std::string ws;
  app.add_option("--store", store_dir, "Workspace storage directory (env KARA_STORAGE)");
  app.add_option("--ws", ws, "Workspace id");

  std::function<json()> action;
  auto need_ws = [&] {
    if (ws.empty()) throw kara::InvalidArgument("this command needs --ws");
    return ws;
  };
  std::optional<kara::WorkspaceStore> store_holder;
  std::optional<kara::Engine> engine_holder;
  auto engine = [&]() -> kara::Engine& {
    if (!engine_holder) {
      store_holder.emplace(store_dir);
      engine_holder.emplace(*store_holder);
    }
    return *engine_holder;
  };

  // init
  auto* init = app.add_subcommand("init", "Create a workspace");
  std::string init_id, region_file;
  std::optional<double> init_t;
  init->add_option("--id", init_id, "Workspace id (defaults to --ws, then a generated id)");
  init->add_option("--t", init_t, "Strict comparison threshold");
  init->add_option("--region", region_file, "Region config JSON");
  init->callback([&] {
    action = [&] {
      json body = json::object();
      if (!init_id.empty()) body["id"] = init_id;
      else if (!ws.empty()) body["id"] = ws;
      if (init_t) body["t"] = *init_t;
      if (!region_file.empty()) body["region"] = read_json_file(region_file);
      return engine().create_workspace(body);
    };
  });

  // import
  auto* import = app.add_subcommand("import", "Import a questionnaire, characterizations or a records file");
  std::string import_file;
  import->add_option("file", import_file, "JSON file")->required();
  import->callback([&] {
    action = [&] {
      const auto doc = read_json_file(import_file);
      if (doc.is_array()) return engine().add_characterizations(need_ws(), doc);
      if (doc.contains("questions")) return engine().put_questionnaire(need_ws(), doc);
      return engine().import_records(need_ws(), doc);
    };
  });

  // show
  auto* show = app.add_subcommand("show", "Print the workspace document");
  show->callback([&] { action = [&] { return engine().get_workspace(need_ws()); }; });

  // expert
  auto* expert = app.add_subcommand("expert", "Register an expert");
  std::string expert_id, expert_name;
  expert->add_option("id", expert_id)->required();
  expert->add_option("--name", expert_name);
  expert->callback([&] {
    action = [&] {
      return engine().add_expert(need_ws(), {{"id", expert_id}, {"display_name", expert_name.empty() ? expert_id : expert_name}});
    };
  });

  // status
  auto* status = app.add_subcommand("status", "Move a characterization along its lifecycle");
  std::string status_char, status_value;
  status->add_option("characterization", status_char)->required();
  status->add_option("status", status_value)->required()->check(CLI::IsMember({"draft", "assessed", "peer_reviewed"}));
  status->callback([&] { action = [&] { return engine().set_status(need_ws(), status_char, {{"status", status_value}}); }; });

  // compare
  auto* compare = app.add_subcommand("compare", "Add (or remove) a pairwise LOK comparison");
  std::string cmp_expert, cmp_a, cmp_b, cmp_rel = "lt", cmp_remove;
  compare->add_option("--expert", cmp_expert)->required();
  compare->add_option("--a", cmp_a);
  compare->add_option("--b", cmp_b);
  compare->add_option("--relation", cmp_rel, "lt: L_a < L_b, gt: L_a > L_b, eq")
      ->check(CLI::IsMember({"lt", "gt", "eq"}));
  compare->add_option("--remove", cmp_remove, "Comparison id to remove");
  compare->callback([&] {
    action = [&] {
      if (!cmp_remove.empty()) return engine().remove_comparison(need_ws(), cmp_expert, cmp_remove);
      if (cmp_a.empty() || cmp_b.empty()) throw kara::InvalidArgument("compare needs --a and --b");
      return engine().add_comparison(need_ws(), cmp_expert, {{"a", cmp_a}, {"b", cmp_b}, {"relation", cmp_rel}});
    };
  });

  auto* comparisons = app.add_subcommand("comparisons", "List an expert's comparisons and closure");
  std::string list_expert, list_rf;
  comparisons->add_option("--expert", list_expert)->required();
  comparisons->add_option("--rf", list_rf, "Risk factor");
  comparisons->callback([&] { action = [&] { return engine().comparisons(need_ws(), list_expert, list_rf); }; });

  // lok
  auto* lok = app.add_subcommand("lok", "LOK scales");
  lok->require_subcommand(1);
  std::string lok_rf;
  lok->add_option("--rf", lok_rf, "Risk factor");
  auto* lok_expert = lok->add_subcommand("expert", "Calibrated scale of one expert");
  std::string lok_expert_id;
  lok_expert->add_option("id", lok_expert_id)->required();
  lok_expert->callback([&] { action = [&] { return engine().expert_scale(need_ws(), lok_expert_id, lok_rf); }; });
  auto* lok_global = lok->add_subcommand("global", "Scale calibrated by the consensus relations");
  lok_global->callback([&] { action = [&] { return engine().global_scale(need_ws(), lok_rf); }; });
  auto* lok_ref = lok->add_subcommand("reference", "Reference LOK predicted from peer-reviewed examples");
  lok_ref->callback([&] { action = [&] { return engine().reference_scale(need_ws(), lok_rf); }; });

  // consensus
  auto* consensus = app.add_subcommand("consensus", "Solve the consensus relations");
  std::string cons_rf;
  consensus->add_option("--rf", cons_rf, "Risk factor");
  consensus->callback([&] { action = [&] { return engine().solve_consensus(need_ws(), cons_rf); }; });

  // pos
  auto* pos = app.add_subcommand("pos", "POS assessment");
  pos->require_subcommand(1);
  double pv_lok = 0.0, pv_pos = 0.0;
  std::string pv_region;
  auto* pos_validate = pos->add_subcommand("validate", "Check a (lok, pos) pair against the region");
  pos_validate->add_option("--lok", pv_lok)->required()->check(CLI::Range(0.0, 1.0));
  pos_validate->add_option("--pos", pv_pos)->required()->check(CLI::Range(0.0, 1.0));
  pos_validate->add_option("--region", pv_region, "Region config JSON (default: workspace region or built-in)");
  pos_validate->callback([&] {
    action = [&] {
      kara::LikelihoodRegion region = kara::LikelihoodRegion::default_region();
      if (!pv_region.empty()) region = read_json_file(pv_region).get<kara::LikelihoodRegion>();
      else if (!ws.empty()) region = engine().store().get(ws)->region;
      kara::validate_region(region);
      const auto v = kara::validate_pos(region, pv_lok, pv_pos);
      return json{{"lok", pv_lok},
                  {"pos", pv_pos},
                  {"accepted", v.accepted},
                  {"nearest", v.nearest},
                  {"allowed", kara::allowed_intervals(region, pv_lok)}};
    };
  });
  std::optional<double> pr_lok;
  auto* pos_region = pos->add_subcommand("region", "Region outline and allowed intervals");
  pos_region->add_option("--lok", pr_lok)->check(CLI::Range(0.0, 1.0));
  pos_region->callback([&] { action = [&] { return engine().pos_region(need_ws(), pr_lok); }; });
  std::string pe_expert, pe_char, pe_scale = "expert";
  double pe_pos = 0.0;
  auto* pos_entry = pos->add_subcommand("entry", "Record an expert POS");
  pos_entry->add_option("--expert", pe_expert)->required();
  pos_entry->add_option("--char", pe_char)->required();
  pos_entry->add_option("--pos", pe_pos)->required();
  pos_entry->add_option("--scale", pe_scale)->check(CLI::IsMember({"expert", "global"}));
  pos_entry->callback([&] {
    action = [&] {
      return engine().add_pos_entry(
          need_ws(), {{"expert_id", pe_expert}, {"characterization_id", pe_char}, {"pos", pe_pos}, {"scale_kind", pe_scale}});
    };
  });
  std::string pc_char;
  std::optional<double> pc_pos;
  bool pc_accept = false;
  auto* pos_cons = pos->add_subcommand("consensus", "Suggest (and optionally record) the consensus POS");
  pos_cons->add_option("--char", pc_char)->required();
  pos_cons->add_option("--pos", pc_pos, "Record this value");
  pos_cons->add_flag("--accept", pc_accept, "Record the suggestion");
  pos_cons->callback([&] {
    action = [&] {
      json body{{"characterization_id", pc_char}};
      if (pc_pos) body["pos"] = *pc_pos;
      if (pc_accept) body["accept"] = true;
      return engine().pos_consensus(need_ws(), body);
    };
  });

  // similar
  auto* similar = app.add_subcommand("similar", "Most similar peer-reviewed assessments");
  std::string sim_char;
  std::size_t sim_k = 5;
  similar->add_option("--char", sim_char)->required();
  similar->add_option("--k", sim_k);
  similar->callback([&] { action = [&] { return engine().similar(need_ws(), sim_char, sim_k); }; });

  // calibrate / closure (pure)
  auto* calibrate = app.add_subcommand("calibrate", "Solve a calibration problem file");
  std::string problem_file;
  calibrate->add_option("--problem", problem_file)->required();
  calibrate->callback([&] {
    action = [&] { return json(kara::calibrate(read_json_file(problem_file).get<kara::CalibrationProblem>())); };
  });
  auto* closure = app.add_subcommand("closure", "Infer the closure of a relations file");
  std::string relations_file;
  closure->add_option("--relations", relations_file)->required();
  closure->callback([&] {
    action = [&] {
      const auto rels = read_json_file(relations_file).get<std::vector<kara::Relation>>();
      const auto c = kara::infer_closure(rels);
      return json{{"closure", c}, {"relations", kara::extract_gt_eq(c)}};
    };
  });

  // reference
  auto* reference = app.add_subcommand("reference", "Train a reference model from a JSON lines file");
  std::string train_file;
  reference->add_option("--train", train_file)->required();
  reference->callback([&] {
    action = [&] {
      std::ifstream in(train_file);
      if (!in) throw kara::IoError("cannot read file", {{"path", train_file}});
      const auto examples = kara::read_training_jsonl(in);
      const auto m = kara::train_reference_model(examples);
      json predictions = json::object();
      for (const auto& e : examples) predictions[e.characterization_id] = m.predict(e.vector);
      return json{{"model", m.metadata()}, {"predictions", predictions}};
    };
  });

  // oracle
  auto* oracle = app.add_subcommand("oracle", "Cross-check solvers against exhaustive oracles");
  oracle->require_subcommand(1);
  std::uint64_t seed = 1;
  std::size_t max_ids = 5;
  int max_experts = 4;
  std::string weights_file, oracle_problem;
  auto* oracle_cons = oracle->add_subcommand("consensus", "Branch and bound versus enumeration");
  oracle_cons->add_option("--max", max_ids, "Largest random instance (ids)")->check(CLI::Range(2, 5));
  oracle_cons->add_option("--experts", max_experts)->check(CLI::Range(1, 16));
  oracle_cons->add_option("--seed", seed);
  oracle_cons->add_option("--weights", weights_file, "PairWeights JSON instead of a random instance");
  oracle_cons->callback([&] {
    action = [&] {
      kara::PairWeights w;
      if (!weights_file.empty()) {
        w = read_json_file(weights_file).get<kara::PairWeights>();
      } else if (!ws.empty()) {
        auto snap = engine().store().get(ws);
        const auto rf = snap->resolve_risk_factor("");
        std::vector<kara::ComparisonGraph> graphs;
        for (const auto& e : snap->experts_of(rf)) graphs.push_back(snap->graph(e, rf));
        w = kara::aggregate_weights(graphs, snap->compared_of(rf));
      } else {
        w = kara::oracle::random_weights(seed, max_ids, max_experts);
      }
      auto out = kara::oracle::check_consensus(w);
      out["weights"] = w;
      return out;
    };
  });
  std::size_t max_cal = 4;
  auto* oracle_cal = oracle->add_subcommand("calibrate", "LP versus exhaustive 0.001 grid");
  oracle_cal->add_option("--problem", oracle_problem, "Problem JSON instead of a random instance");
  oracle_cal->add_option("--max", max_cal, "Largest random instance (ids)")->check(CLI::Range(1, 6));
  oracle_cal->add_option("--seed", seed);
  oracle_cal->callback([&] {
    action = [&] {
      const auto p = oracle_problem.empty() ? kara::oracle::random_problem(seed, max_cal)
                                            : read_json_file(oracle_problem).get<kara::CalibrationProblem>();
      auto out = kara::oracle::check_calibration(p);
      out["problem"] = p;
      return out;
    };
  });

  // serve
  auto* serve = app.add_subcommand("serve", "Run the HTTP service");
  std::string config_file, serve_host;
  std::optional<int> serve_port;
  serve->add_option("--config", config_file);
  serve->add_option("--port", serve_port);
  serve->add_option("--host", serve_host);
  bool serving = false;
  serve->callback([&] { serving = true; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (serving) {
      auto cfg = kara::load_server_config(config_file.empty() ? std::nullopt
                                                              : std::optional<std::filesystem::path>(config_file));
      if (serve_port) cfg.port = *serve_port;
      if (!serve_host.empty()) cfg.host = serve_host;
      if (app.get_option("--store")->count() > 0) cfg.storage = store_dir;
      kara::WorkspaceStore store(cfg.storage);
      kara::Engine eng(store, cfg.engine);
      kara::HttpServer server(eng, cfg.threads);
      const int port = server.bind(cfg.host, cfg.port);
      g_server = &server;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::cout << json{{"listening", cfg.host + ":" + std::to_string(port)}, {"storage", cfg.storage}}.dump()
                << std::endl;
      server.run();
      g_server = nullptr;
      return 0;
    }
    std::cout << action().dump(2) << "\n";
    return 0;
  } catch (const kara::Error& e) {
    std::cout << e.to_json().dump(2) << "\n";
    return 1;
  } catch (const json::exception& e) {
    std::cout << kara::InvalidArgument(std::string("malformed input: ") + e.what()).to_json().dump(2) << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cout << kara::Error("internal", e.what()).to_json().dump(2) << "\n";
    return 1;
  }
}
