#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "lta/eval.hpp"
#include "lta/planner.hpp"
#include "lta/service.hpp"

namespace {

using namespace lta;

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::InvalidConfiguration, "cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<eval::Scenario> load_all(const std::string& path) {
  std::vector<eval::Scenario> out;
  for (const auto& f : eval::scenario_files(path)) out.push_back(eval::load_scenario(f));
  return out;
}

// Interactive trial on the terminal: the operator confirms the plan and
// answers suggestions.
eval::TrialReport run_interactive(const eval::Scenario& s, int trial, const eval::RunOptions& o) {
  const std::uint64_t seed = o.seed.value_or(s.seed) + std::uint64_t(trial);
  auto session = eval::make_session(s, seed, o, s.id + "-" + std::to_string(trial));
  session->set_listener([](const TraceEvent& e) {
    if (e.kind == "assistant_msg" && !e.payload.value("text", "").empty())
      std::cout << "assistant: " << e.payload["text"].get<std::string>() << "\n";
    if (e.kind == "suggestion") std::cout << "suggestion: " << e.payload.dump() << "\n";
  });
  std::cout << "user: " << s.request << "\n";
  session->post_message(s.request);
  std::string line;
  while (!is_terminal(session->state()) && session->state() != SessionState::AwaitRequest) {
    if (session->state() == SessionState::AwaitConfirmation) {
      std::cout << "confirm plan? [yes/no] " << std::flush;
      if (!std::getline(std::cin, line)) line = "no";
      session->post_message(line);
    } else if (session->state() == SessionState::AwaitUserIntervention) {
      std::cout << "skip, reposition or retry? " << std::flush;
      if (!std::getline(std::cin, line)) line = "skip";
      try {
        session->intervene(line);
      } catch (const Error& e) {
        std::cout << e.what() << "\n";
      }
    } else {
      break;
    }
  }
  eval::TrialReport r;
  r.scenario = s.id;
  r.trial = trial;
  r.seed = seed;
  r.state = std::string(to_string(session->state()));
  r.trace = session->trace();
  if (session->plan()) r.plan = format_plan(*session->plan());
  r.excluded = session->backend_unavailable();
  if (!r.excluded) {
    r.pf = r.plan.empty() ? 0 : eval::score_pf(r.plan, s, seed, &r.notes);
    r.tcr = eval::score_tcr(*session, s, &r.notes);
    r.sgh = eval::score_sgh(session->graph(), session->world(), s, &r.notes);
  }
  return r;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Language-to-action tabletop framework: run scenarios, serve sessions, check plans and traces"};
  app.require_subcommand(1);

  std::string scenario_path = "scenarios", backend = "scripted", mode = "batch", report_dir;
  int trials = 0;
  std::uint64_t seed = 0;
  bool verbose = false;
  auto* run = app.add_subcommand("run", "Run scenario trials and print the results table");
  run->add_option("--scenario", scenario_path, "Scenario file or directory")->capture_default_str();
  run->add_option("--trials", trials, "Trials per scenario (default: from the file)");
  run->add_option("--seed", seed, "Base seed (default: from the file)");
  run->add_option("--backend", backend, "scripted or remote")->check(CLI::IsMember({"scripted", "remote"}));
  run->add_option("--mode", mode, "batch or interactive")->check(CLI::IsMember({"batch", "interactive"}));
  run->add_option("--report", report_dir, "Write report.json, table.txt and traces here");
  run->add_flag("-v,--verbose", verbose, "Print per-trial notes");

  int port = 8080;
  std::string host = "127.0.0.1", token;
  auto* serve = app.add_subcommand("serve", "Serve interactive sessions over HTTP");
  serve->add_option("--scenario", scenario_path, "Scenario file or directory")->capture_default_str();
  serve->add_option("--port", port, "Port (0 picks one)")->capture_default_str();
  serve->add_option("--host", host, "Address to bind")->capture_default_str();
  serve->add_option("--token", token, "Require this bearer token");

  std::string trace_path;
  auto* rep = app.add_subcommand("replay", "Re-execute a trace and compare it with the recording");
  rep->add_option("--trace", trace_path, "Trace file (ndjson)")->required();

  std::string plan_path, graph_path, tool_mode = "vlm";
  auto* vp = app.add_subcommand("validate-plan", "Check a plan against the planning rules");
  vp->add_option("--plan", plan_path, "Plan text file")->required();
  vp->add_option("--graph", graph_path, "Scene graph JSON")->required();
  vp->add_option("--mode", tool_mode, "vlm or apriltag")->check(CLI::IsMember({"vlm", "apriltag"}));

  std::string graph_a, graph_b;
  auto* gd = app.add_subcommand("graph-diff", "Print the delta between two scene graphs");
  gd->add_option("a", graph_a, "Before")->required();
  gd->add_option("b", graph_b, "After")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      eval::RunOptions o;
      if (trials > 0) o.trials = trials;
      if (run->count("--seed")) o.seed = seed;
      o.backend = backend == "remote" ? eval::Backend::Remote : eval::Backend::Scripted;
      o.batch = mode == "batch";
      std::vector<eval::ScenarioSummary> sums;
      for (const auto& s : load_all(scenario_path)) {
        if (o.batch) {
          sums.push_back(eval::run_scenario(s, o));
        } else {
          std::vector<eval::TrialReport> reports;
          for (int t = 0; t < o.trials.value_or(s.trials); ++t) reports.push_back(run_interactive(s, t, o));
          sums.push_back(eval::summarize(s.id, s.title, std::move(reports)));
        }
        if (verbose)
          for (const auto& r : sums.back().reports) {
            std::cerr << s.id << " trial " << r.trial << " seed " << r.seed << ": " << r.state << " pf " << r.pf
                      << " tcr " << r.tcr << " sgh " << eval::format_percent(100 * r.sgh) << "\n";
            for (const auto& n : r.notes) std::cerr << "  " << n << "\n";
          }
      }
      std::cout << eval::render_table(sums);
      if (!report_dir.empty()) eval::write_reports(report_dir, sums);
      return 0;
    }
    if (*serve) {
      auto scenarios = std::make_shared<std::vector<eval::Scenario>>(load_all(scenario_path));
      Service svc([scenarios](const std::string& id, const Json& body) {
        return eval::session_from_request(*scenarios, id, body);
      },
                  ServiceConfig{host, port, token});
      const int bound = svc.bind();
      std::cout << "listening on http://" << host << ":" << bound << " (" << scenarios->size() << " scenarios)"
                << std::endl;
      svc.listen();
      return 0;
    }
    if (*rep) {
      const auto check = eval::replay_trace(Trace::from_ndjson(slurp(trace_path)));
      for (const auto& m : check.mismatches) std::cout << "mismatch: " << m << "\n";
      std::cout << "replayed " << check.calls << " calls: " << (check.ok() ? "identical" : "differs") << "\n";
      return check.ok() ? 0 : 1;
    }
    if (*vp) {
      const ToolMode m = parse_tool_mode(tool_mode);
      const ToolRegistry reg(m);
      const auto v = validate_plan(parse_plan(slurp(plan_path)), deserialize(slurp(graph_path)), &reg);
      for (const auto& x : v) std::cout << to_json(x).dump() << "\n";
      std::cout << (has_errors(v) ? "invalid" : "valid") << "\n";
      return has_errors(v) ? 1 : 0;
    }
    if (*gd) {
      const auto delta = diff(deserialize(slurp(graph_a)), deserialize(slurp(graph_b)));
      std::cout << to_json(delta).dump(2) << "\n";
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
