// faasguard: deterministic FaaS security simulator and shield toolkit.
//
// Subcommands: simulate, attack, scan deps|model|image, iam gen, report,
// replay, respond. Exit codes: 0 success, 1 findings over threshold /
// rejection, 2 usage or configuration error.

#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "faasguard/harness/harness.hpp"
#include "faasguard/shield/postexec.hpp"
#include "faasguard/shield/predeploy.hpp"

namespace {

using nlohmann::json;
namespace fg = faasguard;

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  std::ostringstream out;
  out << f.rdbuf();
  return out.str();
}

void spit(const std::string& path, const std::string& bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open " + path);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

int cmd_simulate(const std::string& config_path, std::optional<std::uint64_t> seed,
                 const std::string& out_report, const std::string& out_log,
                 const std::string& format) {
  fg::harness::ScenarioConfig cfg = fg::harness::load_scenario_file(config_path);
  if (seed.has_value()) cfg.seed = *seed;
  const auto outcome = fg::harness::run_scenario(cfg);
  const auto fmt = format == "table" ? fg::harness::ReportFormat::kTable
                                     : fg::harness::ReportFormat::kJson;
  const std::string rendered = fg::harness::render_report(outcome.report, fmt);
  if (out_report.empty()) {
    std::cout << rendered;
  } else {
    spit(out_report, fg::harness::render_report(outcome.report,
                                                fg::harness::ReportFormat::kJson));
    std::cout << rendered;
  }
  if (!out_log.empty()) spit(out_log, outcome.on.log_bytes);
  return 0;
}

int cmd_attack(const std::string& config_path, const std::string& kind_filter,
               const std::string& out_path) {
  fg::harness::ScenarioConfig cfg = fg::harness::load_scenario_file(config_path);
  const auto outcome = fg::harness::run_scenario(cfg);
  json reports = json::array();
  for (const auto& r : outcome.report.attacker_reports) {
    if (!kind_filter.empty() && r.at("kind").get<std::string>() != kind_filter) {
      continue;
    }
    json full = r;
    json per_request = json::array();
    for (const auto& res : outcome.on.results) {
      // campaign request ids carry the campaign id prefix
      const std::string prefix = r.at("campaign_id").get<std::string>() + "-";
      if (res.request_id.rfind(prefix, 0) == 0) {
        per_request.push_back({{"request_id", res.request_id},
                               {"latency_ms", res.latency_ms},
                               {"cold_start", res.cold_start},
                               {"error", res.error.has_value()
                                             ? json(fg::sim::invocation_error_name(
                                                   *res.error))
                                             : json(nullptr)}});
      }
    }
    full["per_request"] = per_request;
    reports.push_back(std::move(full));
  }
  const std::string text = reports.dump(2) + "\n";
  if (out_path.empty()) {
    std::cout << text;
  } else {
    spit(out_path, text);
  }
  return 0;
}

int cmd_scan_deps(const std::string& manifest_path, const std::string& registry_path,
                  const std::string& vulndb_path, int popular_distance,
                  const std::string& fail_on) {
  const auto manifest = fg::shield::manifest_from_json(slurp(manifest_path));
  const auto registry = fg::shield::registry_from_json(slurp(registry_path));
  const auto vulndb = fg::shield::vulndb_from_json(slurp(vulndb_path));
  const auto report =
      fg::shield::scan_dependencies(manifest, registry, vulndb, popular_distance);
  std::cout << fg::shield::scan_report_to_json(report) << "\n";
  const auto threshold = fg::shield::severity_from_name(fail_on);
  for (const auto& finding : report.findings) {
    if (finding.severity >= threshold) return 1;
  }
  return 0;
}

int cmd_scan_model(const std::string& artifact_path, const std::string& trust_path,
                   const std::string& mode_name) {
  const auto artifact = fg::model::load_artifact(artifact_path);
  const auto store = fg::shield::trust_store_from_json(slurp(trust_path));
  const auto mode = mode_name == "signature" ? fg::shield::VerifyMode::kSignature
                                             : fg::shield::VerifyMode::kDigestPin;
  const auto verdict = fg::shield::verify_model(artifact, store, mode);
  json j{{"accepted", verdict.accepted},
         {"reason", verdict.accepted ? json(nullptr) : json(verdict.reason)},
         {"artifact_id", artifact.artifact_id}};
  std::cout << j.dump(2) << "\n";
  return verdict.accepted ? 0 : 1;
}

int cmd_scan_image(const std::string& layers_path, const std::string& trust_path) {
  const json jl = json::parse(slurp(layers_path));
  std::vector<std::string> layers;
  for (const auto& l : jl.at("layers")) layers.push_back(l.get<std::string>());
  const auto store = fg::shield::trust_store_from_json(slurp(trust_path));
  const auto verdict = fg::shield::verify_image(layers, store);
  json per_layer = json::array();
  for (const auto& l : verdict.layers) {
    per_layer.push_back(
        {{"index", l.index}, {"digest", l.digest}, {"trusted", l.trusted}});
  }
  json j{{"accepted", verdict.accepted}, {"layers", per_layer}};
  std::cout << j.dump(2) << "\n";
  return verdict.accepted ? 0 : 1;
}

int cmd_iam_gen(const std::string& trace_path, const std::string& out_path) {
  fg::iam::AccessTrace trace;
  std::istringstream in(slurp(trace_path));
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const json j = json::parse(line);
    trace.entries.push_back(
        {j.at("action").get<std::string>(), j.at("resource").get<std::string>()});
  }
  const fg::iam::Role role = fg::shield::generate_policy(trace);
  fg::iam::PermissionGraph g;
  g.add_role(role);
  const std::string text = fg::iam::graph_to_json(g) + "\n";
  if (out_path.empty()) {
    std::cout << text;
  } else {
    spit(out_path, text);
  }
  return 0;
}

int cmd_report(const std::string& in_path, const std::string& format) {
  const auto report = fg::harness::report_from_json(json::parse(slurp(in_path)));
  const auto fmt = format == "json" ? fg::harness::ReportFormat::kJson
                                    : fg::harness::ReportFormat::kTable;
  std::cout << fg::harness::render_report(report, fmt);
  return 0;
}

int cmd_replay(const std::string& log_path, const fg::shield::LogFilter& filter) {
  const auto result = fg::shield::query_log(slurp(log_path), filter);
  for (const auto& [line_no, message] : result.errors) {
    std::cerr << "malformed line " << line_no << ": " << message << "\n";
  }
  for (const auto& r : result.records) {
    std::cout << fg::shield::record_to_line(r) << "\n";
  }
  return 0;
}

// Offline analysis: alerts plus the actions the default playbook would take.
int cmd_respond(const std::string& log_path, const std::string& playbook_path,
                bool dry_run) {
  const auto result = fg::shield::query_log(slurp(log_path), {});
  fg::shield::AnalysisRules rules;
  fg::shield::Playbook playbook = fg::shield::default_playbook();
  if (!playbook_path.empty()) {
    const json jp = json::parse(slurp(playbook_path));
    if (jp.contains("rules")) {
      const json& jr = jp.at("rules");
      rules.extraction_k = jr.value("extraction_k", rules.extraction_k);
      rules.surge_factor = jr.value("surge_factor", rules.surge_factor);
      rules.anomaly_burst_n = jr.value("anomaly_burst_n", rules.anomaly_burst_n);
      rules.surge_bucket_ms = jr.value("surge_bucket_ms", rules.surge_bucket_ms);
    }
  }
  const auto alerts = fg::shield::analyze_window(result.records, rules);

  class DryRunTarget : public fg::shield::ResponseInterface {
   public:
    bool block_client(const std::string&) override { return true; }
    bool tighten_rate_limit(const std::string&) override { return true; }
    bool quarantine_container(const std::string&) override { return true; }
    bool rollback_function(const std::string&, std::string* note) override {
      if (note != nullptr) *note = "dry_run";
      return true;
    }
    bool revoke_excess_permissions(const std::string&) override { return true; }
  } target;

  json out = json::array();
  std::set<std::string> applied;
  for (const auto& alert : alerts) {
    json ja{{"alert_id", alert.alert_id},
            {"kind", fg::shield::alert_kind_name(alert.kind)},
            {"subject", alert.subject},
            {"window", {alert.window_start, alert.window_end}},
            {"evidence_count", alert.evidence.size()}};
    json actions = json::array();
    const auto acts = fg::shield::respond(alert, playbook, target, result.records,
                                          0, &applied);
    for (const auto& act : acts) {
      actions.push_back({{"kind", fg::shield::action_kind_name(act.kind)},
                         {"target", act.target},
                         {"dry_run", dry_run}});
    }
    ja["actions"] = actions;
    out.push_back(std::move(ja));
  }
  std::cout << out.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"deterministic FaaS security simulator and shield toolkit"};
  app.require_subcommand(1);

  // simulate
  auto* simulate = app.add_subcommand("simulate", "run a scenario config");
  std::string sim_config, sim_report, sim_log, sim_format = "table";
  std::uint64_t sim_seed = 0;
  bool sim_seed_set = false;
  simulate->add_option("--config", sim_config, "scenario JSON")->required();
  simulate->add_option("--seed", sim_seed, "override config seed")
      ->each([&](const std::string&) { sim_seed_set = true; });
  simulate->add_option("--out-report", sim_report, "write report JSON here");
  simulate->add_option("--out-log", sim_log, "write forensic JSON-Lines here");
  simulate->add_option("--format", sim_format, "table|json");

  // attack
  auto* attack_cmd = app.add_subcommand("attack", "run campaigns, emit attacker reports");
  std::string atk_config, atk_kind, atk_out;
  attack_cmd->add_option("--config", atk_config, "scenario JSON")->required();
  attack_cmd->add_option("--kind", atk_kind, "only this attack kind");
  attack_cmd->add_option("--out", atk_out, "write report JSON here");

  // scan
  auto* scan = app.add_subcommand("scan", "pre-deployment scanners");
  scan->require_subcommand(1);
  auto* scan_deps = scan->add_subcommand("deps", "dependency scan");
  std::string deps_manifest, deps_registry, deps_vulndb, deps_fail_on = "high";
  int deps_distance = 1;
  scan_deps->add_option("--manifest", deps_manifest)->required();
  scan_deps->add_option("--registry", deps_registry)->required();
  scan_deps->add_option("--vulndb", deps_vulndb)->required();
  scan_deps->add_option("--popular-distance", deps_distance);
  scan_deps->add_option("--fail-on", deps_fail_on, "low|medium|high|critical");

  auto* scan_model = scan->add_subcommand("model", "model integrity verification");
  std::string model_artifact, model_trust, model_mode = "digest";
  scan_model->add_option("--artifact", model_artifact)->required();
  scan_model->add_option("--trust", model_trust)->required();
  scan_model->add_option("--mode", model_mode, "digest|signature");

  auto* scan_image = scan->add_subcommand("image", "image layer verification");
  std::string image_layers, image_trust;
  scan_image->add_option("--layers", image_layers)->required();
  scan_image->add_option("--trust", image_trust)->required();

  // iam
  auto* iam_cmd = app.add_subcommand("iam", "IAM tooling");
  iam_cmd->require_subcommand(1);
  auto* iam_gen = iam_cmd->add_subcommand("gen", "least-privilege policy from a trace");
  std::string iam_trace, iam_out;
  iam_gen->add_option("--trace", iam_trace, "JSONL of {action, resource}")->required();
  iam_gen->add_option("--out", iam_out, "write role JSON here");

  // report
  auto* report_cmd = app.add_subcommand("report", "render a report file");
  std::string rep_in, rep_format = "table";
  report_cmd->add_option("--in", rep_in)->required();
  report_cmd->add_option("--format", rep_format, "table|json");

  // replay
  auto* replay = app.add_subcommand("replay", "filter a forensic log");
  std::string rl_log, rl_client, rl_function, rl_kind;
  std::int64_t rl_from = -1, rl_to = -1;
  replay->add_option("--log", rl_log)->required();
  replay->add_option("--client", rl_client);
  replay->add_option("--function", rl_function);
  replay->add_option("--kind", rl_kind, "flagged detector name");
  replay->add_option("--from", rl_from, "ms, inclusive");
  replay->add_option("--to", rl_to, "ms, inclusive");

  // respond
  auto* respond_cmd = app.add_subcommand("respond", "offline alert/playbook analysis");
  std::string rs_log, rs_playbook;
  bool rs_dry = false;
  respond_cmd->add_option("--log", rs_log)->required();
  respond_cmd->add_option("--playbook", rs_playbook);
  respond_cmd->add_flag("--dry-run", rs_dry);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (simulate->parsed()) {
      return cmd_simulate(sim_config,
                          sim_seed_set ? std::optional<std::uint64_t>(sim_seed)
                                       : std::nullopt,
                          sim_report, sim_log, sim_format);
    }
    if (attack_cmd->parsed()) return cmd_attack(atk_config, atk_kind, atk_out);
    if (scan->parsed()) {
      if (scan_deps->parsed()) {
        return cmd_scan_deps(deps_manifest, deps_registry, deps_vulndb,
                             deps_distance, deps_fail_on);
      }
      if (scan_model->parsed()) {
        return cmd_scan_model(model_artifact, model_trust,
                              model_mode == "signature" ? "signature" : "digest");
      }
      if (scan_image->parsed()) return cmd_scan_image(image_layers, image_trust);
    }
    if (iam_cmd->parsed() && iam_gen->parsed()) return cmd_iam_gen(iam_trace, iam_out);
    if (report_cmd->parsed()) return cmd_report(rep_in, rep_format);
    if (replay->parsed()) {
      faasguard::shield::LogFilter filter;
      if (!rl_client.empty()) filter.client_id = rl_client;
      if (!rl_function.empty()) filter.function_id = rl_function;
      if (!rl_kind.empty()) filter.kind = rl_kind;
      if (rl_from >= 0) filter.from_ms = static_cast<faasguard::sim::VirtualTime>(rl_from);
      if (rl_to >= 0) filter.to_ms = static_cast<faasguard::sim::VirtualTime>(rl_to);
      return cmd_replay(rl_log, filter);
    }
    if (respond_cmd->parsed()) return cmd_respond(rs_log, rs_playbook, rs_dry);
  } catch (const faasguard::harness::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
