#include "faasguard/harness/harness.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace faasguard::harness {

namespace {

using nlohmann::json;

std::string benign_client_id(std::size_t i) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "client-%03zu", i);
  return buf;
}

// Benign traffic: per-client Poisson arrivals; model functions receive
// in-distribution predict queries, plain functions a noop payload.
std::vector<sim::InvocationRequest> build_benign(const ScenarioConfig& cfg,
                                                 const BuiltScenario& built) {
  std::vector<sim::InvocationRequest> out;
  if (cfg.benign.clients == 0 || cfg.benign.functions.empty()) return out;
  Rng rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);

  std::map<std::string, const sim::FunctionSpec*> specs;
  for (const sim::FunctionSpec& f : cfg.functions) specs[f.function_id] = &f;

  for (std::size_t c = 0; c < cfg.benign.clients; ++c) {
    const std::string client = benign_client_id(c);
    const std::string& fn = cfg.benign.functions[c % cfg.benign.functions.size()];
    const sim::FunctionSpec* spec = specs.at(fn);
    const model::Dataset* data = nullptr;
    if (spec->model_ref.has_value()) {
      auto it = built.datasets.find(*spec->model_ref);
      if (it != built.datasets.end()) data = &it->second;
    }
    double t = 0.0;
    std::size_t n = 0;
    while (true) {
      t += rng.exponential(cfg.benign.rate_per_s) * 1000.0;
      if (t >= static_cast<double>(cfg.benign.duration_ms)) break;
      sim::InvocationRequest req;
      char buf[16];
      std::snprintf(buf, sizeof(buf), "-%05zu", n++);
      req.request_id = "b-" + client + buf;
      req.function_id = fn;
      req.client_id = client;
      req.arrival_time = static_cast<sim::VirtualTime>(t);
      req.payload_complexity = cfg.benign.complexity;
      req.ground_truth = sim::GroundTruth::benign();
      if (data != nullptr) {
        // Draw from the training distribution: a member point plus noise of
        // the fitted per-class spread (unit variance by construction).
        const std::size_t i = rng.uniform_int(data->member_count);
        std::vector<double> x(data->dims);
        auto base = data->point(i);
        for (std::size_t jdx = 0; jdx < data->dims; ++jdx) {
          x[jdx] = base[jdx] + 0.2 * rng.normal();
        }
        json p{{"op", "predict"}, {"x", x}, {"mode", "confidence"}};
        req.payload = p.dump();
      } else {
        req.payload = R"({"op":"noop"})";
      }
      out.push_back(std::move(req));
    }
  }
  return out;
}

attack::AttackCampaign build_attack(const ScenarioConfig& cfg,
                                    const BuiltScenario& built,
                                    const AttackConfig& a,
                                    attack::ExtractionTranscript* transcript_out) {
  const json& p = a.params;
  auto fn_of = [&]() { return p.at("function_id").get<std::string>(); };
  auto model_of = [&](const std::string& fn) -> const model::ModelArtifact& {
    for (const sim::FunctionSpec& f : cfg.functions) {
      if (f.function_id == fn) {
        if (!f.model_ref.has_value()) {
          throw ConfigError("attack targets function without a model: " + fn);
        }
        return built.artifacts.at(*f.model_ref);
      }
    }
    throw ConfigError("attack references unknown function");
  };

  switch (a.kind) {
    case sim::AttackKind::kColdProbe: {
      attack::ColdProbeParams cp;
      cp.n = p.value("n", 10);
      cp.spacing_ms = p.value("spacing_ms", 1000);
      cp.start_ms = a.start_ms;
      if (p.contains("oscillate_low_ms")) {
        cp.oscillate = {{p.at("oscillate_low_ms").get<sim::VirtualTime>(),
                         p.at("oscillate_high_ms").get<sim::VirtualTime>()}};
      }
      return attack::gen_cold_probe(fn_of(), cp, a.seed);
    }
    case sim::AttackKind::kExhaustion:
      return attack::gen_exhaustion(fn_of(), p.value("concurrency", 50), a.start_ms,
                                    p.value("complexity", 0.0), a.seed);
    case sim::AttackKind::kReuseLeak:
      return attack::gen_reuse_leak(
          fn_of(), p.value("marker", "secret"), p.value("planter_client", "atk-planter"),
          p.value("prober_client", "atk-prober"), a.start_ms, p.value("gap_ms", 1000),
          a.seed);
    case sim::AttackKind::kExtraction: {
      attack::ExtractionParams ep;
      ep.budget = p.value("budget", 100);
      ep.strategy = p.value("strategy", "uniform_random") == "boundary_refine"
                        ? attack::ExtractionStrategy::kBoundaryRefine
                        : attack::ExtractionStrategy::kUniformRandom;
      ep.rate_per_s = p.value("rate_per_s", 100.0);
      ep.start_ms = a.start_ms;
      auto ec = attack::gen_extraction(model_of(fn_of()), fn_of(), ep, a.seed);
      if (transcript_out != nullptr) *transcript_out = std::move(ec.transcript);
      return std::move(ec.campaign);
    }
    case sim::AttackKind::kAdversarial: {
      // Near-margin perturbed points against the target model.
      const std::string fn = fn_of();
      const model::ModelArtifact& target = model_of(fn);
      const model::Dataset* data = nullptr;
      for (const sim::FunctionSpec& f : cfg.functions) {
        if (f.function_id == fn && f.model_ref.has_value()) {
          data = &built.datasets.at(*f.model_ref);
        }
      }
      attack::AttackCampaign c;
      c.kind = sim::AttackKind::kAdversarial;
      c.campaign_id = "adv-" + std::to_string(a.seed);
      c.seed = a.seed;
      Rng rng(a.seed);
      const std::size_t n = p.value("n", 50);
      const double factor = p.value("epsilon_factor", 1.5);
      sim::VirtualTime t = a.start_ms;
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t idx = rng.uniform_int(data->size());
        std::vector<double> x(data->point(idx).begin(), data->point(idx).end());
        const auto margin = model::min_linf_perturbation(target, x);
        std::vector<double> gen = x;
        if (margin.has_value()) {
          gen = attack::gen_adversarial(target, x, factor * *margin).x_prime;
        }
        sim::InvocationRequest req;
        char buf[16];
        std::snprintf(buf, sizeof(buf), "-r%05zu", i);
        req.request_id = c.campaign_id + buf;
        req.function_id = fn;
        req.client_id = "atk-adv-" + std::to_string(a.seed);
        json payload{{"op", "predict"}, {"x", gen}, {"mode", "confidence"}};
        req.payload = payload.dump();
        req.payload_complexity = 1.0;
        req.arrival_time = t;
        req.ground_truth = sim::GroundTruth::attack(sim::AttackKind::kAdversarial);
        c.schedule.emplace_back(t, std::move(req));
        t += p.value("spacing_ms", 50);
      }
      return c;
    }
    case sim::AttackKind::kMembership: {
      const std::string fn = fn_of();
      const model::ModelArtifact& target = model_of(fn);
      (void)target;
      const model::Dataset* data = nullptr;
      for (const sim::FunctionSpec& f : cfg.functions) {
        if (f.function_id == fn && f.model_ref.has_value()) {
          data = &built.datasets.at(*f.model_ref);
        }
      }
      attack::AttackCampaign c;
      c.kind = sim::AttackKind::kMembership;
      c.campaign_id = "member-" + std::to_string(a.seed);
      c.seed = a.seed;
      sim::VirtualTime t = a.start_ms;
      for (std::size_t i = 0; i < data->size(); ++i) {
        sim::InvocationRequest req;
        char buf[16];
        std::snprintf(buf, sizeof(buf), "-r%05zu", i);
        req.request_id = c.campaign_id + buf;
        req.function_id = fn;
        req.client_id = "atk-member-" + std::to_string(a.seed);
        std::vector<double> x(data->point(i).begin(), data->point(i).end());
        json payload{{"op", "predict"}, {"x", x}, {"mode", "confidence"}};
        req.payload = payload.dump();
        req.payload_complexity = 1.0;
        req.arrival_time = t;
        req.ground_truth = sim::GroundTruth::attack(sim::AttackKind::kMembership);
        c.schedule.emplace_back(t, std::move(req));
        t += p.value("spacing_ms", 100);
      }
      return c;
    }
    case sim::AttackKind::kEventInjection: {
      std::vector<attack::EventVariant> variants;
      for (const auto& jv : p.value("variants", json::array())) {
        const std::string name = jv.get<std::string>();
        if (name == "oversized_payload") variants.push_back(attack::EventVariant::kOversizedPayload);
        else if (name == "wrong_trigger_type") variants.push_back(attack::EventVariant::kWrongTriggerType);
        else if (name == "malformed_structure") variants.push_back(attack::EventVariant::kMalformedStructure);
        else if (name == "nested_bomb") variants.push_back(attack::EventVariant::kNestedBomb);
        else throw ConfigError("unknown event_injection variant " + name);
      }
      if (variants.empty()) {
        variants = {attack::EventVariant::kOversizedPayload,
                    attack::EventVariant::kWrongTriggerType,
                    attack::EventVariant::kMalformedStructure,
                    attack::EventVariant::kNestedBomb};
      }
      return attack::gen_event_injection(fn_of(), variants, a.start_ms,
                                         cfg.shield.thresholds.event.max_payload_bytes,
                                         p.value("include_control", false), a.seed);
    }
    case sim::AttackKind::kDenialOfWallet:
      return attack::gen_denial_of_wallet(fn_of(), p.value("n", 100),
                                          p.value("complexity", 100.0),
                                          p.value("rate_per_s", 20.0), a.start_ms,
                                          a.seed);
    case sim::AttackKind::kPersistence:
      return attack::gen_persistence(fn_of(), a.start_ms, p.value("gap_ms", 500),
                                     a.seed);
    case sim::AttackKind::kDependencyPoison: {
      // Poisoning happens at build time: the campaign is a marker that the
      // target function's manifest carries the poisoned package; the
      // pre-deployment scan must flag it.
      attack::AttackCampaign c;
      c.kind = sim::AttackKind::kDependencyPoison;
      c.campaign_id = "poison-" + std::to_string(a.seed);
      c.seed = a.seed;
      c.params["configured"] = 1.0;
      return c;
    }
    case sim::AttackKind::kRoleChain: {
      attack::AttackCampaign c;
      c.kind = sim::AttackKind::kRoleChain;
      c.campaign_id = "chain-" + std::to_string(a.seed);
      c.seed = a.seed;
      c.params["configured"] = 1.0;
      return c;
    }
  }
  throw ConfigError("unhandled attack kind");
}

}  // namespace

BuiltScenario build_scenario(const ScenarioConfig& cfg) {
  BuiltScenario built;
  for (const ModelConfig& m : cfg.models) {
    model::Dataset data = model::generate_dataset(m.dims, m.classes, m.n, m.gen_seed);
    model::ModelArtifact artifact =
        model::train(data, m.epochs, m.learning_rate, m.train_seed);
    artifact.artifact_id = m.artifact_id;
    artifact.digest = model::compute_digest(artifact);
    if (m.sign_key.has_value()) {
      artifact.auth_tag = model::sign(artifact, *m.sign_key);
    }
    built.datasets.emplace(m.artifact_id, std::move(data));
    built.artifacts.emplace(m.artifact_id, std::move(artifact));
  }

  for (const AttackConfig& a : cfg.attacks) {
    attack::ExtractionTranscript transcript;
    attack::AttackCampaign c = build_attack(cfg, built, a, &transcript);
    if (a.kind == sim::AttackKind::kExtraction) {
      built.transcripts.emplace(c.campaign_id, std::move(transcript));
    }
    built.campaigns.push_back(std::move(c));
  }

  built.requests = build_benign(cfg, built);
  for (const attack::AttackCampaign& c : built.campaigns) {
    for (const auto& [t, req] : c.schedule) built.requests.push_back(req);
    built.mutations.insert(built.mutations.end(), c.mutations.begin(),
                           c.mutations.end());
  }
  std::sort(built.requests.begin(), built.requests.end(),
            [](const sim::InvocationRequest& a, const sim::InvocationRequest& b) {
              if (a.arrival_time != b.arrival_time) {
                return a.arrival_time < b.arrival_time;
              }
              return a.request_id < b.request_id;
            });
  for (const sim::InvocationRequest& req : built.requests) {
    if (!built.ground_truth.emplace(req.request_id, req.ground_truth).second) {
      throw ConfigError("duplicate request id in schedule: " + req.request_id);
    }
  }
  return built;
}

PassOutcome run_pass(const ScenarioConfig& cfg, const BuiltScenario& built,
                     bool shield_on) {
  shield::ShieldConfig shield_cfg = cfg.shield;
  shield_cfg.enabled = shield_on && cfg.shield.enabled;

  sim::Simulator s(cfg.platform, shield_cfg, cfg.seed);
  for (const sim::FunctionSpec& f : cfg.functions) s.deploy_function(f);
  for (const auto& [id, artifact] : built.artifacts) {
    s.register_model(artifact, built.datasets.at(id));
  }
  if (cfg.graph.has_value()) s.set_permission_graph(*cfg.graph);
  if (shield_cfg.enabled && cfg.auto_response.enabled) {
    s.enable_auto_response(cfg.auto_response.every_ms, cfg.auto_response.rules,
                           shield::default_playbook());
  }
  for (const sim::InvocationRequest& req : built.requests) s.schedule_request(req);
  for (const sim::ScheduledMutation& m : built.mutations) s.schedule_mutation(m);
  s.run_until_idle();

  PassOutcome out;
  out.results = s.results();
  out.ledger = s.ledger();
  out.log_bytes = s.forensic_log().to_bytes();
  out.records = s.forensic_log().records();
  out.alerts = s.alerts();
  out.actions = s.actions();
  for (const sim::FunctionSpec& f : cfg.functions) {
    out.traces[f.function_id] = s.access_trace(f.function_id);
  }
  out.peak_busy = s.peak_busy();

  // Conservation: the ledger total must equal the per-invocation sum.
  double total = 0.0;
  for (const auto& r : out.results) total += r.cost_units;
  if (total != out.ledger.total()) {
    throw std::logic_error("billing conservation violated");
  }
  return out;
}

namespace {

// Per-role traces from the shield-on pass; functions bound to the same role
// merge their traces.
std::map<std::string, iam::AccessTrace> role_traces(const ScenarioConfig& cfg,
                                                    const PassOutcome& on) {
  std::map<std::string, iam::AccessTrace> out;
  for (const sim::FunctionSpec& f : cfg.functions) {
    if (f.role_id.empty()) continue;
    auto it = on.traces.find(f.function_id);
    if (it == on.traces.end()) continue;
    auto& trace = out[f.role_id];
    trace.entries.insert(trace.entries.end(), it->second.entries.begin(),
                         it->second.entries.end());
  }
  return out;
}

}  // namespace

LatencyStats latency_stats(const std::vector<double>& samples) {
  LatencyStats st;
  st.count = samples.size();
  if (samples.empty()) return st;
  std::vector<double> sorted = samples;
  std::sort(sorted.begin(), sorted.end());
  double sum = 0.0;
  for (double v : sorted) sum += v;
  st.mean = sum / static_cast<double>(sorted.size());
  auto nearest_rank = [&](double q) {
    const std::size_t rank = static_cast<std::size_t>(
        std::ceil(q * static_cast<double>(sorted.size())));
    return sorted[std::max<std::size_t>(rank, 1) - 1];
  };
  st.p50 = nearest_rank(0.50);
  st.p95 = nearest_rank(0.95);
  return st;
}

std::optional<double> compute_overhead(const std::vector<double>& on,
                                       const std::vector<double>& off) {
  if (on.empty() || off.empty() || on.size() != off.size()) return std::nullopt;
  double mean_on = 0.0, mean_off = 0.0;
  for (double v : on) mean_on += v;
  for (double v : off) mean_off += v;
  mean_on /= static_cast<double>(on.size());
  mean_off /= static_cast<double>(off.size());
  if (mean_off == 0.0) return std::nullopt;
  return (mean_on - mean_off) / mean_off;
}

ScenarioOutcome run_scenario(const ScenarioConfig& cfg) {
  ScenarioOutcome outcome;
  outcome.built = build_scenario(cfg);
  const BuiltScenario& built = outcome.built;

  outcome.off = run_pass(cfg, built, false);
  outcome.on = run_pass(cfg, built, true);

  MetricsReport& rep = outcome.report;
  rep.seed = cfg.seed;

  // Pairing + flag join.
  std::map<std::string, const sim::InvocationResult*> off_by_id, on_by_id;
  for (const auto& r : outcome.off.results) off_by_id[r.request_id] = &r;
  for (const auto& r : outcome.on.results) on_by_id[r.request_id] = &r;

  std::set<std::string> flagged_ids;
  for (const shield::ForensicRecord& r : outcome.on.records) {
    bool flagged = false;
    for (const shield::DetectionVerdict& v : r.verdicts) flagged |= v.flagged;
    if (r.error.has_value() && *r.error == "rejected_by_shield") flagged = true;
    if (flagged) flagged_ids.insert(r.request_id);
  }
  for (const shield::Alert& a : outcome.on.alerts) {
    for (const std::string& id : a.evidence) flagged_ids.insert(id);
  }
  rep.shield_off_verdicts = 0;  // off pass emits no records at all

  // Per-kind request metrics.
  for (const auto& [id, gt] : built.ground_truth) {
    if (!gt.is_attack) {
      ++rep.benign_requests;
      if (flagged_ids.count(id) != 0) ++rep.flagged_benign;
      continue;
    }
    AttackKindMetrics& m = rep.per_attack[sim::attack_kind_name(gt.kind)];
    ++m.requests;
    if (flagged_ids.count(id) != 0) ++m.flagged_requests;
  }
  if (rep.benign_requests > 0) {
    rep.false_positive_rate = static_cast<double>(rep.flagged_benign) /
                              static_cast<double>(rep.benign_requests);
  }

  // Pre-deployment scan findings (shield-on only).
  std::set<std::string> scan_flagged_packages;
  if (cfg.shield.enabled && cfg.supply_chain.has_value()) {
    for (const sim::FunctionSpec& f : cfg.functions) {
      if (f.dependency_manifest.empty()) continue;
      std::vector<shield::PackageRef> manifest;
      for (const auto& [name, ver] : f.dependency_manifest) {
        manifest.push_back({name, shield::Version::parse(ver)});
      }
      const auto scan = shield::scan_dependencies(
          manifest, cfg.supply_chain->registry, cfg.supply_chain->vulndb,
          cfg.supply_chain->popular_distance);
      for (const shield::ScanFinding& finding : scan.findings) {
        scan_flagged_packages.insert(finding.package.first);
        json jf;
        jf["function_id"] = f.function_id;
        jf["kind"] = shield::finding_kind_name(finding.kind);
        jf["package"] = finding.package.first + "@" + finding.package.second.str();
        jf["severity"] = shield::severity_name(finding.severity);
        rep.predeploy_findings.push_back(jf);
      }
    }
  }

  // Campaign-level detection + attacker-side analyses.
  std::set<std::string> evidence_ids;
  for (const shield::Alert& a : outcome.on.alerts) {
    evidence_ids.insert(a.evidence.begin(), a.evidence.end());
  }
  for (const attack::AttackCampaign& c : built.campaigns) {
    AttackKindMetrics& m = rep.per_attack[sim::attack_kind_name(c.kind)];
    ++m.campaigns;
    bool detected = false;
    json attacker{{"kind", sim::attack_kind_name(c.kind)},
                  {"campaign_id", c.campaign_id}};

    switch (c.kind) {
      case sim::AttackKind::kDependencyPoison: {
        const AttackConfig* a = nullptr;
        for (const AttackConfig& ac : cfg.attacks) {
          if (ac.kind == c.kind && ac.seed == c.seed) a = &ac;
        }
        const std::string pkg = a != nullptr ? a->params.value("package", "") : "";
        detected = !pkg.empty() && scan_flagged_packages.count(pkg) != 0;
        attacker["metrics"] = {{"package_flagged", detected}};
        break;
      }
      case sim::AttackKind::kRoleChain: {
        const AttackConfig* a = nullptr;
        for (const AttackConfig& ac : cfg.attacks) {
          if (ac.kind == c.kind && ac.seed == c.seed) a = &ac;
        }
        if (a != nullptr && cfg.graph.has_value()) {
          iam::Permission target{a->params.at("target_action").get<std::string>(),
                                 a->params.at("target_resource").get<std::string>()};
          const std::string start = a->params.at("start_role").get<std::string>();
          const auto report = attack::gen_role_chain(*cfg.graph, start, target,
                                                     role_traces(cfg, outcome.on));
          detected = !report.paths_before.empty() && report.paths_after.empty();
          attacker["metrics"] = {
              {"paths_before", report.paths_before.size()},
              {"paths_after", report.paths_after.size()},
          };
        }
        break;
      }
      case sim::AttackKind::kExtraction: {
        for (const std::string& id : c.request_ids()) {
          if (evidence_ids.count(id) != 0 || flagged_ids.count(id) != 0) {
            detected = true;
            break;
          }
        }
        auto it = built.transcripts.find(c.campaign_id);
        if (it != built.transcripts.end() && !it->second.entries.empty()) {
          const std::size_t dims = it->second.entries.front().first.size();
          const model::ModelArtifact* target = nullptr;
          for (const auto& [t, req] : c.schedule) {
            for (const sim::FunctionSpec& f : cfg.functions) {
              if (f.function_id == req.function_id && f.model_ref.has_value()) {
                target = &built.artifacts.at(*f.model_ref);
              }
            }
            break;
          }
          if (target != nullptr) {
            const auto fit = attack::fit_substitute(it->second, dims, target->classes);
            const auto probes = attack::make_probe_set(dims, 1000, c.seed ^ 0xabcd);
            attacker["metrics"] = {
                {"agreement", attack::agreement(fit.artifact, *target, probes)},
                {"degenerate", fit.degenerate},
                {"queries", it->second.entries.size()},
            };
          }
        }
        break;
      }
      case sim::AttackKind::kColdProbe: {
        std::vector<attack::TimingObservation> obs;
        const sim::FunctionSpec* spec = nullptr;
        for (const auto& [t, req] : c.schedule) {
          for (const sim::FunctionSpec& f : cfg.functions) {
            if (f.function_id == req.function_id) spec = &f;
          }
          break;
        }
        for (const std::string& id : c.request_ids()) {
          auto it = off_by_id.find(id);
          if (it == off_by_id.end() || !it->second->executed()) continue;
          obs.push_back({id, it->second->latency_ms, it->second->cold_start});
        }
        if (spec != nullptr && !obs.empty()) {
          const double cold_mean =
              static_cast<double>(spec->cold_init_ms + spec->warm_base_ms);
          const double warm_mean = static_cast<double>(spec->warm_base_ms);
          const auto cls = attack::classify_timings(obs, cold_mean, warm_mean);
          attacker["metrics"] = {{"timing_accuracy", cls.accuracy},
                                 {"probes", obs.size()}};
        }
        for (const std::string& id : c.request_ids()) {
          if (evidence_ids.count(id) != 0 || flagged_ids.count(id) != 0) detected = true;
        }
        break;
      }
      case sim::AttackKind::kMembership: {
        for (const auto& [t, req] : c.schedule) {
          for (const sim::FunctionSpec& f : cfg.functions) {
            if (f.function_id == req.function_id && f.model_ref.has_value()) {
              const auto& artifact = built.artifacts.at(*f.model_ref);
              const auto& data = built.datasets.at(*f.model_ref);
              attacker["metrics"] = {
                  {"advantage", attack::membership_advantage(artifact, data)}};
            }
          }
          break;
        }
        for (const std::string& id : c.request_ids()) {
          if (evidence_ids.count(id) != 0 || flagged_ids.count(id) != 0) detected = true;
        }
        break;
      }
      case sim::AttackKind::kPersistence: {
        for (const std::string& id : c.request_ids()) {
          if (evidence_ids.count(id) != 0 || flagged_ids.count(id) != 0) {
            detected = true;
          }
        }
        // Integrity flags are sound (only an injection can raise one), so a
        // breach alert attributes to the injection campaign even when the
        // flagged invocation was someone else's request on the poisoned
        // container.
        for (const shield::Alert& a : outcome.on.alerts) {
          if (a.kind == shield::AlertKind::kIntegrityBreach) detected = true;
        }
        break;
      }
      default: {
        for (const std::string& id : c.request_ids()) {
          if (evidence_ids.count(id) != 0 || flagged_ids.count(id) != 0) {
            detected = true;
            break;
          }
        }
        break;
      }
    }
    if (detected) ++m.detected_campaigns;
    attacker["detected"] = detected;
    rep.attacker_reports.push_back(std::move(attacker));
  }

  for (auto& [kind, m] : rep.per_attack) {
    if (m.requests > 0) {
      m.detection_rate_requests = static_cast<double>(m.flagged_requests) /
                                  static_cast<double>(m.requests);
    }
    if (m.campaigns > 0) {
      m.detection_rate_campaigns = static_cast<double>(m.detected_campaigns) /
                                   static_cast<double>(m.campaigns);
    }
  }

  // Latency stats and paired overhead.
  std::vector<double> lat_on, lat_off;
  std::vector<double> paired_on, paired_off;
  std::vector<double> warm_on, warm_off, cold_on, cold_off;
  sim::VirtualTime horizon = 0;
  for (const auto& [id, off_res] : off_by_id) {
    if (off_res->executed()) lat_off.push_back(off_res->latency_ms);
  }
  for (const auto& [id, on_res] : on_by_id) {
    if (on_res->executed()) lat_on.push_back(on_res->latency_ms);
  }
  for (const auto& [id, off_res] : off_by_id) {
    auto it = on_by_id.find(id);
    if (it == on_by_id.end()) continue;
    const sim::InvocationResult* on_res = it->second;
    if (!off_res->succeeded() || !on_res->succeeded()) continue;
    if (off_res->cold_start != on_res->cold_start) continue;
    paired_off.push_back(off_res->latency_ms);
    paired_on.push_back(on_res->latency_ms);
    if (off_res->cold_start) {
      cold_off.push_back(off_res->latency_ms);
      cold_on.push_back(on_res->latency_ms);
    } else {
      warm_off.push_back(off_res->latency_ms);
      warm_on.push_back(on_res->latency_ms);
    }
  }
  for (const auto& r : built.requests) horizon = std::max(horizon, r.arrival_time);
  rep.duration_ms = horizon;
  rep.latency_on = latency_stats(lat_on);
  rep.latency_off = latency_stats(lat_off);
  rep.overhead_overall = compute_overhead(paired_on, paired_off);
  rep.overhead_warm = compute_overhead(warm_on, warm_off);
  rep.overhead_cold_start = compute_overhead(cold_on, cold_off);
  rep.cost_on = outcome.on.ledger.per_tenant;
  rep.cost_off = outcome.off.ledger.per_tenant;
  return outcome;
}

nlohmann::json report_to_json(const MetricsReport& report) {
  json j;
  j["run"] = {{"seed", report.seed}, {"duration_ms", report.duration_ms}};
  json per_attack = json::object();
  for (const auto& [kind, m] : report.per_attack) {
    per_attack[kind] = {
        {"requests", m.requests},
        {"flagged_requests", m.flagged_requests},
        {"detection_rate_requests", m.detection_rate_requests.has_value()
                                        ? json(*m.detection_rate_requests)
                                        : json(nullptr)},
        {"campaigns", m.campaigns},
        {"detected_campaigns", m.detected_campaigns},
        {"detection_rate_campaigns", m.detection_rate_campaigns.has_value()
                                         ? json(*m.detection_rate_campaigns)
                                         : json(nullptr)},
    };
  }
  j["per_attack"] = per_attack;
  j["benign"] = {
      {"requests", report.benign_requests},
      {"flagged", report.flagged_benign},
      {"false_positive_rate", report.false_positive_rate.has_value()
                                  ? json(*report.false_positive_rate)
                                  : json(nullptr)},
  };
  auto stats_json = [](const LatencyStats& s) {
    return json{{"count", s.count}, {"mean", s.mean}, {"p50", s.p50}, {"p95", s.p95}};
  };
  j["latency"] = {{"shield_on", stats_json(report.latency_on)},
                  {"shield_off", stats_json(report.latency_off)}};
  auto opt_json = [](const std::optional<double>& v) {
    return v.has_value() ? json(*v) : json(nullptr);
  };
  j["overhead"] = {{"overall", opt_json(report.overhead_overall)},
                   {"warm", opt_json(report.overhead_warm)},
                   {"cold_start", opt_json(report.overhead_cold_start)}};
  j["cost"] = {{"shield_on", report.cost_on}, {"shield_off", report.cost_off}};
  j["shield_off_verdicts"] = report.shield_off_verdicts;
  j["attacker_reports"] = report.attacker_reports;
  j["predeploy_findings"] = report.predeploy_findings;

  // Fixed summary block consumed by external report tooling.
  double overall_dr = 0.0;
  std::size_t attack_reqs = 0, attack_flagged = 0;
  for (const auto& [kind, m] : report.per_attack) {
    attack_reqs += m.requests;
    attack_flagged += m.flagged_requests;
  }
  if (attack_reqs > 0) {
    overall_dr = static_cast<double>(attack_flagged) / static_cast<double>(attack_reqs);
  }
  j["paper_shape"] = {
      {"table3",
       {{"detection_efficacy", attack_reqs > 0 ? json(overall_dr) : json(nullptr)},
        {"inference_latency_overhead", opt_json(report.overhead_warm)},
        {"memory_overhead", nullptr},
        {"false_positive_rate", opt_json(report.false_positive_rate)}}}};
  return j;
}

MetricsReport report_from_json(const nlohmann::json& j) {
  MetricsReport r;
  r.seed = j.at("run").at("seed").get<std::uint64_t>();
  r.duration_ms = j.at("run").at("duration_ms").get<sim::VirtualTime>();
  for (const auto& [kind, jm] : j.at("per_attack").items()) {
    AttackKindMetrics m;
    m.requests = jm.at("requests").get<std::size_t>();
    m.flagged_requests = jm.at("flagged_requests").get<std::size_t>();
    if (!jm.at("detection_rate_requests").is_null()) {
      m.detection_rate_requests = jm.at("detection_rate_requests").get<double>();
    }
    m.campaigns = jm.at("campaigns").get<std::size_t>();
    m.detected_campaigns = jm.at("detected_campaigns").get<std::size_t>();
    if (!jm.at("detection_rate_campaigns").is_null()) {
      m.detection_rate_campaigns = jm.at("detection_rate_campaigns").get<double>();
    }
    r.per_attack[kind] = m;
  }
  r.benign_requests = j.at("benign").at("requests").get<std::size_t>();
  r.flagged_benign = j.at("benign").at("flagged").get<std::size_t>();
  if (!j.at("benign").at("false_positive_rate").is_null()) {
    r.false_positive_rate = j.at("benign").at("false_positive_rate").get<double>();
  }
  auto stats_of = [](const json& js) {
    LatencyStats s;
    s.count = js.at("count").get<std::size_t>();
    s.mean = js.at("mean").get<double>();
    s.p50 = js.at("p50").get<double>();
    s.p95 = js.at("p95").get<double>();
    return s;
  };
  r.latency_on = stats_of(j.at("latency").at("shield_on"));
  r.latency_off = stats_of(j.at("latency").at("shield_off"));
  auto opt_of = [](const json& jv) -> std::optional<double> {
    if (jv.is_null()) return std::nullopt;
    return jv.get<double>();
  };
  r.overhead_overall = opt_of(j.at("overhead").at("overall"));
  r.overhead_warm = opt_of(j.at("overhead").at("warm"));
  r.overhead_cold_start = opt_of(j.at("overhead").at("cold_start"));
  for (const auto& [tenant, cost] : j.at("cost").at("shield_on").items()) {
    r.cost_on[tenant] = cost.get<double>();
  }
  for (const auto& [tenant, cost] : j.at("cost").at("shield_off").items()) {
    r.cost_off[tenant] = cost.get<double>();
  }
  r.shield_off_verdicts = j.at("shield_off_verdicts").get<std::size_t>();
  r.attacker_reports = j.at("attacker_reports");
  r.predeploy_findings = j.at("predeploy_findings");
  return r;
}

std::string render_report(const MetricsReport& report, ReportFormat format) {
  if (format == ReportFormat::kJson) {
    return report_to_json(report).dump(2) + "\n";
  }
  std::ostringstream out;
  auto rate_str = [](const std::optional<double>& v) {
    if (!v.has_value()) return std::string("   N/A");
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%6.3f", *v);
    return std::string(buf);
  };
  out << "attack kind         requests  flagged  dr(req)  campaigns  detected  dr(camp)\n";
  out << "------------------  --------  -------  -------  ---------  --------  --------\n";
  if (report.per_attack.empty()) {
    out << "(no attacks configured)                 N/A                            N/A\n";
  }
  for (const auto& [kind, m] : report.per_attack) {
    char line[128];
    std::snprintf(line, sizeof(line), "%-18s  %8zu  %7zu   %s  %9zu  %8zu    %s\n",
                  kind.c_str(), m.requests, m.flagged_requests,
                  rate_str(m.detection_rate_requests).c_str(), m.campaigns,
                  m.detected_campaigns,
                  rate_str(m.detection_rate_campaigns).c_str());
    out << line;
  }
  out << "\n";
  char buf[160];
  std::snprintf(buf, sizeof(buf), "benign requests     %8zu  flagged  %7zu  fpr     %s\n",
                report.benign_requests, report.flagged_benign,
                rate_str(report.false_positive_rate).c_str());
  out << buf;
  std::snprintf(buf, sizeof(buf),
                "latency shield-on   mean %9.3f  p50 %9.3f  p95 %9.3f  (n=%zu)\n",
                report.latency_on.mean, report.latency_on.p50, report.latency_on.p95,
                report.latency_on.count);
  out << buf;
  std::snprintf(buf, sizeof(buf),
                "latency shield-off  mean %9.3f  p50 %9.3f  p95 %9.3f  (n=%zu)\n",
                report.latency_off.mean, report.latency_off.p50,
                report.latency_off.p95, report.latency_off.count);
  out << buf;
  std::snprintf(buf, sizeof(buf), "overhead overall  %s   warm  %s   cold_start  %s\n",
                rate_str(report.overhead_overall).c_str(),
                rate_str(report.overhead_warm).c_str(),
                rate_str(report.overhead_cold_start).c_str());
  out << buf;
  for (const auto& [tenant, cost] : report.cost_on) {
    const double off = report.cost_off.count(tenant) != 0
                           ? report.cost_off.at(tenant)
                           : 0.0;
    std::snprintf(buf, sizeof(buf), "cost[%s]  on %.3f  off %.3f\n", tenant.c_str(),
                  cost, off);
    out << buf;
  }
  return out.str();
}

}  // namespace faasguard::harness
