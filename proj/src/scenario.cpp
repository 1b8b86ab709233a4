#include "faasguard/harness/scenario.hpp"

#include <fstream>
#include <set>

namespace faasguard::harness {

namespace {

using nlohmann::json;

void check_keys(const json& obj, const std::string& where,
                const std::set<std::string>& allowed) {
  if (!obj.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, _] : obj.items()) {
    if (allowed.count(key) == 0) {
      throw ConfigError(where + ": unknown key \"" + key + "\"");
    }
  }
}

template <typename T>
T get_or(const json& obj, const std::string& key, T fallback) {
  if (!obj.contains(key)) return fallback;
  return obj.at(key).get<T>();
}

sim::FunctionSpec parse_function(const json& j) {
  check_keys(j, "functions[]",
             {"function_id", "tenant_id", "memory_mb", "timeout_ms",
              "cold_init_ms", "warm_base_ms", "compute_coeff_ms_per_unit",
              "deploy_digest", "model_ref", "role_id", "dependency_manifest",
              "version", "allowed_triggers"});
  sim::FunctionSpec f;
  f.function_id = j.at("function_id").get<std::string>();
  f.tenant_id = j.at("tenant_id").get<std::string>();
  f.memory_mb = get_or<std::uint64_t>(j, "memory_mb", 512);
  f.timeout_ms = get_or<std::uint64_t>(j, "timeout_ms", 30000);
  f.cold_init_ms = get_or<std::uint64_t>(j, "cold_init_ms", 3200);
  f.warm_base_ms = get_or<std::uint64_t>(j, "warm_base_ms", 300);
  f.compute_coeff_ms_per_unit = get_or<double>(j, "compute_coeff_ms_per_unit", 0.0);
  f.deploy_digest = get_or<std::string>(j, "deploy_digest", "");
  if (j.contains("model_ref")) f.model_ref = j.at("model_ref").get<std::string>();
  f.role_id = get_or<std::string>(j, "role_id", "");
  for (const auto& jd : j.value("dependency_manifest", json::array())) {
    if (!jd.is_array() || jd.size() != 2) {
      throw ConfigError("dependency_manifest entries must be [name, version]");
    }
    f.dependency_manifest.push_back(
        {jd.at(0).get<std::string>(), jd.at(1).get<std::string>()});
  }
  f.version = get_or<std::uint64_t>(j, "version", 1);
  if (j.contains("allowed_triggers")) {
    f.allowed_triggers.clear();
    for (const auto& jt : j.at("allowed_triggers")) {
      f.allowed_triggers.push_back(sim::trigger_from_name(jt.get<std::string>()));
    }
  }
  return f;
}

ModelConfig parse_model(const json& j) {
  check_keys(j, "models[]",
             {"artifact_id", "dims", "classes", "n", "gen_seed", "train_seed",
              "epochs", "learning_rate", "sign_key"});
  ModelConfig m;
  m.artifact_id = j.at("artifact_id").get<std::string>();
  m.dims = get_or<std::size_t>(j, "dims", 2);
  m.classes = get_or<std::size_t>(j, "classes", 2);
  m.n = get_or<std::size_t>(j, "n", 200);
  m.gen_seed = get_or<std::int64_t>(j, "gen_seed", 1);
  m.train_seed = get_or<std::int64_t>(j, "train_seed", 1);
  m.epochs = get_or<std::size_t>(j, "epochs", 200);
  m.learning_rate = get_or<double>(j, "learning_rate", 0.05);
  if (j.contains("sign_key")) m.sign_key = j.at("sign_key").get<std::string>();
  return m;
}

shield::ShieldConfig parse_shield(const json& j) {
  check_keys(j, "shield",
             {"enabled", "sanitize", "checks", "thresholds", "shield_cost_ms",
              "auto_response"});
  shield::ShieldConfig cfg;
  cfg.enabled = get_or<bool>(j, "enabled", false);
  cfg.sanitize = get_or<bool>(j, "sanitize", true);
  cfg.shield_cost_ms = get_or<double>(j, "shield_cost_ms", 2.0);
  if (j.contains("checks")) {
    const json& jc = j.at("checks");
    check_keys(jc, "shield.checks",
               {"anomaly", "adversarial", "extraction", "rate_limit", "env", "event"});
    cfg.checks.anomaly = get_or<bool>(jc, "anomaly", true);
    cfg.checks.adversarial = get_or<bool>(jc, "adversarial", true);
    cfg.checks.extraction = get_or<bool>(jc, "extraction", true);
    cfg.checks.rate_limit = get_or<bool>(jc, "rate_limit", true);
    cfg.checks.env = get_or<bool>(jc, "env", true);
    cfg.checks.event = get_or<bool>(jc, "event", true);
  }
  if (j.contains("thresholds")) {
    const json& jt = j.at("thresholds");
    check_keys(jt, "shield.thresholds",
               {"z_threshold", "anomaly_warmup", "baseline_lambda", "alpha",
                "gap_margin", "boundary_fraction", "coverage_ratio",
                "extraction_min_count", "window_capacity", "quantizer_lo",
                "quantizer_hi", "quantizer_bins", "bucket_capacity",
                "refill_per_s", "suspicious_capacity", "max_payload_bytes",
                "max_nesting_depth"});
    auto& t = cfg.thresholds;
    t.z_threshold = get_or<double>(jt, "z_threshold", 4.0);
    t.anomaly_warmup = get_or<std::uint64_t>(jt, "anomaly_warmup", 20);
    t.baseline_lambda = get_or<double>(jt, "baseline_lambda", 0.1);
    t.alpha = get_or<double>(jt, "alpha", 0.01);
    t.extraction.gap_margin = get_or<double>(jt, "gap_margin", 0.1);
    t.extraction.boundary_fraction = get_or<double>(jt, "boundary_fraction", 0.4);
    t.extraction.coverage_ratio = get_or<double>(jt, "coverage_ratio", 0.8);
    t.extraction.min_count = get_or<std::size_t>(jt, "extraction_min_count", 100);
    t.window_capacity = get_or<std::size_t>(jt, "window_capacity", 500);
    t.quantizer.lo = get_or<double>(jt, "quantizer_lo", -10.0);
    t.quantizer.hi = get_or<double>(jt, "quantizer_hi", 10.0);
    t.quantizer.bins = get_or<std::size_t>(jt, "quantizer_bins", 8);
    t.rate.capacity = get_or<double>(jt, "bucket_capacity", 100.0);
    t.rate.refill_per_s = get_or<double>(jt, "refill_per_s", 10.0);
    t.rate.suspicious_capacity = get_or<double>(jt, "suspicious_capacity", 10.0);
    t.event.max_payload_bytes = get_or<std::size_t>(jt, "max_payload_bytes", 65536);
    t.event.max_nesting_depth = get_or<std::size_t>(jt, "max_nesting_depth", 32);
  }
  return cfg;
}

AutoResponseConfig parse_auto_response(const json& j) {
  check_keys(j, "shield.auto_response",
             {"enabled", "every_ms", "extraction_k", "surge_factor",
              "anomaly_burst_n", "surge_bucket_ms"});
  AutoResponseConfig a;
  a.enabled = get_or<bool>(j, "enabled", true);
  a.every_ms = get_or<sim::VirtualTime>(j, "every_ms", 10000);
  a.rules.extraction_k = get_or<std::size_t>(j, "extraction_k", 3);
  a.rules.surge_factor = get_or<double>(j, "surge_factor", 10.0);
  a.rules.anomaly_burst_n = get_or<std::size_t>(j, "anomaly_burst_n", 5);
  a.rules.surge_bucket_ms = get_or<sim::VirtualTime>(j, "surge_bucket_ms", 10000);
  return a;
}

SupplyChainConfig parse_supply_chain(const json& j) {
  check_keys(j, "supply_chain", {"registry", "vulndb", "popular_distance"});
  SupplyChainConfig sc;
  sc.registry = shield::registry_from_json(j.at("registry").dump());
  sc.vulndb = shield::vulndb_from_json(j.at("vulndb").dump());
  sc.popular_distance = get_or<int>(j, "popular_distance", 1);
  return sc;
}

}  // namespace

ScenarioConfig parse_scenario(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("scenario is not valid JSON: ") + e.what());
  }
  check_keys(j, "scenario",
             {"seed", "platform", "functions", "models", "iam", "shield",
              "benign", "attacks", "supply_chain"});

  ScenarioConfig cfg;
  cfg.seed = get_or<std::uint64_t>(j, "seed", 0);

  if (j.contains("platform")) {
    const json& jp = j.at("platform");
    check_keys(jp, "platform",
               {"concurrency_cap", "keep_warm_ttl_ms", "unit_price",
                "weak_isolation", "jitter_ms"});
    cfg.platform.concurrency_cap = get_or<std::size_t>(jp, "concurrency_cap", 64);
    cfg.platform.keep_warm_ttl_ms =
        get_or<sim::VirtualTime>(jp, "keep_warm_ttl_ms", 300000);
    cfg.platform.unit_price = get_or<double>(jp, "unit_price", 1.0);
    cfg.platform.weak_isolation = get_or<bool>(jp, "weak_isolation", false);
    cfg.platform.jitter_ms = get_or<double>(jp, "jitter_ms", 0.0);
  }

  for (const auto& jf : j.value("functions", json::array())) {
    cfg.functions.push_back(parse_function(jf));
  }
  for (const auto& jm : j.value("models", json::array())) {
    cfg.models.push_back(parse_model(jm));
  }
  if (j.contains("iam")) {
    cfg.graph = iam::graph_from_json(j.at("iam").dump());
  }
  if (j.contains("shield")) {
    cfg.shield = parse_shield(j.at("shield"));
    if (j.at("shield").contains("auto_response")) {
      cfg.auto_response = parse_auto_response(j.at("shield").at("auto_response"));
    }
  }
  if (j.contains("benign")) {
    const json& jb = j.at("benign");
    check_keys(jb, "benign",
               {"clients", "rate_per_s", "duration_ms", "functions", "complexity"});
    cfg.benign.clients = get_or<std::size_t>(jb, "clients", 0);
    cfg.benign.rate_per_s = get_or<double>(jb, "rate_per_s", 1.0);
    cfg.benign.duration_ms = get_or<sim::VirtualTime>(jb, "duration_ms", 60000);
    for (const auto& jf : jb.value("functions", json::array())) {
      cfg.benign.functions.push_back(jf.get<std::string>());
    }
    cfg.benign.complexity = get_or<double>(jb, "complexity", 1.0);
  }
  for (const auto& ja : j.value("attacks", json::array())) {
    check_keys(ja, "attacks[]", {"kind", "seed", "start_ms", "params"});
    AttackConfig a;
    a.kind = sim::attack_kind_from_name(ja.at("kind").get<std::string>());
    a.seed = get_or<std::uint64_t>(ja, "seed", 0);
    a.start_ms = get_or<sim::VirtualTime>(ja, "start_ms", 0);
    a.params = ja.value("params", json::object());
    cfg.attacks.push_back(std::move(a));
  }
  if (j.contains("supply_chain")) {
    cfg.supply_chain = parse_supply_chain(j.at("supply_chain"));
  }

  // Cross-checks before any simulation.
  std::set<std::string> model_ids;
  for (const ModelConfig& m : cfg.models) model_ids.insert(m.artifact_id);
  std::set<std::string> function_ids;
  for (const sim::FunctionSpec& f : cfg.functions) {
    function_ids.insert(f.function_id);
    if (f.model_ref.has_value() && model_ids.count(*f.model_ref) == 0) {
      throw ConfigError("function " + f.function_id + " references unknown model " +
                        *f.model_ref);
    }
  }
  for (const std::string& fn : cfg.benign.functions) {
    if (function_ids.count(fn) == 0) {
      throw ConfigError("benign workload references unknown function " + fn);
    }
  }
  return cfg;
}

ScenarioConfig load_scenario_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open scenario file " + path);
  std::string text((std::istreambuf_iterator<char>(f)),
                   std::istreambuf_iterator<char>());
  return parse_scenario(text);
}

}  // namespace faasguard::harness
