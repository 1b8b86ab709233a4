#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "faasguard/attack/attack.hpp"
#include "faasguard/iam/iam.hpp"
#include "faasguard/shield/postexec.hpp"
#include "faasguard/shield/predeploy.hpp"
#include "faasguard/shield/runtime.hpp"
#include "faasguard/sim/simulator.hpp"

namespace faasguard::harness {

struct ModelConfig {
  std::string artifact_id;
  std::size_t dims = 2;
  std::size_t classes = 2;
  std::size_t n = 200;
  std::int64_t gen_seed = 1;
  std::int64_t train_seed = 1;
  std::size_t epochs = 200;
  double learning_rate = 0.05;
  std::optional<std::string> sign_key;
};

struct BenignConfig {
  std::size_t clients = 0;
  double rate_per_s = 1.0;
  sim::VirtualTime duration_ms = 60000;
  std::vector<std::string> functions;
  double complexity = 1.0;
};

struct AttackConfig {
  sim::AttackKind kind = sim::AttackKind::kColdProbe;
  std::uint64_t seed = 0;
  sim::VirtualTime start_ms = 0;
  nlohmann::json params;  // kind-specific, validated at schedule build
};

struct AutoResponseConfig {
  bool enabled = true;
  sim::VirtualTime every_ms = 10000;
  shield::AnalysisRules rules;
};

struct SupplyChainConfig {
  shield::Registry registry;
  shield::VulnDb vulndb;
  int popular_distance = 1;
};

struct ScenarioConfig {
  std::uint64_t seed = 0;
  sim::PlatformConfig platform;
  std::vector<sim::FunctionSpec> functions;
  std::vector<ModelConfig> models;
  std::optional<iam::PermissionGraph> graph;
  shield::ShieldConfig shield;
  AutoResponseConfig auto_response;
  BenignConfig benign;
  std::vector<AttackConfig> attacks;
  std::optional<SupplyChainConfig> supply_chain;
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Strict parse: every object is checked against its known key set; unknown
// keys are rejected before any simulation.
ScenarioConfig parse_scenario(const std::string& json_text);
ScenarioConfig load_scenario_file(const std::string& path);

}  // namespace faasguard::harness
