#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "faasguard/model/model.hpp"

namespace faasguard::sim {

/// Milliseconds since simulation start. Monotonically non-decreasing across
/// processed events.
using VirtualTime = std::uint64_t;

enum class Trigger { kHttp, kQueue, kStorage, kSchedule };

std::string trigger_name(Trigger t);
Trigger trigger_from_name(const std::string& name);

enum class AttackKind {
  kColdProbe,
  kExhaustion,
  kReuseLeak,
  kDependencyPoison,
  kExtraction,
  kAdversarial,
  kMembership,
  kRoleChain,
  kEventInjection,
  kDenialOfWallet,
  kPersistence,
};

std::string attack_kind_name(AttackKind k);
AttackKind attack_kind_from_name(const std::string& name);

/// Harness-only label. Shield components never receive this; scoring joins
/// it back to verdicts by request id.
struct GroundTruth {
  bool is_attack = false;
  AttackKind kind = AttackKind::kColdProbe;

  static GroundTruth benign() { return {}; }
  static GroundTruth attack(AttackKind k) { return {true, k}; }
};

struct FunctionSpec {
  std::string function_id;
  std::string tenant_id;
  std::uint64_t memory_mb = 128;
  std::uint64_t timeout_ms = 30000;
  std::uint64_t cold_init_ms = 0;
  std::uint64_t warm_base_ms = 1;
  double compute_coeff_ms_per_unit = 0.0;
  std::string deploy_digest;  // computed at deploy when empty
  std::optional<std::string> model_ref;
  std::string role_id;
  std::vector<std::pair<std::string, std::string>> dependency_manifest;
  std::uint64_t version = 1;
  std::vector<Trigger> allowed_triggers{Trigger::kHttp};
};

/// Reusable execution environment. residual_state models /tmp files and
/// globals that survive warm reuse; module_cache_digest tracks runtime
/// integrity against the function's deploy digest.
struct ContainerInstance {
  std::string container_id;
  std::string function_id;
  std::string tenant_id;
  VirtualTime created_at = 0;
  VirtualTime last_used_at = 0;
  std::uint64_t invocation_count = 0;
  std::map<std::string, std::string> residual_state;
  std::string module_cache_digest;
  bool busy = false;
  bool pending_sanitize = false;
  bool doomed = false;  // recycled at next completion (rollback/quarantine)
};

struct InvocationRequest {
  std::string request_id;
  std::string function_id;
  std::string client_id;
  Trigger trigger = Trigger::kHttp;
  std::string payload;  // byte-string; handlers parse it as JSON
  double payload_complexity = 0.0;
  VirtualTime arrival_time = 0;
  GroundTruth ground_truth;
};

enum class InvocationError { kTimeout, kThrottled, kRejectedByShield, kHandlerFault };

std::string invocation_error_name(InvocationError e);

struct InvocationResult {
  std::string request_id;
  std::string function_id;
  std::string client_id;
  double latency_ms = 0.0;
  bool cold_start = false;
  std::uint64_t billed_ms = 0;
  double cost_units = 0.0;
  std::variant<std::monostate, model::Prediction, std::string> output;
  std::optional<InvocationError> error;

  // Ran on a container (billed); throttled/rejected requests never execute.
  bool executed() const {
    return !error.has_value() || *error == InvocationError::kTimeout ||
           *error == InvocationError::kHandlerFault;
  }
  bool succeeded() const { return !error.has_value(); }
};

/// Per-tenant accumulated cost. Total equals the sum of cost_units over all
/// results (conservation).
struct BillingLedger {
  std::map<std::string, double> per_tenant;

  void charge(const std::string& tenant, double cost) { per_tenant[tenant] += cost; }
  double total() const {
    double t = 0.0;
    for (const auto& [_, v] : per_tenant) t += v;
    return t;
  }
};

}  // namespace faasguard::sim
