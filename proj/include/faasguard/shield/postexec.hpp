#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "faasguard/shield/runtime.hpp"
#include "faasguard/sim/types.hpp"

namespace faasguard::shield {

/// One line of execution telemetry, emitted per completed or rejected
/// invocation when the shield is enabled. Serialized as canonical JSON with
/// lexicographically sorted keys, one record per line.
struct ForensicRecord {
  sim::VirtualTime time_ms = 0;
  std::string request_id;
  std::string function_id;
  std::string client_id;
  std::string tenant_id;
  sim::Trigger trigger = sim::Trigger::kHttp;
  bool cold_start = false;
  double latency_ms = 0.0;
  double cost_units = 0.0;
  std::vector<DetectionVerdict> verdicts;
  std::string env_digest;
  std::string container_id;  // quarantine target; empty when rejected early
  std::optional<std::string> error;

  bool has_flag(Detector d) const;
};

std::string record_to_line(const ForensicRecord& r);
ForensicRecord record_from_line(const std::string& line);

/// Append-only JSON-Lines log, valid at every prefix.
class ForensicLog {
 public:
  void append_record(const ForensicRecord& r);
  void append_action_line(const std::string& line) { lines_.push_back(line); }

  const std::vector<std::string>& lines() const { return lines_; }
  const std::vector<ForensicRecord>& records() const { return records_; }

  std::string to_bytes() const;
  void write_to(const std::string& path) const;

 private:
  std::vector<std::string> lines_;
  std::vector<ForensicRecord> records_;
};

enum class AlertKind { kExtractionCampaign, kCostSurge, kIntegrityBreach, kAnomalyBurst };

std::string alert_kind_name(AlertKind k);

struct Alert {
  std::string alert_id;
  AlertKind kind = AlertKind::kExtractionCampaign;
  std::string subject;  // client_id, tenant_id or container_id
  sim::VirtualTime window_start = 0;
  sim::VirtualTime window_end = 0;
  std::vector<std::string> evidence;  // request ids, non-empty
};

struct AnalysisRules {
  std::size_t extraction_k = 3;
  double surge_factor = 10.0;
  std::size_t anomaly_burst_n = 5;
  sim::VirtualTime surge_bucket_ms = 10000;
};

// Pure scan over a time-ordered record slice. Emits extraction_campaign per
// client with >= k flagged extraction verdicts, cost_surge per tenant whose
// bucketed cost rate exceeds surge_factor x its trailing mean (one merged
// alert per tenant), integrity_breach per env flag, anomaly_burst per client
// over burst_n flagged anomaly verdicts. Throws on an unordered slice.
std::vector<Alert> analyze_window(std::span<const ForensicRecord> slice,
                                  const AnalysisRules& rules);

enum class ActionKind {
  kBlockClient,
  kTightenRateLimit,
  kRevokeExcessPermissions,
  kRollbackFunction,
  kQuarantineContainer,
};

std::string action_kind_name(ActionKind k);

struct ResponseAction {
  ActionKind kind = ActionKind::kBlockClient;
  std::string target;
  sim::VirtualTime applied_at = 0;
  bool applied = false;
  std::string note;
};

using Playbook = std::map<AlertKind, std::vector<ActionKind>>;

Playbook default_playbook();

/// Narrow command surface the response playbook drives. The simulator
/// implements it; a dry-run stub can stand in for offline analysis.
class ResponseInterface {
 public:
  virtual ~ResponseInterface() = default;
  virtual bool block_client(const std::string& client_id) = 0;
  virtual bool tighten_rate_limit(const std::string& client_id) = 0;
  virtual bool quarantine_container(const std::string& container_id) = 0;
  // Returns false with `note` filled when rollback is impossible.
  virtual bool rollback_function(const std::string& function_id, std::string* note) = 0;
  virtual bool revoke_excess_permissions(const std::string& role_id) = 0;
};

// Applies the playbook for one alert through the command interface. Actions
// already applied for the same alert id are skipped (idempotence); each
// target is resolved from the alert subject and its evidence records.
std::vector<ResponseAction> respond(const Alert& alert, const Playbook& playbook,
                                    ResponseInterface& sim,
                                    std::span<const ForensicRecord> slice,
                                    sim::VirtualTime now,
                                    std::set<std::string>* applied_keys);

struct LogFilter {
  std::optional<std::string> client_id;
  std::optional<std::string> function_id;
  std::optional<std::string> kind;  // detector name; matches flagged verdicts
  std::optional<sim::VirtualTime> from_ms;
  std::optional<sim::VirtualTime> to_ms;  // inclusive
};

struct QueryResult {
  std::vector<ForensicRecord> records;
  std::vector<std::pair<std::size_t, std::string>> errors;  // (line no, message)
};

// Conjunction of the provided predicates over a JSON-Lines log text.
// Malformed lines are reported with their 1-based line number and skipped.
QueryResult query_log(const std::string& log_text, const LogFilter& filter);

}  // namespace faasguard::shield
