#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <queue>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "faasguard/iam/iam.hpp"
#include "faasguard/model/model.hpp"
#include "faasguard/rng.hpp"
#include "faasguard/shield/postexec.hpp"
#include "faasguard/shield/runtime.hpp"
#include "faasguard/sim/types.hpp"

namespace faasguard::sim {

struct PlatformConfig {
  std::size_t concurrency_cap = 64;
  VirtualTime keep_warm_ttl_ms = 300000;
  double unit_price = 1.0;
  bool weak_isolation = false;
  double jitter_ms = 0.0;
};

/// Direct state mutation scheduled by an attack campaign; applied between
/// invocations at the given virtual time.
struct ScheduledMutation {
  VirtualTime time = 0;
  std::string function_id;  // target: most recently used container of this fn
};

struct PersistenceReport {
  std::string container_id;
  std::string old_digest;
  std::string new_digest;
};

/// Deterministic single-owner virtual-time event loop: function deployment,
/// container lifecycle (cold start, warm reuse, TTL recycle), execution
/// latency, a platform-wide concurrency cap with a FIFO overflow queue, and
/// per-tenant billing. Shield hooks run in-path when enabled.
class Simulator : public shield::ResponseInterface {
 public:
  Simulator(PlatformConfig platform, shield::ShieldConfig shield_cfg,
            std::uint64_t seed);

  // --- deployment -----------------------------------------------------
  // Registers a function version. A new function must carry version 1; a
  // redeploy must carry exactly active_version + 1 (previous versions are
  // retained for rollback). Throws on duplicate versions or timeout <=
  // warm_base.
  void deploy_function(FunctionSpec spec);
  const FunctionSpec& active_spec(const std::string& function_id) const;
  std::uint64_t active_version(const std::string& function_id) const;

  void register_model(model::ModelArtifact artifact,
                      std::optional<model::Dataset> dataset = std::nullopt);
  const model::ModelArtifact* find_model(const std::string& artifact_id) const;

  void set_permission_graph(iam::PermissionGraph graph) { graph_ = std::move(graph); }
  const iam::PermissionGraph& permission_graph() const { return graph_; }

  // --- scheduling -------------------------------------------------------
  void schedule_request(const InvocationRequest& req);
  void schedule_mutation(const ScheduledMutation& m);
  // Schedules periodic forensic analysis + playbook response while running.
  void enable_auto_response(VirtualTime every_ms, shield::AnalysisRules rules,
                            shield::Playbook playbook);
  void run_until_idle();

  // --- direct operations (also used by the event loop) -----------------
  // Returns the container to run on plus the cold flag, or nullopt when the
  // platform concurrency cap is reached (caller queues). The returned
  // container is marked busy.
  std::optional<std::pair<std::string, bool>> acquire_container(
      const std::string& function_id, VirtualTime now);
  // Returns a directly acquired container to the pool (models completion for
  // callers driving acquire_container by hand).
  void release_container(const std::string& container_id, VirtualTime now);
  std::size_t recycle_expired(VirtualTime now);
  // Reverts to the previous version and force-recycles the function's pool.
  // Returns the new active version; throws when only one version exists.
  std::uint64_t rollback_function(const std::string& function_id);

  PersistenceReport inject_persistence(const std::string& container_id);
  // Most recently used container of a function, if any (mutation targeting).
  std::optional<std::string> most_recent_container(const std::string& function_id) const;

  // --- ResponseInterface -------------------------------------------------
  bool block_client(const std::string& client_id) override;
  bool tighten_rate_limit(const std::string& client_id) override;
  bool quarantine_container(const std::string& container_id) override;
  bool rollback_function(const std::string& function_id, std::string* note) override;
  bool revoke_excess_permissions(const std::string& role_id) override;

  // --- state access --------------------------------------------------------
  VirtualTime now() const { return now_; }
  const std::vector<InvocationResult>& results() const { return results_; }
  const BillingLedger& ledger() const { return ledger_; }
  const shield::ForensicLog& forensic_log() const { return log_; }
  const std::vector<shield::Alert>& alerts() const { return alerts_; }
  const std::vector<shield::ResponseAction>& actions() const { return actions_; }
  const shield::RuntimeShield& shield_state() const { return shield_; }
  const ContainerInstance* container(const std::string& container_id) const;
  ContainerInstance* mutable_container(const std::string& container_id);
  const iam::AccessTrace& access_trace(const std::string& function_id) const;
  std::size_t busy_count() const { return busy_count_; }
  std::size_t pool_size(const std::string& function_id) const;
  std::size_t peak_busy() const { return peak_busy_; }

  static std::string compute_deploy_digest(const FunctionSpec& spec);

 private:
  struct Deployed {
    std::vector<FunctionSpec> versions;
    std::size_t active_index = 0;
    iam::AccessTrace trace;
  };

  enum class EventKind : int {
    kCompletion = 0,
    kQueueDeadline = 1,
    kMutation = 2,
    kAnalysis = 3,
    kArrival = 4,
  };

  struct PendingExecution {
    InvocationRequest request;
    std::string container_id;
    bool cold = false;
    double latency_ms = 0.0;
    std::vector<shield::DetectionVerdict> verdicts;
    std::optional<InvocationError> error;
    std::variant<std::monostate, model::Prediction, std::string> output;
    std::string env_digest;
    std::optional<std::vector<double>> predict_x;
  };

  struct Event {
    VirtualTime time;
    EventKind kind;
    std::uint64_t seq;
    // kCompletion
    std::shared_ptr<PendingExecution> exec;
    // kArrival
    InvocationRequest request;
    // kQueueDeadline
    std::string deadline_request_id;
    // kMutation
    ScheduledMutation mutation;

    bool operator>(const Event& other) const {
      if (time != other.time) return time > other.time;
      if (kind != other.kind) return kind > other.kind;
      return seq > other.seq;
    }
  };

  struct QueuedRequest {
    InvocationRequest request;
    std::vector<shield::DetectionVerdict> verdicts;
    VirtualTime enqueued_at = 0;
  };

  Deployed& deployed(const std::string& function_id);
  const Deployed& deployed(const std::string& function_id) const;

  void push_event(Event ev);
  void process_arrival(const InvocationRequest& req);
  void start_execution(const InvocationRequest& req,
                       std::vector<shield::DetectionVerdict> verdicts,
                       VirtualTime start);
  void start_execution_on(const InvocationRequest& req,
                          std::vector<shield::DetectionVerdict> verdicts,
                          VirtualTime start, const std::string& container_id,
                          bool cold);
  void finish_rejected(const InvocationRequest& req,
                       std::vector<shield::DetectionVerdict> verdicts,
                       InvocationError error, VirtualTime at);
  void complete_execution(PendingExecution& exec, VirtualTime at);
  void run_handler(PendingExecution& exec, ContainerInstance& c,
                   const FunctionSpec& spec);
  void drain_queue(VirtualTime now);
  void destroy_container(const std::string& container_id);
  void emit_record(const InvocationRequest& req, const InvocationResult& res,
                   const std::vector<shield::DetectionVerdict>& verdicts,
                   const std::string& env_digest, const std::string& container_id,
                   VirtualTime at);
  void run_analysis(VirtualTime at);

  PlatformConfig platform_;
  shield::RuntimeShield shield_;
  Rng rng_;
  VirtualTime now_ = 0;

  std::map<std::string, Deployed> functions_;
  std::map<std::string, ContainerInstance> containers_;
  std::map<std::string, model::ModelArtifact> models_;
  iam::PermissionGraph graph_;

  std::priority_queue<Event, std::vector<Event>, std::greater<>> events_;
  std::deque<QueuedRequest> wait_queue_;
  std::size_t busy_count_ = 0;
  std::size_t peak_busy_ = 0;
  std::uint64_t event_seq_ = 0;
  std::uint64_t container_seq_ = 0;

  std::vector<InvocationResult> results_;
  BillingLedger ledger_;
  shield::ForensicLog log_;

  // auto-response
  bool auto_response_ = false;
  VirtualTime analysis_every_ms_ = 10000;
  VirtualTime next_analysis_ = 0;
  shield::AnalysisRules analysis_rules_;
  shield::Playbook playbook_;
  std::set<std::string> applied_action_keys_;
  std::set<std::string> alerted_subjects_;  // (kind|subject) de-dup for actions
  std::vector<shield::Alert> alerts_;
  std::vector<shield::ResponseAction> actions_;
};

}  // namespace faasguard::sim
