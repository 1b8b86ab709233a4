#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "faasguard/harness/scenario.hpp"

namespace faasguard::harness {

/// Everything derived from the config before any pass runs: trained
/// artifacts, datasets, campaigns and the merged seeded schedule. Both
/// passes replay exactly this.
struct BuiltScenario {
  std::map<std::string, model::ModelArtifact> artifacts;
  std::map<std::string, model::Dataset> datasets;
  std::vector<attack::AttackCampaign> campaigns;
  // extraction campaigns keep their offline transcripts for the analyzers
  std::map<std::string, attack::ExtractionTranscript> transcripts;  // by campaign id
  std::vector<sim::InvocationRequest> requests;  // merged, sorted
  std::vector<sim::ScheduledMutation> mutations;
  std::map<std::string, sim::GroundTruth> ground_truth;  // by request id
};

BuiltScenario build_scenario(const ScenarioConfig& cfg);

struct PassOutcome {
  std::vector<sim::InvocationResult> results;
  sim::BillingLedger ledger;
  std::string log_bytes;
  std::vector<shield::ForensicRecord> records;
  std::vector<shield::Alert> alerts;
  std::vector<shield::ResponseAction> actions;
  std::map<std::string, iam::AccessTrace> traces;  // per function
  std::size_t peak_busy = 0;
};

PassOutcome run_pass(const ScenarioConfig& cfg, const BuiltScenario& built,
                     bool shield_on);

struct LatencyStats {
  std::size_t count = 0;
  double mean = 0.0;
  double p50 = 0.0;
  double p95 = 0.0;
};

LatencyStats latency_stats(const std::vector<double>& samples);

struct OverheadSample {
  double off = 0.0;
  double on = 0.0;
  bool cold = false;
};

// (mean_on - mean_off) / mean_off; nullopt on empty input.
std::optional<double> compute_overhead(const std::vector<double>& on,
                                       const std::vector<double>& off);

struct AttackKindMetrics {
  std::size_t requests = 0;
  std::size_t flagged_requests = 0;
  std::optional<double> detection_rate_requests;
  std::size_t campaigns = 0;
  std::size_t detected_campaigns = 0;
  std::optional<double> detection_rate_campaigns;
};

struct MetricsReport {
  std::uint64_t seed = 0;
  sim::VirtualTime duration_ms = 0;
  std::map<std::string, AttackKindMetrics> per_attack;  // by kind name
  std::size_t benign_requests = 0;
  std::size_t flagged_benign = 0;
  std::optional<double> false_positive_rate;
  LatencyStats latency_on;
  LatencyStats latency_off;
  std::optional<double> overhead_overall;
  std::optional<double> overhead_warm;
  std::optional<double> overhead_cold_start;
  std::map<std::string, double> cost_on;   // per tenant
  std::map<std::string, double> cost_off;  // per tenant
  std::size_t shield_off_verdicts = 0;     // invariant: zero
  nlohmann::json attacker_reports = nlohmann::json::array();
  nlohmann::json predeploy_findings = nlohmann::json::array();
};

struct ScenarioOutcome {
  MetricsReport report;
  PassOutcome off;
  PassOutcome on;
  BuiltScenario built;
};

// Two passes (shield off, then on) over the identical seeded schedule, then
// verdict/alert scoring joined to ground truth by request id.
ScenarioOutcome run_scenario(const ScenarioConfig& cfg);

nlohmann::json report_to_json(const MetricsReport& report);
MetricsReport report_from_json(const nlohmann::json& j);

enum class ReportFormat { kJson, kTable };

std::string render_report(const MetricsReport& report, ReportFormat format);

}  // namespace faasguard::harness
