#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "faasguard/iam/iam.hpp"
#include "faasguard/model/model.hpp"
#include "faasguard/sim/simulator.hpp"
#include "faasguard/sim/types.hpp"

namespace faasguard::attack {

/// Ground-truth-labeled attack schedule. Replayable: the same seed yields an
/// identical schedule and identical attacker-side analysis.
struct AttackCampaign {
  sim::AttackKind kind = sim::AttackKind::kColdProbe;
  std::string campaign_id;
  std::uint64_t seed = 0;
  std::vector<std::pair<sim::VirtualTime, sim::InvocationRequest>> schedule;
  std::vector<sim::ScheduledMutation> mutations;
  // kind-specific notes for the attacker report (counts, parameters)
  std::map<std::string, double> params;

  std::vector<std::string> request_ids() const;
};

struct TimingObservation {
  std::string request_id;
  double latency_ms = 0.0;
  bool true_cold = false;  // ground truth, hidden from the classifier
};

struct TimingClassification {
  std::vector<bool> labels;  // cold = true, aligned with observations
  double accuracy = 0.0;
};

// Midpoint threshold classifier over latencies: cold iff latency >= midpoint.
// Throws when the means are equal.
TimingClassification classify_timings(const std::vector<TimingObservation>& obs,
                                      double cold_mean_ms, double warm_mean_ms);

struct ExtractionTranscript {
  std::vector<std::pair<std::vector<double>, model::Prediction>> entries;
  std::size_t budget = 0;
};

enum class ExtractionStrategy { kUniformRandom, kBoundaryRefine };

// --- generators (pure given params + seed) -------------------------------

struct ColdProbeParams {
  std::size_t n = 2;
  sim::VirtualTime spacing_ms = 1000;
  // When set, spacings alternate between below/above the TTL to oscillate
  // container state.
  std::optional<std::pair<sim::VirtualTime, sim::VirtualTime>> oscillate;
  sim::VirtualTime start_ms = 0;
};

AttackCampaign gen_cold_probe(const std::string& function_id,
                              const ColdProbeParams& params, std::uint64_t seed);

AttackCampaign gen_exhaustion(const std::string& function_id,
                              std::size_t concurrency, sim::VirtualTime at,
                              double complexity, std::uint64_t seed);

AttackCampaign gen_reuse_leak(const std::string& function_id,
                              const std::string& marker,
                              const std::string& planter_client,
                              const std::string& prober_client,
                              sim::VirtualTime start_ms, sim::VirtualTime gap_ms,
                              std::uint64_t seed);

struct ExtractionParams {
  std::size_t budget = 100;
  ExtractionStrategy strategy = ExtractionStrategy::kUniformRandom;
  double rate_per_s = 100.0;
  sim::VirtualTime start_ms = 0;
  double box_lo = -10.0;
  double box_hi = 10.0;
  std::size_t bisect_depth = 20;
};

struct ExtractionCampaign {
  AttackCampaign campaign;
  // Offline transcript: query/prediction pairs from the attacker's own
  // black-box oracle calls (the same model answers online).
  ExtractionTranscript transcript;
};

// Budget >= 10. boundary_refine alternates random probes with bisection
// between differently-labeled pairs; every oracle call counts against the
// budget, including bisection probes.
ExtractionCampaign gen_extraction(const model::ModelArtifact& target,
                                  const std::string& function_id,
                                  const ExtractionParams& params,
                                  std::uint64_t seed);

struct SubstituteFit {
  model::ModelArtifact artifact;
  bool degenerate = false;  // single-class transcript
};

SubstituteFit fit_substitute(const ExtractionTranscript& transcript,
                             std::size_t dims, std::size_t classes,
                             std::size_t epochs = 300, double learning_rate = 0.05);

// Fraction of matching hard labels over a probe set (rows of `probes`).
double agreement(const model::ModelArtifact& substitute,
                 const model::ModelArtifact& target,
                 const std::vector<std::vector<double>>& probes);

std::vector<std::vector<double>> make_probe_set(std::size_t dims, std::size_t n,
                                                std::uint64_t seed,
                                                double lo = -10.0, double hi = 10.0);

struct AdversarialResult {
  std::vector<double> x_prime;
  bool success = false;
  std::string reason;  // "zero_w" when no direction exists
};

// x' = x - epsilon * sign(w) oriented toward the opposing class; success iff
// the predicted label flips.
AdversarialResult gen_adversarial(const model::ModelArtifact& binary_model,
                                  std::span<const double> x, double epsilon);

enum class MembershipGuess { kMember, kNonMember };

// member iff max confidence > tau; throws MembershipError in hard-label mode.
MembershipGuess membership_guess(const model::Prediction& prediction, double tau);

struct MembershipError : std::runtime_error {
  MembershipError() : std::runtime_error("no_confidences") {}
};

// Best TPR - FPR over tau in {0.00, 0.01, ..., 1.00} against the dataset's
// member/non-member split.
double membership_advantage(const model::ModelArtifact& m,
                            const model::Dataset& data);

AttackCampaign gen_denial_of_wallet(const std::string& function_id,
                                    std::size_t n, double complexity,
                                    double rate_per_s, sim::VirtualTime start_ms,
                                    std::uint64_t seed);

enum class EventVariant {
  kOversizedPayload,
  kWrongTriggerType,
  kMalformedStructure,
  kNestedBomb,
};

std::string event_variant_name(EventVariant v);

// One request per variant; oversized payloads size to max_payload_bytes + 1.
// Throws on an empty variant list. include_control appends a well-formed
// benign-labeled request.
AttackCampaign gen_event_injection(const std::string& function_id,
                                   const std::vector<EventVariant>& variants,
                                   sim::VirtualTime start_ms,
                                   std::size_t max_payload_bytes,
                                   bool include_control, std::uint64_t seed);

struct RoleChainReport {
  std::vector<std::vector<std::string>> paths_before;
  std::vector<std::vector<std::string>> paths_after;  // under minimized policies
};

// Escalation search before/after least-privilege minimization. The minimized
// graph keeps, for each role in `traces`, only the permissions its traces
// exercised.
RoleChainReport gen_role_chain(
    const iam::PermissionGraph& graph, const std::string& start_role,
    const iam::Permission& target,
    const std::map<std::string, iam::AccessTrace>& traces);

iam::PermissionGraph minimize_graph(
    const iam::PermissionGraph& graph,
    const std::map<std::string, iam::AccessTrace>& traces);

// Two-phase persistence campaign: a warm-up request, a module-cache
// injection into the function's most recent container, then a probe request
// the integrity check should flag.
AttackCampaign gen_persistence(const std::string& function_id,
                               sim::VirtualTime start_ms, sim::VirtualTime gap_ms,
                               std::uint64_t seed);

}  // namespace faasguard::attack
