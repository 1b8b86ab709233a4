#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "faasguard/sim/types.hpp"

namespace faasguard::shield {

enum class Detector {
  kAnomaly,
  kAdversarialInput,
  kExtraction,
  kRateLimit,
  kEnvIntegrity,
  kEventValidation,
};

std::string detector_name(Detector d);
Detector detector_from_name(const std::string& name);

struct DetectionVerdict {
  Detector detector = Detector::kAnomaly;
  double score = 0.0;
  bool flagged = false;
  std::string reason;
};

// --- invocation baselining ---------------------------------------------

/// Exponentially weighted mean/variance. First observation initializes
/// mean = value, variance = 0; afterwards mean' = mean + lambda*diff,
/// var' = (1-lambda)*(var + lambda*diff^2).
struct EwStats {
  double mean = 0.0;
  double variance = 0.0;
  std::uint64_t count = 0;

  void observe(double value, double lambda);
  double zscore(double value) const;
};

struct InvocationBaseline {
  double lambda = 0.1;
  EwStats inter_arrival_ms;
  EwStats complexity;
  std::optional<sim::VirtualTime> last_arrival;
  std::uint64_t count = 0;
};

void observe(InvocationBaseline& b, sim::VirtualTime arrival, double complexity);

DetectionVerdict score_invocation(const InvocationBaseline& b,
                                  sim::VirtualTime arrival, double complexity,
                                  double z_threshold, std::uint64_t warmup_min);

// --- adversarial-input validation ---------------------------------------

/// Diagonal Gaussian profile of training inputs; score is the squared
/// Mahalanobis distance, flagged over the chi-square threshold.
struct InputProfile {
  std::size_t dims = 0;
  std::vector<double> mean;
  std::vector<double> variance;  // floored at 1e-9
  double threshold = 0.0;        // chi-square quantile at confidence alpha

  static InputProfile fit(const model::Dataset& data, double alpha);
};

// Wilson-Hilferty approximation of the chi-square quantile at upper-tail
// probability `alpha` with `dof` degrees of freedom.
double chi_square_quantile(std::size_t dof, double alpha);

DetectionVerdict validate_input(const InputProfile& profile,
                                std::span<const double> x);

// --- extraction-pattern detection ----------------------------------------

struct QuantizerBox {
  double lo = -10.0;
  double hi = 10.0;
  std::size_t bins = 8;

  std::uint64_t cell_of(std::span<const double> x) const;
};

struct WindowEntry {
  std::uint64_t cell = 0;
  double top2_gap = 0.0;
  bool has_gap = false;
  sim::VirtualTime time = 0;
};

struct ClientWindow {
  std::size_t capacity = 500;
  std::deque<WindowEntry> entries;

  void push(WindowEntry e);
};

struct ExtractionThresholds {
  std::size_t min_count = 100;
  double gap_margin = 0.1;
  double boundary_fraction = 0.4;
  double coverage_ratio = 0.8;
};

DetectionVerdict detect_extraction(const ClientWindow& window,
                                   const ExtractionThresholds& thresholds);

// --- rate limiting --------------------------------------------------------

struct RateLimitConfig {
  double capacity = 100.0;
  double refill_per_s = 10.0;
  double suspicious_capacity = 10.0;
};

struct TokenBucket {
  double tokens = 0.0;
  sim::VirtualTime last_refill = 0;
  bool initialized = false;
};

struct RateDecision {
  bool allowed = false;
  std::uint64_t retry_after_ms = 0;
};

RateDecision rate_limit(TokenBucket& bucket, sim::VirtualTime now,
                        const RateLimitConfig& cfg, bool suspicious);

// --- container hygiene -----------------------------------------------------

// Clears residual state and restores the module cache digest. Busy
// containers are deferred until completion via pending_sanitize.
void sanitize(sim::ContainerInstance& container,
              const std::string& deploy_digest);

DetectionVerdict check_env(const sim::ContainerInstance& container,
                           const std::string& deploy_digest);

// --- event validation -------------------------------------------------------

struct EventLimits {
  std::size_t max_payload_bytes = 65536;
  std::size_t max_nesting_depth = 32;
};

struct EventDecision {
  bool accepted = false;
  // "payload_too_large" | "trigger_not_allowed" | "malformed_payload" |
  // "nesting_depth"
  std::string reason;
};

EventDecision validate_event(const sim::InvocationRequest& request,
                             const std::vector<sim::Trigger>& allowed_triggers,
                             const EventLimits& limits);

// Maximum brace/bracket nesting depth of a JSON text, string-literal aware.
std::size_t json_nesting_depth(std::string_view payload);

// --- configuration ----------------------------------------------------------

struct ShieldChecks {
  bool anomaly = true;
  bool adversarial = true;
  bool extraction = true;
  bool rate_limit = true;
  bool env = true;
  bool event = true;

  int enabled_count() const {
    return int(anomaly) + int(adversarial) + int(extraction) +
           int(rate_limit) + int(env) + int(event);
  }
};

struct ShieldThresholds {
  double z_threshold = 4.0;
  std::uint64_t anomaly_warmup = 20;
  double baseline_lambda = 0.1;
  double alpha = 0.01;
  ExtractionThresholds extraction;
  std::size_t window_capacity = 500;
  QuantizerBox quantizer;
  RateLimitConfig rate;
  EventLimits event;
};

struct ShieldConfig {
  bool enabled = false;
  bool sanitize = true;
  ShieldChecks checks;
  ShieldThresholds thresholds;
  double shield_cost_ms = 2.0;

  double cost_per_invocation() const {
    return enabled ? shield_cost_ms * checks.enabled_count() : 0.0;
  }
};

/// Per-run mutable detector state: baselines per (function, client), windows
/// and buckets per client, the suspicious/blocked client sets. Owned by one
/// simulator instance; events must arrive in virtual-time order.
class RuntimeShield {
 public:
  explicit RuntimeShield(ShieldConfig cfg) : cfg_(std::move(cfg)) {}

  const ShieldConfig& config() const { return cfg_; }

  InvocationBaseline& baseline(const std::string& function_id,
                               const std::string& client_id);
  ClientWindow& window(const std::string& client_id);
  TokenBucket& bucket(const std::string& client_id);

  void mark_suspicious(const std::string& client_id) {
    suspicious_.insert(client_id);
  }
  bool is_suspicious(const std::string& client_id) const {
    return suspicious_.count(client_id) != 0;
  }
  void block_client(const std::string& client_id) { blocked_.insert(client_id); }
  bool is_blocked(const std::string& client_id) const {
    return blocked_.count(client_id) != 0;
  }

  void register_profile(const std::string& model_ref, InputProfile profile) {
    profiles_[model_ref] = std::move(profile);
  }
  const InputProfile* profile(const std::string& model_ref) const {
    auto it = profiles_.find(model_ref);
    return it == profiles_.end() ? nullptr : &it->second;
  }

 private:
  ShieldConfig cfg_;
  std::map<std::pair<std::string, std::string>, InvocationBaseline> baselines_;
  std::map<std::string, ClientWindow> windows_;
  std::map<std::string, TokenBucket> buckets_;
  std::set<std::string> suspicious_;
  std::set<std::string> blocked_;
  std::map<std::string, InputProfile> profiles_;
};

}  // namespace faasguard::shield
