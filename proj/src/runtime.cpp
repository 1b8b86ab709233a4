#include "faasguard/shield/runtime.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <json.hpp>

namespace faasguard::shield {

std::string detector_name(Detector d) {
  switch (d) {
    case Detector::kAnomaly: return "anomaly";
    case Detector::kAdversarialInput: return "adversarial_input";
    case Detector::kExtraction: return "extraction";
    case Detector::kRateLimit: return "rate_limit";
    case Detector::kEnvIntegrity: return "env_integrity";
    case Detector::kEventValidation: return "event_validation";
  }
  return "anomaly";
}

Detector detector_from_name(const std::string& name) {
  if (name == "anomaly") return Detector::kAnomaly;
  if (name == "adversarial_input") return Detector::kAdversarialInput;
  if (name == "extraction") return Detector::kExtraction;
  if (name == "rate_limit") return Detector::kRateLimit;
  if (name == "env_integrity") return Detector::kEnvIntegrity;
  if (name == "event_validation") return Detector::kEventValidation;
  throw std::invalid_argument("unknown detector: " + name);
}

void EwStats::observe(double value, double lambda) {
  if (count == 0) {
    mean = value;
    variance = 0.0;
  } else {
    const double diff = value - mean;
    const double incr = lambda * diff;
    mean += incr;
    variance = (1.0 - lambda) * (variance + diff * incr);
  }
  ++count;
}

double EwStats::zscore(double value) const {
  const double diff = value - mean;
  if (diff == 0.0) return 0.0;
  const double sigma = std::sqrt(std::max(variance, 1e-9));
  return std::abs(diff) / sigma;
}

void observe(InvocationBaseline& b, sim::VirtualTime arrival, double complexity) {
  if (b.last_arrival.has_value()) {
    b.inter_arrival_ms.observe(
        static_cast<double>(arrival - *b.last_arrival), b.lambda);
  }
  b.complexity.observe(complexity, b.lambda);
  b.last_arrival = arrival;
  ++b.count;
}

DetectionVerdict score_invocation(const InvocationBaseline& b,
                                  sim::VirtualTime arrival, double complexity,
                                  double z_threshold, std::uint64_t warmup_min) {
  DetectionVerdict v{Detector::kAnomaly, 0.0, false, ""};
  if (b.count < warmup_min) {
    v.reason = "warmup";
    return v;
  }
  double z = b.complexity.zscore(complexity);
  std::string which = "complexity";
  if (b.last_arrival.has_value() && b.inter_arrival_ms.count > 0) {
    const double zi = b.inter_arrival_ms.zscore(
        static_cast<double>(arrival - *b.last_arrival));
    if (zi > z) {
      z = zi;
      which = "inter_arrival";
    }
  }
  v.score = z;
  v.flagged = z > z_threshold;
  v.reason = v.flagged ? "z_exceeded:" + which : which;
  return v;
}

double chi_square_quantile(std::size_t dof, double alpha) {
  if (dof == 0) throw std::invalid_argument("chi_square_quantile: dof >= 1");
  // Inverse normal CDF (Acklam's rational approximation) for the upper-tail
  // point, then Wilson-Hilferty.
  const double p = 1.0 - alpha;
  auto inv_norm = [](double q) {
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                               -2.759285104469687e+02, 1.383577518672690e+02,
                               -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                               -1.556989798598866e+02, 6.680131188771972e+01,
                               -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                               -2.400758277161838e+00, -2.549732539343734e+00,
                               4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                               2.445134137142996e+00, 3.754408661907416e+00};
    const double plow = 0.02425;
    if (q < plow) {
      const double u = std::sqrt(-2.0 * std::log(q));
      return (((((c[0] * u + c[1]) * u + c[2]) * u + c[3]) * u + c[4]) * u + c[5]) /
             ((((d[0] * u + d[1]) * u + d[2]) * u + d[3]) * u + 1.0);
    }
    if (q <= 1.0 - plow) {
      const double u = q - 0.5;
      const double t = u * u;
      return (((((a[0] * t + a[1]) * t + a[2]) * t + a[3]) * t + a[4]) * t + a[5]) * u /
             (((((b[0] * t + b[1]) * t + b[2]) * t + b[3]) * t + b[4]) * t + 1.0);
    }
    const double u = std::sqrt(-2.0 * std::log(1.0 - q));
    return -(((((c[0] * u + c[1]) * u + c[2]) * u + c[3]) * u + c[4]) * u + c[5]) /
           ((((d[0] * u + d[1]) * u + d[2]) * u + d[3]) * u + 1.0);
  };
  const double z = inv_norm(p);
  const double k = static_cast<double>(dof);
  const double t = 1.0 - 2.0 / (9.0 * k) + z * std::sqrt(2.0 / (9.0 * k));
  return k * t * t * t;
}

InputProfile InputProfile::fit(const model::Dataset& data, double alpha) {
  InputProfile p;
  p.dims = data.dims;
  p.mean.assign(data.dims, 0.0);
  p.variance.assign(data.dims, 0.0);
  const std::size_t m = data.member_count;
  for (std::size_t i = 0; i < m; ++i) {
    auto x = data.point(i);
    for (std::size_t j = 0; j < data.dims; ++j) p.mean[j] += x[j];
  }
  for (double& v : p.mean) v /= static_cast<double>(m);
  for (std::size_t i = 0; i < m; ++i) {
    auto x = data.point(i);
    for (std::size_t j = 0; j < data.dims; ++j) {
      const double d = x[j] - p.mean[j];
      p.variance[j] += d * d;
    }
  }
  for (double& v : p.variance) {
    v = std::max(v / static_cast<double>(m), 1e-9);
  }
  p.threshold = chi_square_quantile(data.dims, alpha);
  return p;
}

DetectionVerdict validate_input(const InputProfile& profile,
                                std::span<const double> x) {
  if (x.size() != profile.dims) {
    return {Detector::kEventValidation, 0.0, true, "input_dimension"};
  }
  double score = 0.0;
  for (std::size_t j = 0; j < profile.dims; ++j) {
    const double d = x[j] - profile.mean[j];
    score += d * d / profile.variance[j];
  }
  DetectionVerdict v{Detector::kAdversarialInput, score, score > profile.threshold, ""};
  v.reason = v.flagged ? "mahalanobis_exceeded" : "in_distribution";
  return v;
}

std::uint64_t QuantizerBox::cell_of(std::span<const double> x) const {
  // FNV-1a over per-dimension bin indices; deterministic across platforms.
  std::uint64_t h = 1469598103934665603ull;
  const double width = (hi - lo) / static_cast<double>(bins);
  for (double v : x) {
    double idx = std::floor((v - lo) / width);
    idx = std::clamp(idx, 0.0, static_cast<double>(bins - 1));
    h ^= static_cast<std::uint64_t>(idx) + 0x9e3779b97f4a7c15ull;
    h *= 1099511628211ull;
  }
  return h;
}

void ClientWindow::push(WindowEntry e) {
  entries.push_back(e);
  while (entries.size() > capacity) entries.pop_front();
}

DetectionVerdict detect_extraction(const ClientWindow& window,
                                   const ExtractionThresholds& t) {
  DetectionVerdict v{Detector::kExtraction, 0.0, false, ""};
  if (window.entries.size() < t.min_count) {
    v.reason = "warmup";
    return v;
  }
  std::set<std::uint64_t> cells;
  std::size_t near_boundary = 0;
  std::size_t with_gap = 0;
  for (const WindowEntry& e : window.entries) {
    cells.insert(e.cell);
    if (e.has_gap) {
      ++with_gap;
      if (e.top2_gap < t.gap_margin) ++near_boundary;
    }
  }
  const double count = static_cast<double>(window.entries.size());
  const double coverage = static_cast<double>(cells.size()) / count;
  const double coverage_norm = coverage / t.coverage_ratio;

  if (with_gap == 0) {
    // Hard-label deployment: no confidence gaps, coverage-only mode.
    v.score = coverage_norm;
    v.flagged = coverage > t.coverage_ratio;
    v.reason = v.flagged ? "coverage_only:flagged" : "coverage_only";
    return v;
  }
  const double boundary = static_cast<double>(near_boundary) / count;
  const double boundary_norm = boundary / t.boundary_fraction;
  v.score = std::max(boundary_norm, coverage_norm);
  v.flagged = boundary > t.boundary_fraction || coverage > t.coverage_ratio;
  if (v.flagged) {
    v.reason = boundary > t.boundary_fraction ? "boundary_fraction" : "coverage_ratio";
  } else {
    v.reason = "within_thresholds";
  }
  return v;
}

RateDecision rate_limit(TokenBucket& bucket, sim::VirtualTime now,
                        const RateLimitConfig& cfg, bool suspicious) {
  if (cfg.capacity <= 0.0 || cfg.refill_per_s <= 0.0) {
    throw std::invalid_argument("rate_limit: capacity and refill must be positive");
  }
  const double capacity = suspicious ? cfg.suspicious_capacity : cfg.capacity;
  if (!bucket.initialized) {
    bucket.tokens = capacity;
    bucket.last_refill = now;
    bucket.initialized = true;
  } else {
    const double elapsed_s =
        static_cast<double>(now - bucket.last_refill) / 1000.0;
    bucket.tokens = std::min(capacity, bucket.tokens + elapsed_s * cfg.refill_per_s);
    bucket.last_refill = now;
  }
  if (bucket.tokens >= 1.0) {
    bucket.tokens -= 1.0;
    return {true, 0};
  }
  const double deficit = 1.0 - bucket.tokens;
  const double wait_ms = deficit / cfg.refill_per_s * 1000.0;
  return {false, static_cast<std::uint64_t>(std::ceil(wait_ms))};
}

void sanitize(sim::ContainerInstance& container, const std::string& deploy_digest) {
  if (container.busy) {
    container.pending_sanitize = true;
    return;
  }
  container.residual_state.clear();
  container.module_cache_digest = deploy_digest;
  container.pending_sanitize = false;
}

DetectionVerdict check_env(const sim::ContainerInstance& container,
                           const std::string& deploy_digest) {
  DetectionVerdict v{Detector::kEnvIntegrity, 0.0, false, ""};
  if (container.module_cache_digest != deploy_digest) {
    v.flagged = true;
    v.score = 1.0;
    v.reason = "digest_mismatch:" + container.module_cache_digest + "!=" + deploy_digest;
  } else {
    v.reason = "digest_match:" + deploy_digest;
  }
  return v;
}

std::size_t json_nesting_depth(std::string_view payload) {
  std::size_t depth = 0, max_depth = 0;
  bool in_string = false, escaped = false;
  for (char c : payload) {
    if (in_string) {
      if (escaped) {
        escaped = false;
      } else if (c == '\\') {
        escaped = true;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    switch (c) {
      case '"': in_string = true; break;
      case '{':
      case '[':
        ++depth;
        max_depth = std::max(max_depth, depth);
        break;
      case '}':
      case ']':
        if (depth > 0) --depth;
        break;
      default: break;
    }
  }
  return max_depth;
}

EventDecision validate_event(const sim::InvocationRequest& request,
                             const std::vector<sim::Trigger>& allowed_triggers,
                             const EventLimits& limits) {
  if (request.payload.size() > limits.max_payload_bytes) {
    return {false, "payload_too_large"};
  }
  if (std::find(allowed_triggers.begin(), allowed_triggers.end(),
                request.trigger) == allowed_triggers.end()) {
    return {false, "trigger_not_allowed"};
  }
  if (json_nesting_depth(request.payload) > limits.max_nesting_depth) {
    return {false, "nesting_depth"};
  }
  if (!nlohmann::json::accept(request.payload)) {
    return {false, "malformed_payload"};
  }
  return {true, ""};
}

InvocationBaseline& RuntimeShield::baseline(const std::string& function_id,
                                            const std::string& client_id) {
  auto key = std::make_pair(function_id, client_id);
  auto it = baselines_.find(key);
  if (it == baselines_.end()) {
    InvocationBaseline b;
    b.lambda = cfg_.thresholds.baseline_lambda;
    it = baselines_.emplace(key, b).first;
  }
  return it->second;
}

ClientWindow& RuntimeShield::window(const std::string& client_id) {
  auto it = windows_.find(client_id);
  if (it == windows_.end()) {
    ClientWindow w;
    w.capacity = cfg_.thresholds.window_capacity;
    it = windows_.emplace(client_id, w).first;
  }
  return it->second;
}

TokenBucket& RuntimeShield::bucket(const std::string& client_id) {
  return buckets_[client_id];
}

}  // namespace faasguard::shield
