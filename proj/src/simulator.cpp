#include "faasguard/sim/simulator.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <memory>
#include <stdexcept>

#include <json.hpp>

#include "faasguard/sha256.hpp"

namespace faasguard::sim {

Simulator::Simulator(PlatformConfig platform, shield::ShieldConfig shield_cfg,
                     std::uint64_t seed)
    : platform_(platform), shield_(std::move(shield_cfg)), rng_(seed) {}

std::string Simulator::compute_deploy_digest(const FunctionSpec& spec) {
  std::string bytes = "fn:" + spec.function_id + ":v" + std::to_string(spec.version);
  for (const auto& [name, ver] : spec.dependency_manifest) {
    bytes += ":" + name + "@" + ver;
  }
  return sha256_hex(bytes);
}

void Simulator::deploy_function(FunctionSpec spec) {
  if (spec.timeout_ms <= spec.warm_base_ms) {
    throw std::invalid_argument("deploy: timeout_ms must exceed warm_base_ms");
  }
  if (spec.deploy_digest.empty()) {
    spec.deploy_digest = compute_deploy_digest(spec);
  }
  auto it = functions_.find(spec.function_id);
  if (it == functions_.end()) {
    if (spec.version != 1) {
      throw std::invalid_argument("deploy: first version of " + spec.function_id +
                                  " must be 1");
    }
    Deployed d;
    d.versions.push_back(std::move(spec));
    d.active_index = 0;
    functions_.emplace(d.versions.front().function_id, std::move(d));
    return;
  }
  Deployed& d = it->second;
  const std::uint64_t expected = d.versions.back().version + 1;
  if (spec.version != expected) {
    throw std::invalid_argument(
        "deploy: duplicate or non-monotone version for " + spec.function_id +
        " (expected " + std::to_string(expected) + ")");
  }
  d.versions.push_back(std::move(spec));
  d.active_index = d.versions.size() - 1;
}

Simulator::Deployed& Simulator::deployed(const std::string& function_id) {
  auto it = functions_.find(function_id);
  if (it == functions_.end()) {
    throw std::invalid_argument("unknown function: " + function_id);
  }
  return it->second;
}

const Simulator::Deployed& Simulator::deployed(const std::string& function_id) const {
  auto it = functions_.find(function_id);
  if (it == functions_.end()) {
    throw std::invalid_argument("unknown function: " + function_id);
  }
  return it->second;
}

const FunctionSpec& Simulator::active_spec(const std::string& function_id) const {
  const Deployed& d = deployed(function_id);
  return d.versions[d.active_index];
}

std::uint64_t Simulator::active_version(const std::string& function_id) const {
  return active_spec(function_id).version;
}

void Simulator::register_model(model::ModelArtifact artifact,
                               std::optional<model::Dataset> dataset) {
  if (dataset.has_value() && shield_.config().enabled) {
    shield_.register_profile(
        artifact.artifact_id,
        shield::InputProfile::fit(*dataset, shield_.config().thresholds.alpha));
  }
  models_.emplace(artifact.artifact_id, std::move(artifact));
}

const model::ModelArtifact* Simulator::find_model(const std::string& artifact_id) const {
  auto it = models_.find(artifact_id);
  return it == models_.end() ? nullptr : &it->second;
}

void Simulator::push_event(Event ev) {
  ev.seq = event_seq_++;
  events_.push(std::move(ev));
}

void Simulator::schedule_request(const InvocationRequest& req) {
  Event ev;
  ev.time = req.arrival_time;
  ev.kind = EventKind::kArrival;
  ev.request = req;
  push_event(std::move(ev));
}

void Simulator::schedule_mutation(const ScheduledMutation& m) {
  Event ev;
  ev.time = m.time;
  ev.kind = EventKind::kMutation;
  ev.mutation = m;
  push_event(std::move(ev));
}

void Simulator::enable_auto_response(VirtualTime every_ms,
                                     shield::AnalysisRules rules,
                                     shield::Playbook playbook) {
  auto_response_ = true;
  analysis_every_ms_ = every_ms;
  next_analysis_ = every_ms;
  analysis_rules_ = rules;
  playbook_ = std::move(playbook);
}

std::optional<std::pair<std::string, bool>> Simulator::acquire_container(
    const std::string& function_id, VirtualTime now) {
  const Deployed& d = deployed(function_id);
  const FunctionSpec& spec = d.versions[d.active_index];

  if (busy_count_ >= platform_.concurrency_cap) return std::nullopt;

  recycle_expired(now);

  // Warm candidates for the same function; weak isolation widens the pool to
  // idle containers of other functions of the same tenant.
  const ContainerInstance* best = nullptr;
  auto consider = [&](const ContainerInstance& c) {
    if (c.busy || c.doomed) return;
    if (now - c.last_used_at >= platform_.keep_warm_ttl_ms) return;
    if (best == nullptr || c.last_used_at > best->last_used_at ||
        (c.last_used_at == best->last_used_at &&
         c.container_id < best->container_id)) {
      best = &c;
    }
  };
  for (const auto& [id, c] : containers_) {
    if (c.function_id == function_id) consider(c);
  }
  if (best == nullptr && platform_.weak_isolation) {
    for (const auto& [id, c] : containers_) {
      if (c.function_id != function_id && c.tenant_id == spec.tenant_id) consider(c);
    }
  }

  if (best != nullptr) {
    ContainerInstance& c = containers_.at(best->container_id);
    if (c.function_id != function_id) {
      // Weak-isolation rebind: module cache reloads for the new function,
      // residual /tmp state carries over (the contamination channel).
      c.function_id = function_id;
      c.module_cache_digest = spec.deploy_digest;
    }
    c.busy = true;
    ++busy_count_;
    peak_busy_ = std::max(peak_busy_, busy_count_);
    return std::make_pair(c.container_id, false);
  }

  ContainerInstance c;
  char buf[16];
  std::snprintf(buf, sizeof(buf), "c%06llu",
                static_cast<unsigned long long>(container_seq_++));
  c.container_id = buf;
  c.function_id = function_id;
  c.tenant_id = spec.tenant_id;
  c.created_at = now;
  c.last_used_at = now;
  c.module_cache_digest = spec.deploy_digest;
  c.busy = true;
  const std::string id = c.container_id;
  containers_.emplace(id, std::move(c));
  ++busy_count_;
  peak_busy_ = std::max(peak_busy_, busy_count_);
  return std::make_pair(id, true);
}

void Simulator::release_container(const std::string& container_id, VirtualTime now) {
  ContainerInstance& c = containers_.at(container_id);
  if (!c.busy) return;
  c.busy = false;
  c.last_used_at = now;
  ++c.invocation_count;
  --busy_count_;
  if (c.pending_sanitize) {
    shield::sanitize(c, active_spec(c.function_id).deploy_digest);
  }
  if (c.doomed) destroy_container(container_id);
}

std::size_t Simulator::recycle_expired(VirtualTime now) {
  std::vector<std::string> dead;
  for (const auto& [id, c] : containers_) {
    if (!c.busy && now - c.last_used_at >= platform_.keep_warm_ttl_ms) {
      dead.push_back(id);
    }
  }
  for (const std::string& id : dead) destroy_container(id);
  return dead.size();
}

void Simulator::destroy_container(const std::string& container_id) {
  containers_.erase(container_id);
}

std::uint64_t Simulator::rollback_function(const std::string& function_id) {
  Deployed& d = deployed(function_id);
  if (d.active_index == 0) {
    throw std::invalid_argument("rollback: " + function_id +
                                " has no previous version");
  }
  --d.active_index;
  std::vector<std::string> idle;
  for (auto& [id, c] : containers_) {
    if (c.function_id != function_id) continue;
    if (c.busy) {
      c.doomed = true;
    } else {
      idle.push_back(id);
    }
  }
  for (const std::string& id : idle) destroy_container(id);
  return d.versions[d.active_index].version;
}

PersistenceReport Simulator::inject_persistence(const std::string& container_id) {
  auto it = containers_.find(container_id);
  if (it == containers_.end()) {
    throw std::invalid_argument("inject_persistence: unknown container " + container_id);
  }
  PersistenceReport report;
  report.container_id = container_id;
  report.old_digest = it->second.module_cache_digest;
  // A synthetic module-cache entry: digest evolves from the previous value.
  it->second.module_cache_digest = sha256_hex(report.old_digest + ":injected");
  it->second.residual_state["module_cache/backdoor"] = "persistence";
  report.new_digest = it->second.module_cache_digest;
  return report;
}

std::optional<std::string> Simulator::most_recent_container(
    const std::string& function_id) const {
  const ContainerInstance* best = nullptr;
  for (const auto& [id, c] : containers_) {
    if (c.function_id != function_id) continue;
    if (best == nullptr || c.last_used_at > best->last_used_at ||
        (c.last_used_at == best->last_used_at && c.container_id < best->container_id)) {
      best = &c;
    }
  }
  if (best == nullptr) return std::nullopt;
  return best->container_id;
}

const ContainerInstance* Simulator::container(const std::string& container_id) const {
  auto it = containers_.find(container_id);
  return it == containers_.end() ? nullptr : &it->second;
}

ContainerInstance* Simulator::mutable_container(const std::string& container_id) {
  auto it = containers_.find(container_id);
  return it == containers_.end() ? nullptr : &it->second;
}

const iam::AccessTrace& Simulator::access_trace(const std::string& function_id) const {
  return deployed(function_id).trace;
}

std::size_t Simulator::pool_size(const std::string& function_id) const {
  std::size_t n = 0;
  for (const auto& [id, c] : containers_) {
    if (c.function_id == function_id) ++n;
  }
  return n;
}

bool Simulator::block_client(const std::string& client_id) {
  if (shield_.is_blocked(client_id)) return false;
  shield_.block_client(client_id);
  return true;
}

bool Simulator::tighten_rate_limit(const std::string& client_id) {
  if (shield_.is_suspicious(client_id)) return false;
  shield_.mark_suspicious(client_id);
  return true;
}

bool Simulator::quarantine_container(const std::string& container_id) {
  auto it = containers_.find(container_id);
  if (it == containers_.end()) return false;
  if (it->second.busy) {
    it->second.doomed = true;
  } else {
    destroy_container(container_id);
  }
  return true;
}

bool Simulator::rollback_function(const std::string& function_id, std::string* note) {
  auto it = functions_.find(function_id);
  if (it == functions_.end()) {
    if (note != nullptr) *note = "unknown_function";
    return false;
  }
  if (it->second.active_index == 0) {
    if (note != nullptr) *note = "single_version";
    return false;
  }
  rollback_function(function_id);
  return true;
}

bool Simulator::revoke_excess_permissions(const std::string& role_id) {
  if (!graph_.has_role(role_id)) return false;
  iam::AccessTrace merged;
  for (const auto& [fn, d] : functions_) {
    if (d.versions[d.active_index].role_id != role_id) continue;
    merged.entries.insert(merged.entries.end(), d.trace.entries.begin(),
                          d.trace.entries.end());
  }
  const auto excess = iam::excess_permissions(graph_, role_id, merged);
  if (excess.empty()) return false;
  iam::Role& role = graph_.roles.at(role_id);
  std::erase_if(role.permissions, [&](const iam::Permission& p) {
    return std::find(excess.begin(), excess.end(), p) != excess.end();
  });
  return true;
}

void Simulator::run_until_idle() {
  while (!events_.empty()) {
    // Periodic forensic analysis interleaves with the event stream: it runs
    // after completions/deadlines at the boundary but before new arrivals.
    if (auto_response_ && shield_.config().enabled) {
      const Event& top = events_.top();
      if (next_analysis_ < top.time ||
          (next_analysis_ == top.time && top.kind == EventKind::kArrival)) {
        now_ = std::max(now_, next_analysis_);
        run_analysis(next_analysis_);
        next_analysis_ += analysis_every_ms_;
        continue;
      }
    }
    Event ev = events_.top();
    events_.pop();
    assert(ev.time >= now_);
    now_ = ev.time;
    switch (ev.kind) {
      case EventKind::kArrival:
        process_arrival(ev.request);
        break;
      case EventKind::kCompletion:
        complete_execution(*ev.exec, ev.time);
        break;
      case EventKind::kQueueDeadline: {
        auto it = std::find_if(wait_queue_.begin(), wait_queue_.end(),
                               [&](const QueuedRequest& q) {
                                 return q.request.request_id == ev.deadline_request_id;
                               });
        if (it != wait_queue_.end()) {
          QueuedRequest q = std::move(*it);
          wait_queue_.erase(it);
          finish_rejected(q.request, std::move(q.verdicts),
                          InvocationError::kThrottled, ev.time);
        }
        break;
      }
      case EventKind::kMutation: {
        // Persistence injections target an idle environment: a busy
        // container would be sanitized at its completion before any
        // integrity check could observe the tampering.
        const ContainerInstance* best = nullptr;
        for (const auto& [id, c] : containers_) {
          if (c.function_id != ev.mutation.function_id || c.busy) continue;
          if (best == nullptr || c.last_used_at > best->last_used_at ||
              (c.last_used_at == best->last_used_at &&
               c.container_id < best->container_id)) {
            best = &c;
          }
        }
        if (best != nullptr) {
          inject_persistence(best->container_id);
        } else {
          const auto any = most_recent_container(ev.mutation.function_id);
          if (any.has_value()) inject_persistence(*any);
        }
        break;
      }
      case EventKind::kAnalysis:
        break;  // synthesized inline above
    }
  }
  if (auto_response_ && shield_.config().enabled) {
    run_analysis(now_);
  }
}

void Simulator::process_arrival(const InvocationRequest& req) {
  const Deployed& d = deployed(req.function_id);
  const FunctionSpec& spec = d.versions[d.active_index];
  const shield::ShieldConfig& cfg = shield_.config();
  std::vector<shield::DetectionVerdict> verdicts;

  if (cfg.enabled) {
    if (shield_.is_blocked(req.client_id)) {
      verdicts.push_back({shield::Detector::kRateLimit, 1.0, true, "client_blocked"});
      finish_rejected(req, std::move(verdicts), InvocationError::kThrottled, now_);
      return;
    }
    if (cfg.checks.event) {
      const auto decision =
          shield::validate_event(req, spec.allowed_triggers, cfg.thresholds.event);
      if (!decision.accepted) {
        verdicts.push_back(
            {shield::Detector::kEventValidation, 1.0, true, decision.reason});
        finish_rejected(req, std::move(verdicts), InvocationError::kRejectedByShield,
                        now_);
        return;
      }
    }
    if (cfg.checks.rate_limit) {
      auto& bucket = shield_.bucket(req.client_id);
      const auto decision = shield::rate_limit(bucket, now_, cfg.thresholds.rate,
                                               shield_.is_suspicious(req.client_id));
      if (!decision.allowed) {
        verdicts.push_back({shield::Detector::kRateLimit,
                            static_cast<double>(decision.retry_after_ms), true,
                            "rate_exceeded"});
        finish_rejected(req, std::move(verdicts), InvocationError::kThrottled, now_);
        return;
      }
    }
    if (cfg.checks.anomaly) {
      auto& baseline = shield_.baseline(req.function_id, req.client_id);
      auto verdict = shield::score_invocation(baseline, now_, req.payload_complexity,
                                              cfg.thresholds.z_threshold,
                                              cfg.thresholds.anomaly_warmup);
      shield::observe(baseline, now_, req.payload_complexity);
      if (verdict.flagged) shield_.mark_suspicious(req.client_id);
      verdicts.push_back(std::move(verdict));
    }
    if (cfg.checks.adversarial && spec.model_ref.has_value()) {
      const shield::InputProfile* profile = shield_.profile(*spec.model_ref);
      if (profile != nullptr) {
        const nlohmann::json j = nlohmann::json::parse(req.payload, nullptr, false);
        if (j.is_object() && j.value("op", "") == "predict" && j.contains("x") &&
            j.at("x").is_array()) {
          std::vector<double> x;
          for (const auto& v : j.at("x")) x.push_back(v.get<double>());
          auto verdict = shield::validate_input(*profile, x);
          if (verdict.detector == shield::Detector::kEventValidation) {
            verdicts.push_back(std::move(verdict));
            finish_rejected(req, std::move(verdicts),
                            InvocationError::kRejectedByShield, now_);
            return;
          }
          verdicts.push_back(std::move(verdict));
        }
      }
    }
  }

  const auto acquired = acquire_container(req.function_id, now_);
  if (!acquired.has_value()) {
    wait_queue_.push_back({req, std::move(verdicts), now_});
    Event ev;
    ev.time = now_ + spec.timeout_ms;
    ev.kind = EventKind::kQueueDeadline;
    ev.deadline_request_id = req.request_id;
    push_event(std::move(ev));
    return;
  }
  start_execution_on(req, std::move(verdicts), now_, acquired->first,
                     acquired->second);
}

void Simulator::start_execution(const InvocationRequest& req,
                                std::vector<shield::DetectionVerdict> verdicts,
                                VirtualTime start) {
  const auto acquired = acquire_container(req.function_id, start);
  assert(acquired.has_value());
  start_execution_on(req, std::move(verdicts), start, acquired->first,
                     acquired->second);
}

void Simulator::start_execution_on(const InvocationRequest& req,
                                   std::vector<shield::DetectionVerdict> verdicts,
                                   VirtualTime start, const std::string& container_id,
                                   bool cold) {
  const FunctionSpec& spec = active_spec(req.function_id);
  const shield::ShieldConfig& cfg = shield_.config();
  ContainerInstance& c = containers_.at(container_id);

  auto exec = std::make_shared<PendingExecution>();
  exec->request = req;
  exec->container_id = container_id;
  exec->cold = cold;
  exec->env_digest = c.module_cache_digest;

  if (cfg.enabled && cfg.checks.env) {
    verdicts.push_back(shield::check_env(c, spec.deploy_digest));
  }

  double latency = (cold ? static_cast<double>(spec.cold_init_ms) : 0.0) +
                   static_cast<double>(spec.warm_base_ms) +
                   spec.compute_coeff_ms_per_unit * req.payload_complexity +
                   cfg.cost_per_invocation();
  if (platform_.jitter_ms > 0.0) {
    latency += rng_.uniform(-platform_.jitter_ms, platform_.jitter_ms);
    latency = std::max(latency, 0.0);
  }
  if (latency > static_cast<double>(spec.timeout_ms)) {
    exec->error = InvocationError::kTimeout;
    latency = static_cast<double>(spec.timeout_ms);
  }
  exec->latency_ms = latency;

  run_handler(*exec, c, spec);

  if (cfg.enabled && cfg.checks.extraction && exec->predict_x.has_value()) {
    shield::WindowEntry entry;
    entry.cell = cfg.thresholds.quantizer.cell_of(*exec->predict_x);
    entry.time = start;
    if (const auto* pred = std::get_if<model::Prediction>(&exec->output);
        pred != nullptr && pred->confidences.has_value()) {
      std::vector<double> conf = *pred->confidences;
      std::sort(conf.begin(), conf.end(), std::greater<>());
      entry.top2_gap = conf[0] - conf[1];
      entry.has_gap = true;
    }
    auto& window = shield_.window(req.client_id);
    window.push(entry);
    auto verdict = shield::detect_extraction(window, cfg.thresholds.extraction);
    if (verdict.flagged) shield_.mark_suspicious(req.client_id);
    verdicts.push_back(std::move(verdict));
  }

  exec->verdicts = std::move(verdicts);

  Event ev;
  ev.time = start + static_cast<VirtualTime>(std::ceil(latency));
  ev.kind = EventKind::kCompletion;
  ev.exec = std::move(exec);
  push_event(std::move(ev));
}

void Simulator::run_handler(PendingExecution& exec, ContainerInstance& c,
                            const FunctionSpec& spec) {
  Deployed& d = deployed(spec.function_id);
  const nlohmann::json j = nlohmann::json::parse(exec.request.payload, nullptr, false);
  if (j.is_discarded() || !j.is_object() || !j.contains("op") ||
      !j.at("op").is_string()) {
    if (!exec.error.has_value()) exec.error = InvocationError::kHandlerFault;
    return;
  }
  const std::string op = j.at("op").get<std::string>();
  if (op == "noop") {
    return;
  }
  if (op == "plant") {
    const std::string key = j.value("key", "tmp/leak");
    const std::string value = j.value("value", "");
    c.residual_state[key] = value;
    d.trace.entries.push_back({"storage:Write", key});
    return;
  }
  if (op == "probe") {
    const std::string key = j.value("key", "tmp/leak");
    d.trace.entries.push_back({"storage:Read", key});
    auto it = c.residual_state.find(key);
    exec.output = it != c.residual_state.end() ? "hit:" + it->second
                                               : std::string("miss");
    return;
  }
  if (op == "predict") {
    if (!spec.model_ref.has_value()) {
      if (!exec.error.has_value()) exec.error = InvocationError::kHandlerFault;
      return;
    }
    const model::ModelArtifact* artifact = find_model(*spec.model_ref);
    if (artifact == nullptr || !j.contains("x") || !j.at("x").is_array()) {
      if (!exec.error.has_value()) exec.error = InvocationError::kHandlerFault;
      return;
    }
    std::vector<double> x;
    for (const auto& v : j.at("x")) {
      if (!v.is_number()) {
        if (!exec.error.has_value()) exec.error = InvocationError::kHandlerFault;
        return;
      }
      x.push_back(v.get<double>());
    }
    if (x.size() != artifact->dims) {
      if (!exec.error.has_value()) exec.error = InvocationError::kHandlerFault;
      return;
    }
    const auto mode = j.value("mode", "confidence") == "hard_label"
                          ? model::PredictMode::kHardLabel
                          : model::PredictMode::kConfidence;
    d.trace.entries.push_back({"model:Invoke", "model/" + *spec.model_ref});
    if (!exec.error.has_value()) {
      exec.output = model::predict(*artifact, x, mode);
    }
    exec.predict_x = std::move(x);
    return;
  }
  if (!exec.error.has_value()) exec.error = InvocationError::kHandlerFault;
}

void Simulator::complete_execution(PendingExecution& exec, VirtualTime at) {
  ContainerInstance& c = containers_.at(exec.container_id);
  const FunctionSpec& spec = active_spec(exec.request.function_id);

  c.busy = false;
  c.last_used_at = at;
  ++c.invocation_count;
  --busy_count_;

  InvocationResult res;
  res.request_id = exec.request.request_id;
  res.function_id = exec.request.function_id;
  res.client_id = exec.request.client_id;
  res.latency_ms = exec.latency_ms;
  res.cold_start = exec.cold;
  res.billed_ms = static_cast<std::uint64_t>(std::ceil(exec.latency_ms));
  res.cost_units = static_cast<double>(res.billed_ms) *
                   static_cast<double>(spec.memory_mb) / 1024.0 *
                   platform_.unit_price;
  if (exec.error != InvocationError::kTimeout) {
    res.output = exec.output;
  }
  res.error = exec.error;
  ledger_.charge(spec.tenant_id, res.cost_units);

  emit_record(exec.request, res, exec.verdicts, exec.env_digest,
              exec.container_id, at);
  results_.push_back(std::move(res));

  const shield::ShieldConfig& cfg = shield_.config();
  if (cfg.enabled && cfg.sanitize) {
    shield::sanitize(c, spec.deploy_digest);
  } else if (c.pending_sanitize) {
    shield::sanitize(c, spec.deploy_digest);
  }
  if (c.doomed) destroy_container(exec.container_id);

  drain_queue(at);
}

void Simulator::drain_queue(VirtualTime now) {
  while (!wait_queue_.empty() && busy_count_ < platform_.concurrency_cap) {
    QueuedRequest q = std::move(wait_queue_.front());
    wait_queue_.pop_front();
    start_execution(q.request, std::move(q.verdicts), now);
  }
}

void Simulator::finish_rejected(const InvocationRequest& req,
                                std::vector<shield::DetectionVerdict> verdicts,
                                InvocationError error, VirtualTime at) {
  InvocationResult res;
  res.request_id = req.request_id;
  res.function_id = req.function_id;
  res.client_id = req.client_id;
  res.error = error;
  emit_record(req, res, verdicts, "", "", at);
  results_.push_back(std::move(res));
}

void Simulator::emit_record(const InvocationRequest& req,
                            const InvocationResult& res,
                            const std::vector<shield::DetectionVerdict>& verdicts,
                            const std::string& env_digest,
                            const std::string& container_id, VirtualTime at) {
  if (!shield_.config().enabled) return;
  shield::ForensicRecord rec;
  rec.time_ms = at;
  rec.request_id = req.request_id;
  rec.function_id = req.function_id;
  rec.client_id = req.client_id;
  rec.tenant_id = active_spec(req.function_id).tenant_id;
  rec.trigger = req.trigger;
  rec.cold_start = res.cold_start;
  rec.latency_ms = res.latency_ms;
  rec.cost_units = res.cost_units;
  rec.verdicts = verdicts;
  rec.env_digest = env_digest;
  rec.container_id = container_id;
  if (res.error.has_value()) rec.error = invocation_error_name(*res.error);
  log_.append_record(rec);
}

void Simulator::run_analysis(VirtualTime at) {
  alerts_ = shield::analyze_window(log_.records(), analysis_rules_);
  for (const shield::Alert& alert : alerts_) {
    const std::string subject_key =
        shield::alert_kind_name(alert.kind) + "|" + alert.subject;
    if (alerted_subjects_.count(subject_key) != 0) continue;
    alerted_subjects_.insert(subject_key);
    auto acts = shield::respond(alert, playbook_, *this, log_.records(), at,
                                &applied_action_keys_);
    for (shield::ResponseAction& act : acts) {
      nlohmann::json line;
      line["action_kind"] = shield::action_kind_name(act.kind);
      line["alert_id"] = alert.alert_id;
      line["applied"] = act.applied;
      line["applied_at_ms"] = act.applied_at;
      line["note"] = act.note;
      line["target"] = act.target;
      log_.append_action_line(line.dump());
      actions_.push_back(std::move(act));
    }
  }
}

}  // namespace faasguard::sim
