#include "faasguard/shield/postexec.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace faasguard::shield {

bool ForensicRecord::has_flag(Detector d) const {
  for (const DetectionVerdict& v : verdicts) {
    if (v.detector == d && v.flagged) return true;
  }
  return false;
}

namespace {

void require_finite(double v, const char* field) {
  if (!std::isfinite(v)) {
    throw std::invalid_argument(std::string("forensic record: non-finite ") + field);
  }
}

nlohmann::json verdict_to_json(const DetectionVerdict& v) {
  require_finite(v.score, "verdict score");
  return {{"detector", detector_name(v.detector)},
          {"flagged", v.flagged},
          {"reason", v.reason},
          {"score", v.score}};
}

DetectionVerdict verdict_from_json(const nlohmann::json& j) {
  DetectionVerdict v;
  v.detector = detector_from_name(j.at("detector").get<std::string>());
  v.flagged = j.at("flagged").get<bool>();
  v.reason = j.at("reason").get<std::string>();
  v.score = j.at("score").get<double>();
  return v;
}

}  // namespace

std::string record_to_line(const ForensicRecord& r) {
  require_finite(r.latency_ms, "latency_ms");
  require_finite(r.cost_units, "cost_units");
  // nlohmann::json objects are std::map-backed, so dump() emits keys in
  // lexicographic order; that is the canonical line format.
  nlohmann::json j;
  j["client_id"] = r.client_id;
  j["cold_start"] = r.cold_start;
  j["container_id"] = r.container_id;
  j["cost_units"] = r.cost_units;
  j["env_digest"] = r.env_digest;
  j["error"] = r.error.has_value() ? nlohmann::json(*r.error) : nlohmann::json(nullptr);
  j["function_id"] = r.function_id;
  j["latency_ms"] = r.latency_ms;
  j["request_id"] = r.request_id;
  j["tenant_id"] = r.tenant_id;
  j["time_ms"] = r.time_ms;
  j["trigger"] = sim::trigger_name(r.trigger);
  nlohmann::json verdicts = nlohmann::json::array();
  for (const DetectionVerdict& v : r.verdicts) verdicts.push_back(verdict_to_json(v));
  j["verdicts"] = verdicts;
  return j.dump();
}

ForensicRecord record_from_line(const std::string& line) {
  const nlohmann::json j = nlohmann::json::parse(line);
  if (!j.is_object() || !j.contains("request_id")) {
    throw std::invalid_argument("not an invocation record");
  }
  ForensicRecord r;
  r.time_ms = j.at("time_ms").get<sim::VirtualTime>();
  r.request_id = j.at("request_id").get<std::string>();
  r.function_id = j.at("function_id").get<std::string>();
  r.client_id = j.at("client_id").get<std::string>();
  r.tenant_id = j.at("tenant_id").get<std::string>();
  r.trigger = sim::trigger_from_name(j.at("trigger").get<std::string>());
  r.cold_start = j.at("cold_start").get<bool>();
  r.latency_ms = j.at("latency_ms").get<double>();
  r.cost_units = j.at("cost_units").get<double>();
  r.env_digest = j.at("env_digest").get<std::string>();
  r.container_id = j.at("container_id").get<std::string>();
  if (!j.at("error").is_null()) r.error = j.at("error").get<std::string>();
  for (const auto& jv : j.at("verdicts")) r.verdicts.push_back(verdict_from_json(jv));
  return r;
}

void ForensicLog::append_record(const ForensicRecord& r) {
  lines_.push_back(record_to_line(r));
  records_.push_back(r);
}

std::string ForensicLog::to_bytes() const {
  std::string out;
  for (const std::string& line : lines_) {
    out += line;
    out += '\n';
  }
  return out;
}

void ForensicLog::write_to(const std::string& path) const {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open log file " + path);
  const std::string bytes = to_bytes();
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

std::string alert_kind_name(AlertKind k) {
  switch (k) {
    case AlertKind::kExtractionCampaign: return "extraction_campaign";
    case AlertKind::kCostSurge: return "cost_surge";
    case AlertKind::kIntegrityBreach: return "integrity_breach";
    case AlertKind::kAnomalyBurst: return "anomaly_burst";
  }
  return "extraction_campaign";
}

std::string action_kind_name(ActionKind k) {
  switch (k) {
    case ActionKind::kBlockClient: return "block_client";
    case ActionKind::kTightenRateLimit: return "tighten_rate_limit";
    case ActionKind::kRevokeExcessPermissions: return "revoke_excess_permissions";
    case ActionKind::kRollbackFunction: return "rollback_function";
    case ActionKind::kQuarantineContainer: return "quarantine_container";
  }
  return "block_client";
}

std::vector<Alert> analyze_window(std::span<const ForensicRecord> slice,
                                  const AnalysisRules& rules) {
  for (std::size_t i = 1; i < slice.size(); ++i) {
    if (slice[i].time_ms < slice[i - 1].time_ms) {
      throw std::invalid_argument("analyze_window: slice must be time-ordered");
    }
  }
  std::vector<Alert> alerts;
  if (slice.empty()) return alerts;
  const sim::VirtualTime start = slice.front().time_ms;
  const sim::VirtualTime end = slice.back().time_ms;
  std::size_t seq = 0;
  auto next_id = [&](AlertKind kind, const std::string& subject) {
    return "a" + std::to_string(seq++) + "-" + alert_kind_name(kind) + "-" + subject;
  };

  // integrity_breach: one alert per flagged env verdict.
  for (const ForensicRecord& r : slice) {
    if (r.has_flag(Detector::kEnvIntegrity)) {
      Alert a;
      a.kind = AlertKind::kIntegrityBreach;
      a.subject = r.container_id;
      a.window_start = r.time_ms;
      a.window_end = r.time_ms;
      a.evidence = {r.request_id};
      a.alert_id = next_id(a.kind, a.subject);
      alerts.push_back(std::move(a));
    }
  }

  // extraction_campaign / anomaly_burst: per-client flagged verdict counts.
  std::map<std::string, std::vector<const ForensicRecord*>> extraction_hits;
  std::map<std::string, std::vector<const ForensicRecord*>> anomaly_hits;
  for (const ForensicRecord& r : slice) {
    if (r.has_flag(Detector::kExtraction)) extraction_hits[r.client_id].push_back(&r);
    if (r.has_flag(Detector::kAnomaly)) anomaly_hits[r.client_id].push_back(&r);
  }
  for (const auto& [client, hits] : extraction_hits) {
    if (hits.size() < rules.extraction_k) continue;
    Alert a;
    a.kind = AlertKind::kExtractionCampaign;
    a.subject = client;
    a.window_start = hits.front()->time_ms;
    a.window_end = hits.back()->time_ms;
    for (const auto* r : hits) a.evidence.push_back(r->request_id);
    a.alert_id = next_id(a.kind, a.subject);
    alerts.push_back(std::move(a));
  }
  for (const auto& [client, hits] : anomaly_hits) {
    if (hits.size() <= rules.anomaly_burst_n) continue;
    Alert a;
    a.kind = AlertKind::kAnomalyBurst;
    a.subject = client;
    a.window_start = hits.front()->time_ms;
    a.window_end = hits.back()->time_ms;
    for (const auto* r : hits) a.evidence.push_back(r->request_id);
    a.alert_id = next_id(a.kind, a.subject);
    alerts.push_back(std::move(a));
  }

  // cost_surge: bucket per-tenant cost over fixed intervals; a bucket whose
  // cost exceeds surge_factor x the trailing mean of earlier buckets surges.
  // Consecutive-or-not surging buckets merge into one alert per tenant.
  std::map<std::string, std::map<std::uint64_t, std::vector<const ForensicRecord*>>> by_tenant;
  for (const ForensicRecord& r : slice) {
    const std::uint64_t bucket = (r.time_ms - start) / rules.surge_bucket_ms;
    by_tenant[r.tenant_id][bucket].push_back(&r);
  }
  for (const auto& [tenant, buckets] : by_tenant) {
    double trailing_sum = 0.0;
    std::size_t trailing_n = 0;
    std::vector<const ForensicRecord*> evidence;
    sim::VirtualTime w_start = 0, w_end = 0;
    bool surged = false;
    const std::uint64_t last_bucket = buckets.rbegin()->first;
    for (std::uint64_t b = 0; b <= last_bucket; ++b) {
      auto it = buckets.find(b);
      double cost = 0.0;
      if (it != buckets.end()) {
        for (const auto* r : it->second) cost += r->cost_units;
      }
      const double baseline = trailing_n > 0 ? trailing_sum / trailing_n : 0.0;
      if (trailing_n > 0 && baseline > 0.0 && cost > rules.surge_factor * baseline) {
        if (it != buckets.end()) {
          if (!surged) {
            w_start = it->second.front()->time_ms;
            surged = true;
          }
          w_end = it->second.back()->time_ms;
          for (const auto* r : it->second) evidence.push_back(r);
        }
      } else {
        trailing_sum += cost;
        ++trailing_n;
      }
    }
    if (surged && !evidence.empty()) {
      Alert a;
      a.kind = AlertKind::kCostSurge;
      a.subject = tenant;
      a.window_start = w_start;
      a.window_end = w_end;
      for (const auto* r : evidence) a.evidence.push_back(r->request_id);
      a.alert_id = next_id(a.kind, a.subject);
      alerts.push_back(std::move(a));
    }
  }

  // Deterministic output order.
  std::sort(alerts.begin(), alerts.end(), [](const Alert& x, const Alert& y) {
    if (x.window_start != y.window_start) return x.window_start < y.window_start;
    return x.alert_id < y.alert_id;
  });
  (void)end;
  return alerts;
}

Playbook default_playbook() {
  return {
      {AlertKind::kExtractionCampaign,
       {ActionKind::kTightenRateLimit, ActionKind::kBlockClient}},
      {AlertKind::kCostSurge, {ActionKind::kTightenRateLimit}},
      {AlertKind::kIntegrityBreach,
       {ActionKind::kQuarantineContainer, ActionKind::kRollbackFunction}},
      {AlertKind::kAnomalyBurst, {ActionKind::kTightenRateLimit}},
  };
}

namespace {

// Targets an action operates on, resolved from the alert and its evidence.
std::vector<std::string> resolve_targets(ActionKind kind, const Alert& alert,
                                         std::span<const ForensicRecord> slice) {
  std::set<std::string> targets;
  auto evidence_records = [&]() {
    std::vector<const ForensicRecord*> out;
    std::set<std::string> ids(alert.evidence.begin(), alert.evidence.end());
    for (const ForensicRecord& r : slice) {
      if (ids.count(r.request_id) != 0) out.push_back(&r);
    }
    return out;
  };
  switch (kind) {
    case ActionKind::kBlockClient:
    case ActionKind::kTightenRateLimit:
      if (alert.kind == AlertKind::kExtractionCampaign ||
          alert.kind == AlertKind::kAnomalyBurst) {
        targets.insert(alert.subject);
      } else {
        for (const auto* r : evidence_records()) targets.insert(r->client_id);
      }
      break;
    case ActionKind::kQuarantineContainer:
      if (alert.kind == AlertKind::kIntegrityBreach) {
        targets.insert(alert.subject);
      } else {
        for (const auto* r : evidence_records()) {
          if (!r->container_id.empty()) targets.insert(r->container_id);
        }
      }
      break;
    case ActionKind::kRollbackFunction:
      for (const auto* r : evidence_records()) targets.insert(r->function_id);
      break;
    case ActionKind::kRevokeExcessPermissions:
      for (const auto* r : evidence_records()) targets.insert(r->function_id);
      break;
  }
  return {targets.begin(), targets.end()};
}

}  // namespace

std::vector<ResponseAction> respond(const Alert& alert, const Playbook& playbook,
                                    ResponseInterface& sim,
                                    std::span<const ForensicRecord> slice,
                                    sim::VirtualTime now,
                                    std::set<std::string>* applied_keys) {
  std::vector<ResponseAction> actions;
  auto it = playbook.find(alert.kind);
  if (it == playbook.end()) return actions;
  for (ActionKind kind : it->second) {
    for (const std::string& target : resolve_targets(kind, alert, slice)) {
      const std::string key =
          alert.alert_id + "|" + action_kind_name(kind) + "|" + target;
      if (applied_keys != nullptr && !applied_keys->insert(key).second) {
        continue;  // same alert already handled
      }
      ResponseAction act{kind, target, now, false, ""};
      switch (kind) {
        case ActionKind::kBlockClient:
          act.applied = sim.block_client(target);
          break;
        case ActionKind::kTightenRateLimit:
          act.applied = sim.tighten_rate_limit(target);
          break;
        case ActionKind::kQuarantineContainer:
          act.applied = sim.quarantine_container(target);
          break;
        case ActionKind::kRollbackFunction: {
          std::string note;
          act.applied = sim.rollback_function(target, &note);
          act.note = note;
          break;
        }
        case ActionKind::kRevokeExcessPermissions:
          act.applied = sim.revoke_excess_permissions(target);
          break;
      }
      actions.push_back(std::move(act));
    }
  }
  return actions;
}

QueryResult query_log(const std::string& log_text, const LogFilter& filter) {
  QueryResult result;
  std::istringstream in(log_text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    ForensicRecord r;
    try {
      const nlohmann::json j = nlohmann::json::parse(line);
      if (!j.is_object()) throw std::invalid_argument("not an object");
      if (!j.contains("request_id")) continue;  // action line
      r = record_from_line(line);
    } catch (const std::exception& e) {
      result.errors.push_back({line_no, e.what()});
      continue;
    }
    if (filter.client_id && r.client_id != *filter.client_id) continue;
    if (filter.function_id && r.function_id != *filter.function_id) continue;
    if (filter.kind) {
      bool hit = false;
      for (const DetectionVerdict& v : r.verdicts) {
        if (v.flagged && detector_name(v.detector) == *filter.kind) {
          hit = true;
          break;
        }
      }
      if (!hit) continue;
    }
    if (filter.from_ms && r.time_ms < *filter.from_ms) continue;
    if (filter.to_ms && r.time_ms > *filter.to_ms) continue;
    result.records.push_back(std::move(r));
  }
  std::stable_sort(result.records.begin(), result.records.end(),
                   [](const ForensicRecord& a, const ForensicRecord& b) {
                     if (a.time_ms != b.time_ms) return a.time_ms < b.time_ms;
                     return a.request_id < b.request_id;
                   });
  return result;
}

}  // namespace faasguard::shield
