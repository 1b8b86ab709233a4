#include "faasguard/attack/attack.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include <json.hpp>

#include "faasguard/rng.hpp"
#include "faasguard/shield/predeploy.hpp"

namespace faasguard::attack {

namespace {

std::string request_id_of(const std::string& campaign_id, std::size_t idx) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "-r%05zu", idx);
  return campaign_id + buf;
}

std::string predict_payload(const std::vector<double>& x, const char* mode) {
  nlohmann::json j;
  j["op"] = "predict";
  j["x"] = x;
  j["mode"] = mode;
  return j.dump();
}

}  // namespace

std::vector<std::string> AttackCampaign::request_ids() const {
  std::vector<std::string> ids;
  ids.reserve(schedule.size());
  for (const auto& [t, req] : schedule) ids.push_back(req.request_id);
  return ids;
}

TimingClassification classify_timings(const std::vector<TimingObservation>& obs,
                                      double cold_mean_ms, double warm_mean_ms) {
  if (cold_mean_ms <= warm_mean_ms) {
    throw std::invalid_argument("classify_timings: cold mean must exceed warm mean");
  }
  const double threshold = (cold_mean_ms + warm_mean_ms) / 2.0;
  TimingClassification out;
  std::size_t correct = 0;
  for (const TimingObservation& o : obs) {
    const bool cold = o.latency_ms >= threshold;
    out.labels.push_back(cold);
    if (cold == o.true_cold) ++correct;
  }
  out.accuracy = obs.empty() ? 0.0
                             : static_cast<double>(correct) /
                                   static_cast<double>(obs.size());
  return out;
}

AttackCampaign gen_cold_probe(const std::string& function_id,
                              const ColdProbeParams& params, std::uint64_t seed) {
  if (params.n < 2) throw std::invalid_argument("gen_cold_probe: n must be >= 2");
  AttackCampaign c;
  c.kind = sim::AttackKind::kColdProbe;
  c.campaign_id = "cold-" + std::to_string(seed);
  c.seed = seed;
  sim::VirtualTime t = params.start_ms;
  for (std::size_t i = 0; i < params.n; ++i) {
    sim::InvocationRequest req;
    req.request_id = request_id_of(c.campaign_id, i);
    req.function_id = function_id;
    req.client_id = "atk-cold-" + std::to_string(seed);
    req.trigger = sim::Trigger::kHttp;
    req.payload = R"({"op":"noop"})";
    req.payload_complexity = 0.0;
    req.arrival_time = t;
    req.ground_truth = sim::GroundTruth::attack(sim::AttackKind::kColdProbe);
    c.schedule.emplace_back(t, std::move(req));
    if (params.oscillate.has_value()) {
      t += (i % 2 == 0) ? params.oscillate->first : params.oscillate->second;
    } else {
      t += params.spacing_ms;
    }
  }
  c.params["n"] = static_cast<double>(params.n);
  return c;
}

AttackCampaign gen_exhaustion(const std::string& function_id,
                              std::size_t concurrency, sim::VirtualTime at,
                              double complexity, std::uint64_t seed) {
  if (concurrency < 1) {
    throw std::invalid_argument("gen_exhaustion: concurrency must be >= 1");
  }
  AttackCampaign c;
  c.kind = sim::AttackKind::kExhaustion;
  c.campaign_id = "exhaust-" + std::to_string(seed);
  c.seed = seed;
  for (std::size_t i = 0; i < concurrency; ++i) {
    sim::InvocationRequest req;
    req.request_id = request_id_of(c.campaign_id, i);
    req.function_id = function_id;
    req.client_id = "atk-exhaust-" + std::to_string(seed);
    req.payload = R"({"op":"noop"})";
    req.payload_complexity = complexity;
    req.arrival_time = at;
    req.ground_truth = sim::GroundTruth::attack(sim::AttackKind::kExhaustion);
    c.schedule.emplace_back(at, std::move(req));
  }
  c.params["concurrency"] = static_cast<double>(concurrency);
  return c;
}

AttackCampaign gen_reuse_leak(const std::string& function_id,
                              const std::string& marker,
                              const std::string& planter_client,
                              const std::string& prober_client,
                              sim::VirtualTime start_ms, sim::VirtualTime gap_ms,
                              std::uint64_t seed) {
  if (marker.empty()) {
    throw std::invalid_argument("gen_reuse_leak: marker must be non-empty");
  }
  AttackCampaign c;
  c.kind = sim::AttackKind::kReuseLeak;
  c.campaign_id = "leak-" + std::to_string(seed);
  c.seed = seed;

  nlohmann::json plant{{"op", "plant"}, {"key", "tmp/leak"}, {"value", marker}};
  sim::InvocationRequest planter;
  planter.request_id = request_id_of(c.campaign_id, 0);
  planter.function_id = function_id;
  planter.client_id = planter_client;
  planter.payload = plant.dump();
  planter.arrival_time = start_ms;
  planter.ground_truth = sim::GroundTruth::attack(sim::AttackKind::kReuseLeak);
  c.schedule.emplace_back(start_ms, std::move(planter));

  nlohmann::json probe{{"op", "probe"}, {"key", "tmp/leak"}};
  sim::InvocationRequest prober;
  prober.request_id = request_id_of(c.campaign_id, 1);
  prober.function_id = function_id;
  prober.client_id = prober_client;
  prober.payload = probe.dump();
  prober.arrival_time = start_ms + gap_ms;
  prober.ground_truth = sim::GroundTruth::attack(sim::AttackKind::kReuseLeak);
  c.schedule.emplace_back(start_ms + gap_ms, std::move(prober));
  return c;
}

ExtractionCampaign gen_extraction(const model::ModelArtifact& target,
                                  const std::string& function_id,
                                  const ExtractionParams& params,
                                  std::uint64_t seed) {
  if (params.budget < 10) {
    throw std::invalid_argument("gen_extraction: budget must be >= 10");
  }
  Rng rng(seed);
  ExtractionCampaign out;
  AttackCampaign& c = out.campaign;
  c.kind = sim::AttackKind::kExtraction;
  c.campaign_id = "extract-" + std::to_string(seed);
  c.seed = seed;
  out.transcript.budget = params.budget;

  const std::size_t d = target.dims;
  std::vector<std::vector<double>> queries;
  queries.reserve(params.budget);

  auto random_point = [&]() {
    std::vector<double> x(d);
    for (double& v : x) v = rng.uniform(params.box_lo, params.box_hi);
    return x;
  };
  auto oracle = [&](const std::vector<double>& x) {
    return model::predict(target, x, model::PredictMode::kConfidence);
  };

  if (params.strategy == ExtractionStrategy::kUniformRandom) {
    while (queries.size() < params.budget) queries.push_back(random_point());
  } else {
    // Bisection between differently-labeled endpoints yields near-boundary
    // probes; random draws keep discovering fresh pairs.
    std::optional<std::pair<std::vector<double>, int>> last_by_label[2];
    while (queries.size() < params.budget) {
      auto x = random_point();
      const int label = oracle(x).label == 0 ? 0 : 1;
      queries.push_back(x);
      last_by_label[label] = {x, label};
      if (queries.size() >= params.budget) break;
      if (last_by_label[0].has_value() && last_by_label[1].has_value()) {
        std::vector<double> a = last_by_label[0]->first;
        std::vector<double> b = last_by_label[1]->first;
        for (std::size_t step = 0;
             step < params.bisect_depth && queries.size() < params.budget; ++step) {
          std::vector<double> mid(d);
          for (std::size_t j = 0; j < d; ++j) mid[j] = (a[j] + b[j]) / 2.0;
          const int mid_label = oracle(mid).label == 0 ? 0 : 1;
          queries.push_back(mid);
          if (mid_label == 0) {
            a = mid;
          } else {
            b = mid;
          }
        }
      }
    }
  }

  const double interval_ms = 1000.0 / params.rate_per_s;
  for (std::size_t i = 0; i < queries.size(); ++i) {
    const sim::VirtualTime t =
        params.start_ms +
        static_cast<sim::VirtualTime>(std::llround(interval_ms * double(i)));
    sim::InvocationRequest req;
    req.request_id = request_id_of(c.campaign_id, i);
    req.function_id = function_id;
    req.client_id = "atk-extract-" + std::to_string(seed);
    req.payload = predict_payload(queries[i], "confidence");
    req.payload_complexity = 1.0;
    req.arrival_time = t;
    req.ground_truth = sim::GroundTruth::attack(sim::AttackKind::kExtraction);
    c.schedule.emplace_back(t, std::move(req));
    out.transcript.entries.emplace_back(queries[i], oracle(queries[i]));
  }
  c.params["budget"] = static_cast<double>(params.budget);
  return out;
}

SubstituteFit fit_substitute(const ExtractionTranscript& transcript,
                             std::size_t dims, std::size_t classes,
                             std::size_t epochs, double learning_rate) {
  if (transcript.entries.empty()) {
    throw std::invalid_argument("fit_substitute: transcript must be non-empty");
  }
  std::set<int> seen;
  for (const auto& [x, pred] : transcript.entries) seen.insert(pred.label);

  SubstituteFit fit;
  if (seen.size() < 2) {
    // Constant classifier on the single observed class.
    fit.degenerate = true;
    fit.artifact.artifact_id = "substitute-degenerate";
    fit.artifact.classes = classes;
    fit.artifact.dims = dims;
    fit.artifact.weights.assign(classes * dims, 0.0);
    fit.artifact.bias.assign(classes, 0.0);
    fit.artifact.bias[static_cast<std::size_t>(*seen.begin())] = 1.0;
    fit.artifact.digest = model::compute_digest(fit.artifact);
    return fit;
  }

  model::Dataset data;
  data.dims = dims;
  data.classes = classes;
  data.gen_seed = 0;
  data.points.reserve(transcript.entries.size() * dims);
  for (const auto& [x, pred] : transcript.entries) {
    data.points.insert(data.points.end(), x.begin(), x.end());
    data.labels.push_back(pred.label);
  }
  data.member_count = data.labels.size();
  fit.artifact = model::train(data, epochs, learning_rate, 0);
  fit.artifact.artifact_id = "substitute";
  fit.artifact.digest = model::compute_digest(fit.artifact);
  return fit;
}

double agreement(const model::ModelArtifact& substitute,
                 const model::ModelArtifact& target,
                 const std::vector<std::vector<double>>& probes) {
  if (probes.empty()) {
    throw std::invalid_argument("agreement: probe set must be non-empty");
  }
  std::size_t match = 0;
  for (const auto& x : probes) {
    const int a = model::predict(substitute, x, model::PredictMode::kHardLabel).label;
    const int b = model::predict(target, x, model::PredictMode::kHardLabel).label;
    if (a == b) ++match;
  }
  return static_cast<double>(match) / static_cast<double>(probes.size());
}

std::vector<std::vector<double>> make_probe_set(std::size_t dims, std::size_t n,
                                                std::uint64_t seed, double lo,
                                                double hi) {
  Rng rng(seed);
  std::vector<std::vector<double>> probes(n, std::vector<double>(dims));
  for (auto& x : probes) {
    for (double& v : x) v = rng.uniform(lo, hi);
  }
  return probes;
}

AdversarialResult gen_adversarial(const model::ModelArtifact& m,
                                  std::span<const double> x, double epsilon) {
  if (m.classes != 2) {
    throw std::invalid_argument("gen_adversarial: binary models only");
  }
  if (epsilon <= 0.0) {
    throw std::invalid_argument("gen_adversarial: epsilon must be positive");
  }
  AdversarialResult out;
  out.x_prime.assign(x.begin(), x.end());

  double score = m.bias[0] - m.bias[1];
  std::vector<double> w(m.dims);
  bool any_nonzero = false;
  for (std::size_t j = 0; j < m.dims; ++j) {
    w[j] = m.weight_at(0, j) - m.weight_at(1, j);
    score += w[j] * x[j];
    if (w[j] != 0.0) any_nonzero = true;
  }
  if (!any_nonzero) {
    out.reason = "zero_w";
    return out;
  }
  // Move class-0 points (score > 0) down, class-1 points up.
  const double orientation = score > 0.0 ? -1.0 : 1.0;
  for (std::size_t j = 0; j < m.dims; ++j) {
    const double s = w[j] > 0.0 ? 1.0 : (w[j] < 0.0 ? -1.0 : 0.0);
    out.x_prime[j] += orientation * epsilon * s;
  }
  const int before = model::predict(m, x, model::PredictMode::kHardLabel).label;
  const int after = model::predict(m, out.x_prime, model::PredictMode::kHardLabel).label;
  out.success = before != after;
  return out;
}

MembershipGuess membership_guess(const model::Prediction& prediction, double tau) {
  if (!prediction.confidences.has_value()) throw MembershipError();
  const double top =
      *std::max_element(prediction.confidences->begin(), prediction.confidences->end());
  return top > tau ? MembershipGuess::kMember : MembershipGuess::kNonMember;
}

double membership_advantage(const model::ModelArtifact& m,
                            const model::Dataset& data) {
  std::vector<double> member_conf, non_member_conf;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto pred = model::predict(m, data.point(i), model::PredictMode::kConfidence);
    const double top =
        *std::max_element(pred.confidences->begin(), pred.confidences->end());
    if (i < data.member_count) {
      member_conf.push_back(top);
    } else {
      non_member_conf.push_back(top);
    }
  }
  double best = 0.0;
  for (int t = 0; t <= 100; ++t) {
    const double tau = static_cast<double>(t) / 100.0;
    const auto frac_above = [&](const std::vector<double>& v) {
      if (v.empty()) return 0.0;
      std::size_t n = 0;
      for (double c : v) {
        if (c > tau) ++n;
      }
      return static_cast<double>(n) / static_cast<double>(v.size());
    };
    best = std::max(best, frac_above(member_conf) - frac_above(non_member_conf));
  }
  return best;
}

AttackCampaign gen_denial_of_wallet(const std::string& function_id,
                                    std::size_t n, double complexity,
                                    double rate_per_s, sim::VirtualTime start_ms,
                                    std::uint64_t seed) {
  AttackCampaign c;
  c.kind = sim::AttackKind::kDenialOfWallet;
  c.campaign_id = "dow-" + std::to_string(seed);
  c.seed = seed;
  const double interval_ms = 1000.0 / rate_per_s;
  for (std::size_t i = 0; i < n; ++i) {
    const sim::VirtualTime t =
        start_ms + static_cast<sim::VirtualTime>(std::llround(interval_ms * double(i)));
    sim::InvocationRequest req;
    req.request_id = request_id_of(c.campaign_id, i);
    req.function_id = function_id;
    req.client_id = "atk-dow-" + std::to_string(seed);
    req.payload = R"({"op":"noop"})";
    req.payload_complexity = complexity;
    req.arrival_time = t;
    req.ground_truth = sim::GroundTruth::attack(sim::AttackKind::kDenialOfWallet);
    c.schedule.emplace_back(t, std::move(req));
  }
  c.params["n"] = static_cast<double>(n);
  c.params["complexity"] = complexity;
  return c;
}

std::string event_variant_name(EventVariant v) {
  switch (v) {
    case EventVariant::kOversizedPayload: return "oversized_payload";
    case EventVariant::kWrongTriggerType: return "wrong_trigger_type";
    case EventVariant::kMalformedStructure: return "malformed_structure";
    case EventVariant::kNestedBomb: return "nested_bomb";
  }
  return "oversized_payload";
}

AttackCampaign gen_event_injection(const std::string& function_id,
                                   const std::vector<EventVariant>& variants,
                                   sim::VirtualTime start_ms,
                                   std::size_t max_payload_bytes,
                                   bool include_control, std::uint64_t seed) {
  if (variants.empty()) {
    throw std::invalid_argument("gen_event_injection: variants must be non-empty");
  }
  AttackCampaign c;
  c.kind = sim::AttackKind::kEventInjection;
  c.campaign_id = "inject-" + std::to_string(seed);
  c.seed = seed;
  sim::VirtualTime t = start_ms;
  std::size_t idx = 0;
  for (EventVariant v : variants) {
    sim::InvocationRequest req;
    req.request_id = request_id_of(c.campaign_id, idx++);
    req.function_id = function_id;
    req.client_id = "atk-inject-" + std::to_string(seed);
    req.trigger = sim::Trigger::kHttp;
    req.arrival_time = t;
    req.ground_truth = sim::GroundTruth::attack(sim::AttackKind::kEventInjection);
    switch (v) {
      case EventVariant::kOversizedPayload: {
        nlohmann::json j{{"op", "noop"}};
        std::string payload = j.dump();
        payload.pop_back();  // reopen the object
        payload += ",\"pad\":\"";
        payload.append(max_payload_bytes + 1 - payload.size() - 2, 'A');
        payload += "\"}";
        req.payload = payload;
        break;
      }
      case EventVariant::kWrongTriggerType:
        req.trigger = sim::Trigger::kQueue;
        req.payload = R"({"op":"noop"})";
        break;
      case EventVariant::kMalformedStructure:
        req.payload = R"({"op": )";
        break;
      case EventVariant::kNestedBomb: {
        std::string payload = R"({"op":"noop","bomb":)";
        for (int i = 0; i < 40; ++i) payload += '[';
        payload += '1';
        for (int i = 0; i < 40; ++i) payload += ']';
        payload += '}';
        req.payload = payload;
        break;
      }
    }
    c.schedule.emplace_back(t, std::move(req));
    t += 100;
  }
  if (include_control) {
    sim::InvocationRequest req;
    req.request_id = request_id_of(c.campaign_id, idx++);
    req.function_id = function_id;
    req.client_id = "atk-inject-" + std::to_string(seed);
    req.payload = R"({"op":"noop"})";
    req.arrival_time = t;
    req.ground_truth = sim::GroundTruth::benign();
    c.schedule.emplace_back(t, std::move(req));
  }
  return c;
}

iam::PermissionGraph minimize_graph(
    const iam::PermissionGraph& graph,
    const std::map<std::string, iam::AccessTrace>& traces) {
  iam::PermissionGraph out;
  for (const auto& [id, role] : graph.roles) {
    iam::Role r = role;
    auto it = traces.find(id);
    if (it != traces.end()) {
      const iam::Role least = shield::generate_policy(it->second, id);
      r.permissions = least.permissions;
      r.assumable_by.clear();
    }
    out.roles.emplace(id, std::move(r));
  }
  return out;
}

RoleChainReport gen_role_chain(
    const iam::PermissionGraph& graph, const std::string& start_role,
    const iam::Permission& target,
    const std::map<std::string, iam::AccessTrace>& traces) {
  RoleChainReport report;
  report.paths_before = iam::find_escalations(graph, start_role, target);
  const iam::PermissionGraph minimized = minimize_graph(graph, traces);
  report.paths_after = iam::find_escalations(minimized, start_role, target);
  return report;
}

AttackCampaign gen_persistence(const std::string& function_id,
                               sim::VirtualTime start_ms, sim::VirtualTime gap_ms,
                               std::uint64_t seed) {
  AttackCampaign c;
  c.kind = sim::AttackKind::kPersistence;
  c.campaign_id = "persist-" + std::to_string(seed);
  c.seed = seed;

  sim::InvocationRequest warmup;
  warmup.request_id = request_id_of(c.campaign_id, 0);
  warmup.function_id = function_id;
  warmup.client_id = "atk-persist-" + std::to_string(seed);
  warmup.payload = R"({"op":"noop"})";
  warmup.arrival_time = start_ms;
  warmup.ground_truth = sim::GroundTruth::attack(sim::AttackKind::kPersistence);
  c.schedule.emplace_back(start_ms, std::move(warmup));

  c.mutations.push_back({start_ms + gap_ms, function_id});

  sim::InvocationRequest probe;
  probe.request_id = request_id_of(c.campaign_id, 1);
  probe.function_id = function_id;
  probe.client_id = "atk-persist-" + std::to_string(seed);
  probe.payload = R"({"op":"noop"})";
  probe.arrival_time = start_ms + 2 * gap_ms;
  probe.ground_truth = sim::GroundTruth::attack(sim::AttackKind::kPersistence);
  c.schedule.emplace_back(start_ms + 2 * gap_ms, std::move(probe));
  return c;
}

}  // namespace faasguard::attack
