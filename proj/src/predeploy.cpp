#include "faasguard/shield/predeploy.hpp"

#include <algorithm>
#include <deque>
#include <stdexcept>

#include <json.hpp>

namespace faasguard::shield {

std::string Version::str() const {
  return std::to_string(major) + "." + std::to_string(minor) + "." +
         std::to_string(patch);
}

Version Version::parse(const std::string& text) {
  Version v;
  const auto first = text.find('.');
  const auto second = text.find('.', first + 1);
  if (first == std::string::npos || second == std::string::npos) {
    throw std::invalid_argument("bad version triple: " + text);
  }
  v.major = std::stoi(text.substr(0, first));
  v.minor = std::stoi(text.substr(first + 1, second - first - 1));
  v.patch = std::stoi(text.substr(second + 1));
  return v;
}

std::string severity_name(Severity s) {
  switch (s) {
    case Severity::kLow: return "low";
    case Severity::kMedium: return "medium";
    case Severity::kHigh: return "high";
    case Severity::kCritical: return "critical";
  }
  return "low";
}

Severity severity_from_name(const std::string& name) {
  if (name == "low") return Severity::kLow;
  if (name == "medium") return Severity::kMedium;
  if (name == "high") return Severity::kHigh;
  if (name == "critical") return Severity::kCritical;
  throw std::invalid_argument("unknown severity: " + name);
}

std::string finding_kind_name(FindingKind k) {
  switch (k) {
    case FindingKind::kKnownVuln: return "known_vuln";
    case FindingKind::kTyposquatSuspect: return "typosquat_suspect";
    case FindingKind::kUnresolvedPackage: return "unresolved_package";
  }
  return "known_vuln";
}

std::size_t levenshtein(const std::string& a, const std::string& b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

namespace {

std::string ref_str(const PackageRef& p) {
  return p.first + "@" + p.second.str();
}

// Defaults for findings that carry no advisory severity.
constexpr Severity kTyposquatSeverity = Severity::kHigh;
constexpr Severity kUnresolvedSeverity = Severity::kMedium;

}  // namespace

ScanReport scan_dependencies(const std::vector<PackageRef>& manifest,
                             const Registry& registry, const VulnDb& vulndb,
                             int popular_distance) {
  ScanReport report;

  // BFS over the dependency graph from the manifest roots; first-visit
  // parents give a deterministic shortest via_path per package.
  std::map<PackageRef, PackageRef> parent;
  std::set<PackageRef> visited;
  std::set<PackageRef> unresolved;
  std::deque<PackageRef> frontier;

  for (const PackageRef& root : manifest) {
    if (visited.insert(root).second) frontier.push_back(root);
  }
  while (!frontier.empty()) {
    const PackageRef pkg = frontier.front();
    frontier.pop_front();
    auto it = registry.packages.find(pkg);
    if (it == registry.packages.end()) {
      unresolved.insert(pkg);
      continue;
    }
    for (const PackageRef& dep : it->second.dependencies) {
      if (visited.insert(dep).second) {
        parent.emplace(dep, pkg);
        frontier.push_back(dep);
      } else {
        // Re-reaching a visited package: record the edge as cycle metadata
        // when it closes a loop back onto the current path ancestry.
        PackageRef walk = pkg;
        bool closes = (dep == pkg);
        while (!closes) {
          auto pit = parent.find(walk);
          if (pit == parent.end()) break;
          walk = pit->second;
          closes = (walk == dep);
        }
        if (closes) {
          report.cycle_edges.push_back(ref_str(pkg) + " -> " + ref_str(dep));
        }
      }
    }
  }

  auto via_path_of = [&](const PackageRef& pkg) {
    std::vector<PackageRef> path{pkg};
    PackageRef walk = pkg;
    while (true) {
      auto it = parent.find(walk);
      if (it == parent.end()) break;
      walk = it->second;
      path.push_back(walk);
    }
    std::reverse(path.begin(), path.end());
    return path;
  };

  for (const PackageRef& pkg : visited) {
    if (unresolved.count(pkg) != 0) {
      report.findings.push_back({FindingKind::kUnresolvedPackage, pkg,
                                 std::nullopt, kUnresolvedSeverity,
                                 via_path_of(pkg)});
      continue;
    }
    for (const Advisory& adv : vulndb.entries) {
      if (adv.package_name == pkg.first && adv.affected_min <= pkg.second &&
          pkg.second < adv.affected_max) {
        report.findings.push_back({FindingKind::kKnownVuln, pkg,
                                   adv.advisory_id, adv.severity,
                                   via_path_of(pkg)});
      }
    }
    if (registry.popular.count(pkg.first) == 0) {
      for (const std::string& pop : registry.popular) {
        if (levenshtein(pkg.first, pop) <=
            static_cast<std::size_t>(popular_distance)) {
          report.findings.push_back({FindingKind::kTyposquatSuspect, pkg,
                                     std::nullopt, kTyposquatSeverity,
                                     via_path_of(pkg)});
          break;
        }
      }
    }
  }

  std::sort(report.findings.begin(), report.findings.end(),
            [](const ScanFinding& a, const ScanFinding& b) {
              if (a.severity != b.severity) return a.severity > b.severity;
              if (a.package != b.package) return a.package < b.package;
              return a.advisory_id.value_or("") < b.advisory_id.value_or("");
            });
  std::sort(report.cycle_edges.begin(), report.cycle_edges.end());
  return report;
}

ModelVerdict verify_model(const model::ModelArtifact& artifact,
                          const TrustStore& store, VerifyMode mode) {
  if (mode == VerifyMode::kDigestPin && store.trusted_model_digests.empty()) {
    throw TrustStoreError("verification enabled with empty model digest store");
  }
  if (mode == VerifyMode::kSignature && store.trusted_keys.empty()) {
    throw TrustStoreError("verification enabled with empty key store");
  }

  const std::string recomputed = model::compute_digest(artifact);
  if (recomputed != artifact.digest) return {false, "digest_mismatch"};

  if (mode == VerifyMode::kDigestPin) {
    if (store.trusted_model_digests.count(recomputed) == 0) {
      return {false, "untrusted_digest"};
    }
    return {true, ""};
  }

  if (!artifact.auth_tag.has_value()) return {false, "unsigned"};
  for (const auto& [signer, key] : store.trusted_keys) {
    const auto check = model::verify_tag(artifact, key);
    if (check.ok) return {true, ""};
  }
  return {false, "bad_tag"};
}

iam::Role generate_policy(const iam::AccessTrace& trace,
                          const std::string& role_id) {
  std::set<iam::Permission> dedup;
  for (const auto& [action, resource] : trace.entries) {
    dedup.insert({action, resource});
  }
  iam::Role r;
  r.role_id = role_id;
  r.permissions.assign(dedup.begin(), dedup.end());
  return r;
}

ImageVerdict verify_image(const std::vector<std::string>& layer_digests,
                          const TrustStore& store) {
  if (layer_digests.empty()) {
    throw std::invalid_argument("verify_image: layer list must be non-empty");
  }
  ImageVerdict v;
  v.accepted = true;
  for (std::size_t i = 0; i < layer_digests.size(); ++i) {
    const bool trusted = store.trusted_layer_digests.count(layer_digests[i]) != 0;
    v.layers.push_back({i, layer_digests[i], trusted});
    if (!trusted) {
      v.accepted = false;
      v.untrusted_indices.push_back(i);
    }
  }
  return v;
}

Registry registry_from_json(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  Registry r;
  for (const auto& jp : j.at("packages")) {
    const PackageRef ref{jp.at("name").get<std::string>(),
                         Version::parse(jp.at("version").get<std::string>())};
    Registry::PackageInfo info;
    for (const auto& jd : jp.value("dependencies", nlohmann::json::array())) {
      info.dependencies.push_back(
          {jd.at("name").get<std::string>(),
           Version::parse(jd.at("version").get<std::string>())});
    }
    r.packages.emplace(ref, std::move(info));
  }
  for (const auto& p : j.value("popular", nlohmann::json::array())) {
    r.popular.insert(p.get<std::string>());
  }
  return r;
}

VulnDb vulndb_from_json(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  VulnDb db;
  for (const auto& je : j.at("entries")) {
    Advisory a;
    a.advisory_id = je.at("advisory_id").get<std::string>();
    a.package_name = je.at("package_name").get<std::string>();
    a.affected_min = Version::parse(je.at("affected_min").get<std::string>());
    a.affected_max = Version::parse(je.at("affected_max").get<std::string>());
    a.severity = severity_from_name(je.at("severity").get<std::string>());
    if (!(a.affected_min < a.affected_max)) {
      throw std::invalid_argument("advisory " + a.advisory_id +
                                  ": affected_min must be < affected_max");
    }
    db.entries.push_back(std::move(a));
  }
  return db;
}

TrustStore trust_store_from_json(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  TrustStore t;
  const nlohmann::json keys = j.value("trusted_keys", nlohmann::json::object());
  for (const auto& [signer, key] : keys.items()) {
    t.trusted_keys[signer] = key.get<std::string>();
  }
  for (const auto& d :
       j.value("trusted_model_digests", nlohmann::json::array())) {
    t.trusted_model_digests.insert(d.get<std::string>());
  }
  for (const auto& d :
       j.value("trusted_layer_digests", nlohmann::json::array())) {
    t.trusted_layer_digests.insert(d.get<std::string>());
  }
  return t;
}

std::vector<PackageRef> manifest_from_json(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  std::vector<PackageRef> manifest;
  for (const auto& je : j.at("packages")) {
    manifest.push_back({je.at("name").get<std::string>(),
                        Version::parse(je.at("version").get<std::string>())});
  }
  return manifest;
}

std::string scan_report_to_json(const ScanReport& report) {
  nlohmann::json findings = nlohmann::json::array();
  for (const ScanFinding& f : report.findings) {
    nlohmann::json via = nlohmann::json::array();
    for (const PackageRef& p : f.via_path) via.push_back(ref_str(p));
    findings.push_back({{"kind", finding_kind_name(f.kind)},
                        {"package", ref_str(f.package)},
                        {"advisory_id", f.advisory_id.has_value()
                                            ? nlohmann::json(*f.advisory_id)
                                            : nlohmann::json(nullptr)},
                        {"severity", severity_name(f.severity)},
                        {"via_path", via}});
  }
  return nlohmann::json{{"findings", findings},
                        {"cycle_edges", report.cycle_edges}}
      .dump(2);
}

}  // namespace faasguard::shield
