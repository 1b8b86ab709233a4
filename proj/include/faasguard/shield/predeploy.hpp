#pragma once

#include <compare>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "faasguard/iam/iam.hpp"
#include "faasguard/model/model.hpp"

namespace faasguard::shield {

struct Version {
  int major = 0;
  int minor = 0;
  int patch = 0;

  auto operator<=>(const Version&) const = default;
  std::string str() const;
  static Version parse(const std::string& text);
};

enum class Severity { kLow, kMedium, kHigh, kCritical };

std::string severity_name(Severity s);
Severity severity_from_name(const std::string& name);

struct Advisory {
  std::string advisory_id;
  std::string package_name;
  Version affected_min;  // inclusive
  Version affected_max;  // exclusive
  Severity severity = Severity::kLow;
};

struct VulnDb {
  std::vector<Advisory> entries;
};

using PackageRef = std::pair<std::string, Version>;

struct Registry {
  struct PackageInfo {
    std::vector<PackageRef> dependencies;
  };
  std::map<PackageRef, PackageInfo> packages;
  std::set<std::string> popular;
};

struct TrustStore {
  std::map<std::string, std::string> trusted_keys;  // signer_id -> key bytes
  std::set<std::string> trusted_model_digests;
  std::set<std::string> trusted_layer_digests;
};

enum class FindingKind { kKnownVuln, kTyposquatSuspect, kUnresolvedPackage };

std::string finding_kind_name(FindingKind k);

struct ScanFinding {
  FindingKind kind = FindingKind::kKnownVuln;
  PackageRef package;
  std::optional<std::string> advisory_id;
  Severity severity = Severity::kLow;
  std::vector<PackageRef> via_path;  // manifest root ... flagged package
};

struct ScanReport {
  std::vector<ScanFinding> findings;
  // Dependency edges that close a cycle, as "name@ver -> name@ver".
  std::vector<std::string> cycle_edges;
};

// Transitive-closure dependency scan: known_vuln for closure members inside
// an affected range, typosquat_suspect for non-popular names within edit
// distance `popular_distance` of a popular name, unresolved_package for
// references missing from the registry. Findings sorted by
// (severity desc, package name, version, advisory).
ScanReport scan_dependencies(const std::vector<PackageRef>& manifest,
                             const Registry& registry, const VulnDb& vulndb,
                             int popular_distance = 1);

std::size_t levenshtein(const std::string& a, const std::string& b);

enum class VerifyMode { kDigestPin, kSignature };

struct ModelVerdict {
  bool accepted = false;
  // "digest_mismatch" | "untrusted_digest" | "unsigned" | "bad_tag"
  std::string reason;
};

// Throws TrustStoreError when the relevant part of the store is empty
// (configuration error, distinct from rejection).
ModelVerdict verify_model(const model::ModelArtifact& artifact,
                          const TrustStore& store, VerifyMode mode);

struct TrustStoreError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Least-privilege role from an access trace: the exact deduplicated set of
// traced (action, resource) pairs, no wildcards, nothing assumable.
iam::Role generate_policy(const iam::AccessTrace& trace,
                          const std::string& role_id = "least-privilege");

struct LayerStatus {
  std::size_t index = 0;
  std::string digest;
  bool trusted = false;
};

struct ImageVerdict {
  bool accepted = false;
  std::vector<LayerStatus> layers;
  std::vector<std::size_t> untrusted_indices;
};

ImageVerdict verify_image(const std::vector<std::string>& layer_digests,
                          const TrustStore& store);

// JSON loaders for the CLI fixture formats.
Registry registry_from_json(const std::string& text);
VulnDb vulndb_from_json(const std::string& text);
TrustStore trust_store_from_json(const std::string& text);
std::vector<PackageRef> manifest_from_json(const std::string& text);
std::string scan_report_to_json(const ScanReport& report);

}  // namespace faasguard::shield
