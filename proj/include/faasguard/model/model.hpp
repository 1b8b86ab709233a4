#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace faasguard::model {

enum class PredictMode { kHardLabel, kConfidence };

enum class ProvenanceKind { kLocalTrain, kRegistry };

struct Provenance {
  ProvenanceKind kind = ProvenanceKind::kLocalTrain;
  std::string registry_name;  // set when kind == kRegistry

  bool operator==(const Provenance&) const = default;
};

struct Prediction {
  int label = 0;
  // Present only in confidence output mode; sums to 1 within 1e-9.
  std::optional<std::vector<double>> confidences;
};

/// Linear softmax classifier plus the metadata the shield verifies:
/// a digest over the canonical serialization and an optional keyed tag.
struct ModelArtifact {
  std::string artifact_id;
  std::string arch_tag = "softmax-linear";
  std::int64_t train_seed = 0;
  std::size_t classes = 0;  // k
  std::size_t dims = 0;     // d
  std::vector<double> weights;  // k*d, row-major
  std::vector<double> bias;     // k
  std::string digest;                    // hex over canonical bytes
  std::optional<std::string> auth_tag;   // hex keyed tag over the digest
  Provenance provenance;

  double weight_at(std::size_t row, std::size_t col) const {
    return weights[row * dims + col];
  }
};

// Canonical serialization: id, arch_tag, train_seed, k, d, weights row-major,
// bias; doubles as big-endian IEEE-754. Digest/tag/provenance are metadata
// and are not part of the canonical bytes.
std::string canonical_bytes(const ModelArtifact& a);

/// Seeded Gaussian-blob dataset; the first `member_count` rows are the
/// training (member) split, the rest is held out for membership scoring.
struct Dataset {
  std::size_t dims = 0;
  std::size_t classes = 0;
  std::vector<double> points;  // n*d, row-major
  std::vector<int> labels;     // n, in [0, classes)
  std::size_t member_count = 0;
  std::int64_t gen_seed = 0;

  std::size_t size() const { return labels.size(); }
  std::span<const double> point(std::size_t i) const {
    return {points.data() + i * dims, dims};
  }
};

Dataset generate_dataset(std::size_t dims, std::size_t classes, std::size_t n,
                         std::int64_t gen_seed);

// Full-batch gradient descent on mean cross-entropy over the member split,
// zero-initialized. Deterministic given (dataset, epochs, lr, train_seed).
ModelArtifact train(const Dataset& data, std::size_t epochs,
                    double learning_rate, std::int64_t train_seed);

Prediction predict(const ModelArtifact& a, std::span<const double> x,
                   PredictMode mode);

std::string compute_digest(const ModelArtifact& a);

std::string sign(const ModelArtifact& a, std::string_view key);

struct TagCheck {
  bool ok = false;
  std::string reason;  // "unsigned" | "bad_tag" | "" on success
};
TagCheck verify_tag(const ModelArtifact& a, std::string_view key);

// Minimal L-inf budget that flips a binary model's label:
// |w.x + c| / ||w||_1 with w = row0 - row1, c = b0 - b1.
// nullopt when w == 0 (no perturbation can flip the label).
std::optional<double> min_linf_perturbation(const ModelArtifact& a,
                                            std::span<const double> x);

// Test and training internals, exposed for gradient checking.
double training_loss(const Dataset& data, std::span<const double> weights,
                     std::span<const double> bias);
void training_gradient(const Dataset& data, std::span<const double> weights,
                       std::span<const double> bias, std::span<double> grad_w,
                       std::span<double> grad_b);

double training_accuracy(const ModelArtifact& a, const Dataset& data);

// Binary canonical bytes to `path`, sidecar JSON metadata to `path + ".meta.json"`.
void save_artifact(const ModelArtifact& a, const std::string& path);
ModelArtifact load_artifact(const std::string& path);

}  // namespace faasguard::model
