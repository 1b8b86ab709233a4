#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <map>
#include <set>

#include "faasguard/model/model.hpp"
#include "faasguard/rng.hpp"
#include "faasguard/sha256.hpp"
#include "oracles.hpp"

using namespace faasguard;

namespace {

// A well-separated binary instance used across several cases.
model::Dataset separable_blobs(std::size_t n = 40) {
  model::Dataset d;
  d.dims = 2;
  d.classes = 2;
  d.gen_seed = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const int label = static_cast<int>(i % 2);
    Rng rng(1000 + i);
    const double cx = label == 0 ? -4.0 : 4.0;
    d.points.push_back(cx + rng.normal());
    d.points.push_back(rng.normal());
    d.labels.push_back(label);
  }
  d.member_count = n;
  return d;
}

}  // namespace

TEST_CASE("generate_dataset is deterministic and balanced") {
  const auto a = model::generate_dataset(2, 2, 4, 7);
  const auto b = model::generate_dataset(2, 2, 4, 7);
  CHECK(a.points == b.points);
  CHECK(a.labels == b.labels);

  const auto tiny = model::generate_dataset(3, 2, 2, 9);
  CHECK(tiny.labels == std::vector<int>{0, 1});

  CHECK_THROWS_AS(model::generate_dataset(2, 3, 2, 1), std::invalid_argument);
  CHECK_THROWS_AS(model::generate_dataset(0, 2, 4, 1), std::invalid_argument);

  // labels balanced within +-1
  const auto d = model::generate_dataset(2, 3, 10, 5);
  std::map<int, int> counts;
  for (int l : d.labels) counts[l]++;
  int lo = 1 << 30, hi = 0;
  for (auto& [l, c] : counts) {
    lo = std::min(lo, c);
    hi = std::max(hi, c);
  }
  CHECK(hi - lo <= 1);
}

TEST_CASE("train: zero epochs yields the zero model, digests deterministic") {
  const auto data = model::generate_dataset(2, 2, 10, 3);
  const auto m = model::train(data, 0, 0.1, 42);
  for (double w : m.weights) CHECK(w == 0.0);
  for (double b : m.bias) CHECK(b == 0.0);

  const auto m2 = model::train(data, 0, 0.1, 42);
  CHECK(m.digest == m2.digest);

  CHECK_THROWS_AS(model::train(data, 1, 0.0, 42), std::invalid_argument);
  CHECK_THROWS_AS(model::train(data, 1, -0.5, 42), std::invalid_argument);
}

TEST_CASE("train: separable blobs reach training accuracy 1.0") {
  const auto data = separable_blobs();
  const auto m = model::train(data, 500, 0.1, 1);
  // Brute-force evaluation of the trained model over the training set.
  std::size_t hits = 0;
  for (std::size_t i = 0; i < data.member_count; ++i) {
    if (model::predict(m, data.point(i), model::PredictMode::kHardLabel).label ==
        data.labels[i]) {
      ++hits;
    }
  }
  CHECK(hits == data.member_count);
  CHECK(model::training_accuracy(m, data) == 1.0);
}

TEST_CASE("train: full-batch loss is non-increasing") {
  const auto data = separable_blobs(24);
  double prev = model::training_loss(data, std::vector<double>(4, 0.0),
                                     std::vector<double>(2, 0.0));
  for (std::size_t epochs = 1; epochs <= 40; ++epochs) {
    const auto m = model::train(data, epochs, 0.1, 1);
    const double loss = model::training_loss(data, m.weights, m.bias);
    CHECK(loss <= prev + 1e-12);
    prev = loss;
  }
}

TEST_CASE("predict: symmetry, tie-break, and hand-computed softmax") {
  model::ModelArtifact zero;
  zero.classes = 2;
  zero.dims = 2;
  zero.weights = {0, 0, 0, 0};
  zero.bias = {0, 0};
  const auto p = model::predict(zero, std::vector<double>{1.0, 2.0},
                                model::PredictMode::kConfidence);
  REQUIRE(p.confidences.has_value());
  CHECK((*p.confidences)[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK((*p.confidences)[1] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(p.label == 0);  // tie breaks to the lowest index

  const auto hard = model::predict(zero, std::vector<double>{1.0, 2.0},
                                   model::PredictMode::kHardLabel);
  CHECK(!hard.confidences.has_value());

  // W = [[1,0],[-1,0]], b = 0, x = (ln3/2, 0) -> confidences (0.75, 0.25)
  model::ModelArtifact m;
  m.classes = 2;
  m.dims = 2;
  m.weights = {1, 0, -1, 0};
  m.bias = {0, 0};
  const std::vector<double> x{std::log(3.0) / 2.0, 0.0};
  const auto q = model::predict(m, x, model::PredictMode::kConfidence);
  CHECK((*q.confidences)[0] == doctest::Approx(0.75).epsilon(1e-12));
  CHECK((*q.confidences)[1] == doctest::Approx(0.25).epsilon(1e-12));

  CHECK_THROWS_AS(model::predict(m, std::vector<double>{1.0}, model::PredictMode::kHardLabel),
                  std::invalid_argument);
}

TEST_CASE("softmax normalization over random inputs") {
  Rng rng(77);
  model::ModelArtifact m;
  m.classes = 4;
  m.dims = 3;
  m.weights.resize(12);
  m.bias.resize(4);
  for (double& w : m.weights) w = rng.uniform(-3, 3);
  for (double& b : m.bias) b = rng.uniform(-1, 1);
  for (int i = 0; i < 10000; ++i) {
    std::vector<double> x{rng.uniform(-10, 10), rng.uniform(-10, 10),
                          rng.uniform(-10, 10)};
    const auto p = model::predict(m, x, model::PredictMode::kConfidence);
    double sum = 0.0;
    for (double c : *p.confidences) sum += c;
    CHECK(std::abs(sum - 1.0) <= 1e-9);
    // label = argmax with lowest-index ties
    int best = 0;
    for (std::size_t k = 1; k < p.confidences->size(); ++k) {
      if ((*p.confidences)[k] > (*p.confidences)[best]) best = int(k);
    }
    CHECK(p.label == best);
  }
}

TEST_CASE("training gradient matches central finite differences") {
  Rng rng(5);
  for (int inst = 0; inst < 20; ++inst) {
    const auto data = model::generate_dataset(2 + inst % 2, 2 + inst % 2,
                                              8 + inst % 3, 100 + inst);
    std::vector<double> w(data.classes * data.dims), b(data.classes);
    for (double& v : w) v = rng.uniform(-1, 1);
    for (double& v : b) v = rng.uniform(-1, 1);

    std::vector<double> gw(w.size()), gb(b.size());
    model::training_gradient(data, w, b, gw, gb);

    std::vector<double> fgw, fgb;
    oracles::fd_gradient(data, w, b, 1e-6, fgw, fgb);

    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < gw.size(); ++i) {
      num += (gw[i] - fgw[i]) * (gw[i] - fgw[i]);
      den += fgw[i] * fgw[i];
    }
    for (std::size_t i = 0; i < gb.size(); ++i) {
      num += (gb[i] - fgb[i]) * (gb[i] - fgb[i]);
      den += fgb[i] * fgb[i];
    }
    CHECK(std::sqrt(num) <= 1e-5 * std::max(1.0, std::sqrt(den)));
  }
}

TEST_CASE("digest: deterministic, canonical, avalanche") {
  const auto data = model::generate_dataset(2, 2, 12, 11);
  auto m = model::train(data, 50, 0.05, 9);
  CHECK(model::compute_digest(m) == model::compute_digest(m));
  CHECK(m.digest == model::compute_digest(m));

  // structurally equal artifact -> same digest
  model::ModelArtifact copy = m;
  CHECK(model::compute_digest(copy) == m.digest);

  // single weight bit flip -> digest differs
  copy.weights[0] = std::nextafter(copy.weights[0], 1e9);
  CHECK(model::compute_digest(copy) != m.digest);

  // 100 random single-byte tampers of the canonical bytes -> 100 distinct
  // digests, none equal to the original
  const std::string bytes = model::canonical_bytes(m);
  Rng rng(123);
  std::set<std::string> seen;
  for (int i = 0; i < 100; ++i) {
    std::string tampered = bytes;
    const std::size_t pos = rng.uniform_int(tampered.size());
    const char flip = static_cast<char>(1 + rng.uniform_int(255));
    tampered[pos] = static_cast<char>(tampered[pos] ^ flip);
    const std::string digest = sha256_hex(tampered);
    CHECK(digest != m.digest);
    seen.insert(digest);
  }
  CHECK(seen.size() == 100);
}

TEST_CASE("sign and verify_tag") {
  const auto data = model::generate_dataset(2, 2, 12, 2);
  auto m = model::train(data, 20, 0.05, 1);

  m.auth_tag = model::sign(m, "key-1");
  CHECK(model::verify_tag(m, "key-1").ok);
  CHECK(!model::verify_tag(m, "key-2").ok);
  CHECK(model::verify_tag(m, "key-2").reason == "bad_tag");

  model::ModelArtifact unsigned_copy = m;
  unsigned_copy.auth_tag.reset();
  const auto check = model::verify_tag(unsigned_copy, "key-1");
  CHECK(!check.ok);
  CHECK(check.reason == "unsigned");

  model::ModelArtifact tampered = m;
  tampered.weights[0] += 0.5;
  CHECK(!model::verify_tag(tampered, "key-1").ok);

  CHECK_THROWS_AS(model::sign(m, ""), std::invalid_argument);
}

TEST_CASE("min_linf_perturbation formula and properties") {
  model::ModelArtifact m;
  m.classes = 2;
  m.dims = 2;
  // w = row0 - row1 = (0.5, -0.5), ||w||_1 = 1
  m.weights = {0.5, -0.5, 0.0, 0.0};
  m.bias = {0.0, 0.0};
  const std::vector<double> x{1.0, 0.0};  // score 0.5, margin 0.5
  CHECK(*model::min_linf_perturbation(m, x) == doctest::Approx(0.5).epsilon(1e-12));

  // homogeneity: scaling w and c by 2 leaves the margin unchanged
  model::ModelArtifact scaled = m;
  for (double& w : scaled.weights) w *= 2.0;
  for (double& b : scaled.bias) b *= 2.0;
  CHECK(*model::min_linf_perturbation(scaled, x) ==
        doctest::Approx(*model::min_linf_perturbation(m, x)).epsilon(1e-12));

  // zero w: unattainable
  model::ModelArtifact degenerate;
  degenerate.classes = 2;
  degenerate.dims = 2;
  degenerate.weights = {1.0, 2.0, 1.0, 2.0};
  degenerate.bias = {0.5, 0.0};
  CHECK(!model::min_linf_perturbation(degenerate, x).has_value());
}

TEST_CASE("min_linf_perturbation matches the grid-search oracle") {
  Rng rng(2024);
  int checked = 0;
  while (checked < 12) {  // the acceptance suite runs the full 50
    model::ModelArtifact m;
    m.classes = 2;
    m.dims = 2;
    m.weights = {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1),
                 rng.uniform(-1, 1)};
    m.bias = {rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3)};
    const std::vector<double> x{rng.uniform(-1, 1), rng.uniform(-1, 1)};
    const auto margin = model::min_linf_perturbation(m, x);
    if (!margin.has_value() || *margin <= 0.01 || *margin > 0.45) continue;
    const auto oracle = oracles::grid_min_flip(m, x, 1e-3, 0.5);
    REQUIRE(oracle.has_value());
    CHECK(std::abs(*margin - *oracle) <= 1e-3 + 1e-9);
    ++checked;
  }
}

TEST_CASE("artifact file round trip with sidecar metadata") {
  const auto data = model::generate_dataset(3, 2, 16, 21);
  auto m = model::train(data, 30, 0.05, 4);
  m.auth_tag = model::sign(m, "release-key");
  m.provenance = {model::ProvenanceKind::kRegistry, "hub"};

  const std::string path = "test_artifact.bin";
  model::save_artifact(m, path);
  const auto loaded = model::load_artifact(path);
  CHECK(loaded.artifact_id == m.artifact_id);
  CHECK(loaded.weights == m.weights);
  CHECK(loaded.bias == m.bias);
  CHECK(loaded.digest == m.digest);
  CHECK(loaded.auth_tag == m.auth_tag);
  CHECK(loaded.provenance == m.provenance);
  CHECK(model::compute_digest(loaded) == loaded.digest);
  std::filesystem::remove(path);
  std::filesystem::remove(path + ".meta.json");
}
