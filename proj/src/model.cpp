#include "faasguard/model/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <stdexcept>

#include <json.hpp>

#include "faasguard/bytes.hpp"
#include "faasguard/rng.hpp"
#include "faasguard/sha256.hpp"

namespace faasguard::model {

namespace {

void softmax_inplace(std::vector<double>& scores) {
  const double m = *std::max_element(scores.begin(), scores.end());
  double sum = 0.0;
  for (double& s : scores) {
    s = std::exp(s - m);
    sum += s;
  }
  for (double& s : scores) s /= sum;
}

std::vector<double> scores_of(std::span<const double> weights,
                              std::span<const double> bias, std::size_t k,
                              std::size_t d, std::span<const double> x) {
  std::vector<double> s(bias.begin(), bias.end());
  for (std::size_t c = 0; c < k; ++c) {
    double acc = 0.0;
    const double* row = weights.data() + c * d;
    for (std::size_t j = 0; j < d; ++j) acc += row[j] * x[j];
    s[c] += acc;
  }
  return s;
}

int argmax_lowest_tie(const std::vector<double>& v) {
  int best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = static_cast<int>(i);
  }
  return best;
}

}  // namespace

std::string canonical_bytes(const ModelArtifact& a) {
  std::string out;
  append_lp_string(out, a.artifact_id);
  append_lp_string(out, a.arch_tag);
  append_be_i64(out, a.train_seed);
  append_be_u32(out, static_cast<std::uint32_t>(a.classes));
  append_be_u32(out, static_cast<std::uint32_t>(a.dims));
  for (double w : a.weights) append_be_double(out, w);
  for (double b : a.bias) append_be_double(out, b);
  return out;
}

Dataset generate_dataset(std::size_t dims, std::size_t classes, std::size_t n,
                         std::int64_t gen_seed) {
  if (dims < 1) throw std::invalid_argument("generate_dataset: dims must be >= 1");
  if (classes < 2) throw std::invalid_argument("generate_dataset: classes must be >= 2");
  if (n < classes) throw std::invalid_argument("generate_dataset: n must be >= classes");

  Rng rng(static_cast<std::uint64_t>(gen_seed));

  // Per-class means on the integer lattice [-5, 5]^d, distinct per class.
  std::vector<std::vector<double>> means;
  std::set<std::vector<double>> seen;
  for (std::size_t c = 0; c < classes; ++c) {
    std::vector<double> m(dims);
    for (int attempt = 0; attempt < 64; ++attempt) {
      for (std::size_t j = 0; j < dims; ++j) {
        m[j] = static_cast<double>(static_cast<std::int64_t>(rng.uniform_int(11)) - 5);
      }
      if (seen.insert(m).second) break;
    }
    means.push_back(m);
  }

  Dataset d;
  d.dims = dims;
  d.classes = classes;
  d.gen_seed = gen_seed;
  d.points.resize(n * dims);
  d.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int label = static_cast<int>(i % classes);
    d.labels[i] = label;
    for (std::size_t j = 0; j < dims; ++j) {
      d.points[i * dims + j] = means[label][j] + rng.normal();
    }
  }
  d.member_count = std::max<std::size_t>(1, n / 2);
  return d;
}

double training_loss(const Dataset& data, std::span<const double> weights,
                     std::span<const double> bias) {
  const std::size_t m = data.member_count;
  double loss = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    auto s = scores_of(weights, bias, data.classes, data.dims, data.point(i));
    const double mx = *std::max_element(s.begin(), s.end());
    double lse = 0.0;
    for (double v : s) lse += std::exp(v - mx);
    loss += std::log(lse) + mx - s[data.labels[i]];
  }
  return loss / static_cast<double>(m);
}

void training_gradient(const Dataset& data, std::span<const double> weights,
                       std::span<const double> bias, std::span<double> grad_w,
                       std::span<double> grad_b) {
  const std::size_t m = data.member_count;
  const std::size_t k = data.classes;
  const std::size_t d = data.dims;
  std::fill(grad_w.begin(), grad_w.end(), 0.0);
  std::fill(grad_b.begin(), grad_b.end(), 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    auto x = data.point(i);
    auto p = scores_of(weights, bias, k, d, x);
    softmax_inplace(p);
    p[data.labels[i]] -= 1.0;
    for (std::size_t c = 0; c < k; ++c) {
      for (std::size_t j = 0; j < d; ++j) grad_w[c * d + j] += p[c] * x[j];
      grad_b[c] += p[c];
    }
  }
  const double inv = 1.0 / static_cast<double>(m);
  for (double& g : grad_w) g *= inv;
  for (double& g : grad_b) g *= inv;
}

ModelArtifact train(const Dataset& data, std::size_t epochs,
                    double learning_rate, std::int64_t train_seed) {
  if (learning_rate <= 0.0) {
    throw std::invalid_argument("train: learning rate must be positive");
  }
  ModelArtifact a;
  a.artifact_id = "m-" + std::to_string(data.gen_seed) + "-" + std::to_string(train_seed);
  a.train_seed = train_seed;
  a.classes = data.classes;
  a.dims = data.dims;
  a.weights.assign(data.classes * data.dims, 0.0);
  a.bias.assign(data.classes, 0.0);

  std::vector<double> gw(a.weights.size()), gb(a.bias.size());
  for (std::size_t e = 0; e < epochs; ++e) {
    training_gradient(data, a.weights, a.bias, gw, gb);
    for (std::size_t i = 0; i < a.weights.size(); ++i) {
      a.weights[i] -= learning_rate * gw[i];
    }
    for (std::size_t i = 0; i < a.bias.size(); ++i) {
      a.bias[i] -= learning_rate * gb[i];
    }
  }
  a.digest = compute_digest(a);
  return a;
}

Prediction predict(const ModelArtifact& a, std::span<const double> x,
                   PredictMode mode) {
  if (x.size() != a.dims) {
    throw std::invalid_argument("predict: input dimension mismatch");
  }
  auto s = scores_of(a.weights, a.bias, a.classes, a.dims, x);
  softmax_inplace(s);
  Prediction p;
  p.label = argmax_lowest_tie(s);
  if (mode == PredictMode::kConfidence) p.confidences = std::move(s);
  return p;
}

std::string compute_digest(const ModelArtifact& a) {
  return sha256_hex(canonical_bytes(a));
}

std::string sign(const ModelArtifact& a, std::string_view key) {
  if (key.empty()) throw std::invalid_argument("sign: key must be non-empty");
  return hmac_sha256_hex(key, compute_digest(a));
}

TagCheck verify_tag(const ModelArtifact& a, std::string_view key) {
  if (!a.auth_tag.has_value()) return {false, "unsigned"};
  if (key.empty()) throw std::invalid_argument("verify_tag: key must be non-empty");
  const std::string expected = hmac_sha256_hex(key, compute_digest(a));
  if (expected != *a.auth_tag) return {false, "bad_tag"};
  return {true, ""};
}

std::optional<double> min_linf_perturbation(const ModelArtifact& a,
                                            std::span<const double> x) {
  if (a.classes != 2) {
    throw std::invalid_argument("min_linf_perturbation: binary models only");
  }
  if (x.size() != a.dims) {
    throw std::invalid_argument("min_linf_perturbation: dimension mismatch");
  }
  double score = a.bias[0] - a.bias[1];
  double l1 = 0.0;
  for (std::size_t j = 0; j < a.dims; ++j) {
    const double wj = a.weight_at(0, j) - a.weight_at(1, j);
    score += wj * x[j];
    l1 += std::abs(wj);
  }
  if (l1 == 0.0) return std::nullopt;
  if (score == 0.0) {
    throw std::invalid_argument("min_linf_perturbation: x on decision boundary");
  }
  return std::abs(score) / l1;
}

double training_accuracy(const ModelArtifact& a, const Dataset& data) {
  const std::size_t m = data.member_count;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < m; ++i) {
    if (predict(a, data.point(i), PredictMode::kHardLabel).label == data.labels[i]) {
      ++hits;
    }
  }
  return static_cast<double>(hits) / static_cast<double>(m);
}

void save_artifact(const ModelArtifact& a, const std::string& path) {
  {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("save_artifact: cannot open " + path);
    const std::string bytes = canonical_bytes(a);
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  }
  nlohmann::json meta{
      {"artifact_id", a.artifact_id},
      {"arch_tag", a.arch_tag},
      {"digest", a.digest},
      {"auth_tag", a.auth_tag.has_value() ? nlohmann::json(*a.auth_tag)
                                          : nlohmann::json(nullptr)},
      {"provenance", a.provenance.kind == ProvenanceKind::kLocalTrain
                         ? "local_train"
                         : "registry:" + a.provenance.registry_name},
  };
  std::ofstream mf(path + ".meta.json", std::ios::trunc);
  if (!mf) throw std::runtime_error("save_artifact: cannot open sidecar");
  mf << meta.dump(2) << "\n";
}

namespace {

std::uint32_t read_be_u32(const std::string& s, std::size_t& off) {
  if (off + 4 > s.size()) throw std::runtime_error("artifact truncated");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v = (v << 8) | std::uint8_t(s[off++]);
  return v;
}

std::uint64_t read_be_u64(const std::string& s, std::size_t& off) {
  if (off + 8 > s.size()) throw std::runtime_error("artifact truncated");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v = (v << 8) | std::uint8_t(s[off++]);
  return v;
}

std::string read_lp_string(const std::string& s, std::size_t& off) {
  const std::uint32_t len = read_be_u32(s, off);
  if (off + len > s.size()) throw std::runtime_error("artifact truncated");
  std::string out = s.substr(off, len);
  off += len;
  return out;
}

}  // namespace

ModelArtifact load_artifact(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("load_artifact: cannot open " + path);
  std::string bytes((std::istreambuf_iterator<char>(f)),
                    std::istreambuf_iterator<char>());

  ModelArtifact a;
  std::size_t off = 0;
  a.artifact_id = read_lp_string(bytes, off);
  a.arch_tag = read_lp_string(bytes, off);
  a.train_seed = static_cast<std::int64_t>(read_be_u64(bytes, off));
  a.classes = read_be_u32(bytes, off);
  a.dims = read_be_u32(bytes, off);
  a.weights.resize(a.classes * a.dims);
  for (double& w : a.weights) w = std::bit_cast<double>(read_be_u64(bytes, off));
  a.bias.resize(a.classes);
  for (double& b : a.bias) b = std::bit_cast<double>(read_be_u64(bytes, off));

  std::ifstream mf(path + ".meta.json");
  if (!mf) throw std::runtime_error("load_artifact: missing sidecar metadata");
  nlohmann::json meta = nlohmann::json::parse(mf);
  a.digest = meta.at("digest").get<std::string>();
  if (!meta.at("auth_tag").is_null()) {
    a.auth_tag = meta.at("auth_tag").get<std::string>();
  }
  const std::string prov = meta.at("provenance").get<std::string>();
  if (prov == "local_train") {
    a.provenance = {ProvenanceKind::kLocalTrain, ""};
  } else if (prov.rfind("registry:", 0) == 0) {
    a.provenance = {ProvenanceKind::kRegistry, prov.substr(9)};
  } else {
    throw std::runtime_error("load_artifact: unknown provenance " + prov);
  }
  return a;
}

}  // namespace faasguard::model
