#pragma once

// Binary logistic regression over sparse hashed features or dense
// embeddings. One optimizer implementation serves both vector kinds through
// the dot / add_scaled overloads below.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "recipro/binio.hpp"
#include "recipro/embeddings.hpp"
#include "recipro/error.hpp"
#include "recipro/features.hpp"
#include "recipro/hash.hpp"
#include "recipro/rng.hpp"

namespace recipro {

using DenseVector = std::vector<double>;

// ---------------------------------------------------------------------------
// Vector interface

inline double dot(std::span<const double> w, const SparseVector& x) {
  double s = 0.0;
  for (const auto& e : x.entries) s += w[e.index] * e.weight;
  return s;
}

inline double dot(std::span<const double> w, const DenseVector& x) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += w[i] * x[i];
  return s;
}

inline void add_scaled(std::span<double> acc, double a, const SparseVector& x) {
  for (const auto& e : x.entries) acc[e.index] += a * e.weight;
}

inline void add_scaled(std::span<double> acc, double a, const DenseVector& x) {
  for (std::size_t i = 0; i < x.size(); ++i) acc[i] += a * x[i];
}

inline bool fits_dim(const SparseVector& x, std::uint64_t dim) {
  return x.entries.empty() || x.entries.back().index < dim;
}
inline bool fits_dim(const DenseVector& x, std::uint64_t dim) { return x.size() == dim; }

inline bool all_finite(const SparseVector& x) {
  return std::all_of(x.entries.begin(), x.entries.end(),
                     [](const SparseEntry& e) { return std::isfinite(e.weight); });
}
inline bool all_finite(const DenseVector& x) {
  return std::all_of(x.begin(), x.end(), [](double v) { return std::isfinite(v); });
}

// ---------------------------------------------------------------------------
// Types

struct FeatureSpace {
  enum class Kind : std::uint8_t { hashed = 0, dense = 1 };
  Kind kind = Kind::hashed;
  std::uint64_t dim = 0;
  std::string tag;  // featurizer config digest, or embedding source model

  static FeatureSpace hashed(const FeaturizerConfig& cfg) {
    return {Kind::hashed, cfg.hash_dims, cfg.digest()};
  }
  static FeatureSpace dense(std::uint64_t dim, std::string source_model) {
    return {Kind::dense, dim, std::move(source_model)};
  }

  bool operator==(const FeatureSpace&) const = default;
};

enum class Optimizer : std::uint8_t { sgd = 0, adam = 1 };

inline Optimizer parse_optimizer(const std::string& s) {
  if (s == "sgd") return Optimizer::sgd;
  if (s == "adam") return Optimizer::adam;
  throw validation_error("invalid_optimizer", s);
}
inline const char* to_string(Optimizer o) { return o == Optimizer::sgd ? "sgd" : "adam"; }

struct TrainConfig {
  double learning_rate = 0.1;
  std::uint32_t epochs = 3;
  double l2_lambda = 1e-4;
  std::uint32_t batch_size = 32;
  std::uint64_t seed = 0;
  // sgd is bit-reproducible across implementations; adam is not guaranteed to be.
  Optimizer optimizer = Optimizer::sgd;

  static TrainConfig sparse_defaults() { return {}; }
  static TrainConfig dense_defaults() {
    TrainConfig c;
    c.learning_rate = 2e-5;
    c.l2_lambda = 0.0;
    return c;
  }

  void validate() const {
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
      throw validation_error("invalid_train_config", "learning_rate must be > 0");
    if (epochs == 0) throw validation_error("invalid_train_config", "epochs must be positive");
    if (!(l2_lambda >= 0.0) || !std::isfinite(l2_lambda))
      throw validation_error("invalid_train_config", "l2_lambda must be >= 0");
    if (batch_size == 0) throw validation_error("invalid_train_config", "batch_size must be positive");
  }
};

struct TrainMeta {
  std::uint64_t seed = 0;
  std::uint32_t epochs = 0;
  std::uint32_t batch_size = 0;
  double learning_rate = 0.0;
  double l2_lambda = 0.0;
  Optimizer optimizer = Optimizer::sgd;
  std::string dataset_digest;

  bool operator==(const TrainMeta&) const = default;
};

struct LinearModel {
  std::vector<std::string> label_order;  // [negative, positive]
  std::vector<double> weights;
  double bias = 0.0;
  FeatureSpace space;
  TrainMeta meta;

  const std::string& negative_label() const { return label_order.at(0); }
  const std::string& positive_label() const { return label_order.at(1); }

  bool operator==(const LinearModel&) const = default;
};

struct Prediction {
  std::string label;
  double score = 0.0;  // P(positive)
};

// ---------------------------------------------------------------------------
// Loss

inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// -[y log s(z) + (1-y) log(1-s(z))], overflow-free.
inline double logistic_loss(double z, double y) {
  return std::max(z, 0.0) - y * z + std::log1p(std::exp(-std::abs(z)));
}

// Mean logistic loss + (l2/2)|w|^2; the bias is not regularized.
template <typename Vec>
double objective(std::span<const double> w, double b, std::span<const Vec> xs,
                 std::span<const double> ys, double l2) {
  double loss = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) loss += logistic_loss(dot(w, xs[i]) + b, ys[i]);
  double reg = 0.0;
  for (double v : w) reg += v * v;
  return loss / static_cast<double>(xs.size()) + 0.5 * l2 * reg;
}

// Analytic gradient of objective(); grad_w must have w.size() entries.
template <typename Vec>
void objective_gradient(std::span<const double> w, double b, std::span<const Vec> xs,
                        std::span<const double> ys, double l2, std::span<double> grad_w,
                        double& grad_b) {
  const double inv_n = 1.0 / static_cast<double>(xs.size());
  for (std::size_t k = 0; k < w.size(); ++k) grad_w[k] = l2 * w[k];
  grad_b = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double r = (sigmoid(dot(w, xs[i]) + b) - ys[i]) * inv_n;
    add_scaled(grad_w, r, xs[i]);
    grad_b += r;
  }
}

// ---------------------------------------------------------------------------
// Training

struct TrainResult {
  LinearModel model;
  std::vector<double> epoch_loss;  // objective() on the training set after each epoch
};

template <typename Vec>
TrainResult train_with_history(std::span<const Vec> xs, std::span<const std::string> labels,
                               const FeatureSpace& space, const TrainConfig& cfg,
                               const std::string& dataset_digest = {}) {
  cfg.validate();
  if (xs.size() != labels.size()) throw validation_error("size_mismatch", "features vs labels");
  const std::set<std::string> distinct(labels.begin(), labels.end());
  if (distinct.size() < 2) throw data_error("degenerate_class", "training data needs two labels");
  if (distinct.size() > 2)
    throw data_error("unsupported_label_count", "binary training supports exactly two labels");
  for (const auto& x : xs) {
    if (!fits_dim(x, space.dim)) throw data_error("dimension_mismatch", "training vector");
    if (!all_finite(x)) throw data_error("non_finite_feature", "training vector");
  }

  TrainResult result;
  LinearModel& m = result.model;
  m.label_order.assign(distinct.begin(), distinct.end());
  m.weights.assign(space.dim, 0.0);
  m.space = space;
  m.meta = {cfg.seed, cfg.epochs, cfg.batch_size, cfg.learning_rate, cfg.l2_lambda,
            cfg.optimizer, dataset_digest};

  std::vector<double> ys(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) ys[i] = labels[i] == m.positive_label() ? 1.0 : 0.0;

  std::vector<std::size_t> order(xs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(cfg.seed, "train"));

  const double lr = cfg.learning_rate;
  std::vector<double> residual;
  std::vector<double> grad, m1, m2;  // adam state
  double grad_b = 0.0, m1_b = 0.0, m2_b = 0.0;
  std::uint64_t step = 0;
  if (cfg.optimizer == Optimizer::adam) {
    grad.assign(space.dim, 0.0);
    m1.assign(space.dim, 0.0);
    m2.assign(space.dim, 0.0);
  }
  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

  for (std::uint32_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle(std::span<std::size_t>(order), rng);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      const double inv_b = 1.0 / static_cast<double>(end - start);
      residual.clear();
      double sum_r = 0.0;
      for (std::size_t k = start; k < end; ++k) {
        const std::size_t i = order[k];
        const double r = (sigmoid(dot(std::span<const double>(m.weights), xs[i]) + m.bias) - ys[i]) * inv_b;
        residual.push_back(r);
        sum_r += r;
      }

      if (cfg.optimizer == Optimizer::sgd) {
        if (cfg.l2_lambda > 0.0) {
          const double shrink = 1.0 - lr * cfg.l2_lambda;
          for (double& w : m.weights) w *= shrink;
        }
        for (std::size_t k = start; k < end; ++k)
          add_scaled(std::span<double>(m.weights), -lr * residual[k - start], xs[order[k]]);
        m.bias -= lr * sum_r;
      } else {
        for (std::size_t j = 0; j < grad.size(); ++j) grad[j] = cfg.l2_lambda * m.weights[j];
        for (std::size_t k = start; k < end; ++k)
          add_scaled(std::span<double>(grad), residual[k - start], xs[order[k]]);
        grad_b = sum_r;
        ++step;
        const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
        const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
        for (std::size_t j = 0; j < grad.size(); ++j) {
          m1[j] = beta1 * m1[j] + (1.0 - beta1) * grad[j];
          m2[j] = beta2 * m2[j] + (1.0 - beta2) * grad[j] * grad[j];
          m.weights[j] -= lr * (m1[j] / c1) / (std::sqrt(m2[j] / c2) + eps);
        }
        m1_b = beta1 * m1_b + (1.0 - beta1) * grad_b;
        m2_b = beta2 * m2_b + (1.0 - beta2) * grad_b * grad_b;
        m.bias -= lr * (m1_b / c1) / (std::sqrt(m2_b / c2) + eps);
      }
    }
    result.epoch_loss.push_back(
        objective(std::span<const double>(m.weights), m.bias, xs, std::span<const double>(ys), cfg.l2_lambda));
  }
  return result;
}

template <typename Vec>
LinearModel train(std::span<const Vec> xs, std::span<const std::string> labels,
                  const FeatureSpace& space, const TrainConfig& cfg,
                  const std::string& dataset_digest = {}) {
  return train_with_history(xs, labels, space, cfg, dataset_digest).model;
}

// score = sigmoid(w.x + b); score >= 0.5 (ties included) predicts the positive label.
template <typename Vec>
Prediction predict(const LinearModel& m, const Vec& x) {
  if (!fits_dim(x, m.space.dim) || m.weights.size() != m.space.dim)
    throw data_error("dimension_mismatch", "vector does not match model feature space");
  const double score = sigmoid(dot(std::span<const double>(m.weights), x) + m.bias);
  return {score >= 0.5 ? m.positive_label() : m.negative_label(), score};
}

inline DenseVector to_dense(const std::vector<float>& v) { return DenseVector(v.begin(), v.end()); }

// Linear probe over frozen embeddings.
inline LinearModel train_probe(const EmbeddingTable& table,
                               const std::map<std::string, std::string>& labels,
                               const TrainConfig& cfg) {
  std::vector<std::string> missing;
  std::vector<DenseVector> xs;
  std::vector<std::string> ys;
  Digest digest;
  for (const auto& [id, label] : labels) {
    const auto* v = table.find(id);
    if (!v) {
      missing.push_back(id);
      continue;
    }
    xs.push_back(to_dense(*v));
    ys.push_back(label);
    digest.add(id).add(label);
  }
  if (!missing.empty()) {
    std::string list;
    for (std::size_t i = 0; i < missing.size(); ++i) list += (i ? "," : "") + missing[i];
    throw data_error("missing_embedding", list);
  }
  return train(std::span<const DenseVector>(xs), std::span<const std::string>(ys),
               FeatureSpace::dense(table.dim(), table.source_model()), cfg, digest.hex());
}

// ---------------------------------------------------------------------------
// RPMOD1 file:
//   "RPMOD1" | u8 version | u32 n_labels | n x str | u8 space kind | u64 dim |
//   str space tag | dim x f64 weights | f64 bias |
//   u64 seed | u32 epochs | u32 batch | f64 lr | f64 l2 | u8 optimizer | str dataset digest
// str = u32 length + bytes; everything little-endian.

inline constexpr std::string_view kModelMagic = "RPMOD1";
inline constexpr std::uint8_t kModelVersion = 1;

inline std::string serialize(const LinearModel& m) {
  bin::Writer w;
  w.raw(kModelMagic);
  w.u8(kModelVersion);
  w.u32(static_cast<std::uint32_t>(m.label_order.size()));
  for (const auto& l : m.label_order) w.str(l);
  w.u8(static_cast<std::uint8_t>(m.space.kind));
  w.u64(m.space.dim);
  w.str(m.space.tag);
  for (double v : m.weights) w.f64(v);
  w.f64(m.bias);
  w.u64(m.meta.seed);
  w.u32(m.meta.epochs);
  w.u32(m.meta.batch_size);
  w.f64(m.meta.learning_rate);
  w.f64(m.meta.l2_lambda);
  w.u8(static_cast<std::uint8_t>(m.meta.optimizer));
  w.str(m.meta.dataset_digest);
  return w.bytes();
}

inline LinearModel deserialize_model(std::string_view bytes) {
  bin::Reader r(bytes, "corrupt_model");
  if (r.raw(kModelMagic.size()) != kModelMagic) r.fail("bad magic");
  if (r.u8() != kModelVersion) r.fail("unsupported version");
  LinearModel m;
  const auto n_labels = r.u32();
  if (n_labels < 2 || n_labels > r.remaining() / 4) r.fail("bad label count");
  for (std::uint32_t i = 0; i < n_labels; ++i) m.label_order.push_back(r.str());
  const auto kind = r.u8();
  if (kind > 1) r.fail("bad feature space kind");
  m.space.kind = static_cast<FeatureSpace::Kind>(kind);
  m.space.dim = r.u64();
  m.space.tag = r.str();
  if (m.space.dim > r.remaining() / 8) r.fail("weights larger than file");
  m.weights.resize(m.space.dim);
  for (auto& v : m.weights) v = r.f64();
  m.bias = r.f64();
  m.meta.seed = r.u64();
  m.meta.epochs = r.u32();
  m.meta.batch_size = r.u32();
  m.meta.learning_rate = r.f64();
  m.meta.l2_lambda = r.f64();
  const auto opt = r.u8();
  if (opt > 1) r.fail("bad optimizer tag");
  m.meta.optimizer = static_cast<Optimizer>(opt);
  m.meta.dataset_digest = r.str();
  if (!r.done()) r.fail("trailing bytes");
  return m;
}

inline void save_model(const LinearModel& m, const std::string& path) {
  bin::Writer w;
  w.raw(serialize(m));
  w.save(path);
}

inline LinearModel load_model(const std::string& path) { return deserialize_model(read_file(path)); }

}  // namespace recipro
