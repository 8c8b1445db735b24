#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "trustrec/data.hpp"
#include "trustrec/error.hpp"
#include "trustrec/rng.hpp"
#include "trustrec/serialize.hpp"

namespace trustrec {

inline constexpr double kSeluScale = 1.0507009873554804934193349852946;
inline constexpr double kSeluAlpha = 1.6732632423543772848170429916717;

inline double selu(double x) {
  return x > 0.0 ? kSeluScale * x : kSeluScale * kSeluAlpha * std::expm1(x);
}

inline double selu_derivative(double x) {
  return x > 0.0 ? kSeluScale : kSeluScale * kSeluAlpha * std::exp(x);
}

struct SparseVector {
  std::vector<Index> index;
  std::vector<double> value;

  std::size_t nnz() const { return index.size(); }

  Eigen::VectorXd to_dense(std::size_t dim) const {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim));
    for (std::size_t k = 0; k < index.size(); ++k) x[index[k]] = value[k];
    return x;
  }
};

// Rating-matrix rows (one per user, indexed by item) for the user-side
// autoencoder.
inline std::vector<SparseVector> user_rows(const RatingMatrix& m) {
  std::vector<SparseVector> rows(m.num_users());
  for (Index u = 0; u < m.num_users(); ++u) {
    for (const auto& e : m.user_row(u)) {
      rows[u].index.push_back(e.item);
      rows[u].value.push_back(e.value);
    }
  }
  return rows;
}

// Rating-matrix columns (one per item, indexed by user) for the item side.
inline std::vector<SparseVector> item_rows(const RatingMatrix& m) {
  std::vector<SparseVector> rows(m.num_items());
  const auto entries = m.entries();
  for (Index i = 0; i < m.num_items(); ++i) {
    for (const auto k : m.item_column(i)) {
      rows[i].index.push_back(entries[k].user);
      rows[i].value.push_back(entries[k].value);
    }
  }
  return rows;
}

struct AutoencoderConfig {
  std::vector<std::size_t> layer_sizes{128, 64, 32, 10, 32, 64, 128};
  std::size_t bottleneck_dim = 10;
  double learning_rate = 0.001;
  std::size_t batch_size = 128;
  std::size_t epochs = 100;
  double momentum = 0.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (layer_sizes.empty() || layer_sizes.size() % 2 == 0) {
      throw ValidationError("autoencoder needs an odd number of hidden layers");
    }
    for (std::size_t l = 0; l < layer_sizes.size(); ++l) {
      if (layer_sizes[l] == 0) throw ValidationError("autoencoder layer sizes must be positive");
      if (layer_sizes[l] != layer_sizes[layer_sizes.size() - 1 - l]) {
        throw ValidationError("autoencoder layer sizes must be symmetric");
      }
    }
    if (layer_sizes[layer_sizes.size() / 2] != bottleneck_dim) {
      throw ValidationError("middle autoencoder layer must equal the bottleneck dimension");
    }
    if (!(learning_rate > 0.0)) throw ValidationError("autoencoder learning rate must be positive");
    if (batch_size < 1) throw ValidationError("autoencoder batch size must be >= 1");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw ValidationError("momentum must lie in [0, 1)");
  }
};

struct AutoencoderOutput {
  Eigen::VectorXd code;
  Eigen::VectorXd reconstruction;
};

/// Stack of fully connected SELU layers input -> L1 -> ... -> Lh -> input.
/// Layer l maps activations a_l to a_{l+1} = selu(W_l a_l + b_l); the code
/// is the activation of the middle hidden layer. Decoder weights are
/// separate parameters whose shapes mirror the encoder's.
class AutoencoderModel {
 public:
  AutoencoderModel(std::vector<Eigen::MatrixXd> weights, std::vector<Eigen::VectorXd> biases)
      : weights_(std::move(weights)), biases_(std::move(biases)) {
    const std::size_t layers = weights_.size();
    if (layers < 2 || layers % 2 != 0 || biases_.size() != layers) {
      throw ValidationError("autoencoder needs an even number (>= 2) of weight layers");
    }
    for (std::size_t l = 0; l < layers; ++l) {
      if (biases_[l].size() != weights_[l].rows()) throw ValidationError("bias size mismatch");
      if (l > 0 && weights_[l].cols() != weights_[l - 1].rows()) {
        throw ValidationError("autoencoder layer shapes do not chain");
      }
      const auto& mirror = weights_[layers - 1 - l];
      if (weights_[l].rows() != mirror.cols() || weights_[l].cols() != mirror.rows()) {
        throw ValidationError("decoder layer shapes must mirror the encoder");
      }
    }
  }

  // Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)], zero biases.
  static AutoencoderModel initialize(std::size_t input_dim, const AutoencoderConfig& config) {
    config.validate();
    if (input_dim == 0) throw ValidationError("autoencoder input dimension must be positive");
    std::vector<std::size_t> dims{input_dim};
    dims.insert(dims.end(), config.layer_sizes.begin(), config.layer_sizes.end());
    dims.push_back(input_dim);
    Rng rng(derive_seed(config.seed, 0));
    std::vector<Eigen::MatrixXd> weights;
    std::vector<Eigen::VectorXd> biases;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(dims[l]));
      Eigen::MatrixXd w(static_cast<Eigen::Index>(dims[l + 1]), static_cast<Eigen::Index>(dims[l]));
      for (Eigen::Index c = 0; c < w.cols(); ++c) {
        for (Eigen::Index r = 0; r < w.rows(); ++r) w(r, c) = rng.uniform(-bound, bound);
      }
      weights.push_back(std::move(w));
      biases.push_back(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dims[l + 1])));
    }
    return AutoencoderModel(std::move(weights), std::move(biases));
  }

  std::size_t input_dim() const { return static_cast<std::size_t>(weights_.front().cols()); }
  std::size_t num_layers() const { return weights_.size(); }
  // Index of the weight layer whose output is the code.
  std::size_t code_layer() const { return weights_.size() / 2 - 1; }
  std::size_t code_dim() const { return static_cast<std::size_t>(weights_[code_layer()].rows()); }

  const std::vector<Eigen::MatrixXd>& weights() const { return weights_; }
  const std::vector<Eigen::VectorXd>& biases() const { return biases_; }
  std::vector<Eigen::MatrixXd>& weights() { return weights_; }
  std::vector<Eigen::VectorXd>& biases() { return biases_; }

  AutoencoderOutput forward(const Eigen::VectorXd& x) const {
    if (static_cast<std::size_t>(x.size()) != input_dim()) {
      throw ValidationError("autoencoder input has dimension " + std::to_string(x.size()) +
                            ", expected " + std::to_string(input_dim()));
    }
    AutoencoderOutput out;
    Eigen::VectorXd a = x;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      a = (weights_[l] * a + biases_[l]).unaryExpr([](double v) { return selu(v); });
      if (l == code_layer()) out.code = a;
    }
    out.reconstruction = std::move(a);
    return out;
  }

  Eigen::VectorXd encode(const SparseVector& x) const {
    Eigen::VectorXd a = biases_[0];
    for (std::size_t k = 0; k < x.nnz(); ++k) {
      if (x.index[k] >= input_dim()) throw ValidationError("sparse input index out of range");
      a.noalias() += weights_[0].col(x.index[k]) * x.value[k];
    }
    a = a.unaryExpr([](double v) { return selu(v); });
    for (std::size_t l = 1; l <= code_layer(); ++l) {
      a = (weights_[l] * a + biases_[l]).unaryExpr([](double v) { return selu(v); });
    }
    return a;
  }

  void save(const std::string& path) const {
    binary::Writer w(path, "TRAE", 1);
    w.u64(weights_.size());
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      w.matrix(weights_[l]);
      w.vector(biases_[l]);
    }
    w.close();
  }

  static AutoencoderModel load(const std::string& path) {
    binary::Reader r(path, "TRAE", 1);
    const auto layers = r.u64();
    std::vector<Eigen::MatrixXd> weights;
    std::vector<Eigen::VectorXd> biases;
    for (std::uint64_t l = 0; l < layers; ++l) {
      weights.push_back(r.matrix());
      biases.push_back(r.vector());
    }
    return AutoencoderModel(std::move(weights), std::move(biases));
  }

  friend bool operator==(const AutoencoderModel& a, const AutoencoderModel& b) {
    if (a.weights_.size() != b.weights_.size()) return false;
    for (std::size_t l = 0; l < a.weights_.size(); ++l) {
      if (a.weights_[l].rows() != b.weights_[l].rows() || a.weights_[l].cols() != b.weights_[l].cols() ||
          a.weights_[l] != b.weights_[l] || a.biases_[l] != b.biases_[l]) {
        return false;
      }
    }
    return true;
  }

 private:
  std::vector<Eigen::MatrixXd> weights_;
  std::vector<Eigen::VectorXd> biases_;
};

/// Masked mean squared error: sum_i m_i (r_i - y_i)^2 / sum_i m_i.
inline double masked_mmse(std::span<const double> r, std::span<const double> y,
                          std::span<const double> mask) {
  if (r.size() != y.size() || r.size() != mask.size()) {
    throw ValidationError("masked_mmse: vectors differ in length");
  }
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    if (mask[i] != 0.0) {
      const double d = r[i] - y[i];
      num += mask[i] * d * d;
      den += mask[i];
    }
  }
  if (den < 1.0) throw ValidationError("masked_mmse: mask selects no entries");
  return num / den;
}

// Mask derived from the targets: m_i = 1 iff r_i != 0.
inline double masked_mmse(std::span<const double> r, std::span<const double> y) {
  std::vector<double> mask(r.size());
  for (std::size_t i = 0; i < r.size(); ++i) mask[i] = r[i] != 0.0 ? 1.0 : 0.0;
  return masked_mmse(r, y, mask);
}

struct AutoencoderGradient {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;

  explicit AutoencoderGradient(const AutoencoderModel& model) {
    for (std::size_t l = 0; l < model.num_layers(); ++l) {
      weights.push_back(Eigen::MatrixXd::Zero(model.weights()[l].rows(), model.weights()[l].cols()));
      biases.push_back(Eigen::VectorXd::Zero(model.biases()[l].size()));
    }
  }

  void set_zero() {
    for (auto& w : weights) w.setZero();
    for (auto& b : biases) b.setZero();
  }
};

namespace detail {

// Masked loss of one row and `scale` times its gradient added into `grad`.
// The input layer only touches the row's nonzero columns and the output
// layer is evaluated only at masked positions; no other output influences
// the loss.
inline double accumulate_row(const AutoencoderModel& model, const SparseVector& row,
                             AutoencoderGradient* grad, double scale) {
  const auto& W = model.weights();
  const auto& b = model.biases();
  const std::size_t L = W.size();
  const auto selu_vec = [](const Eigen::VectorXd& v) { return v.unaryExpr([](double x) { return selu(x); }).eval(); };

  std::vector<std::size_t> observed;
  for (std::size_t k = 0; k < row.nnz(); ++k) {
    if (row.index[k] >= model.input_dim()) throw ValidationError("sparse input index out of range");
    if (row.value[k] != 0.0) observed.push_back(k);
  }
  if (observed.empty()) return 0.0;

  // pre[l] = W_l a_l + b_l, act[l] = a_l (act[0] is the sparse input)
  std::vector<Eigen::VectorXd> pre(L - 1), act(L);
  pre[0] = b[0];
  for (std::size_t k = 0; k < row.nnz(); ++k) pre[0].noalias() += W[0].col(row.index[k]) * row.value[k];
  act[1] = selu_vec(pre[0]);
  for (std::size_t l = 1; l + 1 < L; ++l) {
    pre[l] = W[l] * act[l] + b[l];
    act[l + 1] = selu_vec(pre[l]);
  }

  const auto& W_out = W[L - 1];
  const double inv_count = 1.0 / static_cast<double>(observed.size());
  std::vector<double> out_delta(observed.size());
  double loss = 0.0;
  for (std::size_t s = 0; s < observed.size(); ++s) {
    const Index j = row.index[observed[s]];
    const double z = W_out.row(j).dot(act[L - 1]) + b[L - 1][j];
    const double diff = selu(z) - row.value[observed[s]];
    loss += diff * diff;
    out_delta[s] = 2.0 * diff * inv_count * selu_derivative(z);
  }
  loss *= inv_count;
  if (grad == nullptr) return loss;

  Eigen::VectorXd d_act = Eigen::VectorXd::Zero(act[L - 1].size());
  for (std::size_t s = 0; s < observed.size(); ++s) {
    const Index j = row.index[observed[s]];
    grad->weights[L - 1].row(j).noalias() += (scale * out_delta[s]) * act[L - 1].transpose();
    grad->biases[L - 1][j] += scale * out_delta[s];
    d_act.noalias() += out_delta[s] * W_out.row(j).transpose();
  }
  for (std::size_t l = L - 2; l >= 1; --l) {
    const Eigen::VectorXd delta =
        d_act.cwiseProduct(pre[l].unaryExpr([](double x) { return selu_derivative(x); }));
    grad->weights[l].noalias() += scale * delta * act[l].transpose();
    grad->biases[l].noalias() += scale * delta;
    d_act = W[l].transpose() * delta;
  }
  const Eigen::VectorXd delta0 =
      d_act.cwiseProduct(pre[0].unaryExpr([](double x) { return selu_derivative(x); }));
  for (std::size_t k = 0; k < row.nnz(); ++k) {
    grad->weights[0].col(row.index[k]).noalias() += (scale * row.value[k]) * delta0;
  }
  grad->biases[0].noalias() += scale * delta0;
  return loss;
}

}  // namespace detail

/// Mean masked loss over the rows that have at least one observed entry,
/// with its exact gradient.
inline std::pair<double, AutoencoderGradient> batch_loss_and_gradient(const AutoencoderModel& model,
                                                                      std::span<const SparseVector> rows) {
  AutoencoderGradient grad(model);
  std::size_t active = 0;
  for (const auto& r : rows) {
    for (double v : r.value) {
      if (v != 0.0) {
        ++active;
        break;
      }
    }
  }
  if (active == 0) throw ValidationError("batch has no observed entries");
  const double scale = 1.0 / static_cast<double>(active);
  double loss = 0.0;
  for (const auto& r : rows) loss += scale * detail::accumulate_row(model, r, &grad, scale);
  return {loss, std::move(grad)};
}

struct TrainedAutoencoder {
  AutoencoderModel model;
  std::vector<double> loss_history;
};

/// Mini-batch gradient descent on the masked loss. Rows are reshuffled
/// every epoch from a seeded stream; loss_history holds the mean per-row
/// loss seen during each epoch.
inline TrainedAutoencoder train_autoencoder(std::span<const SparseVector> rows, std::size_t input_dim,
                                            const AutoencoderConfig& config) {
  TrainedAutoencoder out{AutoencoderModel::initialize(input_dim, config), {}};
  if (config.epochs == 0) return out;

  std::vector<std::size_t> active;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (double v : rows[r].value) {
      if (v != 0.0) {
        active.push_back(r);
        break;
      }
    }
  }
  if (active.empty()) throw ValidationError("autoencoder training needs at least one nonzero row");

  auto& model = out.model;
  AutoencoderGradient grad(model);
  std::optional<AutoencoderGradient> velocity;
  if (config.momentum > 0.0) {
    velocity.emplace(model);
  }
  Rng rng(derive_seed(config.seed, 1));
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(active);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < active.size(); start += config.batch_size) {
      const std::size_t end = std::min(active.size(), start + config.batch_size);
      const double scale = 1.0 / static_cast<double>(end - start);
      grad.set_zero();
      for (std::size_t k = start; k < end; ++k) {
        epoch_loss += detail::accumulate_row(model, rows[active[k]], &grad, scale);
      }
      for (std::size_t l = 0; l < model.num_layers(); ++l) {
        if (velocity) {
          velocity->weights[l] = config.momentum * velocity->weights[l] - config.learning_rate * grad.weights[l];
          velocity->biases[l] = config.momentum * velocity->biases[l] - config.learning_rate * grad.biases[l];
          model.weights()[l] += velocity->weights[l];
          model.biases()[l] += velocity->biases[l];
        } else {
          model.weights()[l].noalias() -= config.learning_rate * grad.weights[l];
          model.biases()[l].noalias() -= config.learning_rate * grad.biases[l];
        }
      }
    }
    const double mean_loss = epoch_loss / static_cast<double>(active.size());
    if (!std::isfinite(mean_loss)) {
      throw NumericError("autoencoder loss became non-finite at epoch " + std::to_string(epoch));
    }
    out.loss_history.push_back(mean_loss);
  }
  return out;
}

/// Codes of every row, one column per row (k x rows.size()).
inline Eigen::MatrixXd extract_latents(const AutoencoderModel& model, std::span<const SparseVector> rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(model.code_dim()), static_cast<Eigen::Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) out.col(static_cast<Eigen::Index>(r)) = model.encode(rows[r]);
  return out;
}

}  // namespace trustrec
