#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "trustrec/autoencoder.hpp"
#include "trustrec/data.hpp"
#include "trustrec/embed.hpp"
#include "trustrec/error.hpp"
#include "trustrec/graph.hpp"
#include "trustrec/rng.hpp"
#include "trustrec/serialize.hpp"

namespace trustrec {

/// P: k x m user factors, Q: k x n item factors, W: k weights applied
/// elementwise to the users' trust embeddings.
struct ModelParams {
  Eigen::MatrixXd P;
  Eigen::MatrixXd Q;
  Eigen::VectorXd W;

  std::size_t k() const { return static_cast<std::size_t>(P.rows()); }
  std::size_t num_users() const { return static_cast<std::size_t>(P.cols()); }
  std::size_t num_items() const { return static_cast<std::size_t>(Q.cols()); }

  bool all_finite() const { return P.allFinite() && Q.allFinite() && W.allFinite(); }

  void save(const std::string& path) const {
    binary::Writer w(path, "TRMF", 1);
    w.u64(k());
    w.u64(num_users());
    w.u64(num_items());
    w.matrix(P);
    w.matrix(Q);
    w.vector(W);
    w.close();
  }

  static ModelParams load(const std::string& path) {
    binary::Reader r(path, "TRMF", 1);
    const auto k = r.u64();
    const auto m = r.u64();
    const auto n = r.u64();
    ModelParams p{r.matrix(), r.matrix(), r.vector()};
    if (p.k() != k || p.num_users() != m || p.num_items() != n || static_cast<std::size_t>(p.Q.rows()) != k ||
        static_cast<std::size_t>(p.W.size()) != k) {
      throw InputError(path + ": inconsistent model checkpoint shapes");
    }
    return p;
  }

  friend bool operator==(const ModelParams& a, const ModelParams& b) {
    return a.P.rows() == b.P.rows() && a.P.cols() == b.P.cols() && a.Q.cols() == b.Q.cols() &&
           a.W.size() == b.W.size() && a.P == b.P && a.Q == b.Q && a.W == b.W;
  }
};

struct HyperParams {
  std::size_t k = 10;
  double learning_rate = 0.005;
  double lambda_p = 0.1;
  double lambda_q = 0.1;
  double lambda_w = 0.1;
  double lambda_trust = 0.1;
  double lambda_community = 0.1;
  std::size_t epochs = 100;
  std::size_t patience = 5;  // consecutive objective increases before stopping
  std::uint64_t seed = 0;

  void validate() const {
    if (k < 1) throw ValidationError("latent dimension k must be >= 1");
    if (!(learning_rate >= 0.0)) throw ValidationError("learning rate must be non-negative");
    for (double l : {lambda_p, lambda_q, lambda_w, lambda_trust, lambda_community}) {
      if (!(l >= 0.0)) throw ValidationError("regularization weights must be non-negative");
    }
  }
};

/// Everything the objective looks at besides the parameters. Optional
/// parts may be null; a missing part contributes nothing (no embeddings
/// means X = 0).
struct TrainingContext {
  const RatingMatrix* train = nullptr;
  const PropagatedTrust* trust = nullptr;
  const EmbeddingTable* embeddings = nullptr;
  const CommunityAssignment* communities = nullptr;
  const LeaderTable* leaders = nullptr;

  std::optional<Index> leader_of(Index u) const {
    if (communities == nullptr || leaders == nullptr || u >= communities->community_of.size()) return std::nullopt;
    const Index l = leaders->leader_of[communities->community_of[u]];
    if (l == u) return std::nullopt;
    return l;
  }

  bool has_embedding(Index u) const { return embeddings != nullptr && u < embeddings->num_users(); }
};

inline void check_shapes(const ModelParams& params, const TrainingContext& ctx) {
  if (ctx.train == nullptr) throw ValidationError("training context has no rating matrix");
  if (params.num_users() != ctx.train->num_users() || params.num_items() != ctx.train->num_items()) {
    throw ValidationError("model shape does not match the rating matrix");
  }
  if (static_cast<std::size_t>(params.Q.rows()) != params.k() || static_cast<std::size_t>(params.W.size()) != params.k()) {
    throw ValidationError("P, Q and W disagree on the latent dimension");
  }
  if (ctx.embeddings != nullptr && ctx.embeddings->dim() != params.k()) {
    throw ValidationError("embedding dimension does not match k");
  }
  if (ctx.trust != nullptr && ctx.trust->num_users() > params.num_users()) {
    throw ValidationError("propagated trust covers more users than the model");
  }
  if (ctx.communities != nullptr && ctx.communities->community_of.size() > params.num_users()) {
    throw ValidationError("community assignment covers more users than the model");
  }
}

namespace detail {

// P_u + W (.) X_u, or P_u when the user has no embedding.
inline Eigen::VectorXd effective_user(const ModelParams& params, const TrainingContext& ctx, Index u) {
  if (!ctx.has_embedding(u)) return params.P.col(u);
  return params.P.col(u) + params.W.cwiseProduct(ctx.embeddings->vector(u));
}

inline double dot(const Eigen::VectorXd& a, const ModelParams& params, Index i) {
  double s = 0.0;
  for (Eigen::Index f = 0; f < a.size(); ++f) s += a[f] * params.Q(f, i);
  return s;
}

inline double squared_norm(const Eigen::MatrixXd& m) {
  double s = 0.0;
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) s += m(r, c) * m(r, c);
  }
  return s;
}

}  // namespace detail

/// (P_u + W (.) X_u)^T Q_i, unclamped.
inline double predict(const ModelParams& params, const EmbeddingTable* embeddings, Index u, Index i) {
  if (u >= params.num_users() || i >= params.num_items()) {
    throw ValidationError("predict: user or item index out of range");
  }
  TrainingContext ctx;
  ctx.embeddings = embeddings;
  return detail::dot(detail::effective_user(params, ctx, u), params, i);
}

/// Plain matrix-factorization objective:
///   1/2 sum (R_ui - P_u^T Q_i)^2 + lambda_p/2 |P|^2 + lambda_q/2 |Q|^2
inline double mf_objective(const ModelParams& params, const RatingMatrix& ratings, double lambda_p, double lambda_q) {
  double data = 0.0;
  for (const auto& e : ratings.entries()) {
    const Eigen::VectorXd p = params.P.col(e.user);
    const double err = e.value - detail::dot(p, params, e.item);
    data += 0.5 * err * err;
  }
  return data + 0.5 * lambda_p * detail::squared_norm(params.P) + 0.5 * lambda_q * detail::squared_norm(params.Q);
}

namespace detail {

inline double trust_term(const ModelParams& params, const TrainingContext& ctx) {
  double s = 0.0;
  if (ctx.trust == nullptr) return s;
  for (Index u = 0; u < ctx.trust->num_users(); ++u) {
    for (const auto& e : ctx.trust->from[u]) s += e.weight * (params.P.col(u) - params.P.col(e.target)).squaredNorm();
  }
  return s;
}

inline double leader_term(const ModelParams& params, const TrainingContext& ctx) {
  double s = 0.0;
  if (ctx.communities == nullptr || ctx.leaders == nullptr) return s;
  for (Index u = 0; u < ctx.communities->community_of.size(); ++u) {
    if (const auto l = ctx.leader_of(u)) s += (params.P.col(u) - params.P.col(*l)).squaredNorm();
  }
  return s;
}

}  // namespace detail

/// Full objective:
///   1/2 sum_(u,i) (R_ui - (P_u + W (.) X_u)^T Q_i)^2
///   + lambda_p/2 |P|^2 + lambda_q/2 |Q|^2 + lambda_w/2 |W|^2
///   + lambda_trust/2 sum_u sum_v t_uv |P_u - P_v|^2
///   + lambda_community/2 sum_u |P_u - P_leader(u)|^2
/// where t_uv is propagated trust and the leader sum skips leaders.
inline double objective(const ModelParams& params, const TrainingContext& ctx, const HyperParams& hp) {
  check_shapes(params, ctx);
  double data = 0.0;
  for (const auto& e : ctx.train->entries()) {
    const double err = e.value - detail::dot(detail::effective_user(params, ctx, e.user), params, e.item);
    data += 0.5 * err * err;
  }
  double value = data + 0.5 * hp.lambda_p * detail::squared_norm(params.P) +
                 0.5 * hp.lambda_q * detail::squared_norm(params.Q);
  value += 0.5 * hp.lambda_w * params.W.squaredNorm();
  value += 0.5 * hp.lambda_trust * detail::trust_term(params, ctx);
  value += 0.5 * hp.lambda_community * detail::leader_term(params, ctx);
  return value;
}

/// Exact gradient of objective() with respect to P, Q and W.
inline ModelParams gradients(const ModelParams& params, const TrainingContext& ctx, const HyperParams& hp) {
  check_shapes(params, ctx);
  ModelParams g{Eigen::MatrixXd::Zero(params.P.rows(), params.P.cols()),
                Eigen::MatrixXd::Zero(params.Q.rows(), params.Q.cols()), Eigen::VectorXd::Zero(params.W.size())};
  for (const auto& e : ctx.train->entries()) {
    const Eigen::VectorXd pu = detail::effective_user(params, ctx, e.user);
    const double err = e.value - detail::dot(pu, params, e.item);
    g.P.col(e.user) -= err * params.Q.col(e.item);
    g.Q.col(e.item) -= err * pu;
    if (ctx.has_embedding(e.user)) {
      g.W -= err * ctx.embeddings->vector(e.user).cwiseProduct(params.Q.col(e.item));
    }
  }
  g.P += hp.lambda_p * params.P;
  g.Q += hp.lambda_q * params.Q;
  g.W += hp.lambda_w * params.W;
  if (ctx.trust != nullptr) {
    for (Index u = 0; u < ctx.trust->num_users(); ++u) {
      for (const auto& e : ctx.trust->from[u]) {
        const Eigen::VectorXd d = hp.lambda_trust * e.weight * (params.P.col(u) - params.P.col(e.target));
        g.P.col(u) += d;
        g.P.col(e.target) -= d;
      }
    }
  }
  if (ctx.communities != nullptr && ctx.leaders != nullptr) {
    for (Index u = 0; u < ctx.communities->community_of.size(); ++u) {
      if (const auto l = ctx.leader_of(u)) {
        const Eigen::VectorXd d = hp.lambda_community * (params.P.col(u) - params.P.col(*l));
        g.P.col(u) += d;
        g.P.col(*l) -= d;
      }
    }
  }
  return g;
}

/// One full-batch gradient descent step (used to check monotone descent).
inline ModelParams gradient_descent_step(const ModelParams& params, const TrainingContext& ctx, const HyperParams& hp) {
  const auto g = gradients(params, ctx, hp);
  return {params.P - hp.learning_rate * g.P, params.Q - hp.learning_rate * g.Q, params.W - hp.learning_rate * g.W};
}

/// One pass over the observed ratings in a seeded shuffled order. Each
/// rating takes a step of size learning_rate on its share of the
/// objective: the squared error, plus every regularizer split evenly over
/// the ratings that carry it (user terms over the user's ratings, item
/// terms over the item's ratings, the W term over all ratings). Summed over
/// an epoch the shares add up to the full objective.
inline ModelParams sgd_epoch(const ModelParams& params, const TrainingContext& ctx, const HyperParams& hp,
                             std::uint64_t epoch = 0) {
  check_shapes(params, ctx);
  ModelParams out = params;
  const auto& train = *ctx.train;
  if (train.empty() || hp.learning_rate == 0.0) return out;

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(hp.seed, 0x5eed0000ULL + epoch));
  rng.shuffle(order);

  const double lr = hp.learning_rate;
  const double inv_total = 1.0 / static_cast<double>(train.size());
  const auto entries = train.entries();
  const Eigen::Index k = out.P.rows();
  Eigen::VectorXd pu(k), g_p(k), g_q(k), d(k);
  for (const std::size_t idx : order) {
    const auto& r = entries[idx];
    const Index u = r.user;
    const Index i = r.item;
    const double inv_u = 1.0 / static_cast<double>(train.user_count(u));
    const double inv_i = 1.0 / static_cast<double>(train.item_count(i));
    const bool embedded = ctx.has_embedding(u);
    pu = out.P.col(u);
    if (embedded) pu += out.W.cwiseProduct(ctx.embeddings->vector(u));
    const double err = r.value - pu.dot(out.Q.col(i));

    g_p = -err * out.Q.col(i) + (hp.lambda_p * inv_u) * out.P.col(u);
    g_q = -err * pu + (hp.lambda_q * inv_i) * out.Q.col(i);
    Eigen::VectorXd g_w = (hp.lambda_w * inv_total) * out.W;
    if (embedded) g_w -= err * ctx.embeddings->vector(u).cwiseProduct(out.Q.col(i));

    // Social terms touch other users' factors too; their gradients are
    // taken at the pre-step point like the rest.
    std::vector<std::pair<Index, Eigen::VectorXd>> others;
    if (ctx.trust != nullptr && u < ctx.trust->num_users() && hp.lambda_trust != 0.0) {
      for (const auto& e : ctx.trust->from[u]) {
        d = (hp.lambda_trust * e.weight * inv_u) * (out.P.col(u) - out.P.col(e.target));
        g_p += d;
        others.emplace_back(e.target, -d);
      }
    }
    if (hp.lambda_community != 0.0) {
      if (const auto l = ctx.leader_of(u)) {
        d = (hp.lambda_community * inv_u) * (out.P.col(u) - out.P.col(*l));
        g_p += d;
        others.emplace_back(*l, -d);
      }
    }

    out.P.col(u) -= lr * g_p;
    out.Q.col(i) -= lr * g_q;
    out.W -= lr * g_w;
    for (const auto& [v, g] : others) out.P.col(v) -= lr * g;
  }
  return out;
}

struct TrainResult {
  ModelParams params;
  std::vector<double> objective_history;  // objective after each epoch
  std::size_t best_epoch = 0;             // 0 = initialization
};

/// Trains from the given P and Q (W starts at zero). Runs up to hp.epochs
/// SGD epochs, recording the objective after each; stops after
/// hp.patience consecutive increases and returns the best parameters seen.
inline TrainResult train(const TrainingContext& ctx, const HyperParams& hp, const Eigen::MatrixXd& init_p,
                         const Eigen::MatrixXd& init_q) {
  hp.validate();
  if (ctx.train == nullptr) throw ValidationError("training context has no rating matrix");
  if (static_cast<std::size_t>(init_p.rows()) != hp.k || static_cast<std::size_t>(init_q.rows()) != hp.k ||
      static_cast<std::size_t>(init_p.cols()) != ctx.train->num_users() ||
      static_cast<std::size_t>(init_q.cols()) != ctx.train->num_items()) {
    throw ValidationError("initial factor matrices must be k x m and k x n");
  }
  TrainResult result{ModelParams{init_p, init_q, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(hp.k))}, {}, 0};
  ModelParams current = result.params;
  double best = objective(current, ctx, hp);
  double previous = best;
  std::size_t rising = 0;
  for (std::size_t epoch = 0; epoch < hp.epochs; ++epoch) {
    current = sgd_epoch(current, ctx, hp, epoch);
    const double value = objective(current, ctx, hp);
    if (!std::isfinite(value) || !current.all_finite()) {
      throw NumericError("objective became non-finite at epoch " + std::to_string(epoch + 1));
    }
    result.objective_history.push_back(value);
    if (value < best) {
      best = value;
      result.params = current;
      result.best_epoch = epoch + 1;
    }
    rising = value > previous ? rising + 1 : 0;
    previous = value;
    if (hp.patience > 0 && rising >= hp.patience) break;
  }
  return result;
}

// Gaussian factors N(0, stddev^2), k x count.
inline Eigen::MatrixXd random_factors(std::size_t k, std::size_t count, std::uint64_t seed, double stddev = 0.1) {
  Rng rng(seed);
  Eigen::MatrixXd m(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(count));
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) = rng.normal(0.0, stddev);
  }
  return m;
}

struct InitialFactors {
  Eigen::MatrixXd P;  // k x m
  Eigen::MatrixXd Q;  // k x n
};

/// Trains the user autoencoder on rating rows and the item autoencoder on
/// rating columns and returns their bottleneck codes as initial factors.
/// Both configs must have bottleneck_dim == k.
inline InitialFactors autoencoder_factors(const RatingMatrix& train, const AutoencoderConfig& user_config,
                                          const AutoencoderConfig& item_config, std::size_t k) {
  if (user_config.bottleneck_dim != k || item_config.bottleneck_dim != k) {
    throw ValidationError("autoencoder bottleneck must equal the latent dimension k");
  }
  const auto users = user_rows(train);
  const auto items = item_rows(train);
  const auto udae = train_autoencoder(users, train.num_items(), user_config);
  const auto idae = train_autoencoder(items, train.num_users(), item_config);
  return {extract_latents(udae.model, users), extract_latents(idae.model, items)};
}

}  // namespace trustrec
