#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "trustrec/data.hpp"
#include "trustrec/error.hpp"
#include "trustrec/model.hpp"
#include "trustrec/text_io.hpp"

namespace trustrec {

struct EvalReport {
  std::string model_tag;
  double rmse = 0.0;
  std::size_t n = 0;
  std::uint64_t seed = 0;
  std::vector<std::pair<std::string, std::string>> config;  // snapshot, in insertion order

  // tag=<tag> rmse=<value> n=<N> seed=<seed>
  std::string line() const {
    return "tag=" + model_tag + " rmse=" + text::format_double(rmse) + " n=" + std::to_string(n) +
           " seed=" + std::to_string(seed);
  }

  friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

/// sqrt(sum (actual - predicted)^2 / N) over (actual, predicted) pairs.
inline double rmse(std::span<const std::pair<double, double>> pairs) {
  if (pairs.empty()) throw ValidationError("rmse of an empty prediction list");
  double sum = 0.0;
  for (const auto& [actual, predicted] : pairs) {
    const double d = actual - predicted;
    sum += d * d;
  }
  return std::sqrt(sum / static_cast<double>(pairs.size()));
}

/// Clamped prediction. Users or items outside the model's index space get
/// zero factors.
inline double predict_clamped(const ModelParams& params, const EmbeddingTable* embeddings, const RatingScale& scale,
                              Index u, Index i) {
  double raw = 0.0;
  if (u < params.num_users() && i < params.num_items()) raw = predict(params, embeddings, u, i);
  return scale.clamp(raw);
}

inline EvalReport evaluate(const ModelParams& params, const EmbeddingTable* embeddings, const RatingMatrix& test,
                           std::string tag = "model", std::uint64_t seed = 0) {
  if (test.empty()) throw ValidationError("evaluation needs a non-empty test set");
  std::vector<std::pair<double, double>> pairs;
  pairs.reserve(test.size());
  for (const auto& e : test.entries()) {
    pairs.emplace_back(e.value, predict_clamped(params, embeddings, test.scale(), e.user, e.item));
  }
  const double value = rmse(pairs);
  if (!std::isfinite(value)) throw NumericError("evaluation produced a non-finite rmse");
  return {std::move(tag), value, test.size(), seed, {}};
}

/// Predicts the (clamped) constant `mean` for every test rating.
inline EvalReport evaluate_constant(double mean, const RatingMatrix& test, std::string tag = "mean",
                                    std::uint64_t seed = 0) {
  if (test.empty()) throw ValidationError("evaluation needs a non-empty test set");
  std::vector<std::pair<double, double>> pairs;
  pairs.reserve(test.size());
  const double predicted = test.scale().clamp(mean);
  for (const auto& e : test.entries()) pairs.emplace_back(e.value, predicted);
  return {std::move(tag), rmse(pairs), test.size(), seed, {}};
}

struct AblationInputs {
  TrainingContext context;           // full context; variants switch parts off
  const RatingMatrix* test = nullptr;
  const InitialFactors* autoencoder_init = nullptr;
  double random_init_stddev = 0.1;
};

inline constexpr const char* kAblationTags[] = {"a_mf_random", "b_mf_autoencoder", "c_plus_trust", "d_plus_leader",
                                                "e_full"};

/// Five cumulative variants on the same split and seed:
/// (a) plain MF from random factors, (b) plain MF from autoencoder codes,
/// (c) + propagated-trust term, (d) + leader term, (e) + trust embeddings.
inline std::vector<EvalReport> run_ablations(const AblationInputs& in, const HyperParams& hp) {
  if (in.context.train == nullptr || in.test == nullptr || in.autoencoder_init == nullptr) {
    throw ValidationError("ablation needs train, test and autoencoder initialization");
  }
  const auto& train_set = *in.context.train;
  const Eigen::MatrixXd random_p = random_factors(hp.k, train_set.num_users(), derive_seed(hp.seed, 0xa1), in.random_init_stddev);
  const Eigen::MatrixXd random_q = random_factors(hp.k, train_set.num_items(), derive_seed(hp.seed, 0xa2), in.random_init_stddev);

  std::vector<EvalReport> reports;
  for (int variant = 0; variant < 5; ++variant) {
    TrainingContext ctx;
    ctx.train = in.context.train;
    HyperParams vhp = hp;
    vhp.lambda_trust = 0.0;
    vhp.lambda_community = 0.0;
    if (variant >= 2) {
      ctx.trust = in.context.trust;
      vhp.lambda_trust = hp.lambda_trust;
    }
    if (variant >= 3) {
      ctx.communities = in.context.communities;
      ctx.leaders = in.context.leaders;
      vhp.lambda_community = hp.lambda_community;
    }
    if (variant >= 4) ctx.embeddings = in.context.embeddings;

    const bool random_start = variant == 0;
    const auto result = train(ctx, vhp, random_start ? random_p : in.autoencoder_init->P,
                              random_start ? random_q : in.autoencoder_init->Q);
    reports.push_back(evaluate(result.params, ctx.embeddings, *in.test, kAblationTags[variant], hp.seed));
  }
  return reports;
}

}  // namespace trustrec
