#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

#include "trustrec/data.hpp"
#include "trustrec/rng.hpp"

namespace trustrec {

struct PlantedSpec {
  std::size_t num_users = 100;
  std::size_t num_items = 100;
  std::size_t k = 10;
  double density = 0.2;
  double noise = 0.1;
  std::uint64_t seed = 0;
};

struct PlantedData {
  RatingMatrix ratings;
  Eigen::MatrixXd P;  // k x m
  Eigen::MatrixXd Q;  // k x n
};

/// R = P^T Q + N(0, noise^2) on round(density * m * n) uniformly chosen
/// cells, with P and Q drawn i.i.d. uniform on [0, 1]. The rating scale
/// is the observed value range, so evaluation clamping is inert.
inline PlantedData planted_ratings(const PlantedSpec& spec) {
  if (spec.num_users == 0 || spec.num_items == 0 || spec.k == 0) throw ValidationError("planted data needs m, n, k >= 1");
  if (!(spec.density > 0.0 && spec.density <= 1.0)) throw ValidationError("density must lie in (0, 1]");
  Rng rng(derive_seed(spec.seed, 0x91a));
  const auto k = static_cast<Eigen::Index>(spec.k);
  PlantedData out{{}, Eigen::MatrixXd(k, static_cast<Eigen::Index>(spec.num_users)),
                  Eigen::MatrixXd(k, static_cast<Eigen::Index>(spec.num_items))};
  for (Eigen::Index c = 0; c < out.P.cols(); ++c) {
    for (Eigen::Index r = 0; r < k; ++r) out.P(r, c) = rng.uniform();
  }
  for (Eigen::Index c = 0; c < out.Q.cols(); ++c) {
    for (Eigen::Index r = 0; r < k; ++r) out.Q(r, c) = rng.uniform();
  }
  std::vector<std::size_t> cells(spec.num_users * spec.num_items);
  std::iota(cells.begin(), cells.end(), std::size_t{0});
  rng.shuffle(cells);
  const auto count = static_cast<std::size_t>(std::llround(spec.density * static_cast<double>(cells.size())));
  cells.resize(std::max<std::size_t>(count, 1));
  std::sort(cells.begin(), cells.end());

  std::vector<Rating> entries;
  entries.reserve(cells.size());
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto cell : cells) {
    const auto u = static_cast<Index>(cell / spec.num_items);
    const auto i = static_cast<Index>(cell % spec.num_items);
    const double v = out.P.col(u).dot(out.Q.col(i)) + rng.normal(0.0, spec.noise);
    lo = std::min(lo, v);
    hi = std::max(hi, v);
    entries.push_back({u, i, v});
  }
  if (!(lo < hi)) hi = lo + 1.0;
  out.ratings = RatingMatrix(spec.num_users, spec.num_items, {lo, hi}, std::move(entries));
  return out;
}

struct SocialSpec {
  std::size_t num_users = 20;
  std::size_t num_items = 30;
  std::size_t num_groups = 2;
  std::size_t ratings_per_user = 8;
  std::size_t trust_per_user = 3;
  double cross_group_trust = 0.1;  // probability a trust edge leaves the group
  std::uint64_t seed = 0;
};

struct SocialData {
  RatingMatrix ratings;  // integer ratings on [1, 5]
  TrustGraph trust;
  std::vector<Index> group_of;
};

/// Users in groups with shared tastes: a user's factor is its group's
/// centre plus noise, ratings are round(3 + 1.5 * p.q) clamped to [1, 5],
/// and trust edges mostly stay inside the group.
inline SocialData social_ratings(const SocialSpec& spec) {
  if (spec.num_users < 2 || spec.num_items == 0 || spec.num_groups == 0 || spec.num_groups > spec.num_users) {
    throw ValidationError("social data needs >= 2 users, >= 1 item and 1..users groups");
  }
  Rng rng(derive_seed(spec.seed, 0x50c));
  constexpr Eigen::Index dim = 3;
  const auto normalized = [&](Eigen::Index d) {
    Eigen::VectorXd v(d);
    for (Eigen::Index f = 0; f < d; ++f) v[f] = rng.normal();
    return Eigen::VectorXd(v / std::max(v.norm(), 1e-12));
  };
  std::vector<Eigen::VectorXd> centres;
  for (std::size_t g = 0; g < spec.num_groups; ++g) centres.push_back(normalized(dim));

  SocialData out;
  out.group_of.resize(spec.num_users);
  std::vector<Eigen::VectorXd> users, items;
  for (std::size_t u = 0; u < spec.num_users; ++u) {
    out.group_of[u] = static_cast<Index>(u % spec.num_groups);
    users.push_back(centres[out.group_of[u]] + 0.2 * normalized(dim));
  }
  for (std::size_t i = 0; i < spec.num_items; ++i) items.push_back(normalized(dim));

  std::vector<Rating> entries;
  std::vector<std::size_t> pool(spec.num_items);
  const std::size_t per_user = std::min(spec.ratings_per_user, spec.num_items);
  for (std::size_t u = 0; u < spec.num_users; ++u) {
    std::iota(pool.begin(), pool.end(), std::size_t{0});
    rng.shuffle(pool);
    for (std::size_t s = 0; s < per_user; ++s) {
      const double raw = 3.0 + 1.5 * users[u].dot(items[pool[s]]) + rng.normal(0.0, 0.3);
      entries.push_back({static_cast<Index>(u), static_cast<Index>(pool[s]), std::clamp(std::round(raw), 1.0, 5.0)});
    }
  }
  out.ratings = RatingMatrix(spec.num_users, spec.num_items, {}, std::move(entries));

  std::vector<std::vector<Index>> members(spec.num_groups);
  for (std::size_t u = 0; u < spec.num_users; ++u) members[out.group_of[u]].push_back(static_cast<Index>(u));
  std::vector<TrustGraph::Triple> edges;
  for (std::size_t u = 0; u < spec.num_users; ++u) {
    for (std::size_t t = 0; t < spec.trust_per_user; ++t) {
      const bool cross = spec.num_groups > 1 && rng.uniform() < spec.cross_group_trust;
      Index v;
      if (cross) {
        v = static_cast<Index>(rng.index(spec.num_users));
      } else {
        const auto& group = members[out.group_of[u]];
        v = group[rng.index(group.size())];
      }
      if (v == u) continue;
      edges.push_back({static_cast<Index>(u), v, std::round(rng.uniform(0.2, 1.0) * 100.0) / 100.0});
    }
  }
  out.trust = TrustGraph::from_edges(spec.num_users, edges);
  return out;
}

}  // namespace trustrec
