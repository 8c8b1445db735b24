#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "trustrec/data.hpp"
#include "trustrec/rng.hpp"

namespace testing_util {

using trustrec::Index;
using trustrec::TrustGraph;

inline double relative_error(double a, double b) {
  const double scale = std::max({std::abs(a), std::abs(b), 1e-8});
  return std::abs(a - b) / scale;
}

/// Central difference of f with respect to x[idx], restoring x afterwards.
inline double central_difference(double& x, const std::function<double()>& f, double h = 1e-5) {
  const double saved = x;
  x = saved + h;
  const double plus = f();
  x = saved - h;
  const double minus = f();
  x = saved;
  return (plus - minus) / (2.0 * h);
}

/// Largest relative error between analytic gradient `g` and central
/// differences of f over every entry of `m`.
inline double max_gradient_error(Eigen::MatrixXd& m, const Eigen::MatrixXd& g, const std::function<double()>& f) {
  double worst = 0.0;
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      worst = std::max(worst, relative_error(g(r, c), central_difference(m(r, c), f)));
    }
  }
  return worst;
}

inline TrustGraph graph_from(std::size_t n, const std::vector<TrustGraph::Triple>& edges) {
  return TrustGraph::from_edges(n, edges);
}

inline TrustGraph undirected(std::size_t n, const std::vector<std::pair<Index, Index>>& pairs) {
  std::vector<TrustGraph::Triple> edges;
  for (const auto& [a, b] : pairs) {
    edges.push_back({a, b, 1.0});
    edges.push_back({b, a, 1.0});
  }
  return TrustGraph::from_edges(n, edges);
}

inline TrustGraph two_triangles() { return undirected(6, {{0, 1}, {1, 2}, {0, 2}, {3, 4}, {4, 5}, {3, 5}}); }

/// Two 5-cliques {0..4} and {5..9} joined by the edge 4-5.
inline TrustGraph barbell() {
  std::vector<std::pair<Index, Index>> pairs;
  for (Index base : {0u, 5u}) {
    for (Index a = 0; a < 5; ++a) {
      for (Index b = a + 1; b < 5; ++b) pairs.emplace_back(base + a, base + b);
    }
  }
  pairs.emplace_back(4, 5);
  return undirected(10, pairs);
}

/// Random digraph with each ordered pair present with probability p and
/// weights uniform in (0, 1].
inline TrustGraph random_digraph(std::size_t n, double p, trustrec::Rng& rng, bool unit_weights = false) {
  std::vector<TrustGraph::Triple> edges;
  for (Index u = 0; u < n; ++u) {
    for (Index v = 0; v < n; ++v) {
      if (u == v || rng.uniform() >= p) continue;
      edges.push_back({u, v, unit_weights ? 1.0 : 1.0 - rng.uniform() * 0.99});
    }
  }
  return TrustGraph::from_edges(n, edges);
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("trustrec_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::filesystem::create_directories(path.parent_path());
  std::FILE* f = std::fopen(path.string().c_str(), "wb");
  std::fwrite(content.data(), 1, content.size(), f);
  std::fclose(f);
}

}  // namespace testing_util
