#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
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
#include "trustrec/text_io.hpp"

namespace trustrec {

struct WalkConfig {
  double p = 1.0;  // return parameter
  double q = 1.0;  // in-out parameter
  std::size_t walk_length = 80;
  std::size_t walks_per_node = 10;
  std::size_t window = 10;
  std::size_t negative_samples = 5;
  double embed_lr = 0.025;
  std::size_t epochs = 5;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(p > 0.0) || !(q > 0.0)) throw ValidationError("node2vec p and q must be positive");
    if (walk_length < 1 || walks_per_node < 1 || window < 1) {
      throw ValidationError("walk length, walks per node and window must be positive");
    }
    if (window > walk_length) throw ValidationError("window cannot exceed walk length");
    if (!(embed_lr > 0.0)) throw ValidationError("embedding learning rate must be positive");
  }
};

using Walk = std::vector<Index>;

/// node2vec second-order step distribution out of `curr`, having arrived
/// from `prev` (none on the first step). Weight of neighbor x is
/// edge_weight * bias with bias 1/p for x == prev, 1 when x neighbors
/// prev, 1/q otherwise. The graph is walked as given; callers pass the
/// symmetrized trust graph.
inline std::vector<std::pair<Index, double>> transition_probs(const TrustGraph& graph, std::optional<Index> prev,
                                                              Index curr, const WalkConfig& config) {
  std::vector<std::pair<Index, double>> out;
  const auto nbrs = graph.out(curr);
  out.reserve(nbrs.size());
  double total = 0.0;
  for (const auto& e : nbrs) {
    double bias = 1.0;
    if (prev) {
      if (e.target == *prev) {
        bias = 1.0 / config.p;
      } else if (!graph.has_edge(*prev, e.target)) {
        bias = 1.0 / config.q;
      }
    }
    out.push_back({e.target, e.weight * bias});
    total += e.weight * bias;
  }
  for (auto& [x, w] : out) w /= total;
  return out;
}

namespace detail {

inline Index sample_step(const TrustGraph& graph, std::optional<Index> prev, Index curr, const WalkConfig& config,
                         Rng& rng, std::vector<double>& weights) {
  const auto nbrs = graph.out(curr);
  weights.resize(nbrs.size());
  double total = 0.0;
  for (std::size_t k = 0; k < nbrs.size(); ++k) {
    double bias = 1.0;
    if (prev) {
      if (nbrs[k].target == *prev) {
        bias = 1.0 / config.p;
      } else if (!graph.has_edge(*prev, nbrs[k].target)) {
        bias = 1.0 / config.q;
      }
    }
    weights[k] = nbrs[k].weight * bias;
    total += weights[k];
  }
  double r = rng.uniform() * total;
  for (std::size_t k = 0; k + 1 < nbrs.size(); ++k) {
    if (r < weights[k]) return nbrs[k].target;
    r -= weights[k];
  }
  return nbrs.back().target;
}

}  // namespace detail

/// walks_per_node walks from every node with a neighbor, node-major. Each
/// start node draws from its own stream derive_seed(seed, key), where the
/// key is `stream_keys[node]` or the node index, so the walks of a node do
/// not depend on the others.
inline std::vector<Walk> generate_walks(const TrustGraph& graph, const WalkConfig& config,
                                        std::span<const std::uint64_t> stream_keys = {}) {
  config.validate();
  if (!stream_keys.empty() && stream_keys.size() != graph.num_users()) {
    throw ValidationError("one stream key per node required");
  }
  std::vector<Walk> walks;
  std::vector<double> scratch;
  for (Index s = 0; s < graph.num_users(); ++s) {
    if (graph.out_degree(s) == 0) continue;
    Rng rng(derive_seed(config.seed, stream_keys.empty() ? s : stream_keys[s]));
    for (std::size_t r = 0; r < config.walks_per_node; ++r) {
      Walk walk{s};
      walk.reserve(config.walk_length);
      std::optional<Index> prev;
      while (walk.size() < config.walk_length) {
        const Index curr = walk.back();
        if (graph.out_degree(curr) == 0) break;
        const Index next = detail::sample_step(graph, prev, curr, config, rng, scratch);
        prev = curr;
        walk.push_back(next);
      }
      walks.push_back(std::move(walk));
    }
  }
  return walks;
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

/// Negative-sampling loss of one (center, context) pair:
///   -log s(x.y_o) - sum_n log s(-x.y_n)
inline double sgns_loss(const Eigen::VectorXd& center, const Eigen::VectorXd& context,
                        std::span<const Eigen::VectorXd> negatives) {
  double loss = -std::log(sigmoid(center.dot(context)));
  for (const auto& y : negatives) loss -= std::log(sigmoid(-center.dot(y)));
  return loss;
}

namespace detail {

// The pair-loss gradient is determined by one scalar per output vector:
//   d/dx   = g_pos y_o + sum_n g_n y_n
//   d/dy_o = g_pos x,  d/dy_n = g_n x
// with g_pos = s(x.y_o) - 1 and g_n = s(x.y_n).
template <class X, class Y>
double sgns_positive_coefficient(const X& x, const Y& y) {
  return sigmoid(x.dot(y)) - 1.0;
}

template <class X, class Y>
double sgns_negative_coefficient(const X& x, const Y& y) {
  return sigmoid(x.dot(y));
}

}  // namespace detail

struct SgnsGradient {
  Eigen::VectorXd center;
  Eigen::VectorXd context;
  std::vector<Eigen::VectorXd> negatives;
};

inline SgnsGradient sgns_gradient(const Eigen::VectorXd& center, const Eigen::VectorXd& context,
                                  std::span<const Eigen::VectorXd> negatives) {
  SgnsGradient g;
  const double pos = detail::sgns_positive_coefficient(center, context);
  g.center = pos * context;
  g.context = pos * center;
  for (const auto& y : negatives) {
    const double neg = detail::sgns_negative_coefficient(center, y);
    g.center += neg * y;
    g.negatives.push_back(neg * center);
  }
  return g;
}

/// Input ("embedding") and output (context) vectors, one column per node.
struct SkipGramModel {
  Eigen::MatrixXd input;
  Eigen::MatrixXd output;
};

/// Skip-gram with negative sampling over the walks. Every (center,
/// context) pair within `window` positions takes one gradient step on
/// sgns_loss with `negative_samples` draws from unigram^0.75. The rate
/// decays linearly from embed_lr to embed_lr / 10. Input vectors start
/// uniform in [-0.5/k, 0.5/k], output vectors at zero.
inline SkipGramModel train_skipgram_model(std::span<const Walk> walks, std::size_t num_nodes, std::size_t k,
                                          const WalkConfig& config,
                                          const std::function<void(std::size_t, const SkipGramModel&)>& on_epoch = {}) {
  if (k == 0) throw ValidationError("embedding dimension must be >= 1");
  if (walks.empty()) throw ValidationError("skip-gram training needs at least one walk");
  const auto dim = static_cast<Eigen::Index>(k);
  SkipGramModel model{Eigen::MatrixXd(dim, static_cast<Eigen::Index>(num_nodes)),
                      Eigen::MatrixXd::Zero(dim, static_cast<Eigen::Index>(num_nodes))};
  Rng init(derive_seed(config.seed, 7));
  const double bound = 0.5 / static_cast<double>(k);
  for (Eigen::Index c = 0; c < model.input.cols(); ++c) {
    for (Eigen::Index r = 0; r < dim; ++r) model.input(r, c) = init.uniform(-bound, bound);
  }

  std::vector<double> cumulative(num_nodes, 0.0);
  std::size_t positions = 0;
  for (const auto& w : walks) {
    for (const Index v : w) {
      if (v >= num_nodes) throw ValidationError("walk visits a node outside the index space");
      cumulative[v] += 1.0;
    }
    positions += w.size();
  }
  for (auto& c : cumulative) c = std::pow(c, 0.75);
  std::partial_sum(cumulative.begin(), cumulative.end(), cumulative.begin());
  const double mass = cumulative.back();

  Rng rng(derive_seed(config.seed, 8));
  const auto draw = [&]() {
    const double r = rng.uniform() * mass;
    const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), r);
    return static_cast<Index>(std::min<std::size_t>(it - cumulative.begin(), num_nodes - 1));
  };

  const double total = static_cast<double>(std::max<std::size_t>(1, config.epochs * positions));
  std::size_t done = 0;
  Eigen::VectorXd grad_center(dim), x_old(dim);
  std::vector<Index> negs;
  std::vector<double> g_neg;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    for (const auto& walk : walks) {
      for (std::size_t c = 0; c < walk.size(); ++c, ++done) {
        const double lr = config.embed_lr * (1.0 - 0.9 * static_cast<double>(done) / total);
        const Index center = walk[c];
        const std::size_t lo = c >= config.window ? c - config.window : 0;
        const std::size_t hi = std::min(walk.size() - 1, c + config.window);
        for (std::size_t o = lo; o <= hi; ++o) {
          if (o == c) continue;
          const Index context = walk[o];
          negs.clear();
          for (std::size_t s = 0; s < config.negative_samples; ++s) {
            const Index n = draw();
            if (n != context) negs.push_back(n);
          }
          // gradient at the current point, then one step on every vector
          auto x = model.input.col(center);
          const double g_pos = detail::sgns_positive_coefficient(x, model.output.col(context));
          grad_center = g_pos * model.output.col(context);
          g_neg.resize(negs.size());
          for (std::size_t s = 0; s < negs.size(); ++s) {
            g_neg[s] = detail::sgns_negative_coefficient(x, model.output.col(negs[s]));
            grad_center += g_neg[s] * model.output.col(negs[s]);
          }
          x_old = x;
          model.output.col(context) -= lr * g_pos * x_old;
          for (std::size_t s = 0; s < negs.size(); ++s) model.output.col(negs[s]) -= lr * g_neg[s] * x_old;
          x -= lr * grad_center;
        }
      }
    }
    if (on_epoch) on_epoch(epoch, model);
  }
  return model;
}

/// Per-user k-dimensional vectors, one column per user.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  EmbeddingTable(std::size_t num_users, std::size_t dim)
      : vectors_(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(num_users))) {}
  explicit EmbeddingTable(Eigen::MatrixXd vectors) : vectors_(std::move(vectors)) {}

  std::size_t dim() const { return static_cast<std::size_t>(vectors_.rows()); }
  std::size_t num_users() const { return static_cast<std::size_t>(vectors_.cols()); }
  const Eigen::MatrixXd& vectors() const { return vectors_; }
  Eigen::MatrixXd& vectors() { return vectors_; }
  auto vector(Index u) const { return vectors_.col(u); }

  void save(const std::string& path) const {
    auto out = text::open_output(path);
    out << "# users=" << num_users() << " dim=" << dim() << '\n';
    for (Eigen::Index u = 0; u < vectors_.cols(); ++u) {
      out << u;
      for (Eigen::Index r = 0; r < vectors_.rows(); ++r) out << ' ' << text::format_double(vectors_(r, u));
      out << '\n';
    }
  }

  static EmbeddingTable load(const std::string& path) {
    auto in = text::open_input(path);
    std::string line;
    std::getline(in, line);
    std::istringstream hs(line);
    std::string hash, a, b;
    hs >> hash >> a >> b;
    const auto users = a.rfind("users=", 0) == 0 ? text::parse_number<std::size_t>(std::string_view(a).substr(6)) : std::nullopt;
    const auto dim = b.rfind("dim=", 0) == 0 ? text::parse_number<std::size_t>(std::string_view(b).substr(4)) : std::nullopt;
    if (hash != "#" || !users || !dim) throw ParseError(path, 1, "malformed header");
    const std::size_t num_users = users.value_or(0);
    const std::size_t k = dim.value_or(0);
    EmbeddingTable t(num_users, k);
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
      ++lineno;
      if (text::is_blank_or_comment(line)) continue;
      const auto f = text::split_fields(line);
      const auto u = f.empty() ? std::nullopt : text::parse_number<Index>(f[0]);
      if (!u || *u >= num_users || f.size() != k + 1) throw ParseError(path, lineno, "expected 'user v_1 ... v_k'");
      for (std::size_t r = 0; r < k; ++r) {
        const auto v = text::parse_number<double>(f[r + 1]);
        if (!v) throw ParseError(path, lineno, "malformed embedding value");
        t.vectors_(static_cast<Eigen::Index>(r), *u) = *v;
      }
    }
    return t;
  }

  friend bool operator==(const EmbeddingTable& a, const EmbeddingTable& b) {
    return a.vectors_.rows() == b.vectors_.rows() && a.vectors_.cols() == b.vectors_.cols() &&
           a.vectors_ == b.vectors_;
  }

 private:
  Eigen::MatrixXd vectors_;
};

inline EmbeddingTable train_skipgram(std::span<const Walk> walks, std::size_t num_nodes, std::size_t k,
                                     const WalkConfig& config) {
  return EmbeddingTable(train_skipgram_model(walks, num_nodes, k, config).input);
}

/// node2vec user embeddings: walks on the symmetrized trust graph followed
/// by skip-gram training. Users without trust edges get the zero vector.
///
/// Nodes are processed in the order of `node_keys` (default: index order)
/// and per-node streams are keyed the same way, so relabeling users while
/// keeping their keys permutes the output columns and nothing else.
inline EmbeddingTable embed_users(const TrustGraph& graph, std::size_t k, const WalkConfig& config,
                                  std::span<const std::uint64_t> node_keys = {}) {
  if (k == 0) throw ValidationError("embedding dimension must be >= 1");
  config.validate();
  const std::size_t n = graph.num_users();
  EmbeddingTable table(n, k);
  if (graph.num_edges() == 0) return table;
  if (!node_keys.empty() && node_keys.size() != n) throw ValidationError("one key per node required");

  std::vector<Index> order(n);  // rank -> node
  std::iota(order.begin(), order.end(), Index{0});
  if (!node_keys.empty()) {
    std::sort(order.begin(), order.end(), [&](Index a, Index b) { return node_keys[a] < node_keys[b]; });
  }
  std::vector<Index> rank(n);
  for (Index r = 0; r < n; ++r) rank[order[r]] = r;

  std::vector<TrustGraph::Triple> edges;
  for (const auto& e : graph.edges()) edges.push_back({rank[e.source], rank[e.target], e.weight});
  const auto canonical = TrustGraph::from_edges(n, edges).symmetrized();

  std::vector<std::uint64_t> keys(n);
  for (Index r = 0; r < n; ++r) keys[r] = node_keys.empty() ? r : node_keys[order[r]];
  const auto walks = generate_walks(canonical, config, keys);
  const auto model = train_skipgram_model(walks, n, k, config);
  for (Index u = 0; u < n; ++u) {
    if (canonical.out_degree(rank[u]) > 0) table.vectors().col(u) = model.input.col(rank[u]);
  }
  return table;
}

}  // namespace trustrec
