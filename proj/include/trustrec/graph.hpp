#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "trustrec/data.hpp"
#include "trustrec/error.hpp"
#include "trustrec/rng.hpp"
#include "trustrec/text_io.hpp"

namespace trustrec {

struct CommunityAssignment {
  std::vector<Index> community_of;
  std::size_t num_communities = 0;
  double modularity = 0.0;

  std::vector<std::vector<Index>> members() const {
    std::vector<std::vector<Index>> out(num_communities);
    for (Index u = 0; u < community_of.size(); ++u) out[community_of[u]].push_back(u);
    return out;
  }
};

namespace detail {

// Undirected weighted adjacency used by modularity and Louvain. Self-loop
// weight at node i counts every internal ordered pair of the nodes it
// stands for, so strength(i) = sum of row i including the self-loop.
struct WeightedAdjacency {
  std::vector<std::vector<std::pair<Index, double>>> adj;
  std::vector<double> self_loop;

  std::size_t size() const { return adj.size(); }

  double strength(Index i) const {
    double s = self_loop[i];
    for (const auto& [j, w] : adj[i]) s += w;
    return s;
  }
};

inline WeightedAdjacency adjacency_of(const TrustGraph& symmetric) {
  WeightedAdjacency a;
  a.adj.resize(symmetric.num_users());
  a.self_loop.assign(symmetric.num_users(), 0.0);
  for (Index u = 0; u < symmetric.num_users(); ++u) {
    for (const auto& e : symmetric.out(u)) a.adj[u].push_back({e.target, e.weight});
  }
  return a;
}

inline double modularity_of(const WeightedAdjacency& g, std::span<const Index> comm) {
  double two_m = 0.0;
  std::vector<double> strength(g.size());
  for (Index i = 0; i < g.size(); ++i) {
    strength[i] = g.strength(i);
    two_m += strength[i];
  }
  if (two_m <= 0.0) return 0.0;
  const Index num_comm = comm.empty() ? 0 : *std::max_element(comm.begin(), comm.end()) + 1;
  std::vector<double> in(num_comm, 0.0), tot(num_comm, 0.0);
  for (Index i = 0; i < g.size(); ++i) {
    tot[comm[i]] += strength[i];
    in[comm[i]] += g.self_loop[i];
    for (const auto& [j, w] : g.adj[i]) {
      if (comm[j] == comm[i]) in[comm[i]] += w;
    }
  }
  double q = 0.0;
  for (Index c = 0; c < num_comm; ++c) {
    const double frac = tot[c] / two_m;
    q += in[c] / two_m - frac * frac;
  }
  return q;
}

// One Louvain local-moving phase starting from `comm`. Nodes are visited
// in a seeded random order; each may join a neighboring community or
// become a singleton, and moves only on strict modularity gain. Returns
// whether any node moved.
inline bool local_moving(const WeightedAdjacency& g, std::vector<Index>& comm, Rng& rng) {
  const std::size_t n = g.size();
  std::vector<double> strength(n), tot(n, 0.0);
  double two_m = 0.0;
  for (Index i = 0; i < n; ++i) {
    strength[i] = g.strength(i);
    two_m += strength[i];
    tot[comm[i]] += strength[i];
  }
  if (two_m <= 0.0) return false;
  std::vector<Index> size(n, 0);
  for (Index i = 0; i < n; ++i) ++size[comm[i]];
  std::vector<Index> empty_ids;
  for (Index c = 0; c < n; ++c) {
    if (size[c] == 0) empty_ids.push_back(c);
  }

  std::vector<Index> order(n);
  std::iota(order.begin(), order.end(), Index{0});
  std::vector<double> link(n, 0.0);
  std::vector<Index> touched;
  bool any_move = false;
  bool improved = true;
  while (improved) {
    improved = false;
    rng.shuffle(order);
    for (const Index i : order) {
      const Index own = comm[i];
      touched.clear();
      for (const auto& [j, w] : g.adj[i]) {
        if (j == i) continue;
        if (link[comm[j]] == 0.0) touched.push_back(comm[j]);
        link[comm[j]] += w;
      }
      // gain(D) ~ k_{i,in}(D) - tot(D) k_i / 2m, relative to i isolated
      tot[own] -= strength[i];
      const double k_i = strength[i];
      const auto gain = [&](Index c) { return link[c] - tot[c] * k_i / two_m; };
      const double own_gain = gain(own);
      const double eps = 1e-12 * std::max(1.0, k_i);
      Index best = own;
      double best_gain = own_gain;
      for (const Index c : touched) {
        if (c != own && gain(c) > best_gain + eps) {
          best = c;
          best_gain = gain(c);
        }
      }
      // a singleton of its own has gain 0
      const bool isolate = size[own] > 1 && 0.0 > best_gain + eps;
      for (const Index c : touched) link[c] = 0.0;

      if (isolate) {
        best = empty_ids.back();
        empty_ids.pop_back();
      }
      if (best != own) {
        --size[own];
        if (size[own] == 0) empty_ids.push_back(own);
        ++size[best];
        comm[i] = best;
        improved = true;
        any_move = true;
      }
      tot[comm[i]] += strength[i];
    }
  }
  return any_move;
}

// Relabels communities 0..c-1 in order of first appearance; returns c.
inline Index renumber(std::vector<Index>& comm) {
  std::vector<Index> remap(comm.size(), std::numeric_limits<Index>::max());
  Index next = 0;
  for (auto& c : comm) {
    if (remap[c] == std::numeric_limits<Index>::max()) remap[c] = next++;
    c = remap[c];
  }
  return next;
}

inline WeightedAdjacency aggregate(const WeightedAdjacency& g, std::span<const Index> comm, Index num_comm) {
  WeightedAdjacency out;
  out.adj.resize(num_comm);
  out.self_loop.assign(num_comm, 0.0);
  std::vector<std::unordered_map<Index, double>> acc(num_comm);
  for (Index i = 0; i < g.size(); ++i) {
    out.self_loop[comm[i]] += g.self_loop[i];
    for (const auto& [j, w] : g.adj[i]) {
      if (comm[i] == comm[j]) {
        out.self_loop[comm[i]] += w;
      } else {
        acc[comm[i]][comm[j]] += w;
      }
    }
  }
  for (Index c = 0; c < num_comm; ++c) {
    out.adj[c].assign(acc[c].begin(), acc[c].end());
    std::sort(out.adj[c].begin(), out.adj[c].end());
  }
  return out;
}

}  // namespace detail

/// Newman modularity of `community_of` on the symmetrized graph (edge
/// present if either direction exists, weight = max). Edgeless graphs have
/// modularity 0.
inline double modularity(const TrustGraph& graph, std::span<const Index> community_of) {
  if (community_of.size() != graph.num_users()) {
    throw ValidationError("community assignment does not cover every node");
  }
  return detail::modularity_of(detail::adjacency_of(graph.symmetrized()), community_of);
}

/// Louvain community detection on the symmetrized trust graph. Alternates
/// local moving and aggregation until no level improves, then re-runs
/// local moving on the original nodes from the projected partition and
/// repeats if any node moves, so the result admits no improving
/// single-node move. Community ids are ordered by their smallest member.
inline CommunityAssignment louvain(const TrustGraph& graph, std::uint64_t seed) {
  const std::size_t n = graph.num_users();
  if (n == 0) throw ValidationError("louvain: empty graph");
  const auto base = detail::adjacency_of(graph.symmetrized());
  Rng rng(derive_seed(seed, 0x10c4));

  std::vector<Index> partition(n);
  std::iota(partition.begin(), partition.end(), Index{0});
  while (true) {
    std::vector<Index> comm = partition;
    if (!detail::local_moving(base, comm, rng)) break;
    std::vector<Index> node_of = comm;  // original node -> current-level node
    Index levels = detail::renumber(node_of);
    auto level_graph = detail::aggregate(base, node_of, levels);
    while (true) {
      std::vector<Index> level_comm(level_graph.size());
      std::iota(level_comm.begin(), level_comm.end(), Index{0});
      if (!detail::local_moving(level_graph, level_comm, rng)) break;
      const Index count = detail::renumber(level_comm);
      level_graph = detail::aggregate(level_graph, level_comm, count);
      for (auto& v : node_of) v = level_comm[v];
    }
    partition = node_of;
  }

  CommunityAssignment out;
  out.community_of = partition;
  out.num_communities = detail::renumber(out.community_of);
  out.modularity = detail::modularity_of(base, out.community_of);
  return out;
}

enum class CentralityMethod { pagerank, hits_authority, degree };

inline std::string_view to_string(CentralityMethod m) {
  switch (m) {
    case CentralityMethod::pagerank: return "pagerank";
    case CentralityMethod::hits_authority: return "hits_authority";
    case CentralityMethod::degree: return "degree";
  }
  return "?";
}

inline CentralityMethod parse_centrality(std::string_view s) {
  if (s == "pagerank") return CentralityMethod::pagerank;
  if (s == "hits_authority" || s == "hits") return CentralityMethod::hits_authority;
  if (s == "degree") return CentralityMethod::degree;
  throw ValidationError("unknown centrality method '" + std::string(s) + "'");
}

struct CentralityScores {
  std::vector<double> score;
  CentralityMethod method = CentralityMethod::pagerank;
};

/// PageRank by power iteration on the directed weighted graph. Teleport is
/// uniform and dangling nodes spread their mass uniformly. Stops when the
/// L1 change of an iteration drops below `tol`.
inline CentralityScores pagerank(const TrustGraph& graph, double damping = 0.85, double tol = 1e-12,
                                 std::size_t max_iterations = 10000) {
  if (!(damping > 0.0 && damping < 1.0)) throw ValidationError("pagerank damping must lie in (0, 1)");
  const std::size_t n = graph.num_users();
  CentralityScores out{std::vector<double>(n, n ? 1.0 / static_cast<double>(n) : 0.0),
                       CentralityMethod::pagerank};
  if (n == 0) return out;
  std::vector<double> out_weight(n, 0.0);
  for (Index u = 0; u < n; ++u) {
    for (const auto& e : graph.out(u)) out_weight[u] += e.weight;
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  auto& x = out.score;
  std::vector<double> y(n);
  for (std::size_t it = 0; it < max_iterations; ++it) {
    double dangling = 0.0;
    for (Index u = 0; u < n; ++u) {
      if (out_weight[u] == 0.0) dangling += x[u];
    }
    std::fill(y.begin(), y.end(), (1.0 - damping) * inv_n + damping * dangling * inv_n);
    for (Index u = 0; u < n; ++u) {
      if (out_weight[u] == 0.0) continue;
      const double share = damping * x[u] / out_weight[u];
      for (const auto& e : graph.out(u)) y[e.target] += share * e.weight;
    }
    double diff = 0.0;
    for (Index u = 0; u < n; ++u) diff += std::abs(y[u] - x[u]);
    x.swap(y);
    if (diff < tol) break;
  }
  const double sum = std::accumulate(x.begin(), x.end(), 0.0);
  for (auto& v : x) v /= sum;
  return out;
}

// HITS authority scores, L1-normalized.
inline CentralityScores hits_authority(const TrustGraph& graph, double tol = 1e-12,
                                       std::size_t max_iterations = 10000) {
  const std::size_t n = graph.num_users();
  std::vector<double> hub(n, n ? 1.0 / static_cast<double>(n) : 0.0), auth(n, 0.0), next(n);
  const auto normalize = [](std::vector<double>& v) {
    const double s = std::accumulate(v.begin(), v.end(), 0.0);
    if (s > 0.0) {
      for (auto& x : v) x /= s;
    }
    return s > 0.0;
  };
  if (graph.num_edges() == 0) return {hub, CentralityMethod::hits_authority};
  for (std::size_t it = 0; it < max_iterations; ++it) {
    std::fill(next.begin(), next.end(), 0.0);
    for (Index u = 0; u < n; ++u) {
      for (const auto& e : graph.out(u)) next[e.target] += e.weight * hub[u];
    }
    normalize(next);
    double diff = 0.0;
    for (Index u = 0; u < n; ++u) diff += std::abs(next[u] - auth[u]);
    auth.swap(next);
    std::fill(hub.begin(), hub.end(), 0.0);
    for (Index u = 0; u < n; ++u) {
      for (const auto& e : graph.out(u)) hub[u] += e.weight * auth[e.target];
    }
    normalize(hub);
    if (diff < tol) break;
  }
  return {auth, CentralityMethod::hits_authority};
}

// Weighted in-degree: how much trust a user receives.
inline CentralityScores degree_centrality(const TrustGraph& graph) {
  CentralityScores out{std::vector<double>(graph.num_users(), 0.0), CentralityMethod::degree};
  for (Index u = 0; u < graph.num_users(); ++u) {
    for (const auto& e : graph.out(u)) out.score[e.target] += e.weight;
  }
  return out;
}

inline CentralityScores centrality(const TrustGraph& graph, CentralityMethod method, double damping = 0.85) {
  switch (method) {
    case CentralityMethod::pagerank: return pagerank(graph, damping);
    case CentralityMethod::hits_authority: return hits_authority(graph);
    case CentralityMethod::degree: return degree_centrality(graph);
  }
  throw ValidationError("unknown centrality method");
}

/// Scores each community on the directed subgraph induced by its members.
inline CentralityScores community_centrality(const TrustGraph& graph, const CommunityAssignment& assignment,
                                             CentralityMethod method, double damping = 0.85) {
  if (assignment.community_of.size() != graph.num_users()) {
    throw ValidationError("community assignment does not cover every node");
  }
  CentralityScores out{std::vector<double>(graph.num_users(), 0.0), method};
  const auto members = assignment.members();
  std::vector<Index> local(graph.num_users());
  for (const auto& group : members) {
    for (Index k = 0; k < group.size(); ++k) local[group[k]] = k;
    std::vector<TrustGraph::Triple> edges;
    for (const Index u : group) {
      for (const auto& e : graph.out(u)) {
        if (assignment.community_of[e.target] == assignment.community_of[u]) {
          edges.push_back({local[u], local[e.target], e.weight});
        }
      }
    }
    const auto sub = TrustGraph::from_edges(group.size(), edges);
    const auto scores = centrality(sub, method, damping);
    for (Index k = 0; k < group.size(); ++k) out.score[group[k]] = scores.score[k];
  }
  return out;
}

struct LeaderTable {
  std::vector<Index> leader_of;
};

/// Highest-scoring member of every community; ties go to the smallest
/// user index.
inline LeaderTable leaders(const CommunityAssignment& assignment, const CentralityScores& scores) {
  if (scores.score.size() < assignment.community_of.size()) {
    throw ValidationError("centrality scores do not cover every assigned user");
  }
  constexpr Index none = std::numeric_limits<Index>::max();
  LeaderTable table{std::vector<Index>(assignment.num_communities, none)};
  for (Index u = 0; u < assignment.community_of.size(); ++u) {
    Index& best = table.leader_of[assignment.community_of[u]];
    if (best == none || scores.score[u] > scores.score[best]) best = u;
  }
  for (const Index l : table.leader_of) {
    if (l == none) throw ValidationError("community without members");
  }
  return table;
}

/// Trust between users up to `max_depth` hops apart: the largest product
/// of edge trusts over shortest directed paths, times decay^(d-1) for
/// distance d. Direct edges keep their stored value.
struct PropagatedTrust {
  double decay = 0.8;
  std::size_t max_depth = 3;
  std::vector<std::vector<TrustEdge>> from;  // per source, sorted by target

  std::size_t num_users() const { return from.size(); }

  std::optional<double> value(Index u, Index v) const {
    if (u >= from.size()) return std::nullopt;
    const auto& row = from[u];
    const auto it = std::lower_bound(row.begin(), row.end(), v,
                                     [](const TrustEdge& e, Index t) { return e.target < t; });
    if (it == row.end() || it->target != v) return std::nullopt;
    return it->weight;
  }

  std::size_t num_pairs() const {
    std::size_t n = 0;
    for (const auto& r : from) n += r.size();
    return n;
  }

  void save(const std::string& path) const {
    auto out = text::open_output(path);
    out << "# users=" << from.size() << " decay=" << text::format_double(decay) << " depth=" << max_depth << '\n';
    for (Index u = 0; u < from.size(); ++u) {
      for (const auto& e : from[u]) out << u << ',' << e.target << ',' << text::format_double(e.weight) << '\n';
    }
  }

  static PropagatedTrust load(const std::string& path) {
    auto in = text::open_input(path);
    std::string line;
    std::getline(in, line);
    std::istringstream hs(line);
    std::string hash, a, b, c;
    hs >> hash >> a >> b >> c;
    PropagatedTrust t;
    const auto users = a.rfind("users=", 0) == 0 ? text::parse_number<std::size_t>(std::string_view(a).substr(6)) : std::nullopt;
    const auto decay = b.rfind("decay=", 0) == 0 ? text::parse_number<double>(std::string_view(b).substr(6)) : std::nullopt;
    const auto depth = c.rfind("depth=", 0) == 0 ? text::parse_number<std::size_t>(std::string_view(c).substr(6)) : std::nullopt;
    if (hash != "#" || !users || !decay || !depth) throw ParseError(path, 1, "malformed header");
    t.from.resize(*users);
    t.decay = *decay;
    t.max_depth = *depth;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
      ++lineno;
      if (text::is_blank_or_comment(line)) continue;
      const auto f = text::split_fields(line);
      const auto u = f.size() == 3 ? text::parse_number<Index>(f[0]) : std::nullopt;
      const auto v = f.size() == 3 ? text::parse_number<Index>(f[1]) : std::nullopt;
      const auto w = f.size() == 3 ? text::parse_number<double>(f[2]) : std::nullopt;
      if (!u || !v || !w || *u >= t.from.size()) throw ParseError(path, lineno, "expected 'source,target,value'");
      t.from[*u].push_back({*v, *w});
    }
    return t;
  }
};

inline PropagatedTrust propagate_trust(const TrustGraph& graph, double decay = 0.8, std::size_t max_depth = 3) {
  if (!(decay > 0.0 && decay <= 1.0)) throw ValidationError("trust decay must lie in (0, 1]");
  if (max_depth < 1) throw ValidationError("trust propagation depth must be >= 1");
  const std::size_t n = graph.num_users();
  PropagatedTrust out{decay, max_depth, std::vector<std::vector<TrustEdge>>(n)};
  constexpr std::size_t unseen = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> dist(n, unseen);
  std::vector<double> best(n, 0.0);
  std::vector<Index> frontier, next, visited;
  for (Index s = 0; s < n; ++s) {
    visited.assign(1, s);
    dist[s] = 0;
    best[s] = 1.0;
    frontier.assign(1, s);
    double level_decay = 1.0;
    for (std::size_t d = 1; d <= max_depth && !frontier.empty(); ++d) {
      next.clear();
      for (const Index u : frontier) {
        for (const auto& e : graph.out(u)) {
          const Index v = e.target;
          if (dist[v] == unseen) {
            dist[v] = d;
            best[v] = best[u] * e.weight;
            next.push_back(v);
            visited.push_back(v);
          } else if (dist[v] == d) {
            best[v] = std::max(best[v], best[u] * e.weight);
          }
        }
      }
      for (const Index v : next) out.from[s].push_back({v, best[v] * level_decay});
      level_decay *= decay;
      frontier.swap(next);
    }
    std::sort(out.from[s].begin(), out.from[s].end(),
              [](const TrustEdge& a, const TrustEdge& b) { return a.target < b.target; });
    for (const Index v : visited) dist[v] = unseen;
  }
  return out;
}

inline void save_communities(const std::string& path, const CommunityAssignment& a) {
  auto out = text::open_output(path);
  out << "# communities=" << a.num_communities << " modularity=" << text::format_double(a.modularity) << '\n';
  for (Index u = 0; u < a.community_of.size(); ++u) out << u << ',' << a.community_of[u] << '\n';
}

inline CommunityAssignment load_communities(const std::string& path) {
  auto in = text::open_input(path);
  std::string line;
  std::getline(in, line);
  CommunityAssignment a;
  {
    std::istringstream hs(line);
    std::string hash, c, q;
    hs >> hash >> c >> q;
    const auto count = c.rfind("communities=", 0) == 0 ? text::parse_number<std::size_t>(std::string_view(c).substr(12)) : std::nullopt;
    const auto mod = q.rfind("modularity=", 0) == 0 ? text::parse_number<double>(std::string_view(q).substr(11)) : std::nullopt;
    if (hash != "#" || !count || !mod) throw ParseError(path, 1, "malformed header");
    a.num_communities = *count;
    a.modularity = *mod;
  }
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::is_blank_or_comment(line)) continue;
    const auto f = text::split_fields(line);
    const auto u = f.size() == 2 ? text::parse_number<Index>(f[0]) : std::nullopt;
    const auto c = f.size() == 2 ? text::parse_number<Index>(f[1]) : std::nullopt;
    if (!u || !c || *u != a.community_of.size() || *c >= a.num_communities) {
      throw ParseError(path, lineno, "expected 'user,community'");
    }
    a.community_of.push_back(*c);
  }
  return a;
}

inline void save_leaders(const std::string& path, const LeaderTable& t) {
  auto out = text::open_output(path);
  for (Index c = 0; c < t.leader_of.size(); ++c) out << c << ',' << t.leader_of[c] << '\n';
}

inline LeaderTable load_leaders(const std::string& path) {
  auto in = text::open_input(path);
  LeaderTable t;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::is_blank_or_comment(line)) continue;
    const auto f = text::split_fields(line);
    const auto c = f.size() == 2 ? text::parse_number<Index>(f[0]) : std::nullopt;
    const auto u = f.size() == 2 ? text::parse_number<Index>(f[1]) : std::nullopt;
    if (!c || !u || *c != t.leader_of.size()) throw ParseError(path, lineno, "expected 'community,leader'");
    t.leader_of.push_back(*u);
  }
  return t;
}

}  // namespace trustrec
