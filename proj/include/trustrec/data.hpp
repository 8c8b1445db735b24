#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "trustrec/error.hpp"
#include "trustrec/rng.hpp"
#include "trustrec/text_io.hpp"

namespace trustrec {

using Index = std::uint32_t;

struct RatingScale {
  double min = 1.0;
  double max = 5.0;

  bool contains(double r) const { return r >= min && r <= max; }
  double clamp(double r) const { return std::clamp(r, min, max); }
};

struct Rating {
  Index user;
  Index item;
  double value;

  friend bool operator==(const Rating&, const Rating&) = default;
};

/// Sparse user x item rating matrix. Entries are kept sorted by
/// (user, item), so each user's row is a contiguous slice; a second index
/// orders entries by (item, user) for column access.
class RatingMatrix {
 public:
  RatingMatrix() = default;

  RatingMatrix(std::size_t num_users, std::size_t num_items, RatingScale scale,
               std::vector<Rating> entries)
      : num_users_(num_users), num_items_(num_items), scale_(scale), entries_(std::move(entries)) {
    if (!(scale_.min < scale_.max)) throw ValidationError("rating scale must satisfy min < max");
    for (const auto& e : entries_) {
      if (e.user >= num_users_ || e.item >= num_items_) {
        throw ValidationError("rating index (" + std::to_string(e.user) + ", " +
                              std::to_string(e.item) + ") outside matrix shape");
      }
      if (!scale_.contains(e.value)) {
        throw ValidationError("rating " + text::format_double(e.value) + " outside scale [" +
                              text::format_double(scale_.min) + ", " +
                              text::format_double(scale_.max) + "]");
      }
    }
    std::sort(entries_.begin(), entries_.end(), [](const Rating& a, const Rating& b) {
      return a.user != b.user ? a.user < b.user : a.item < b.item;
    });
    for (std::size_t k = 1; k < entries_.size(); ++k) {
      if (entries_[k].user == entries_[k - 1].user && entries_[k].item == entries_[k - 1].item) {
        throw ValidationError("duplicate rating for (" + std::to_string(entries_[k].user) + ", " +
                              std::to_string(entries_[k].item) + ")");
      }
    }
    build_indices();
  }

  std::size_t num_users() const { return num_users_; }
  std::size_t num_items() const { return num_items_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const RatingScale& scale() const { return scale_; }

  std::span<const Rating> entries() const { return entries_; }

  std::span<const Rating> user_row(Index u) const {
    return std::span<const Rating>(entries_).subspan(user_offsets_[u],
                                                     user_offsets_[u + 1] - user_offsets_[u]);
  }

  // Positions into entries() of item i's ratings, ordered by user.
  std::span<const std::size_t> item_column(Index i) const {
    return std::span<const std::size_t>(by_item_).subspan(item_offsets_[i],
                                                          item_offsets_[i + 1] - item_offsets_[i]);
  }

  std::size_t user_count(Index u) const { return user_offsets_[u + 1] - user_offsets_[u]; }
  std::size_t item_count(Index i) const { return item_offsets_[i + 1] - item_offsets_[i]; }

  std::optional<double> find(Index u, Index i) const {
    if (u >= num_users_) return std::nullopt;
    const auto row = user_row(u);
    const auto it = std::lower_bound(row.begin(), row.end(), i,
                                     [](const Rating& r, Index item) { return r.item < item; });
    if (it == row.end() || it->item != i) return std::nullopt;
    return it->value;
  }

  // Same entries in a larger user index space (users known only from trust).
  RatingMatrix with_num_users(std::size_t num_users) const {
    if (num_users < num_users_) throw ValidationError("cannot shrink the user index space");
    return RatingMatrix(num_users, num_items_, scale_, entries_);
  }

  friend bool operator==(const RatingMatrix& a, const RatingMatrix& b) {
    return a.num_users_ == b.num_users_ && a.num_items_ == b.num_items_ &&
           a.scale_.min == b.scale_.min && a.scale_.max == b.scale_.max && a.entries_ == b.entries_;
  }

 private:
  void build_indices() {
    user_offsets_.assign(num_users_ + 1, 0);
    item_offsets_.assign(num_items_ + 1, 0);
    for (const auto& e : entries_) {
      ++user_offsets_[e.user + 1];
      ++item_offsets_[e.item + 1];
    }
    std::partial_sum(user_offsets_.begin(), user_offsets_.end(), user_offsets_.begin());
    std::partial_sum(item_offsets_.begin(), item_offsets_.end(), item_offsets_.begin());
    by_item_.resize(entries_.size());
    auto cursor = item_offsets_;
    for (std::size_t k = 0; k < entries_.size(); ++k) by_item_[cursor[entries_[k].item]++] = k;
  }

  std::size_t num_users_ = 0;
  std::size_t num_items_ = 0;
  RatingScale scale_{};
  std::vector<Rating> entries_;
  std::vector<std::size_t> user_offsets_{0};
  std::vector<std::size_t> item_offsets_{0};
  std::vector<std::size_t> by_item_;
};

struct TrustEdge {
  Index target;
  double weight;

  friend bool operator==(const TrustEdge&, const TrustEdge&) = default;
};

/// Directed weighted user graph. Out-adjacency lists are sorted by target.
class TrustGraph {
 public:
  TrustGraph() = default;
  explicit TrustGraph(std::size_t num_users) : out_(num_users) {}

  struct Triple {
    Index source;
    Index target;
    double weight;
  };

  // Later triples for the same (source, target) overwrite earlier ones.
  static TrustGraph from_edges(std::size_t num_users, std::span<const Triple> edges) {
    TrustGraph g(num_users);
    for (const auto& e : edges) {
      if (e.source >= num_users || e.target >= num_users) {
        throw ValidationError("trust edge endpoint outside user index space");
      }
      if (e.source == e.target) throw ValidationError("trust graph cannot contain self-loops");
      if (!(e.weight > 0.0 && e.weight <= 1.0)) {
        throw ValidationError("trust value " + text::format_double(e.weight) +
                              " outside (0, 1]");
      }
      g.out_[e.source].push_back({e.target, e.weight});
    }
    for (auto& adj : g.out_) {
      std::stable_sort(adj.begin(), adj.end(),
                       [](const TrustEdge& a, const TrustEdge& b) { return a.target < b.target; });
      // keep the last of each run of equal targets
      std::vector<TrustEdge> dedup;
      dedup.reserve(adj.size());
      for (std::size_t k = 0; k < adj.size(); ++k) {
        if (k + 1 < adj.size() && adj[k + 1].target == adj[k].target) continue;
        dedup.push_back(adj[k]);
      }
      adj = std::move(dedup);
    }
    return g;
  }

  std::size_t num_users() const { return out_.size(); }

  std::size_t num_edges() const {
    std::size_t n = 0;
    for (const auto& adj : out_) n += adj.size();
    return n;
  }

  std::span<const TrustEdge> out(Index u) const { return out_[u]; }
  std::size_t out_degree(Index u) const { return out_[u].size(); }

  std::optional<double> weight(Index u, Index v) const {
    const auto& adj = out_[u];
    const auto it = std::lower_bound(adj.begin(), adj.end(), v,
                                     [](const TrustEdge& e, Index t) { return e.target < t; });
    if (it == adj.end() || it->target != v) return std::nullopt;
    return it->weight;
  }

  bool has_edge(Index u, Index v) const { return weight(u, v).has_value(); }

  // Undirected view: edge present if either direction exists, weight = max.
  TrustGraph symmetrized() const {
    std::vector<Triple> edges;
    edges.reserve(2 * num_edges());
    for (Index u = 0; u < out_.size(); ++u) {
      for (const auto& e : out_[u]) {
        const double w = std::max(e.weight, weight(e.target, u).value_or(0.0));
        edges.push_back({u, e.target, w});
        edges.push_back({e.target, u, w});
      }
    }
    return from_edges(num_users(), edges);
  }

  TrustGraph with_num_users(std::size_t num_users) const {
    if (num_users < out_.size()) throw ValidationError("cannot shrink the user index space");
    TrustGraph g = *this;
    g.out_.resize(num_users);
    return g;
  }

  std::vector<Triple> edges() const {
    std::vector<Triple> all;
    all.reserve(num_edges());
    for (Index u = 0; u < out_.size(); ++u) {
      for (const auto& e : out_[u]) all.push_back({u, e.target, e.weight});
    }
    return all;
  }

  friend bool operator==(const TrustGraph& a, const TrustGraph& b) { return a.out_ == b.out_; }

 private:
  std::vector<std::vector<TrustEdge>> out_;
};

/// External integer id <-> contiguous internal index, assigned in order of
/// first appearance.
class IdMap {
 public:
  Index intern(std::int64_t external) {
    const auto [it, inserted] = index_.try_emplace(external, static_cast<Index>(external_.size()));
    if (inserted) external_.push_back(external);
    return it->second;
  }

  std::optional<Index> find(std::int64_t external) const {
    const auto it = index_.find(external);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  std::int64_t external(Index internal) const { return external_.at(internal); }
  std::size_t size() const { return external_.size(); }
  std::span<const std::int64_t> externals() const { return external_; }

  void save(const std::string& path) const {
    auto out = text::open_output(path);
    for (std::size_t k = 0; k < external_.size(); ++k) out << external_[k] << ',' << k << '\n';
  }

  static IdMap load(const std::string& path) {
    auto in = text::open_input(path);
    IdMap map;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (text::is_blank_or_comment(line)) continue;
      const auto f = text::split_fields(line);
      const auto ext = f.size() == 2 ? text::parse_number<std::int64_t>(f[0]) : std::nullopt;
      const auto idx = f.size() == 2 ? text::parse_number<std::uint64_t>(f[1]) : std::nullopt;
      if (!ext || !idx) throw ParseError(path, lineno, "expected 'external_id,internal_index'");
      if (*idx != map.size() || map.find(*ext)) {
        throw ParseError(path, lineno, "id map indices must be contiguous and unique");
      }
      map.intern(*ext);
    }
    return map;
  }

  friend bool operator==(const IdMap& a, const IdMap& b) { return a.external_ == b.external_; }

 private:
  std::unordered_map<std::int64_t, Index> index_;
  std::vector<std::int64_t> external_;
};

struct LoadedRatings {
  RatingMatrix ratings;
  IdMap users;
  IdMap items;
};

/// Reads `user,item,rating` lines. Duplicate (user, item) pairs keep the
/// last line.
inline LoadedRatings load_ratings(const std::string& path, RatingScale scale = {}) {
  auto in = text::open_input(path);
  LoadedRatings out;
  std::vector<Rating> entries;
  std::unordered_map<std::uint64_t, std::size_t> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::is_blank_or_comment(line)) continue;
    const auto f = text::split_fields(line);
    if (f.size() != 3) throw ParseError(path, lineno, "expected 'user,item,rating'");
    const auto user = text::parse_number<std::int64_t>(f[0]);
    const auto item = text::parse_number<std::int64_t>(f[1]);
    const auto value = text::parse_number<double>(f[2]);
    if (!user || !item || !value || !std::isfinite(*value)) {
      throw ParseError(path, lineno, "malformed rating line '" + std::string(text::trim(line)) + "'");
    }
    if (!scale.contains(*value)) {
      throw ValidationError(path + ":" + std::to_string(lineno) + ": rating " +
                            text::format_double(*value) + " outside scale [" +
                            text::format_double(scale.min) + ", " + text::format_double(scale.max) +
                            "]");
    }
    const Index u = out.users.intern(*user);
    const Index i = out.items.intern(*item);
    const std::uint64_t key = (std::uint64_t(u) << 32) | i;
    if (const auto it = seen.find(key); it != seen.end()) {
      entries[it->second].value = *value;
    } else {
      seen.emplace(key, entries.size());
      entries.push_back({u, i, *value});
    }
  }
  out.ratings = RatingMatrix(out.users.size(), out.items.size(), scale, std::move(entries));
  return out;
}

struct LoadedTrust {
  TrustGraph graph;
  std::size_t skipped_self_loops = 0;
};

/// Reads `truster,trustee[,value]` lines. Users not yet in `users` are
/// appended to it. Self-loops are dropped and counted.
inline LoadedTrust load_trust(const std::string& path, IdMap& users) {
  auto in = text::open_input(path);
  LoadedTrust out;
  std::vector<TrustGraph::Triple> edges;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::is_blank_or_comment(line)) continue;
    const auto f = text::split_fields(line);
    if (f.size() != 2 && f.size() != 3) {
      throw ParseError(path, lineno, "expected 'truster,trustee[,value]'");
    }
    const auto truster = text::parse_number<std::int64_t>(f[0]);
    const auto trustee = text::parse_number<std::int64_t>(f[1]);
    const auto value = f.size() == 3 ? text::parse_number<double>(f[2]) : std::optional<double>(1.0);
    if (!truster || !trustee || !value) {
      throw ParseError(path, lineno, "malformed trust line '" + std::string(text::trim(line)) + "'");
    }
    if (!(*value > 0.0 && *value <= 1.0)) {
      throw ValidationError(path + ":" + std::to_string(lineno) + ": trust value outside (0, 1]");
    }
    if (*truster == *trustee) {
      ++out.skipped_self_loops;
      continue;
    }
    const Index u = users.intern(*truster);
    const Index v = users.intern(*trustee);
    edges.push_back({u, v, *value});
  }
  out.graph = TrustGraph::from_edges(users.size(), edges);
  return out;
}

struct SplitSpec {
  double train_fraction = 0.8;
  std::uint64_t seed = 0;
};

/// Uniform random split over rating entries. Both halves keep the input's
/// user/item index space.
inline std::pair<RatingMatrix, RatingMatrix> split(const RatingMatrix& ratings, const SplitSpec& spec) {
  if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0)) {
    throw ValidationError("train_fraction must lie in (0, 1)");
  }
  if (ratings.empty()) throw ValidationError("cannot split an empty rating matrix");
  const auto entries = ratings.entries();
  std::vector<std::size_t> order(entries.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(spec.seed);
  rng.shuffle(order);
  const auto n_train =
      static_cast<std::size_t>(std::llround(spec.train_fraction * static_cast<double>(entries.size())));
  std::vector<Rating> train, test;
  train.reserve(n_train);
  test.reserve(entries.size() - n_train);
  for (std::size_t k = 0; k < order.size(); ++k) {
    (k < n_train ? train : test).push_back(entries[order[k]]);
  }
  return {RatingMatrix(ratings.num_users(), ratings.num_items(), ratings.scale(), std::move(train)),
          RatingMatrix(ratings.num_users(), ratings.num_items(), ratings.scale(), std::move(test))};
}

inline double global_mean(const RatingMatrix& ratings) {
  if (ratings.empty()) throw ValidationError("global mean of an empty rating matrix");
  double sum = 0.0;
  for (const auto& e : ratings.entries()) sum += e.value;
  return sum / static_cast<double>(ratings.size());
}

// Work-directory formats: internal indices with a shape header, so a
// reloaded matrix has exactly the saved index space.

inline void save_indexed_ratings(const std::string& path, const RatingMatrix& m) {
  auto out = text::open_output(path);
  out << "# users=" << m.num_users() << " items=" << m.num_items()
      << " min=" << text::format_double(m.scale().min) << " max=" << text::format_double(m.scale().max)
      << '\n';
  for (const auto& e : m.entries()) out << e.user << ',' << e.item << ',' << text::format_double(e.value) << '\n';
}

inline RatingMatrix load_indexed_ratings(const std::string& path) {
  auto in = text::open_input(path);
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path, 1, "missing shape header");
  std::size_t users = 0, items = 0;
  RatingScale scale;
  {
    std::istringstream hs(line);
    std::string hash, a, b, c, d;
    hs >> hash >> a >> b >> c >> d;
    const auto value_of = [&](const std::string& kv, const std::string& key) -> std::string_view {
      if (kv.rfind(key + "=", 0) != 0) throw ParseError(path, 1, "malformed shape header");
      return std::string_view(kv).substr(key.size() + 1);
    };
    const auto u = text::parse_number<std::size_t>(value_of(a, "users"));
    const auto i = text::parse_number<std::size_t>(value_of(b, "items"));
    const auto lo = text::parse_number<double>(value_of(c, "min"));
    const auto hi = text::parse_number<double>(value_of(d, "max"));
    if (hash != "#" || !u || !i || !lo || !hi) throw ParseError(path, 1, "malformed shape header");
    users = *u;
    items = *i;
    scale = {*lo, *hi};
  }
  std::vector<Rating> entries;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::is_blank_or_comment(line)) continue;
    const auto f = text::split_fields(line);
    const auto u = f.size() == 3 ? text::parse_number<Index>(f[0]) : std::nullopt;
    const auto i = f.size() == 3 ? text::parse_number<Index>(f[1]) : std::nullopt;
    const auto r = f.size() == 3 ? text::parse_number<double>(f[2]) : std::nullopt;
    if (!u || !i || !r) throw ParseError(path, lineno, "expected 'user,item,rating'");
    entries.push_back({*u, *i, *r});
  }
  return RatingMatrix(users, items, scale, std::move(entries));
}

inline void save_indexed_trust(const std::string& path, const TrustGraph& g) {
  auto out = text::open_output(path);
  out << "# users=" << g.num_users() << '\n';
  for (const auto& e : g.edges()) out << e.source << ',' << e.target << ',' << text::format_double(e.weight) << '\n';
}

inline TrustGraph load_indexed_trust(const std::string& path) {
  auto in = text::open_input(path);
  std::string line;
  if (!std::getline(in, line) || line.rfind("# users=", 0) != 0) {
    throw ParseError(path, 1, "missing shape header");
  }
  const auto users = text::parse_number<std::size_t>(text::trim(std::string_view(line).substr(8)));
  if (!users) throw ParseError(path, 1, "malformed shape header");
  std::vector<TrustGraph::Triple> edges;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::is_blank_or_comment(line)) continue;
    const auto f = text::split_fields(line);
    const auto u = f.size() == 3 ? text::parse_number<Index>(f[0]) : std::nullopt;
    const auto v = f.size() == 3 ? text::parse_number<Index>(f[1]) : std::nullopt;
    const auto w = f.size() == 3 ? text::parse_number<double>(f[2]) : std::nullopt;
    if (!u || !v || !w) throw ParseError(path, lineno, "expected 'truster,trustee,value'");
    edges.push_back({*u, *v, *w});
  }
  return TrustGraph::from_edges(*users, edges);
}

}  // namespace trustrec
