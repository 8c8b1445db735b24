#include <numeric>

#include <gtest/gtest.h>

#include "common.hpp"
#include "trustrec/embed.hpp"

using namespace trustrec;
using testing_util::undirected;

namespace {

WalkConfig walk_config(double p, double q, std::uint64_t seed = 1) {
  WalkConfig c;
  c.p = p;
  c.q = q;
  c.seed = seed;
  return c;
}

double probability_of(const std::vector<std::pair<Index, double>>& dist, Index x) {
  for (const auto& [v, pr] : dist) {
    if (v == x) return pr;
  }
  return 0.0;
}

double cosine(const Eigen::VectorXd& a, const Eigen::VectorXd& b) { return a.dot(b) / (a.norm() * b.norm()); }

}  // namespace

TEST(TransitionProbs, UniformWhenPAndQAreOne) {
  const auto g = testing_util::graph_from(4, {{0, 1, 0.5}, {0, 2, 1.0}, {0, 3, 0.5}, {1, 0, 1}, {2, 0, 1}, {3, 0, 1}});
  const auto d = transition_probs(g, Index{1}, 0, walk_config(1, 1));
  EXPECT_DOUBLE_EQ(probability_of(d, 1), 0.25);
  EXPECT_DOUBLE_EQ(probability_of(d, 2), 0.5);
  EXPECT_DOUBLE_EQ(probability_of(d, 3), 0.25);
}

TEST(TransitionProbs, TriangleBias) {
  const auto g = undirected(3, {{0, 1}, {1, 2}, {0, 2}});
  const auto d = transition_probs(g, Index{0}, 1, walk_config(0.5, 2));
  EXPECT_NEAR(probability_of(d, 0), 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(probability_of(d, 2), 1.0 / 3.0, 1e-15);
}

TEST(TransitionProbs, InOutBiasForDistanceTwo) {
  // path 0-1-2: from 1 having come from 0, node 2 is two hops from 0
  const auto g = undirected(3, {{0, 1}, {1, 2}});
  const auto d = transition_probs(g, Index{0}, 1, walk_config(1.0, 4.0));
  EXPECT_NEAR(probability_of(d, 0), 0.8, 1e-15);
  EXPECT_NEAR(probability_of(d, 2), 0.2, 1e-15);
}

TEST(TransitionProbs, SoleNeighborAndFirstStep) {
  const auto g = undirected(2, {{0, 1}});
  const auto d = transition_probs(g, Index{0}, 1, walk_config(3, 0.2));
  ASSERT_EQ(d.size(), 1u);
  EXPECT_EQ(d[0].first, 0u);
  EXPECT_EQ(d[0].second, 1.0);
  const auto first = transition_probs(g, std::nullopt, 0, walk_config(3, 0.2));
  EXPECT_EQ(probability_of(first, 1), 1.0);
}

TEST(TransitionProbsProperty, AlwaysAValidDistribution) {
  Rng rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    const auto g = testing_util::random_digraph(2 + rng.index(10), 0.3, rng).symmetrized();
    const Index curr = static_cast<Index>(rng.index(g.num_users()));
    if (g.out_degree(curr) == 0) continue;
    const auto nbrs = g.out(curr);
    const std::optional<Index> prev =
        rng.uniform() < 0.2 ? std::nullopt : std::optional<Index>(nbrs[rng.index(nbrs.size())].target);
    const auto d = transition_probs(g, prev, curr, walk_config(0.1 + 3 * rng.uniform(), 0.1 + 3 * rng.uniform()));
    double sum = 0.0;
    for (const auto& [v, p] : d) {
      EXPECT_GE(p, 0.0);
      sum += p;
    }
    EXPECT_NEAR(sum, 1.0, 1e-12);
  }
}

TEST(WalkConfig, Validation) {
  EXPECT_NO_THROW(WalkConfig{}.validate());
  EXPECT_THROW(walk_config(0, 1).validate(), ValidationError);
  auto c = walk_config(1, 1);
  c.window = c.walk_length + 1;
  EXPECT_THROW(c.validate(), ValidationError);
}

TEST(GenerateWalks, TwoNodeGraphAlternates) {
  const auto g = undirected(2, {{0, 1}});
  auto c = walk_config(1, 1);
  c.walks_per_node = 1;
  c.walk_length = 3;
  c.window = 1;
  const auto walks = generate_walks(g, c);
  ASSERT_EQ(walks.size(), 2u);
  EXPECT_EQ(walks[0], (Walk{0, 1, 0}));
  EXPECT_EQ(walks[1], (Walk{1, 0, 1}));
}

TEST(GenerateWalks, IsolatedNodesStartNoWalksAndSeedIsDeterministic) {
  const auto g = undirected(4, {{0, 1}, {1, 2}});
  auto c = walk_config(0.5, 2, 9);
  c.walks_per_node = 3;
  c.walk_length = 6;
  c.window = 2;
  const auto walks = generate_walks(g, c);
  EXPECT_EQ(walks.size(), 9u);
  for (const auto& w : walks) {
    EXPECT_NE(w.front(), 3u);
    EXPECT_LE(w.size(), 6u);
  }
  EXPECT_EQ(generate_walks(g, c), walks);
}

TEST(Sgns, GradientMatchesFiniteDifferences) {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const int k = 1 + static_cast<int>(rng.index(6));
    Eigen::VectorXd x(k), y(k);
    std::vector<Eigen::VectorXd> negs(1 + rng.index(4), Eigen::VectorXd(k));
    for (int f = 0; f < k; ++f) {
      x[f] = rng.normal();
      y[f] = rng.normal();
      for (auto& n : negs) n[f] = rng.normal();
    }
    const auto g = sgns_gradient(x, y, negs);
    const auto loss = [&] { return sgns_loss(x, y, negs); };
    for (int f = 0; f < k; ++f) {
      EXPECT_LT(testing_util::relative_error(g.center[f], testing_util::central_difference(x[f], loss)), 1e-4);
      EXPECT_LT(testing_util::relative_error(g.context[f], testing_util::central_difference(y[f], loss)), 1e-4);
      for (std::size_t s = 0; s < negs.size(); ++s) {
        EXPECT_LT(testing_util::relative_error(g.negatives[s][f], testing_util::central_difference(negs[s][f], loss)),
                  1e-4);
      }
    }
  }
}

TEST(SkipGram, ZeroEpochsKeepsInitialization) {
  const std::vector<Walk> walks{{0, 1, 2, 1, 0}};
  auto c = walk_config(1, 1, 4);
  c.epochs = 0;
  c.window = 2;
  const auto m = train_skipgram_model(walks, 3, 4, c);
  const auto again = train_skipgram_model(walks, 3, 4, c);
  EXPECT_EQ(m.input, again.input);
  EXPECT_EQ(m.output, Eigen::MatrixXd::Zero(4, 3));
  EXPECT_LE(m.input.cwiseAbs().maxCoeff(), 0.5 / 4);
  EXPECT_GT(m.input.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_THROW(train_skipgram_model(walks, 3, 0, c), ValidationError);
  EXPECT_THROW(train_skipgram_model({}, 3, 4, c), ValidationError);
}

TEST(SkipGram, RepeatedPairScoreIncreasesOverEpochs) {
  Walk w;
  for (int r = 0; r < 20; ++r) {
    w.push_back(0);
    w.push_back(1);
  }
  const std::vector<Walk> walks{w};
  auto c = walk_config(1, 1, 2);
  c.epochs = 6;
  c.window = 1;
  c.negative_samples = 0;
  std::vector<double> score;
  train_skipgram_model(walks, 2, 3, c, [&](std::size_t, const SkipGramModel& m) {
    score.push_back(sigmoid(m.input.col(0).dot(m.output.col(1))));
  });
  ASSERT_EQ(score.size(), 6u);
  for (std::size_t e = 1; e < score.size(); ++e) EXPECT_GT(score[e], score[e - 1]);
}

TEST(SkipGram, BarbellSeparatesCliques) {
  auto c = walk_config(1, 1, 5);
  c.walk_length = 20;
  c.window = 5;
  const auto table = embed_users(testing_util::barbell(), 8, c);
  double intra = 0.0, inter = 0.0;
  int n_intra = 0, n_inter = 0;
  for (Index a = 0; a < 10; ++a) {
    for (Index b = a + 1; b < 10; ++b) {
      const double s = cosine(table.vector(a), table.vector(b));
      if ((a < 5) == (b < 5)) {
        intra += s;
        ++n_intra;
      } else {
        inter += s;
        ++n_inter;
      }
    }
  }
  EXPECT_GT(intra / n_intra, inter / n_inter);
}

TEST(EmbedUsers, EmptyGraphGivesZeroVectors) {
  const auto t = embed_users(TrustGraph(5), 7, WalkConfig{});
  EXPECT_EQ(t.num_users(), 5u);
  EXPECT_EQ(t.dim(), 7u);
  EXPECT_EQ(t.vectors(), Eigen::MatrixXd::Zero(7, 5));
  EXPECT_THROW(embed_users(TrustGraph(5), 0, WalkConfig{}), ValidationError);
}

TEST(EmbedUsers, UsersWithoutTrustAreZero) {
  const auto g = testing_util::graph_from(5, {{0, 1, 1.0}, {2, 1, 0.5}});
  auto c = walk_config(1, 1, 3);
  c.walk_length = 10;
  c.window = 3;
  const auto t = embed_users(g, 4, c);
  EXPECT_EQ(t.vector(3).norm(), 0.0);
  EXPECT_EQ(t.vector(4).norm(), 0.0);
  EXPECT_GT(t.vector(0).norm(), 0.0);
  EXPECT_TRUE(t.vectors().allFinite());
}

TEST(EmbedUsersProperty, RelabelingPermutesEmbeddings) {
  Rng rng(17);
  for (int trial = 0; trial < 5; ++trial) {
    const std::size_t n = 4 + rng.index(6);
    const auto g = testing_util::random_digraph(n, 0.3, rng);
    std::vector<Index> perm(n);
    std::iota(perm.begin(), perm.end(), Index{0});
    rng.shuffle(perm);
    std::vector<TrustGraph::Triple> moved;
    for (const auto& e : g.edges()) moved.push_back({perm[e.source], perm[e.target], e.weight});
    const auto h = TrustGraph::from_edges(n, moved);
    std::vector<std::uint64_t> keys(n), moved_keys(n);
    for (Index u = 0; u < n; ++u) {
      keys[u] = 1000 + 7 * u;
      moved_keys[perm[u]] = keys[u];
    }
    auto c = walk_config(0.7, 1.5, rng.next());
    c.walk_length = 12;
    c.window = 3;
    c.walks_per_node = 4;
    const auto a = embed_users(g, 3, c, keys);
    const auto b = embed_users(h, 3, c, moved_keys);
    for (Index u = 0; u < n; ++u) EXPECT_EQ(b.vector(perm[u]), a.vector(u)) << "trial " << trial << " user " << u;
  }
}

TEST(EmbeddingTable, RoundTrip) {
  Eigen::MatrixXd v(2, 3);
  v << 0.1, -2.5, 0, 1e-17, 3, 0.3333333333333333;
  const EmbeddingTable t(v);
  const auto dir = testing_util::temp_dir("embedding_table");
  t.save((dir / "e.txt").string());
  EXPECT_EQ(EmbeddingTable::load((dir / "e.txt").string()), t);
  testing_util::write_file(dir / "bad.txt", "# users=1 dim=2\n0 1\n");
  EXPECT_THROW(EmbeddingTable::load((dir / "bad.txt").string()), ParseError);
}
