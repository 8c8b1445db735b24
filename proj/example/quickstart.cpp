// Trains the full model on a small synthetic social dataset and compares it
// with plain matrix factorization.

#include <iostream>

#include "trustrec/embed.hpp"
#include "trustrec/eval.hpp"
#include "trustrec/graph.hpp"
#include "trustrec/model.hpp"
#include "trustrec/synthetic.hpp"

int main() {
  using namespace trustrec;
  SocialSpec spec;
  spec.num_users = 60;
  spec.num_items = 40;
  spec.num_groups = 3;
  spec.ratings_per_user = 12;
  spec.seed = 7;
  const auto data = social_ratings(spec);
  const auto [train_set, test_set] = split(data.ratings, SplitSpec{0.8, 7});

  HyperParams hp;
  hp.k = 4;
  hp.epochs = 60;
  hp.seed = 7;

  AutoencoderConfig ae;
  ae.layer_sizes = {16, 4, 16};
  ae.bottleneck_dim = 4;
  ae.epochs = 50;
  ae.batch_size = 8;
  const auto init = autoencoder_factors(train_set, ae, ae, hp.k);

  WalkConfig walk;
  walk.walk_length = 20;
  walk.window = 5;
  const auto embeddings = embed_users(data.trust, hp.k, walk);
  const auto communities = louvain(data.trust, 7);
  const auto leader_table = leaders(communities, community_centrality(data.trust, communities, CentralityMethod::pagerank));
  const auto trust = propagate_trust(data.trust);

  AblationInputs in;
  in.context.train = &train_set;
  in.context.trust = &trust;
  in.context.embeddings = &embeddings;
  in.context.communities = &communities;
  in.context.leaders = &leader_table;
  in.test = &test_set;
  in.autoencoder_init = &init;

  std::cout << "communities=" << communities.num_communities << " modularity=" << communities.modularity << '\n';
  std::cout << evaluate_constant(global_mean(train_set), test_set).line() << '\n';
  for (const auto& report : run_ablations(in, hp)) std::cout << report.line() << '\n';
}
