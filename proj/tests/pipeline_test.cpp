#include <sstream>

#include <gtest/gtest.h>

#include "common.hpp"
#include "json.hpp"
#include "trustrec/pipeline.hpp"

using namespace trustrec;
using namespace trustrec::pipeline;

namespace {

// Copies the toy dataset into a fresh directory and returns its config
// with the work directory placed beside it.
PipelineConfig toy_config(const std::string& name) {
  const auto dir = testing_util::temp_dir(name);
  for (const char* f : {"ratings.csv", "trust.csv"}) fs::copy_file(fs::path(TRUSTREC_TOY_DIR) / f, dir / f);
  testing_util::write_file(dir / "config.txt", text::read_file((fs::path(TRUSTREC_TOY_DIR) / "config.txt").string()) + "\nwork = work\n");
  return load_config(dir / "config.txt");
}

std::vector<std::string> recomputed(const std::vector<StageStatus>& s) {
  std::vector<std::string> out;
  for (const auto& x : s) {
    if (x.recomputed) out.push_back(x.name);
  }
  return out;
}

}  // namespace

TEST(Config, ParsesKeysAndResolvesPaths) {
  const auto c = parse_config(
      "# comment\n"
      "seed = 9\n"
      "data.ratings = r.csv\n"
      "data.trust = /abs/t.csv\n"
      "\n"
      "autoencoder.layers = 8,4,8\n"
      "model.k = 4\n"
      "model.lambda_trust = 0.25\n"
      "graph.centrality = degree\n"
      "embed.q = 2\n",
      "/base");
  EXPECT_EQ(c.seed, 9u);
  EXPECT_EQ(c.ratings, fs::path("/base/r.csv"));
  EXPECT_EQ(c.trust, fs::path("/abs/t.csv"));
  EXPECT_EQ(c.autoencoder.layer_sizes, (std::vector<std::size_t>{8, 4, 8}));
  EXPECT_EQ(c.autoencoder.bottleneck_dim, 4u);
  EXPECT_EQ(c.model.k, 4u);
  EXPECT_EQ(c.model.lambda_trust, 0.25);
  EXPECT_EQ(c.graph.centrality, CentralityMethod::degree);
  EXPECT_EQ(c.walk.q, 2.0);
  EXPECT_NO_THROW(validate(c));
}

TEST(Config, DefaultsValidate) {
  PipelineConfig c;
  EXPECT_NO_THROW(validate(c));
  EXPECT_EQ(c.model.k, 10u);
  EXPECT_EQ(c.model.learning_rate, 0.005);
}

TEST(Config, ErrorsCarryTheLineNumber) {
  const auto line_of = [](const std::string& text) -> std::size_t {
    try {
      parse_config(text, "/");
    } catch (const ParseError& e) {
      return e.line();
    }
    return 0;
  };
  EXPECT_EQ(line_of("seed = 1\n\nseed = 2\n"), 3u);
  EXPECT_EQ(line_of("model.k = 3\nmodel.bogus = 1\n"), 2u);
  EXPECT_EQ(line_of("model.k = three\n"), 1u);
  EXPECT_EQ(line_of("# fine\nno equals sign\n"), 2u);
  EXPECT_EQ(line_of("graph.centrality = closeness\n"), 1u);
}

TEST(Config, InconsistentSettingsFailValidation) {
  EXPECT_THROW(validate(parse_config("autoencoder.layers = 8,4,6\n", "/")), ValidationError);
  EXPECT_THROW(validate(parse_config("autoencoder.layers = 8,4,8\n", "/")), ValidationError);  // bottleneck != k
  EXPECT_THROW(validate(parse_config("split.train_fraction = 1.5\n", "/")), ValidationError);
  EXPECT_THROW(validate(parse_config("graph.decay = 0\n", "/")), ValidationError);
  EXPECT_THROW(load_config("/nonexistent/config.txt"), InputError);
}

TEST(WorkDirLock, SecondHolderFailsUntilRelease) {
  const auto dir = testing_util::temp_dir("lock");
  {
    WorkDirLock first(dir);
    EXPECT_TRUE(fs::exists(dir / ".lock"));
    EXPECT_THROW(WorkDirLock second(dir), InputError);
  }
  EXPECT_FALSE(fs::exists(dir / ".lock"));
  EXPECT_NO_THROW(WorkDirLock again(dir));
}

TEST(Hashing, Fnv1aKnownValues) {
  EXPECT_EQ(fnv1a(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(hex(0xabcULL), "0000000000000abc");
}

TEST(Pipeline, OnlyChangedStagesAndTheirDependentsRerun) {
  auto c = toy_config("stages");
  EXPECT_EQ(recomputed(train_all(c)), (std::vector<std::string>{"prepare", "autoencoder", "embed", "graph", "model"}));
  EXPECT_TRUE(recomputed(train_all(c)).empty());

  c.model.lambda_p = 0.2;
  EXPECT_EQ(recomputed(train_all(c)), (std::vector<std::string>{"model"}));

  c.walk.q = 2.0;
  EXPECT_EQ(recomputed(train_all(c)), (std::vector<std::string>{"embed", "model"}));

  c.graph.decay = 0.5;
  EXPECT_EQ(recomputed(train_all(c)), (std::vector<std::string>{"graph", "model"}));

  c.autoencoder.epochs = 3;
  EXPECT_EQ(recomputed(train_all(c)), (std::vector<std::string>{"autoencoder", "model"}));

  // A new split leaves the trust file, and so the trust stages, untouched.
  c.split.train_fraction = 0.7;
  EXPECT_EQ(recomputed(train_all(c)), (std::vector<std::string>{"prepare", "autoencoder", "model"}));

  c.seed = 12;
  EXPECT_EQ(recomputed(train_all(c)), (std::vector<std::string>{"prepare", "autoencoder", "embed", "graph", "model"}));
}

TEST(Pipeline, DeletedArtifactIsRebuiltIdentically) {
  auto c = toy_config("rebuild");
  train_all(c);
  const auto path = Layout{c.work}.embeddings();
  const auto before = text::read_file(path.string());
  fs::remove(path);
  // Downstream keys hash artifact contents, so an identical rebuild keeps the model cached.
  EXPECT_EQ(recomputed(train_all(c)), (std::vector<std::string>{"embed"}));
  EXPECT_EQ(text::read_file(path.string()), before);
}

TEST(Pipeline, EvaluateWritesTextAndJsonReports) {
  auto c = toy_config("reports");
  train_all(c);
  const auto reports = evaluate_command(c, false);
  ASSERT_EQ(reports.size(), 1u);
  EXPECT_EQ(reports[0].model_tag, "model");
  EXPECT_EQ(reports[0].seed, 11u);
  const Layout layout{c.work};
  EXPECT_EQ(text::read_file(layout.report_text().string()), reports[0].line() + "\n");
  const auto j = nlohmann::json::parse(text::read_file(layout.report_json().string()));
  ASSERT_TRUE(j.is_array());
  EXPECT_EQ(j[0]["tag"], "model");
  EXPECT_DOUBLE_EQ(j[0]["rmse"].get<double>(), reports[0].rmse);
  EXPECT_EQ(j[0]["config"]["model.k"], "10");

  std::ostringstream out;
  report_command(c, out);
  EXPECT_NE(out.str().find("stage model key="), std::string::npos);
  EXPECT_NE(out.str().find(reports[0].line()), std::string::npos);
}

TEST(Pipeline, MissingInputsAreInputErrors) {
  auto c = toy_config("missing");
  EXPECT_THROW(evaluate_command(c, false), InputError);
  fs::remove(c.trust);
  EXPECT_THROW(train_all(c), InputError);
}
