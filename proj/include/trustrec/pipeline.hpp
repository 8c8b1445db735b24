#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "trustrec/autoencoder.hpp"
#include "trustrec/data.hpp"
#include "trustrec/embed.hpp"
#include "trustrec/error.hpp"
#include "trustrec/eval.hpp"
#include "trustrec/graph.hpp"
#include "trustrec/model.hpp"
#include "trustrec/rng.hpp"
#include "trustrec/serialize.hpp"
#include "trustrec/text_io.hpp"

namespace trustrec::pipeline {

namespace fs = std::filesystem;

struct GraphOptions {
  double decay = 0.8;
  std::size_t max_depth = 3;
  CentralityMethod centrality = CentralityMethod::pagerank;
  double damping = 0.85;
};

struct PipelineConfig {
  fs::path ratings;
  fs::path trust;
  fs::path work = "work";
  RatingScale scale;
  SplitSpec split;
  AutoencoderConfig autoencoder;
  WalkConfig walk;
  GraphOptions graph;
  HyperParams model;
  std::uint64_t seed = 42;
};

// Seed streams; every stage draws from derive_seed(config.seed, stream).
enum SeedStream : std::uint64_t {
  kSplitStream = 1,
  kUserAutoencoderStream = 2,
  kItemAutoencoderStream = 3,
  kWalkStream = 4,
  kLouvainStream = 5,
  kModelStream = 6,
};

namespace detail {

inline std::string join_sizes(const std::vector<std::size_t>& v) {
  std::string s;
  for (std::size_t k = 0; k < v.size(); ++k) s += (k ? "," : "") + std::to_string(v[k]);
  return s;
}

inline std::vector<std::size_t> parse_sizes(std::string_view value, const std::string& key) {
  std::vector<std::size_t> out;
  for (auto f : text::split_fields(value)) {
    const auto n = text::parse_number<std::size_t>(f);
    if (!n) throw ValidationError("config key '" + key + "': expected a comma-separated list of sizes");
    out.push_back(*n);
  }
  return out;
}

template <class T>
T parse_value(std::string_view value, const std::string& key) {
  const auto v = text::parse_number<T>(value);
  if (!v) throw ValidationError("config key '" + key + "': cannot parse '" + std::string(value) + "'");
  return *v;
}

}  // namespace detail

/// Canonical `key = value` listing per section, defaults included. Stage
/// cache keys hash these strings, so only settings that a stage reads
/// appear in its section.
inline std::map<std::string, std::vector<std::pair<std::string, std::string>>> sections(const PipelineConfig& c) {
  const auto d = [](double v) { return text::format_double(v); };
  const auto z = [](std::size_t v) { return std::to_string(v); };
  std::map<std::string, std::vector<std::pair<std::string, std::string>>> s;
  s["data"] = {{"data.ratings", c.ratings.string()},
               {"data.trust", c.trust.string()},
               {"data.rating_min", d(c.scale.min)},
               {"data.rating_max", d(c.scale.max)},
               {"split.train_fraction", d(c.split.train_fraction)}};
  s["autoencoder"] = {{"autoencoder.layers", detail::join_sizes(c.autoencoder.layer_sizes)},
                      {"autoencoder.learning_rate", d(c.autoencoder.learning_rate)},
                      {"autoencoder.batch_size", z(c.autoencoder.batch_size)},
                      {"autoencoder.epochs", z(c.autoencoder.epochs)},
                      {"autoencoder.momentum", d(c.autoencoder.momentum)},
                      {"model.k", z(c.model.k)}};
  s["embed"] = {{"embed.p", d(c.walk.p)},
                {"embed.q", d(c.walk.q)},
                {"embed.walk_length", z(c.walk.walk_length)},
                {"embed.walks_per_node", z(c.walk.walks_per_node)},
                {"embed.window", z(c.walk.window)},
                {"embed.negative_samples", z(c.walk.negative_samples)},
                {"embed.learning_rate", d(c.walk.embed_lr)},
                {"embed.epochs", z(c.walk.epochs)},
                {"model.k", z(c.model.k)}};
  s["graph"] = {{"graph.decay", d(c.graph.decay)},
                {"graph.max_depth", z(c.graph.max_depth)},
                {"graph.centrality", std::string(to_string(c.graph.centrality))},
                {"graph.damping", d(c.graph.damping)}};
  s["model"] = {{"model.k", z(c.model.k)},
                {"model.learning_rate", d(c.model.learning_rate)},
                {"model.lambda_p", d(c.model.lambda_p)},
                {"model.lambda_q", d(c.model.lambda_q)},
                {"model.lambda_w", d(c.model.lambda_w)},
                {"model.lambda_trust", d(c.model.lambda_trust)},
                {"model.lambda_community", d(c.model.lambda_community)},
                {"model.epochs", z(c.model.epochs)},
                {"model.patience", z(c.model.patience)}};
  return s;
}

inline void validate(const PipelineConfig& c) {
  if (!(c.scale.min < c.scale.max)) throw ValidationError("data.rating_min must be below data.rating_max");
  if (!(c.split.train_fraction > 0.0 && c.split.train_fraction < 1.0)) {
    throw ValidationError("split.train_fraction must lie in (0, 1)");
  }
  c.autoencoder.validate();
  if (c.autoencoder.bottleneck_dim != c.model.k) {
    throw ValidationError("middle autoencoder layer must equal model.k");
  }
  c.walk.validate();
  if (!(c.graph.decay > 0.0 && c.graph.decay <= 1.0)) throw ValidationError("graph.decay must lie in (0, 1]");
  if (c.graph.max_depth < 1) throw ValidationError("graph.max_depth must be >= 1");
  if (!(c.graph.damping > 0.0 && c.graph.damping < 1.0)) throw ValidationError("graph.damping must lie in (0, 1)");
  c.model.validate();
  if (!(c.model.learning_rate > 0.0)) throw ValidationError("model.learning_rate must be positive");
}

/// Flat `key = value` lines; `#` starts a comment line. Relative paths
/// resolve against `base_dir`.
inline PipelineConfig parse_config(std::string_view text_in, const fs::path& base_dir, const std::string& source = "config") {
  PipelineConfig c;
  std::map<std::string, std::size_t> seen;
  std::istringstream in{std::string(text_in)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::is_blank_or_comment(line)) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(source, lineno, "expected 'key = value'");
    const std::string key(text::trim(std::string_view(line).substr(0, eq)));
    const std::string_view value = text::trim(std::string_view(line).substr(eq + 1));
    if (key.empty()) throw ParseError(source, lineno, "empty key");
    if (!seen.emplace(key, lineno).second) throw ParseError(source, lineno, "duplicate key '" + key + "'");
    try {
      using detail::parse_value;
      if (key == "seed") c.seed = parse_value<std::uint64_t>(value, key);
      else if (key == "work") c.work = base_dir / fs::path(std::string(value));
      else if (key == "data.ratings") c.ratings = base_dir / fs::path(std::string(value));
      else if (key == "data.trust") c.trust = base_dir / fs::path(std::string(value));
      else if (key == "data.rating_min") c.scale.min = parse_value<double>(value, key);
      else if (key == "data.rating_max") c.scale.max = parse_value<double>(value, key);
      else if (key == "split.train_fraction") c.split.train_fraction = parse_value<double>(value, key);
      else if (key == "autoencoder.layers") {
        c.autoencoder.layer_sizes = detail::parse_sizes(value, key);
        if (!c.autoencoder.layer_sizes.empty()) {
          c.autoencoder.bottleneck_dim = c.autoencoder.layer_sizes[c.autoencoder.layer_sizes.size() / 2];
        }
      }
      else if (key == "autoencoder.learning_rate") c.autoencoder.learning_rate = parse_value<double>(value, key);
      else if (key == "autoencoder.batch_size") c.autoencoder.batch_size = parse_value<std::size_t>(value, key);
      else if (key == "autoencoder.epochs") c.autoencoder.epochs = parse_value<std::size_t>(value, key);
      else if (key == "autoencoder.momentum") c.autoencoder.momentum = parse_value<double>(value, key);
      else if (key == "embed.p") c.walk.p = parse_value<double>(value, key);
      else if (key == "embed.q") c.walk.q = parse_value<double>(value, key);
      else if (key == "embed.walk_length") c.walk.walk_length = parse_value<std::size_t>(value, key);
      else if (key == "embed.walks_per_node") c.walk.walks_per_node = parse_value<std::size_t>(value, key);
      else if (key == "embed.window") c.walk.window = parse_value<std::size_t>(value, key);
      else if (key == "embed.negative_samples") c.walk.negative_samples = parse_value<std::size_t>(value, key);
      else if (key == "embed.learning_rate") c.walk.embed_lr = parse_value<double>(value, key);
      else if (key == "embed.epochs") c.walk.epochs = parse_value<std::size_t>(value, key);
      else if (key == "graph.decay") c.graph.decay = parse_value<double>(value, key);
      else if (key == "graph.max_depth") c.graph.max_depth = parse_value<std::size_t>(value, key);
      else if (key == "graph.centrality") c.graph.centrality = parse_centrality(value);
      else if (key == "graph.damping") c.graph.damping = parse_value<double>(value, key);
      else if (key == "model.k") c.model.k = parse_value<std::size_t>(value, key);
      else if (key == "model.learning_rate") c.model.learning_rate = parse_value<double>(value, key);
      else if (key == "model.lambda_p") c.model.lambda_p = parse_value<double>(value, key);
      else if (key == "model.lambda_q") c.model.lambda_q = parse_value<double>(value, key);
      else if (key == "model.lambda_w") c.model.lambda_w = parse_value<double>(value, key);
      else if (key == "model.lambda_trust") c.model.lambda_trust = parse_value<double>(value, key);
      else if (key == "model.lambda_community") c.model.lambda_community = parse_value<double>(value, key);
      else if (key == "model.epochs") c.model.epochs = parse_value<std::size_t>(value, key);
      else if (key == "model.patience") c.model.patience = parse_value<std::size_t>(value, key);
      else throw ValidationError("unknown config key '" + key + "'");
    } catch (const ValidationError& e) {
      throw ParseError(source, lineno, e.what());
    }
  }
  return c;
}

inline PipelineConfig load_config(const fs::path& path) {
  if (!fs::exists(path)) throw InputError("config file not found: " + path.string());
  return parse_config(text::read_file(path.string()), path.parent_path(), path.string());
}

// 64-bit FNV-1a.
inline std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (const unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex(std::uint64_t h) {
  std::ostringstream s;
  s << std::hex << std::setw(16) << std::setfill('0') << h;
  return s.str();
}

inline std::uint64_t file_hash(const fs::path& path) { return fnv1a(text::read_file(path.string())); }

/// Holds `<work>/.lock` for the lifetime of the object; a second holder
/// on the same directory fails.
class WorkDirLock {
 public:
  explicit WorkDirLock(const fs::path& work) : path_(work / ".lock") {
    fs::create_directories(work);
    std::FILE* f = std::fopen(path_.string().c_str(), "wx");
    if (f == nullptr) {
      throw InputError("work directory " + work.string() + " is locked by another command (" + path_.string() + ")");
    }
    std::fclose(f);
  }
  ~WorkDirLock() {
    std::error_code ec;
    fs::remove(path_, ec);
  }
  WorkDirLock(const WorkDirLock&) = delete;
  WorkDirLock& operator=(const WorkDirLock&) = delete;

 private:
  fs::path path_;
};

/// Work-directory layout: one subdirectory per stage, each holding a
/// `stage.key` file with the hash its outputs were computed from.
struct Layout {
  fs::path root;

  fs::path stage(std::string_view name) const { return root / std::string(name); }
  fs::path train() const { return root / "prepare" / "train.txt"; }
  fs::path test() const { return root / "prepare" / "test.txt"; }
  fs::path users() const { return root / "prepare" / "users.map"; }
  fs::path items() const { return root / "prepare" / "items.map"; }
  fs::path trust() const { return root / "prepare" / "trust.txt"; }
  fs::path symmetric_trust() const { return root / "prepare" / "trust_symmetric.txt"; }
  fs::path user_autoencoder() const { return root / "autoencoder" / "user.ae"; }
  fs::path item_autoencoder() const { return root / "autoencoder" / "item.ae"; }
  fs::path initial_factors() const { return root / "autoencoder" / "init.bin"; }
  fs::path embeddings() const { return root / "embed" / "embeddings.txt"; }
  fs::path communities() const { return root / "graph" / "communities.txt"; }
  fs::path leaders() const { return root / "graph" / "leaders.txt"; }
  fs::path propagated() const { return root / "graph" / "propagated.txt"; }
  fs::path checkpoint() const { return root / "model" / "model.bin"; }
  fs::path objective_log() const { return root / "model" / "objective.log"; }
  fs::path report_text() const { return root / "reports" / "evaluate.txt"; }
  fs::path report_json() const { return root / "reports" / "evaluate.json"; }
};

struct StageStatus {
  std::string name;
  bool recomputed = false;
  std::string key;
};

namespace detail {

inline std::string stage_key(const PipelineConfig& c, std::string_view section, std::uint64_t stream,
                             std::initializer_list<fs::path> upstream) {
  std::string material = "v1\n" + std::string(section) + "\nseed=" + std::to_string(derive_seed(c.seed, stream)) + "\n";
  const auto all = sections(c);
  for (const auto& [k, v] : all.at(std::string(section))) material += k + "=" + v + "\n";
  for (const auto& p : upstream) material += p.filename().string() + ":" + hex(file_hash(p)) + "\n";
  return hex(fnv1a(material));
}

inline bool stage_current(const fs::path& dir, const std::string& key, std::initializer_list<fs::path> outputs) {
  const auto key_file = dir / "stage.key";
  if (!fs::exists(key_file) || text::trim(text::read_file(key_file.string())) != key) return false;
  for (const auto& p : outputs) {
    if (!fs::exists(p)) return false;
  }
  return true;
}

inline void mark_stage(const fs::path& dir, const std::string& key) {
  auto out = text::open_output((dir / "stage.key").string());
  out << key << '\n';
}

inline void require(const fs::path& p, std::string_view what) {
  if (!fs::exists(p)) throw InputError("missing " + std::string(what) + ": " + p.string());
}

inline void save_factors(const fs::path& path, const InitialFactors& f) {
  binary::Writer w(path.string(), "TRIN", 1);
  w.matrix(f.P);
  w.matrix(f.Q);
  w.close();
}

inline InitialFactors load_factors(const fs::path& path) {
  binary::Reader r(path.string(), "TRIN", 1);
  InitialFactors f;
  f.P = r.matrix();
  f.Q = r.matrix();
  return f;
}

}  // namespace detail

/// Loads ratings and trust, appends trust-only users to the user space,
/// splits 80/20 and writes the indexed artifacts.
inline StageStatus prepare(const PipelineConfig& c) {
  validate(c);
  if (c.ratings.empty() || c.trust.empty()) throw InputError("config must set data.ratings and data.trust");
  detail::require(c.ratings, "ratings file");
  detail::require(c.trust, "trust file");
  const Layout layout{c.work};
  const auto dir = layout.stage("prepare");
  const auto key = detail::stage_key(c, "data", kSplitStream, {c.ratings, c.trust});
  StageStatus status{"prepare", false, key};
  if (detail::stage_current(dir, key,
                            {layout.train(), layout.test(), layout.users(), layout.items(), layout.trust(),
                             layout.symmetric_trust()})) {
    return status;
  }
  fs::create_directories(dir);
  auto loaded = load_ratings(c.ratings.string(), c.scale);
  auto trust = load_trust(c.trust.string(), loaded.users);
  const auto ratings = loaded.ratings.with_num_users(loaded.users.size());
  const auto [train_set, test_set] =
      split(ratings, SplitSpec{c.split.train_fraction, derive_seed(c.seed, kSplitStream)});
  save_indexed_ratings(layout.train().string(), train_set);
  save_indexed_ratings(layout.test().string(), test_set);
  loaded.users.save(layout.users().string());
  loaded.items.save(layout.items().string());
  save_indexed_trust(layout.trust().string(), trust.graph);
  save_indexed_trust(layout.symmetric_trust().string(), trust.graph.symmetrized());
  detail::mark_stage(dir, key);
  status.recomputed = true;
  return status;
}

inline StageStatus autoencoder_stage(const PipelineConfig& c) {
  const Layout layout{c.work};
  const auto dir = layout.stage("autoencoder");
  const auto key = detail::stage_key(c, "autoencoder", kUserAutoencoderStream, {layout.train()});
  StageStatus status{"autoencoder", false, key};
  if (detail::stage_current(dir, key, {layout.user_autoencoder(), layout.item_autoencoder(), layout.initial_factors()})) {
    return status;
  }
  fs::create_directories(dir);
  const auto train_set = load_indexed_ratings(layout.train().string());
  AutoencoderConfig user_cfg = c.autoencoder;
  user_cfg.seed = derive_seed(c.seed, kUserAutoencoderStream);
  AutoencoderConfig item_cfg = c.autoencoder;
  item_cfg.seed = derive_seed(c.seed, kItemAutoencoderStream);
  const auto users = user_rows(train_set);
  const auto items = item_rows(train_set);
  const auto udae = train_autoencoder(users, train_set.num_items(), user_cfg);
  const auto idae = train_autoencoder(items, train_set.num_users(), item_cfg);
  udae.model.save(layout.user_autoencoder().string());
  idae.model.save(layout.item_autoencoder().string());
  detail::save_factors(layout.initial_factors(), {extract_latents(udae.model, users), extract_latents(idae.model, items)});
  detail::mark_stage(dir, key);
  status.recomputed = true;
  return status;
}

inline StageStatus embed_stage(const PipelineConfig& c) {
  const Layout layout{c.work};
  const auto dir = layout.stage("embed");
  const auto key = detail::stage_key(c, "embed", kWalkStream, {layout.trust(), layout.users()});
  StageStatus status{"embed", false, key};
  if (detail::stage_current(dir, key, {layout.embeddings()})) return status;
  fs::create_directories(dir);
  const auto graph = load_indexed_trust(layout.trust().string());
  const auto users = IdMap::load(layout.users().string());
  std::vector<std::uint64_t> keys;
  for (const auto id : users.externals()) keys.push_back(static_cast<std::uint64_t>(id));
  WalkConfig walk = c.walk;
  walk.seed = derive_seed(c.seed, kWalkStream);
  embed_users(graph, c.model.k, walk, keys).save(layout.embeddings().string());
  detail::mark_stage(dir, key);
  status.recomputed = true;
  return status;
}

inline StageStatus graph_stage(const PipelineConfig& c) {
  const Layout layout{c.work};
  const auto dir = layout.stage("graph");
  const auto key = detail::stage_key(c, "graph", kLouvainStream, {layout.trust()});
  StageStatus status{"graph", false, key};
  if (detail::stage_current(dir, key, {layout.communities(), layout.leaders(), layout.propagated()})) return status;
  fs::create_directories(dir);
  const auto graph = load_indexed_trust(layout.trust().string());
  const auto assignment = graph.num_users() == 0 ? CommunityAssignment{} : louvain(graph, derive_seed(c.seed, kLouvainStream));
  const auto scores = community_centrality(graph, assignment, c.graph.centrality, c.graph.damping);
  save_communities(layout.communities().string(), assignment);
  save_leaders(layout.leaders().string(), leaders(assignment, scores));
  propagate_trust(graph, c.graph.decay, c.graph.max_depth).save(layout.propagated().string());
  detail::mark_stage(dir, key);
  status.recomputed = true;
  return status;
}

/// Cached stage outputs needed for training and evaluation.
struct Artifacts {
  RatingMatrix train;
  RatingMatrix test;
  InitialFactors init;
  EmbeddingTable embeddings;
  CommunityAssignment communities;
  LeaderTable leaders;
  PropagatedTrust trust;

  TrainingContext context() const {
    TrainingContext ctx;
    ctx.train = &train;
    ctx.trust = &trust;
    ctx.embeddings = &embeddings;
    ctx.communities = &communities;
    ctx.leaders = &leaders;
    return ctx;
  }
};

inline Artifacts load_artifacts(const Layout& layout) {
  for (const auto& p : {layout.train(), layout.test(), layout.initial_factors(), layout.embeddings(),
                        layout.communities(), layout.leaders(), layout.propagated()}) {
    detail::require(p, "stage artifact (run `train` first)");
  }
  return {load_indexed_ratings(layout.train().string()),
          load_indexed_ratings(layout.test().string()),
          detail::load_factors(layout.initial_factors()),
          EmbeddingTable::load(layout.embeddings().string()),
          load_communities(layout.communities().string()),
          load_leaders(layout.leaders().string()),
          PropagatedTrust::load(layout.propagated().string())};
}

inline HyperParams model_hyperparams(const PipelineConfig& c) {
  HyperParams hp = c.model;
  hp.seed = derive_seed(c.seed, kModelStream);
  return hp;
}

inline StageStatus model_stage(const PipelineConfig& c) {
  const Layout layout{c.work};
  const auto dir = layout.stage("model");
  const auto key = detail::stage_key(c, "model", kModelStream,
                                     {layout.train(), layout.initial_factors(), layout.embeddings(),
                                      layout.communities(), layout.leaders(), layout.propagated()});
  StageStatus status{"model", false, key};
  if (detail::stage_current(dir, key, {layout.checkpoint(), layout.objective_log()})) return status;
  fs::create_directories(dir);
  const auto a = load_artifacts(layout);
  const auto result = train(a.context(), model_hyperparams(c), a.init.P, a.init.Q);
  result.params.save(layout.checkpoint().string());
  auto log = text::open_output(layout.objective_log().string());
  log << "# best_epoch=" << result.best_epoch << '\n';
  for (std::size_t e = 0; e < result.objective_history.size(); ++e) {
    log << e + 1 << ' ' << text::format_double(result.objective_history[e]) << '\n';
  }
  detail::mark_stage(dir, key);
  status.recomputed = true;
  return status;
}

/// prepare (if needed), then autoencoder -> embed -> graph -> model.
/// Stages whose key is unchanged are reused.
inline std::vector<StageStatus> train_all(const PipelineConfig& c) {
  validate(c);
  std::vector<StageStatus> out;
  out.push_back(prepare(c));
  out.push_back(autoencoder_stage(c));
  out.push_back(embed_stage(c));
  out.push_back(graph_stage(c));
  out.push_back(model_stage(c));
  return out;
}

inline std::vector<std::pair<std::string, std::string>> model_snapshot(const PipelineConfig& c) {
  auto snap = sections(c).at("model");
  snap.emplace_back("seed", std::to_string(c.seed));
  return snap;
}

enum class Baseline { none, mean };

/// Evaluates the trained checkpoint on the cached test split; with
/// `ablate`, trains and evaluates the five ablation variants instead.
/// Reports are written to reports/evaluate.{txt,json}.
inline std::vector<EvalReport> evaluate_command(const PipelineConfig& c, bool ablate, Baseline baseline = Baseline::none) {
  validate(c);
  const Layout layout{c.work};
  std::vector<EvalReport> reports;
  if (baseline == Baseline::mean) {
    detail::require(layout.train(), "prepared train split (run `prepare` first)");
    detail::require(layout.test(), "prepared test split (run `prepare` first)");
    const auto train_set = load_indexed_ratings(layout.train().string());
    const auto test_set = load_indexed_ratings(layout.test().string());
    reports.push_back(evaluate_constant(global_mean(train_set), test_set, "mean", c.seed));
  } else if (ablate) {
    const auto a = load_artifacts(layout);
    AblationInputs in{a.context(), &a.test, &a.init};
    reports = run_ablations(in, model_hyperparams(c));
  } else {
    detail::require(layout.checkpoint(), "model checkpoint (run `train` first)");
    detail::require(layout.embeddings(), "embeddings (run `train` first)");
    detail::require(layout.test(), "prepared test split");
    const auto params = ModelParams::load(layout.checkpoint().string());
    const auto embeddings = EmbeddingTable::load(layout.embeddings().string());
    const auto test_set = load_indexed_ratings(layout.test().string());
    reports.push_back(evaluate(params, &embeddings, test_set, "model", c.seed));
  }
  for (auto& r : reports) {
    r.seed = c.seed;
    r.config = model_snapshot(c);
  }

  fs::create_directories(layout.report_text().parent_path());
  auto txt = text::open_output(layout.report_text().string());
  nlohmann::ordered_json summary = nlohmann::ordered_json::array();
  for (const auto& r : reports) {
    txt << r.line() << '\n';
    nlohmann::ordered_json j;
    j["tag"] = r.model_tag;
    j["rmse"] = r.rmse;
    j["n"] = r.n;
    j["seed"] = r.seed;
    nlohmann::ordered_json cfg = nlohmann::ordered_json::object();
    for (const auto& [k, v] : r.config) cfg[k] = v;
    j["config"] = std::move(cfg);
    summary.push_back(std::move(j));
  }
  auto js = text::open_output(layout.report_json().string());
  js << summary.dump(2) << '\n';
  return reports;
}

/// Summary of the work directory: stage keys, training outcome and the
/// latest evaluation reports.
inline void report_command(const PipelineConfig& c, std::ostream& out) {
  const Layout layout{c.work};
  detail::require(layout.report_text(), "evaluation report (run `evaluate` first)");
  for (const auto* name : {"prepare", "autoencoder", "embed", "graph", "model"}) {
    const auto key_file = layout.stage(name) / "stage.key";
    out << "stage " << name << " key=" << (fs::exists(key_file) ? std::string(text::trim(text::read_file(key_file.string()))) : "none")
        << '\n';
  }
  if (fs::exists(layout.objective_log())) {
    std::ifstream log(layout.objective_log());
    std::string line, header, last;
    std::getline(log, header);
    while (std::getline(log, line)) {
      if (!text::is_blank_or_comment(line)) last = line;
    }
    out << "training " << header.substr(header.find_first_not_of("# ")) << " epochs_run="
        << (last.empty() ? "0" : last.substr(0, last.find(' '))) << '\n';
  }
  out << text::read_file(layout.report_text().string());
}

}  // namespace trustrec::pipeline
