#include <cstdint>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "trustrec/pipeline.hpp"

namespace {

using namespace trustrec;
namespace pl = trustrec::pipeline;

constexpr int kExitUsage = 2;
constexpr int kExitNumeric = 3;

void print_stages(const std::vector<pl::StageStatus>& stages) {
  for (const auto& s : stages) {
    std::cout << "stage " << s.name << ": " << (s.recomputed ? "computed" : "cached") << " key=" << s.key << '\n';
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Trust-aware matrix factorization recommender"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string work;
  app.add_option("--config", config_path, "Config file of `key = value` lines");
  app.add_option("--seed", seed, "Global seed (overrides the config)");
  app.add_option("--work", work, "Work directory (overrides the config)");

  auto* prepare = app.add_subcommand("prepare", "Load, index and split the input files");
  auto* train = app.add_subcommand("train", "Run autoencoders, embeddings, graph analysis and MF training");
  auto* evaluate = app.add_subcommand("evaluate", "Report test RMSE of the trained model");
  bool ablate = false;
  std::string baseline = "none";
  evaluate->add_flag("--ablate", ablate, "Train and evaluate the five ablation variants");
  evaluate->add_option("--baseline", baseline, "Evaluate a baseline predictor instead of the model")
      ->check(CLI::IsMember({"none", "mean"}));
  auto* report = app.add_subcommand("report", "Summarize stages and the latest evaluation");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    pl::PipelineConfig config = config_path.empty() ? pl::PipelineConfig{} : pl::load_config(config_path);
    if (seed) config.seed = *seed;
    if (!work.empty()) config.work = work;

    std::optional<pl::WorkDirLock> lock;
    lock.emplace(config.work);
    if (prepare->parsed()) {
      print_stages({pl::prepare(config)});
    } else if (train->parsed()) {
      print_stages(pl::train_all(config));
    } else if (evaluate->parsed()) {
      const auto kind = baseline == "mean" ? pl::Baseline::mean : pl::Baseline::none;
      for (const auto& r : pl::evaluate_command(config, ablate, kind)) std::cout << r.line() << '\n';
    } else if (report->parsed()) {
      pl::report_command(config, std::cout);
    }
    return 0;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 1;
  }
}
