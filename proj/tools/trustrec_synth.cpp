// Writes a synthetic ratings/trust bundle with a matching config file.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "trustrec/synthetic.hpp"
#include "trustrec/text_io.hpp"

int main(int argc, char** argv) {
  using namespace trustrec;
  CLI::App app{"Synthetic social rating bundle generator"};
  std::string out_dir;
  SocialSpec spec;
  app.add_option("--out", out_dir, "Output directory")->required();
  app.add_option("--users", spec.num_users, "Number of users");
  app.add_option("--items", spec.num_items, "Number of items");
  app.add_option("--groups", spec.num_groups, "Number of taste groups");
  app.add_option("--ratings-per-user", spec.ratings_per_user, "Ratings per user");
  app.add_option("--trust-per-user", spec.trust_per_user, "Trust statements per user");
  app.add_option("--seed", spec.seed, "Generator seed");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    const auto data = social_ratings(spec);
    const std::filesystem::path dir(out_dir);
    std::filesystem::create_directories(dir);
    // External ids are offset so they never coincide with internal indices.
    {
      auto out = text::open_output((dir / "ratings.csv").string());
      out << "# user,item,rating\n";
      for (const auto& e : data.ratings.entries()) {
        out << 1000 + e.user << ',' << 5000 + e.item << ',' << text::format_double(e.value) << '\n';
      }
    }
    {
      auto out = text::open_output((dir / "trust.csv").string());
      out << "# truster,trustee,value\n";
      for (const auto& [u, v, w] : data.trust.edges()) {
        out << 1000 + u << ',' << 1000 + v << ',' << text::format_double(w) << '\n';
      }
    }
    {
      auto out = text::open_output((dir / "config.txt").string());
      out << "data.ratings = ratings.csv\n"
          << "data.trust = trust.csv\n"
          << "seed = " << spec.seed << '\n';
    }
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
