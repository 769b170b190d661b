#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"self-resolving prediction markets: bounds, simulation, audits"};
  app.require_subcommand(1);

  selfres::cli::options opt;
  std::string seeds;
  std::uint64_t seed = 0;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", opt.config, "JSON config file");
    sub->add_option("--out", opt.out, "output directory")->capture_default_str();
    sub->add_option("--seed", seed, "single seed");
    sub->add_option("--seeds", seeds, "inclusive seed range a..b");
    sub->add_option("--format", opt.format, "csv, svg or json")->check(CLI::IsMember({"csv", "svg", "json"}));
    sub->add_flag("--bits", opt.bits, "report scores in bits instead of nats");
  };
  for (const char* name : {"bounds", "curves", "simulate", "audit", "equilibria", "amm-check"}) {
    static const std::map<std::string, std::string> help{
        {"bounds", "eps' and k_min over a grid"},
        {"curves", "bound vs Delta and eps' vs prior"},
        {"simulate", "run markets, write transcripts"},
        {"audit", "exact epsilon-equilibrium audit"},
        {"equilibria", "uninformative, switching and permutation payoffs"},
        {"amm-check", "market maker equivalence residuals"}};
    add_common(app.add_subcommand(name, help.at(name)));
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : selfres::cli::exit_error;
  }

  CLI::App* sub = app.get_subcommands().front();
  if (sub->count("--seed")) opt.seed = seed;
  if (!seeds.empty()) {
    try {
      opt.seeds = selfres::cli::parse_seed_range(seeds);
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
      return selfres::cli::exit_error;
    }
  }
  return selfres::cli::run(sub->get_name(), opt, std::cout, std::cerr);
}
