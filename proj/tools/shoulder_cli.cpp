// Command-line driver for the shoulder-season pipeline.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "shoulder/config.hpp"
#include "shoulder/fixture.hpp"
#include "shoulder/pipeline.hpp"

namespace fs = std::filesystem;
using namespace shoulder;

int main(int argc, char** argv) {
  CLI::App app{"Detect, trend and project electricity shoulder seasons.\n\n" + RunConfig::help_text(), "shoulder"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 1;
  bool verbose = false;
  app.add_option("--config", config_path, "run configuration (key = value file)");
  app.add_option("--out", out_dir, "output directory; overrides output_dir from the config");
  app.add_option("--seed", seed, "seed for synthetic fixture generation")->capture_default_str();
  app.add_flag("--verbose,-v", verbose, "progress messages on stderr");

  struct StageCommand {
    const char* name;
    const char* help;
  };
  const StageCommand stage_commands[] = {
      {"ingest", "hourly load (and fuel mix) to daily energy and peak demand"},
      {"thermal", "regional temperature, yearly demand cubics, T0 and degree days"},
      {"shoulder", "minimum-mean spring and fall windows per year and metric"},
      {"trends", "onset trends, shift probabilities, moving averages and correlations"},
      {"project", "bias-corrected ensemble temperatures, projected onsets and merge year"},
      {"adequacy", "period outages, unmet-demand table and generation histograms"},
      {"report", "text digest of all available outputs"},
      {"all", "every stage whose inputs are configured, in dependency order"},
  };
  for (const auto& c : stage_commands) app.add_subcommand(c.name, c.help);

  auto* fixture_cmd = app.add_subcommand("fixture", "write a deterministic synthetic input set and config");
  std::string fixture_dir;
  bool noise_free = false;
  bool raster = false;
  fixture_cmd->add_option("dir", fixture_dir, "destination directory")->required();
  fixture_cmd->add_flag("--noise-free", noise_free, "three noise-free years with analytically known windows");
  fixture_cmd->add_flag("--raster", raster, "write the temperature grid as a binary raster");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (fixture_cmd->parsed()) {
      auto spec = noise_free ? fixture::FixtureSpec::noise_free() : fixture::FixtureSpec{};
      spec.seed = seed;
      spec.raster = raster;
      const auto files = fixture::write_fixture(fixture_dir, spec);
      std::cout << files.config.string() << '\n';
      return 0;
    }

    if (config_path.empty()) {
      std::cerr << "error: --config is required for pipeline stages\n";
      return 2;
    }
    auto config = RunConfig::load(config_path);
    auto ctx = pipeline::make_context(std::move(config),
                                      out_dir.empty() ? std::nullopt : std::optional<fs::path>(out_dir));
    ctx.verbose = verbose;

    const auto* sub = app.get_subcommands().front();
    const std::string name = sub->get_name();
    if (name == "all") {
      pipeline::run_pipeline(ctx, {}, true);
      std::cout << pipeline::build_report(ctx);
    } else if (name == "report") {
      std::cout << pipeline::run_report(ctx);
    } else {
      pipeline::run_pipeline(ctx, {*pipeline::parse_stage(name)});
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
