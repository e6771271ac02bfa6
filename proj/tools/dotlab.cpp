// dotlab command-line front end.

#include "dotlab/config.hpp"
#include "dotlab/harness.hpp"

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <iostream>
#include <string>

namespace {

int threads_from_env() {
  if (const char* env = std::getenv("DOTLAB_THREADS")) {
    try {
      const int n = std::stoi(env);
      if (n > 0) return n;
    } catch (const std::exception&) {
    }
    spdlog::warn("ignoring invalid DOTLAB_THREADS='{}'", env);
  }
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_default_logger(spdlog::stderr_color_mt("dotlab"));
  spdlog::set_pattern("[%l] %v");

  CLI::App app{"dotlab: quantum-dot exchange simulation and ESR fitting toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", DOTLAB_VERSION);

  std::string config_file, out_dir = "out", level = "info";
  std::uint64_t seed = 0;
  int threads = 0;
  for (const auto& name : dotlab::config::commands()) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", config_file, "JSON run configuration")->required();
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--seed", seed, "random seed (overrides the config)");
    sub->add_option("--threads", threads, "worker threads (default: DOTLAB_THREADS or 1)")->check(CLI::PositiveNumber);
    sub->add_option("--log-level", level, "trace, debug, info, warn, error or off");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  spdlog::set_level(spdlog::level::from_str(level));
  const std::string command = app.get_subcommands().front()->get_name();
  const bool seed_given = app.get_subcommands().front()->count("--seed") > 0;

  dotlab::harness::RunOptions opt;
  opt.out_dir = out_dir;
  opt.threads = threads > 0 ? threads : threads_from_env();
  try {
    const auto cfg = dotlab::config::load(config_file);
    opt.seed = seed_given ? seed : cfg.seed;
    const auto warnings = dotlab::harness::run(command, cfg, opt);
    spdlog::info("{} finished, {} warning(s), outputs in {}", command, warnings, opt.out_dir.string());
    return 0;
  } catch (const std::exception& e) {
    const auto err = dotlab::harness::error_json(e);
    std::cout << err.dump() << std::endl;
    spdlog::error("{}", e.what());
    std::error_code ec;
    std::filesystem::create_directories(opt.out_dir, ec);
    if (!ec) {
      try {
        dotlab::io::write_text(opt.out_dir / "error.json", err.dump(2) + "\n");
      } catch (const std::exception&) {
      }
    }
    return dotlab::harness::exit_code_for(e);
  }
}
