#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "thinhom/config.hpp"
#include "thinhom/parallel.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Homogenized thin-film energies on manifold targets: cell "
               "problems, density tables, film minimization and the "
               "gamma-convergence experiment"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = "out";
  std::int64_t seed = -1;
  int threads = 0;

  for (const char* name : {"cell", "table", "film", "gamma", "check", "recover"}) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "config file (JSON)")->required();
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--seed", seed, "override the config seed");
    sub->add_option("--threads", threads, "OpenMP thread count (0 = default)");
  }

  CLI11_PARSE(app, argc, argv);
  const std::string command = app.get_subcommands().front()->get_name();

  try {
    std::ifstream in(config_path);
    if (!in) {
      std::fprintf(stderr, "error: cannot open config %s\n", config_path.c_str());
      return 2;
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    thinhom::RunConfig config = thinhom::parse_config(buffer.str());
    if (seed >= 0) config.seed = static_cast<std::uint64_t>(seed);
    thinhom::par::set_threads(threads);
    return thinhom::dispatch(command, config, out_dir);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}
