// dflag: derived flag, parallel sections and metric detection for a
// connection described in a config file.

#include <CLI11.hpp>
#include <iostream>

#include "dflag/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Maximal flat subbundle of a connection, its parallel sections, and a metric-connection test"};
  app.require_subcommand(1);

  std::string config;
  std::optional<double> tau_rank;
  std::optional<std::size_t> grid;
  std::string out_dir = ".";

  for (auto [name, help] : {std::pair{"analyze", "run the derived flag and report the rank sequence"},
                            std::pair{"sections", "write the parallel sections of the flat subbundle as CSV"},
                            std::pair{"metric-check", "decide whether a tangent connection is locally metric"},
                            std::pair{"transport", "parallel transport a vector along the configured path"}}) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config, "job config file")->required()->check(CLI::ExistingFile);
    sub->add_option("--tol-rank", tau_rank, "override the rank tolerance");
    sub->add_option("--grid", grid, "override the lattice size on every axis");
    sub->add_option("--out", out_dir, "output directory for section files");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : dflag::exit_config;
  }
  return dflag::run(app.get_subcommands().front()->get_name(), config, {tau_rank, grid}, out_dir, std::cout,
                    std::cerr);
}
