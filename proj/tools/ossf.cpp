// ossf: simulate and verify operator-self-similar stable random fields.

#include <CLI11.hpp>

#include "ossf/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"operator-self-similar stable random fields"};
  app.require_subcommand(1);

  ossf::cli::Options opt;
  std::string suite, plot_input, plot_kind;

  auto add_common = [&](CLI::App* sub, bool need_config) {
    if (need_config)
      sub->add_option("--config", opt.config_path, "config file")->required();
    sub->add_option("--seed", opt.seed, "master seed override");
    sub->add_option("--threads", opt.threads, "worker cap")
        ->check(CLI::PositiveNumber);
    sub->add_option("--override", opt.overrides,
                    "config override KEY=VALUE (dotted path)");
    sub->add_option("--out", opt.out_dir, "output directory override");
  };

  CLI::App* sim = app.add_subcommand("simulate", "simulate the field");
  add_common(sim, true);

  CLI::App* ver = app.add_subcommand("verify", "run a verification suite");
  ver->add_option("suite", suite, "oss|increments|proper|recurrence|"
                                  "normbound|lebesgue|integral_cf|polar")
      ->required();
  add_common(ver, true);

  CLI::App* plot = app.add_subcommand("plotdata", "emit plot-ready tables");
  plot->add_option("input", plot_input, "sample or report file")->required();
  plot->add_option("kind", plot_kind, "field_slice|ecf_panel|slope_fit")
      ->required();
  add_common(plot, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (sim->parsed()) return ossf::cli::cmd_simulate(opt);
  if (ver->parsed()) return ossf::cli::cmd_verify(suite, opt);
  if (plot->parsed()) return ossf::cli::cmd_plotdata(plot_input, plot_kind, opt);
  return 2;
}
