#include <cstdlib>
#include <iostream>
#include <string>
#include <thread>

#include "CLI11.hpp"
#include "pgrad/app.hpp"

int main(int argc, char** argv) {
  CLI::App cli{"Periodic Poisson-gradient solver: minimizes the multi-time action and certifies the result"};
  cli.require_subcommand(1);

  pgrad::app::Options opt;
  std::uint64_t seed = 0;
  cli.add_flag("--strict", opt.strict, "Abort when a hypothesis check fails");
  cli.add_flag("--quiet", opt.quiet, "Suppress normal output");
  auto* seed_opt = cli.add_option("--seed", seed, "Override the random seed");

  std::string config, field, rhs, out_path;
  auto* solve = cli.add_subcommand("solve", "Minimize the action and write field/report");
  solve->add_option("config", config, "Run configuration (JSON)")->required();
  auto* check = cli.add_subcommand("check", "Run sampled hypothesis checks on the potential");
  check->add_option("config", config, "Run configuration (JSON)")->required();
  auto* residual = cli.add_subcommand("residual", "Certify a field CSV against the configured potential");
  residual->add_option("field", field, "Field CSV (periodic or closed form)")->required();
  residual->add_option("config", config, "Run configuration (JSON)")->required();
  auto* oracle = cli.add_subcommand("oracle-linear", "Solve laplacian(u) = f for a zero-mean CSV right-hand side");
  oracle->add_option("rhs", rhs, "Right-hand side CSV")->required();
  oracle->add_option("config", config, "Run configuration providing the grid")->required();
  oracle->add_option("-o,--output", out_path, "Output CSV (default: stdout)");

  for (auto* sub : {solve, check, residual, oracle}) {
    sub->add_flag("--strict", opt.strict, "Abort when a hypothesis check fails");
    sub->add_flag("--quiet", opt.quiet, "Suppress normal output");
    sub->add_option("--seed", seed, "Override the random seed");
  }

  try {
    cli.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return cli.exit(e) == 0 ? 0 : pgrad::app::kInvalidConfig;
  }
  bool seeded = seed_opt->count() > 0;
  for (auto* sub : {solve, check, residual, oracle}) seeded = seeded || sub->get_option("--seed")->count() > 0;
  if (seeded) opt.seed = seed;

  if (const char* env = std::getenv("POISSON_GRAD_THREADS")) {
    const long cap = std::strtol(env, nullptr, 10);
    if (cap > 0) pgrad::detail::set_max_threads(static_cast<unsigned>(cap));
  }

  if (*solve) return pgrad::app::cmd_solve(config, opt, std::cout, std::cerr);
  if (*check) return pgrad::app::cmd_check(config, opt, std::cout, std::cerr);
  if (*residual) return pgrad::app::cmd_residual(field, config, opt, std::cout, std::cerr);
  return pgrad::app::cmd_oracle_linear(rhs, config, out_path, opt, std::cout, std::cerr);
}
