#include <iostream>

#include "CLI11.hpp"
#include "elab/harness.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Entropy of positive solutions of the backward heat equation on evolving manifolds"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(elab::version()));

  elab::Overrides ov;
  std::size_t paths = 0;
  double dt = 0.0;
  std::uint64_t seed = 0;
  int refine = 0;

  auto* run = app.add_subcommand("run", "run a scenario file");
  std::string config, out_dir = "out";
  run->add_option("config", config, "scenario file")->required()->check(CLI::ExistingFile);
  run->add_option("-o,--out", out_dir, "output directory");
  auto* o_paths = run->add_option("--paths", paths, "Monte Carlo path count")->check(CLI::PositiveNumber);
  auto* o_dt = run->add_option("--dt", dt, "Monte Carlo time step")->check(CLI::PositiveNumber);
  auto* o_seed = run->add_option("--seed", seed, "RNG seed (decimal or 0x hex)");
  auto* o_refine = run->add_option("--refine", refine, "base quadrature refinement level")->check(CLI::NonNegativeNumber);

  auto* ver = app.add_subcommand("verify", "run the acceptance criteria");
  std::string suite = "all";
  ver->add_option("suite", suite, "paper-examples | properties | all")
      ->check(CLI::IsMember({"paper-examples", "properties", "all"}));

  auto* lm = app.add_subcommand("list-models", "print model id grammar");
  auto* ls = app.add_subcommand("list-solutions", "print solution id grammar");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      if (*o_paths) ov.paths = paths;
      if (*o_dt) ov.dt = dt;
      if (*o_seed) ov.seed = seed;
      if (*o_refine) ov.refine = refine;
      const auto man = elab::run(config, out_dir, ov);
      for (const auto& f : man.outputs) std::cout << out_dir << "/" << f << "\n";
      return 0;
    }
    if (*ver) return elab::verify(elab::parse_suite(suite), std::cout);
    if (*lm) {
      for (const auto& m : elab::model_catalog()) std::cout << m << "\n";
      return 0;
    }
    if (*ls) {
      for (const auto& s : elab::solution_catalog()) std::cout << s << "\n";
      return 0;
    }
  } catch (const elab::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
