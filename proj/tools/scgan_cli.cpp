// scgan: command-line entry point.
//
//   scgan synth    --config c.json --out dir
//   scgan train    --config c.json --out dir
//   scgan eval     --config c.json --out dir (--checkpoint f | --cheat | --untrained)
//   scgan ablate   --config c.json --out dir
//   scgan baseline --config c.json --out dir --method nn|ct|lmt
//   scgan project  --config c.json --out dir [--checkpoint f]
//
// Exit codes: 0 success, 1 runtime failure, 2 invalid input.

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "scgan/experiment.hpp"

namespace {

struct GlobalFlags
{
  std::string                  config;
  std::string                  out;
  std::optional<std::uint64_t> seed;
  std::vector<std::string>     overrides;
  bool                         quiet = false;
};

void add_global_flags(CLI::App *cmd, GlobalFlags &g)
{
  cmd->add_option("-c,--config", g.config, "experiment config JSON (defaults when omitted)");
  cmd->add_option("-o,--out", g.out, "output directory (overrides output.dir)");
  cmd->add_option("--seed", g.seed, "seed override (data.synth.seed for synth, train.seed otherwise)");
  cmd->add_option("--set", g.overrides, "override a config scalar, e.g. --set train.max_iterations=100");
  cmd->add_flag("-q,--quiet", g.quiet, "no progress output");
}

scgan::ExperimentConfig resolve(GlobalFlags const &g, bool seed_is_data_seed)
{
  auto overrides = g.overrides;
  if (g.seed)
  {
    overrides.push_back(std::string(seed_is_data_seed ? "data.synth.seed=" : "train.seed=") +
                        std::to_string(*g.seed));
  }
  if (!g.out.empty())
  {
    overrides.push_back("output.dir=" + scgan::json(g.out).dump());
  }
  return scgan::load_experiment_config(g.config, overrides);
}

}  // namespace

int main(int argc, char **argv)
{
  CLI::App app{"Semi-supervised cross-category compatibility learning"};
  app.require_subcommand(1);

  GlobalFlags g;
  auto       *synth    = app.add_subcommand("synth", "generate a synthetic dataset");
  auto       *train    = app.add_subcommand("train", "train a model and write its trace");
  auto       *eval     = app.add_subcommand("eval", "test AUC of a checkpoint, the cheat oracle or an untrained model");
  auto       *ablate   = app.add_subcommand("ablate", "train the five ablation presets on one dataset");
  auto       *baseline = app.add_subcommand("baseline", "fit and evaluate nn, ct or lmt");
  auto       *project  = app.add_subcommand("project", "2-D PCA projections and silhouettes");
  for (auto *cmd : {synth, train, eval, ablate, baseline, project})
  {
    add_global_flags(cmd, g);
  }

  std::string checkpoint;
  bool        cheat = false, untrained = false;
  eval->add_option("--checkpoint", checkpoint, "checkpoint file (.json or .bin)");
  eval->add_flag("--cheat", cheat, "score with the planted ground truth");
  eval->add_flag("--untrained", untrained, "score with a freshly initialized model");
  std::string method;
  baseline->add_option("-m,--method", method, "nn, ct or lmt")->required()->check(CLI::IsMember({"nn", "ct", "lmt"}));
  project->add_option("--checkpoint", checkpoint, "checkpoint whose style vectors to project");

  try
  {
    app.parse(argc, argv);
  }
  catch (CLI::CallForHelp const &e)
  {
    return app.exit(e);
  }
  catch (CLI::CallForAllHelp const &e)
  {
    return app.exit(e);
  }
  catch (CLI::ParseError const &e)
  {
    app.exit(e);
    return 2;
  }

  try
  {
    auto const cfg = resolve(g, synth->parsed());
    scgan::RunDir run(cfg.output.dir);
    scgan::LogFn  log;
    if (!g.quiet)
    {
      log = [](std::string const &line) { std::cerr << line << '\n'; };
    }

    if (synth->parsed())
    {
      scgan::run_synth(cfg, run, log);
      return 0;
    }
    auto const ds = scgan::build_dataset(cfg.data);
    if (train->parsed())
    {
      scgan::run_train(cfg, ds, run, log);
    }
    else if (eval->parsed())
    {
      int const chosen = (checkpoint.empty() ? 0 : 1) + (cheat ? 1 : 0) + (untrained ? 1 : 0);
      if (chosen != 1)
      {
        throw scgan::ValidationError("eval: pass exactly one of --checkpoint, --cheat, --untrained");
      }
      auto const target = cheat       ? scgan::EvalTarget::cheat
                          : untrained ? scgan::EvalTarget::untrained
                                      : scgan::EvalTarget::checkpoint;
      auto const report = scgan::run_eval(cfg, ds, run, target, checkpoint, log);
      std::cout << scgan::to_json(report).dump(2) << '\n';
    }
    else if (ablate->parsed())
    {
      auto const rows = scgan::run_ablate(cfg, ds, run, log);
      for (auto const &r : rows)
      {
        std::cout << r.name << ',' << scgan::format_number(r.auc) << '\n';
      }
    }
    else if (baseline->parsed())
    {
      auto const report = scgan::run_baseline(cfg, ds, run, method, log);
      std::cout << scgan::to_json(report).dump(2) << '\n';
    }
    else if (project->parsed())
    {
      scgan::run_project(cfg, ds, run, checkpoint, log);
    }
    return 0;
  }
  catch (scgan::ValidationError const &e)
  {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  catch (std::exception const &e)
  {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
