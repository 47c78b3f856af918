#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "scgan/baselines.hpp"
#include "scgan/checkpoint.hpp"
#include "scgan/data.hpp"
#include "scgan/eval.hpp"
#include "scgan/manifest.hpp"
#include "scgan/projection.hpp"
#include "scgan/trainer.hpp"

namespace scgan {

// ---------------------------------------------------------------------------
// config

struct SplitSection
{
  double        seed_permille = 15.0;
  double        test_fraction = 0.2;
  std::uint64_t seed          = 11;
};

struct DataSection
{
  std::string  source = "synth";  ///< "synth" or "files"
  SynthConfig  synth;
  std::string  items;       ///< items JSONL (source = files)
  std::string  pairs;       ///< pairs CSV (source = files)
  std::string  provenance;  ///< optional provenance JSON (source = files)
  bool         standardize = true;
  SplitSection split;
};

struct OutputSection
{
  std::string dir               = "run";
  std::string checkpoint_format = "json";  ///< "json" or "bin"
  bool        checkpoint_every_eval = false;
  bool        pair_scores       = true;
  bool        svg               = true;
};

struct BaselineSection
{
  std::size_t nn_dim       = 128;
  double      ct_smoothing = 1.0;
  LmtConfig   lmt;
};

struct ExperimentConfig
{
  DataSection     data;
  TrainConfig     train;
  EvalOptions     eval;
  OutputSection   output;
  BaselineSection baselines;

  void validate() const
  {
    if (data.source != "synth" && data.source != "files")
    {
      throw ValidationError("data.source: expected \"synth\" or \"files\", got \"" + data.source + "\"");
    }
    if (data.source == "synth")
    {
      data.synth.validate();
    }
    else if (data.items.empty() || data.pairs.empty())
    {
      throw ValidationError("data: source \"files\" needs both items and pairs paths");
    }
    if (!(data.split.seed_permille >= 0.0 && data.split.seed_permille <= 1000.0))
    {
      throw ValidationError("data.split.seed_permille: must be in [0, 1000]");
    }
    if (!(data.split.test_fraction >= 0.0 && data.split.test_fraction <= 1.0))
    {
      throw ValidationError("data.split.test_fraction: must be in [0, 1]");
    }
    if (data.split.test_fraction + data.split.seed_permille / 1000.0 > 1.0 + 1e-12)
    {
      throw ValidationError("data.split: test_fraction + seed_permille/1000 exceeds 1");
    }
    train.validate();
    if (output.checkpoint_format != "json" && output.checkpoint_format != "bin")
    {
      throw ValidationError("output.checkpoint_format: expected \"json\" or \"bin\"");
    }
    if (output.dir.empty())
    {
      throw ValidationError("output.dir: must not be empty");
    }
    if (baselines.nn_dim == 0)
    {
      throw ValidationError("baselines.nn_dim: must be positive");
    }
    if (!(baselines.ct_smoothing >= 0.0))
    {
      throw ValidationError("baselines.ct_smoothing: must be non-negative");
    }
    baselines.lmt.validate();
  }
};

inline json to_json(EvalOptions const &e)
{
  return json{{"negative_mode", e.negative_mode}, {"tie_mode", e.tie_mode}, {"negative_seed", e.negative_seed}};
}

inline json to_json(ExperimentConfig const &c)
{
  return json{
    {"data",
     {{"source", c.data.source},
      {"synth", to_json(c.data.synth)},
      {"items", c.data.items},
      {"pairs", c.data.pairs},
      {"provenance", c.data.provenance},
      {"standardize", c.data.standardize},
      {"split",
       {{"seed_permille", c.data.split.seed_permille},
        {"test_fraction", c.data.split.test_fraction},
        {"seed", c.data.split.seed}}}}},
    {"train", to_json(c.train)},
    {"eval", to_json(c.eval)},
    {"output",
     {{"dir", c.output.dir},
      {"checkpoint_format", c.output.checkpoint_format},
      {"checkpoint_every_eval", c.output.checkpoint_every_eval},
      {"pair_scores", c.output.pair_scores},
      {"svg", c.output.svg}}},
    {"baselines",
     {{"nn_dim", c.baselines.nn_dim}, {"ct_smoothing", c.baselines.ct_smoothing}, {"lmt", to_json(c.baselines.lmt)}}},
  };
}

/// Strict parse: unknown keys anywhere are errors, absent keys keep defaults.
inline ExperimentConfig experiment_config_from_json(json const &j)
{
  ExperimentConfig c;
  StrictObject     top(j, "config");
  if (top.has("data"))
  {
    StrictObject d(top.child("data"), "data");
    d.get("source", c.data.source);
    if (d.has("synth"))
    {
      c.data.synth = synth_config_from_json(d.child("synth"));
    }
    d.get("items", c.data.items);
    d.get("pairs", c.data.pairs);
    d.get("provenance", c.data.provenance);
    d.get("standardize", c.data.standardize);
    if (d.has("split"))
    {
      StrictObject s(d.child("split"), "data.split");
      s.get("seed_permille", c.data.split.seed_permille);
      s.get("test_fraction", c.data.split.test_fraction);
      s.get("seed", c.data.split.seed);
      s.finish();
    }
    d.finish();
  }
  if (top.has("train"))
  {
    c.train = train_config_from_json(top.child("train"));
  }
  if (top.has("eval"))
  {
    StrictObject e(top.child("eval"), "eval");
    e.get("negative_mode", c.eval.negative_mode);
    e.get("tie_mode", c.eval.tie_mode);
    e.get("negative_seed", c.eval.negative_seed);
    e.finish();
  }
  if (top.has("output"))
  {
    StrictObject o(top.child("output"), "output");
    o.get("dir", c.output.dir);
    o.get("checkpoint_format", c.output.checkpoint_format);
    o.get("checkpoint_every_eval", c.output.checkpoint_every_eval);
    o.get("pair_scores", c.output.pair_scores);
    o.get("svg", c.output.svg);
    o.finish();
  }
  if (top.has("baselines"))
  {
    StrictObject b(top.child("baselines"), "baselines");
    b.get("nn_dim", c.baselines.nn_dim);
    b.get("ct_smoothing", c.baselines.ct_smoothing);
    if (b.has("lmt"))
    {
      c.baselines.lmt = lmt_config_from_json(b.child("lmt"));
    }
    b.finish();
  }
  top.finish();
  c.validate();
  return c;
}

/// Applies "a.b.c=value" to a config document. The value is read as JSON when
/// it parses (numbers, booleans, quoted strings) and as a bare string otherwise.
inline void apply_override(json &doc, std::string const &assignment)
{
  auto const eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
  {
    throw ValidationError("override '" + assignment + "': expected key.path=value");
  }
  std::string const path = assignment.substr(0, eq);
  std::string const text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded())
  {
    value = text;
  }
  json *node = &doc;
  std::size_t start = 0;
  while (true)
  {
    auto const dot = path.find('.', start);
    std::string const key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (key.empty())
    {
      throw ValidationError("override '" + assignment + "': empty key segment");
    }
    if (!node->is_object())
    {
      *node = json::object();
    }
    node = &(*node)[key];
    if (dot == std::string::npos)
    {
      break;
    }
    start = dot + 1;
  }
  *node = std::move(value);
}

inline json read_json_file(std::string const &path)
{
  std::string const text = read_file(path);
  try
  {
    return json::parse(text);
  }
  catch (json::parse_error const &e)
  {
    throw ValidationError("'" + path + "': " + e.what());
  }
}

/// Config file (or defaults when `path` is empty) with overrides applied.
inline ExperimentConfig load_experiment_config(std::string const &path,
                                               std::vector<std::string> const &overrides = {})
{
  json doc = path.empty() ? json::object() : read_json_file(path);
  for (auto const &o : overrides)
  {
    apply_override(doc, o);
  }
  return experiment_config_from_json(doc);
}

// ---------------------------------------------------------------------------
// data

/// Dataset described by the data section, with the configured split applied.
inline Dataset build_dataset(DataSection const &d)
{
  Dataset ds;
  if (d.source == "synth")
  {
    ds = synth_generate(d.synth, SynthOptions{.standardize = d.standardize});
  }
  else
  {
    ds = load_dataset(d.items, d.pairs, LoadOptions{d.standardize});
    if (!d.provenance.empty())
    {
      ds.provenance = load_provenance(d.provenance);
    }
  }
  ds.set_split(split_pairs(ds.pairs(), d.split.seed_permille, d.split.test_fraction, d.split.seed));
  return ds;
}

// ---------------------------------------------------------------------------
// commands

using LogFn = std::function<void(std::string const &)>;

namespace detail {

template <typename F>
std::string render(F &&write)
{
  std::ostringstream out;
  write(out);
  return out.str();
}

inline void emit_report(RunDir &run, std::string const &stem, EvalReport const &report, bool pair_scores)
{
  run.write(stem + ".json", to_json(report).dump(2) + "\n");
  if (pair_scores)
  {
    run.write(stem + "_pairs.csv", render([&](std::ostream &o) { write_pair_scores_csv(o, report); }));
  }
}

inline std::string checkpoint_name(ExperimentConfig const &cfg, std::string const &stem)
{
  return stem + (cfg.output.checkpoint_format == "bin" ? ".bin" : ".json");
}

inline std::string checkpoint_bytes(ExperimentConfig const &cfg, Checkpoint const &c)
{
  return cfg.output.checkpoint_format == "bin" ? checkpoint_to_binary(c) : checkpoint_to_json(c).dump(1) + "\n";
}

inline void say(LogFn const &log, RunDir &run, std::string const &line)
{
  run.log(line);
  if (log)
  {
    log(line);
  }
}

}  // namespace detail

inline void write_resolved_config(RunDir &run, ExperimentConfig const &cfg, std::string const &prefix = {})
{
  run.write(prefix + "resolved_config.json", to_json(cfg).dump(2) + "\n");
}

/// Writes items.jsonl, pairs.csv and provenance.json.
inline Dataset run_synth(ExperimentConfig const &cfg, RunDir &run, LogFn const &log = {})
{
  Dataset const ds = synth_generate(cfg.data.synth, SynthOptions{.standardize = cfg.data.standardize});
  save_dataset(ds, run.path("items.jsonl").string(), run.path("pairs.csv").string());
  run.add("items.jsonl");
  run.add("pairs.csv");
  run.write("provenance.json", provenance_to_json(ds.provenance).dump(1) + "\n");
  write_resolved_config(run, cfg);
  detail::say(log, run,
              "synth: " + std::to_string(ds.items().size()) + " items, " + std::to_string(ds.pairs().size()) +
                " pairs");
  run.write_manifest("synth");
  return ds;
}

struct TrainRun
{
  TrainResult result;
  EvalReport  report;
};

/// Trains, evaluates the final model on the test split, and writes the
/// checkpoint, trace.csv, checkpoints.csv and eval.json. On abort the partial
/// trace is still written before the error propagates. A non-empty prefix
/// nests the outputs in a subdirectory and leaves the manifest to the caller.
inline TrainRun run_train(ExperimentConfig const &cfg, Dataset const &ds, RunDir &run, LogFn const &log = {},
                          std::string const &prefix = {})
{
  write_resolved_config(run, cfg, prefix);
  TrainOptions opts;
  opts.eval = cfg.eval;
  opts.log  = [&](std::string const &line) { detail::say(log, run, prefix + line); };
  if (cfg.output.checkpoint_every_eval)
  {
    opts.on_iteration = [&](std::size_t t, StepBatch const &, GeneratorBank const &bank, Critic const &critic,
                            IterationRecord const &) {
      if (t % cfg.train.eval_every == 0 || t == cfg.train.max_iterations)
      {
        Checkpoint c{"scgan", to_json(cfg.train), bank, critic, std::nullopt, std::nullopt};
        run.write(detail::checkpoint_name(cfg, prefix + "checkpoints/iter_" + std::to_string(t)),
                  detail::checkpoint_bytes(cfg, c));
      }
    };
  }
  auto write_trace = [&](TrainTrace const &trace) {
    run.write(prefix + "trace.csv", detail::render([&](std::ostream &o) { write_trace_csv(o, trace); }));
    run.write(prefix + "checkpoints.csv", detail::render([&](std::ostream &o) { write_checkpoints_csv(o, trace); }));
  };
  TrainRun out;
  try
  {
    out.result = train(ds, cfg.train, opts);
  }
  catch (TrainingAborted const &e)
  {
    write_trace(e.trace);
    detail::say(log, run, prefix + "aborted: " + e.what());
    if (prefix.empty())
    {
      run.write_manifest("train");
    }
    throw;
  }
  write_trace(out.result.trace);
  Checkpoint const c{"scgan", to_json(cfg.train), out.result.bank, out.result.critic, std::nullopt, std::nullopt};
  run.write(detail::checkpoint_name(cfg, prefix + "checkpoint"), detail::checkpoint_bytes(cfg, c));
  out.report = auc(out.result.bank, ds.test_pairs(), ds, cfg.eval);
  detail::emit_report(run, prefix + "eval", out.report, cfg.output.pair_scores);
  detail::say(log, run, prefix + "final test auc " + format_number(out.report.auc));
  if (prefix.empty())
  {
    run.write_manifest("train");
  }
  return out;
}

enum class EvalTarget
{
  checkpoint,
  cheat,      ///< ground-truth inversion, needs synthetic provenance
  untrained,  ///< init_model with the configured seed
};

inline EvalReport run_eval(ExperimentConfig const &cfg, Dataset const &ds, RunDir &run, EvalTarget target,
                           std::string const &checkpoint_path = {}, LogFn const &log = {})
{
  write_resolved_config(run, cfg);
  EvalReport report;
  switch (target)
  {
    case EvalTarget::checkpoint:
    {
      if (checkpoint_path.empty())
      {
        throw ValidationError("eval: --checkpoint is required");
      }
      Checkpoint const c = load_checkpoint(checkpoint_path);
      report             = auc(checkpoint_scorer(c), ds.test_pairs(), ds, cfg.eval);
      break;
    }
    case EvalTarget::cheat:
      if (!ds.provenance.truth)
      {
        throw ValidationError("eval: the cheat oracle needs synthetic provenance");
      }
      report = auc(cheat_scorer(*ds.provenance.truth), ds.test_pairs(), ds, cfg.eval);
      break;
    case EvalTarget::untrained:
    {
      auto const [bank, critic] = init_model(cfg.train, ds.categories(), ds.feature_dim(), cfg.train.seed);
      report                    = auc(bank, ds.test_pairs(), ds, cfg.eval);
      break;
    }
  }
  detail::emit_report(run, "eval", report, cfg.output.pair_scores);
  detail::say(log, run, "test auc " + format_number(report.auc));
  run.write_manifest("eval");
  return report;
}

struct AblationRow
{
  std::string name;
  double      auc = 0.0;
  std::size_t n_test_pairs = 0;
};

/// Trains every ablation preset on the same data and writes ablation.csv/json.
inline std::vector<AblationRow> run_ablate(ExperimentConfig const &cfg, Dataset const &ds, RunDir &run,
                                           LogFn const &log = {})
{
  write_resolved_config(run, cfg);
  std::vector<AblationRow> rows;
  for (auto const &name : ablation_names())
  {
    ExperimentConfig variant = cfg;
    variant.train            = ablation_preset(name, cfg.train);
    variant.output.checkpoint_every_eval = false;
    auto const r = run_train(variant, ds, run, log, name + "/");
    rows.push_back({name, r.report.auc, r.report.n_test_pairs});
  }
  std::string csv = "preset,auc,n_test_pairs\n";
  json        table = json::array();
  for (auto const &r : rows)
  {
    csv += r.name + "," + format_number(r.auc) + "," + std::to_string(r.n_test_pairs) + "\n";
    table.push_back({{"preset", r.name}, {"auc", r.auc}, {"n_test_pairs", r.n_test_pairs}});
  }
  run.write("ablation.csv", csv);
  run.write("ablation.json", table.dump(2) + "\n");
  run.write_manifest("ablate");
  return rows;
}

/// Fits nn, ct or lmt, writes a method-tagged checkpoint and eval.json.
inline EvalReport run_baseline(ExperimentConfig const &cfg, Dataset const &ds, RunDir &run,
                               std::string const &method, LogFn const &log = {})
{
  write_resolved_config(run, cfg);
  Checkpoint c;
  c.method = method;
  if (method == "nn")
  {
    c.config = {{"nn_dim", cfg.baselines.nn_dim}};
    c.pca    = nn_fit(ds, cfg.baselines.nn_dim);
    if (c.pca->rank_deficient)
    {
      detail::say(log, run, "warning: features are rank deficient, kept " +
                              std::to_string(c.pca->components()) + " axes");
    }
  }
  else if (method == "ct")
  {
    c.config = {{"ct_smoothing", cfg.baselines.ct_smoothing}};
    c.cooc   = ct_fit(ds, ds.train_pairs(), cfg.baselines.ct_smoothing);
    if (cfg.eval.negative_mode == NegativeMode::same_category && cfg.eval.tie_mode == TieMode::strict)
    {
      detail::say(log, run, "note: ct scores a same-category negative exactly like its positive, so every "
                            "comparison ties; set eval.tie_mode=half_credit for the chance-level reading");
    }
  }
  else if (method == "lmt")
  {
    c.config          = to_json(cfg.baselines.lmt);
    auto const result = lmt_train(ds, cfg.baselines.lmt);
    c.bank            = lmt_bank(result.embedding, ds.categories());
    std::string loss  = "epoch,loss\n";
    for (std::size_t e = 0; e < result.epoch_loss.size(); ++e)
    {
      loss += std::to_string(e + 1) + "," + format_number(result.epoch_loss[e]) + "\n";
    }
    run.write("lmt_loss.csv", loss);
  }
  else
  {
    throw ValidationError("baseline: unknown method '" + method + "' (expected nn, ct or lmt)");
  }
  run.write(detail::checkpoint_name(cfg, "checkpoint"), detail::checkpoint_bytes(cfg, c));
  EvalReport const report = auc(checkpoint_scorer(c), ds.test_pairs(), ds, cfg.eval);
  detail::emit_report(run, "eval", report, cfg.output.pair_scores);
  detail::say(log, run, method + " test auc " + format_number(report.auc));
  run.write_manifest("baseline");
  return report;
}

struct ProjectionSummary
{
  double                silhouette_style_raw    = std::numeric_limits<double>::quiet_NaN();
  double                silhouette_category_raw = std::numeric_limits<double>::quiet_NaN();
  std::optional<double> silhouette_style_trained;
  std::optional<double> silhouette_category_trained;
};

inline std::vector<int> category_labels(Dataset const &ds)
{
  auto const      &cats = ds.categories();
  std::vector<int> out;
  for (auto const &it : ds.items())
  {
    out.push_back(static_cast<int>(std::lower_bound(cats.begin(), cats.end(), it.category) - cats.begin()));
  }
  return out;
}

/// 2-D projections of raw features and, when a bank checkpoint is given, of
/// style vectors, plus silhouette scores by category and by planted style.
inline ProjectionSummary run_project(ExperimentConfig const &cfg, Dataset const &ds, RunDir &run,
                                     std::string const &checkpoint_path = {}, LogFn const &log = {})
{
  write_resolved_config(run, cfg);
  auto const styles = style_labels(ds);
  auto const cats   = category_labels(ds);
  ProjectionSummary summary;
  json              out = json::object();

  auto emit = [&](std::string const &stem, Matrix const &vectors, std::string const &title) {
    auto const points = project_2d(ds.items(), vectors, styles);
    run.write(stem + ".csv", detail::render([&](std::ostream &o) { write_projection_csv(o, points); }));
    if (cfg.output.svg)
    {
      run.write(stem + ".svg", detail::render([&](std::ostream &o) { write_projection_svg(o, points, title); }));
    }
    double const by_cat = silhouette(vectors, cats);
    out[stem]["silhouette_category"] = by_cat;
    std::optional<double> by_style;
    if (styles)
    {
      by_style                      = silhouette(vectors, *styles);
      out[stem]["silhouette_style"] = *by_style;
    }
    return std::pair{by_cat, by_style};
  };

  auto const raw = emit("projection_raw", all_features(ds), "raw features");
  summary.silhouette_category_raw = raw.first;
  summary.silhouette_style_raw    = raw.second.value_or(std::numeric_limits<double>::quiet_NaN());
  if (!checkpoint_path.empty())
  {
    Checkpoint const c = load_checkpoint(checkpoint_path);
    if (!c.bank)
    {
      throw ValidationError("project: checkpoint has no generator bank");
    }
    auto const trained = emit("projection_style", style_vectors(ds, *c.bank), "style vectors");
    summary.silhouette_category_trained = trained.first;
    summary.silhouette_style_trained    = trained.second;
  }
  run.write("projection.json", out.dump(2) + "\n");
  detail::say(log, run, "projection: " + out.dump());
  run.write_manifest("project");
  return summary;
}

}  // namespace scgan
