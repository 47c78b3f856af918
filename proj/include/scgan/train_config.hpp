#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "scgan/ground_cost.hpp"
#include "scgan/json_util.hpp"
#include "scgan/numcore/rmsprop.hpp"

namespace scgan {

enum class PairSampling
{
  uniform,    ///< uniform over unordered category pairs
  frequency,  ///< weighted by item counts of both categories
};

enum class GeneratorInit
{
  uniform,      ///< entries in [-1/sqrt(F), 1/sqrt(F)]
  orthonormal,  ///< random row-orthonormal matrix
};

/// Hyperparameters and switches for one training run. Defaults follow the
/// published experimental settings where those exist.
struct TrainConfig
{
  std::size_t   style_dim      = 128;
  double        lambda         = 0.01;   ///< orthogonality weight
  double        eta            = 0.1;    ///< anchor weight
  double        learning_rate  = 0.001;
  double        rms_decay      = 0.9;
  double        rms_epsilon    = 1e-8;
  std::size_t   batch_size     = 30;
  double        clip_bound     = 0.01;
  std::size_t   n_critic       = 5;
  std::size_t   max_iterations = 20000;
  std::size_t   eval_every     = 500;
  std::uint64_t seed           = 1;

  bool shared_generator   = false;  ///< one matrix for all categories
  bool adversarial        = true;   ///< off: distribution term from Sinkhorn (or none)
  bool sinkhorn_alignment = true;   ///< only consulted when adversarial is off
  double sinkhorn_reg     = 0.05;   ///< entropic reg as a fraction of the median batch cost
  GroundCost sinkhorn_ground = GroundCost::euclidean;
  bool anchor_enabled     = true;
  bool ortho_enabled      = true;
  bool ortho_squared      = true;   ///< ||GG^T - E||_F^2 rather than ||GG^T - E||_F
  bool anchor_normalized  = true;   ///< anchor sum divided by the anchor batch size
  bool anchor_full_set    = false;  ///< use every training pair of the sampled category pair

  PairSampling  pair_sampling  = PairSampling::uniform;
  GeneratorInit generator_init = GeneratorInit::uniform;

  std::vector<std::size_t> critic_hidden = {128, 128};
  double                   leaky_slope   = 0.2;

  bool        early_stop        = false;
  std::size_t early_stop_window = 200;
  double      early_stop_tol    = 1e-4;

  bool debug_checks = false;  ///< verify clipping after every critic update

  RmsPropConfig rmsprop() const { return {learning_rate, rms_decay, rms_epsilon}; }

  double effective_eta() const { return anchor_enabled ? eta : 0.0; }
  double effective_lambda() const { return ortho_enabled ? lambda : 0.0; }

  void validate() const
  {
    auto require = [](bool ok, char const *msg) {
      if (!ok)
      {
        throw ValidationError(std::string("train.") + msg);
      }
    };
    require(style_dim > 0, "style_dim: must be positive");
    require(lambda >= 0.0, "lambda: must be non-negative");
    require(eta >= 0.0, "eta: must be non-negative");
    require(learning_rate > 0.0, "learning_rate: must be positive");
    require(rms_decay >= 0.0 && rms_decay < 1.0, "rms_decay: must be in [0, 1)");
    require(rms_epsilon > 0.0, "rms_epsilon: must be positive");
    require(batch_size > 0, "batch_size: must be positive");
    require(clip_bound > 0.0, "clip_bound: must be positive");
    require(n_critic >= 1, "n_critic: must be >= 1");
    require(eval_every > 0, "eval_every: must be positive");
    require(sinkhorn_reg > 0.0, "sinkhorn_reg: must be positive");
    require(leaky_slope >= 0.0 && leaky_slope < 1.0, "leaky_slope: must be in [0, 1)");
    require(early_stop_window > 0, "early_stop_window: must be positive");
    require(early_stop_tol > 0.0, "early_stop_tol: must be positive");
    for (auto w : critic_hidden)
    {
      require(w > 0, "critic_hidden: widths must be positive");
    }
  }
};

NLOHMANN_JSON_SERIALIZE_ENUM(PairSampling, {{PairSampling::uniform, "uniform"},
                                            {PairSampling::frequency, "frequency"}})
NLOHMANN_JSON_SERIALIZE_ENUM(GeneratorInit, {{GeneratorInit::uniform, "uniform"},
                                             {GeneratorInit::orthonormal, "orthonormal"}})

inline json to_json(TrainConfig const &c)
{
  return json{
    {"style_dim", c.style_dim},
    {"lambda", c.lambda},
    {"eta", c.eta},
    {"learning_rate", c.learning_rate},
    {"rms_decay", c.rms_decay},
    {"rms_epsilon", c.rms_epsilon},
    {"batch_size", c.batch_size},
    {"clip_bound", c.clip_bound},
    {"n_critic", c.n_critic},
    {"max_iterations", c.max_iterations},
    {"eval_every", c.eval_every},
    {"seed", c.seed},
    {"shared_generator", c.shared_generator},
    {"adversarial", c.adversarial},
    {"sinkhorn_alignment", c.sinkhorn_alignment},
    {"sinkhorn_reg", c.sinkhorn_reg},
    {"sinkhorn_ground", c.sinkhorn_ground},
    {"anchor_enabled", c.anchor_enabled},
    {"ortho_enabled", c.ortho_enabled},
    {"ortho_squared", c.ortho_squared},
    {"anchor_normalized", c.anchor_normalized},
    {"anchor_full_set", c.anchor_full_set},
    {"pair_sampling", c.pair_sampling},
    {"generator_init", c.generator_init},
    {"critic_hidden", c.critic_hidden},
    {"leaky_slope", c.leaky_slope},
    {"early_stop", c.early_stop},
    {"early_stop_window", c.early_stop_window},
    {"early_stop_tol", c.early_stop_tol},
    {"debug_checks", c.debug_checks},
  };
}

/// Strict parse: unknown keys are rejected, absent keys keep their defaults.
inline TrainConfig train_config_from_json(json const &j, TrainConfig c = {})
{
  StrictObject o(j, "train");
  o.get("style_dim", c.style_dim);
  o.get("lambda", c.lambda);
  o.get("eta", c.eta);
  o.get("learning_rate", c.learning_rate);
  o.get("rms_decay", c.rms_decay);
  o.get("rms_epsilon", c.rms_epsilon);
  o.get("batch_size", c.batch_size);
  o.get("clip_bound", c.clip_bound);
  o.get("n_critic", c.n_critic);
  o.get("max_iterations", c.max_iterations);
  o.get("eval_every", c.eval_every);
  o.get("seed", c.seed);
  o.get("shared_generator", c.shared_generator);
  o.get("adversarial", c.adversarial);
  o.get("sinkhorn_alignment", c.sinkhorn_alignment);
  o.get("sinkhorn_reg", c.sinkhorn_reg);
  o.get("sinkhorn_ground", c.sinkhorn_ground);
  o.get("anchor_enabled", c.anchor_enabled);
  o.get("ortho_enabled", c.ortho_enabled);
  o.get("ortho_squared", c.ortho_squared);
  o.get("anchor_normalized", c.anchor_normalized);
  o.get("anchor_full_set", c.anchor_full_set);
  if (o.has("pair_sampling"))
  {
    auto const &v = o.child("pair_sampling");
    if (v != "uniform" && v != "frequency")
    {
      throw ValidationError("train.pair_sampling: expected 'uniform' or 'frequency'");
    }
    c.pair_sampling = v.get<PairSampling>();
  }
  if (o.has("generator_init"))
  {
    auto const &v = o.child("generator_init");
    if (v != "uniform" && v != "orthonormal")
    {
      throw ValidationError("train.generator_init: expected 'uniform' or 'orthonormal'");
    }
    c.generator_init = v.get<GeneratorInit>();
  }
  o.get("critic_hidden", c.critic_hidden);
  o.get("leaky_slope", c.leaky_slope);
  o.get("early_stop", c.early_stop);
  o.get("early_stop_window", c.early_stop_window);
  o.get("early_stop_tol", c.early_stop_tol);
  o.get("debug_checks", c.debug_checks);
  o.finish();
  c.validate();
  return c;
}

}  // namespace scgan
