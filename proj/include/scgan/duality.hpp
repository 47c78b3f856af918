#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "scgan/trainer.hpp"

namespace scgan {

struct DualityOptions
{
  std::size_t   perturbations = 24;
  std::size_t   batch_size    = 64;
  std::size_t   critic_steps  = 300;
  double        max_sigma     = 0.25;  ///< perturbation std drawn from U[0, max_sigma)
  bool          warm_start    = false; ///< refine a copy of the given critic instead of a fresh one
  std::uint64_t seed          = 99;
};

struct DualityResult
{
  std::vector<double> sigmas;
  std::vector<double> estimates;  ///< critic objective after refitting on the frozen batches
  std::vector<double> emd;        ///< exact EMD (Euclidean ground) of the same batches
  std::optional<double> r;        ///< Pearson correlation; nullopt when a series is constant
};

/// Freezes one batch per category, perturbs cat_j's generator with Gaussian
/// noise of random scale, refits a critic on the projected batches and
/// compares its estimate with the exact transport cost.
inline DualityResult duality_check(Dataset const &ds, GeneratorBank const &bank, Critic const &critic,
                                   std::string const &cat_i, std::string const &cat_j,
                                   RmsPropConfig const &rms, DualityOptions const &opts = {})
{
  if (opts.batch_size == 0 || opts.batch_size > kExactEmdMaxPoints)
  {
    throw ValidationError("duality: batch_size must be in [1, " + std::to_string(kExactEmdMaxPoints) + "]");
  }
  if (cat_i == cat_j)
  {
    throw ValidationError("duality: categories must differ");
  }
  Rng  rng(opts.seed);
  auto pick = [&](std::string const &c) {
    auto const              &pool = ds.items_in(c);
    std::vector<std::size_t> idx(opts.batch_size);
    for (auto &i : idx)
    {
      i = pool[rng.index(pool.size())];
    }
    return ds.features_of(idx);
  };
  Matrix const xi = pick(cat_i);
  Matrix const xj = pick(cat_j);

  DualityResult out;
  for (std::size_t k = 0; k < opts.perturbations; ++k)
  {
    GeneratorBank perturbed = bank;
    double const  sigma     = rng.uniform() * opts.max_sigma;
    perturbed.slot_matrix(perturbed.slot(cat_j)) +=
      random_normal(bank.style_dim(), bank.feature_dim(), sigma, rng);
    Matrix const si = project_rows(xi, cat_i, perturbed);
    Matrix const sj = project_rows(xj, cat_j, perturbed);

    Critic f = opts.warm_start
                 ? critic
                 : make_critic(critic.input_dim(), critic.hidden_sizes(), critic.leaky_slope,
                               critic.clip_bound, rng);
    CriticOptimizer opt(f, rms);
    for (std::size_t t = 0; t < opts.critic_steps; ++t)
    {
      critic_step(si, sj, f, opt);
    }
    out.sigmas.push_back(sigma);
    out.estimates.push_back(critic_objective(si, sj, f));
    out.emd.push_back(exact_emd(si, sj, GroundCost::euclidean).cost);
  }
  out.r = pearson(out.estimates, out.emd);
  return out;
}

}  // namespace scgan
