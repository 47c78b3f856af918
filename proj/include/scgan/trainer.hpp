#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "scgan/data.hpp"
#include "scgan/eval.hpp"
#include "scgan/format.hpp"
#include "scgan/losses.hpp"
#include "scgan/transport.hpp"

namespace scgan {

struct IterationRecord
{
  std::size_t   iteration = 0;
  std::string   cat_i;
  std::string   cat_j;
  LossBreakdown loss;  ///< loss.wasserstein_estimate is the critic estimate after the iteration
};

struct CheckpointRecord
{
  std::size_t iteration = 0;
  double      auc       = 0.0;
};

struct TrainTrace
{
  std::vector<IterationRecord>  iterations;
  std::vector<CheckpointRecord> checkpoints;
  std::size_t                   critic_updates    = 0;
  std::size_t                   generator_updates = 0;
  std::size_t                   skipped_steps     = 0;
  std::vector<std::string>      diagnostics;
  bool                          stopped_early = false;
};

inline void write_trace_csv(std::ostream &out, TrainTrace const &trace)
{
  out << "iter,cat_i,cat_j,w_estimate,adv,anchor,ortho,total\n";
  for (auto const &r : trace.iterations)
  {
    out << r.iteration << ',' << r.cat_i << ',' << r.cat_j << ','
        << format_number(r.loss.wasserstein_estimate) << ',' << format_number(r.loss.adversarial_term)
        << ',' << format_number(r.loss.anchor_term) << ',' << format_number(r.loss.ortho_term) << ','
        << format_number(r.loss.total) << '\n';
  }
}

inline void write_checkpoints_csv(std::ostream &out, TrainTrace const &trace)
{
  out << "iter,auc\n";
  for (auto const &c : trace.checkpoints)
  {
    out << c.iteration << ',' << format_number(c.auc) << '\n';
  }
}

/// Pearson correlation between |W| smoothed over the trailing `window`
/// iterations and checkpoint AUC. nullopt when either series is constant.
inline std::optional<double> trace_correlation(TrainTrace const &trace, std::size_t window = 100)
{
  if (window == 0)
  {
    throw ValidationError("trace_correlation: window must be positive");
  }
  std::vector<double> w;
  std::vector<double> a;
  std::size_t         k = 0;
  for (auto const &cp : trace.checkpoints)
  {
    // records are sorted by iteration; find the one matching the checkpoint
    while (k < trace.iterations.size() && trace.iterations[k].iteration < cp.iteration)
    {
      ++k;
    }
    if (k == trace.iterations.size() || trace.iterations[k].iteration != cp.iteration)
    {
      continue;
    }
    double      acc = 0.0;
    std::size_t n   = 0;
    for (std::size_t j = k + 1; j-- > 0 && trace.iterations[j].iteration + window > cp.iteration;)
    {
      acc += std::abs(trace.iterations[j].loss.wasserstein_estimate);
      ++n;
    }
    w.push_back(acc / static_cast<double>(n));
    a.push_back(cp.auc);
  }
  if (w.size() < 10)
  {
    throw ValidationError("trace_correlation: need at least 10 checkpoints, have " +
                          std::to_string(w.size()));
  }
  return pearson(w, a);
}

/// Raised when a run cannot continue; carries everything recorded so far.
class TrainingAborted : public std::runtime_error
{
public:
  TrainingAborted(std::string const &what, TrainTrace partial)
    : std::runtime_error(what), trace(std::move(partial))
  {}

  TrainTrace trace;
};

// ---------------------------------------------------------------------------
// sampling

/// Training pairs grouped by unordered category pair, each oriented so that
/// `a` belongs to the lexicographically smaller category.
class PairIndex
{
public:
  PairIndex(Dataset const &ds, std::vector<ItemPair> const &pairs)
  {
    for (auto p : pairs)
    {
      auto const &ca = ds.item(p.a).category;
      auto const &cb = ds.item(p.b).category;
      if (cb < ca)
      {
        std::swap(p.a, p.b);
      }
      groups_[std::minmax(ca, cb)].push_back(p);
    }
  }

  std::vector<ItemPair> const &between(std::string const &a, std::string const &b) const
  {
    static std::vector<ItemPair> const empty;
    auto it = groups_.find(std::minmax(a, b));
    return it == groups_.end() ? empty : it->second;
  }

private:
  std::map<std::pair<std::string, std::string>, std::vector<ItemPair>> groups_;
};

/// One iteration's draw, as item indices. cat_i always precedes cat_j in
/// sorted order: the critic is shared by all category pairs and its objective
/// is antisymmetric, so a random orientation would cancel its expected gradient.
struct SampledStep
{
  std::string              cat_i;
  std::string              cat_j;
  std::vector<std::size_t> items_i;
  std::vector<std::size_t> items_j;
  std::vector<ItemPair>    anchors;  ///< a in cat_i, b in cat_j
};

inline SampledStep sample_step(Dataset const &ds, PairIndex const &index, Rng &rng, std::size_t m,
                               PairSampling mode = PairSampling::uniform, bool full_anchor_set = false)
{
  auto const &cats = ds.categories();
  std::size_t const k = cats.size();
  if (k < 2)
  {
    throw ValidationError("sample_step: need at least 2 categories");
  }
  if (m == 0)
  {
    throw ValidationError("sample_step: batch size must be positive");
  }
  std::size_t a = 0;
  std::size_t b = 1;
  if (mode == PairSampling::uniform)
  {
    std::size_t r = rng.index(k * (k - 1) / 2);
    for (a = 0; r >= k - 1 - a; ++a)
    {
      r -= k - 1 - a;
    }
    b = a + 1 + r;
  }
  else
  {
    double total = 0.0;
    for (std::size_t x = 0; x < k; ++x)
    {
      for (std::size_t y = x + 1; y < k; ++y)
      {
        total += static_cast<double>(ds.items_in(cats[x]).size() * ds.items_in(cats[y]).size());
      }
    }
    double u = rng.uniform() * total;
    bool   found = false;
    for (std::size_t x = 0; x < k && !found; ++x)
    {
      for (std::size_t y = x + 1; y < k && !found; ++y)
      {
        u -= static_cast<double>(ds.items_in(cats[x]).size() * ds.items_in(cats[y]).size());
        a = x;
        b = y;
        found = u < 0.0;
      }
    }
  }

  SampledStep s;
  s.cat_i = cats[a];
  s.cat_j = cats[b];
  auto const &pool_i = ds.items_in(s.cat_i);
  auto const &pool_j = ds.items_in(s.cat_j);
  s.items_i.reserve(m);
  s.items_j.reserve(m);
  for (std::size_t r = 0; r < m; ++r)
  {
    s.items_i.push_back(pool_i[rng.index(pool_i.size())]);
  }
  for (std::size_t r = 0; r < m; ++r)
  {
    s.items_j.push_back(pool_j[rng.index(pool_j.size())]);
  }

  auto const &avail = index.between(s.cat_i, s.cat_j);
  std::size_t n_anchor = full_anchor_set ? avail.size() : std::min(m, avail.size());
  std::vector<std::size_t> order(avail.size());
  for (std::size_t r = 0; r < order.size(); ++r)
  {
    order[r] = r;
  }
  // partial Fisher-Yates: the first n_anchor slots become a uniform sample
  for (std::size_t r = 0; r < n_anchor && !full_anchor_set; ++r)
  {
    std::swap(order[r], order[r + rng.index(order.size() - r)]);
  }
  for (std::size_t r = 0; r < n_anchor; ++r)
  {
    s.anchors.push_back(avail[order[r]]);
  }
  return s;
}

inline StepBatch materialize(Dataset const &ds, SampledStep const &s)
{
  StepBatch b;
  b.cat_i   = s.cat_i;
  b.cat_j   = s.cat_j;
  b.items_i = ds.features_of(s.items_i);
  b.items_j = ds.features_of(s.items_j);
  std::vector<std::size_t> ai;
  std::vector<std::size_t> aj;
  for (auto const &p : s.anchors)
  {
    ai.push_back(p.a);
    aj.push_back(p.b);
  }
  b.anchors_i = ds.features_of(ai);
  b.anchors_j = ds.features_of(aj);
  if (ai.empty())
  {
    b.anchors_i = Matrix(0, ds.feature_dim());
    b.anchors_j = Matrix(0, ds.feature_dim());
  }
  return b;
}

// ---------------------------------------------------------------------------
// optimizer state

struct CriticOptimizer
{
  std::vector<RmsPropState> weights;
  std::vector<RmsPropState> biases;

  CriticOptimizer() = default;
  CriticOptimizer(Critic const &critic, RmsPropConfig cfg)
    : weights(critic.layers.size(), RmsPropState(cfg)), biases(critic.layers.size(), RmsPropState(cfg))
  {}
};

/// One RMSProp state per generator slot.
struct GeneratorOptimizer
{
  std::vector<RmsPropState> slots;

  GeneratorOptimizer() = default;
  GeneratorOptimizer(GeneratorBank const &bank, RmsPropConfig cfg)
    : slots(bank.slot_count(), RmsPropState(cfg))
  {}
};

// ---------------------------------------------------------------------------
// steps

/// One ascent step on mean D(styles_i) - mean D(styles_j), then weight
/// clipping. Returns the objective before the step.
inline double critic_step(Matrix const &styles_i, Matrix const &styles_j, Critic &critic,
                          CriticOptimizer &opt)
{
  Tape       tape;
  auto const vars = bind_critic(tape, critic, true);
  Var const  obj  = losses::critic_objective(vars, critic.leaky_slope, tape.constant(styles_i),
                                             tape.constant(styles_j));
  tape.backward(obj);
  std::vector<Matrix> gw;
  std::vector<Matrix> gb;
  for (std::size_t l = 0; l < critic.layers.size(); ++l)
  {
    gw.push_back(tape.grad(vars.weights[l]));
    gb.push_back(tape.grad(vars.biases[l]));
    if (!all_finite(gw.back()) || !all_finite(gb.back()))
    {
      throw NumericError("critic_step: non-finite gradient in layer " + std::to_string(l));
    }
  }
  for (std::size_t l = 0; l < critic.layers.size(); ++l)
  {
    gw[l] *= -1.0;
    gb[l] *= -1.0;
    opt.weights[l].apply(critic.layers[l].weight, gw[l]);
    opt.biases[l].apply(critic.layers[l].bias, gb[l]);
  }
  clip_critic(critic);
  return tape.scalar(obj);
}

/// One descent step on the generator objective for the two sampled
/// categories; every other slot is untouched. Returns the pre-step terms.
inline LossBreakdown generator_step(StepBatch const &batch, GeneratorBank &bank, Critic const &critic,
                                    GeneratorOptimizer &opt, LossWeights const &w,
                                    losses::DistributionTerm dist = {})
{
  std::size_t const si = bank.slot(batch.cat_i);
  std::size_t const sj = bank.slot(batch.cat_j);
  Tape              tape;
  Var const         gi = tape.parameter(bank.slot_matrix(si));
  Var const         gj = si == sj ? gi : tape.parameter(bank.slot_matrix(sj));
  CriticVars        cv;
  if (dist.kind == losses::DistributionTerm::Kind::critic)
  {
    cv = bind_critic(tape, critic, false);
  }
  auto const l = losses::build_generator_loss(tape, batch, gi, gj, cv, critic.leaky_slope, w, dist);
  tape.backward(l.total);

  Matrix const grad_i = tape.grad(gi);
  Matrix const grad_j = si == sj ? Matrix() : tape.grad(gj);
  if (!all_finite(grad_i) || !all_finite(grad_j))
  {
    throw NumericError("generator_step: non-finite gradient for (" + batch.cat_i + ", " +
                       batch.cat_j + ")");
  }
  opt.slots[si].apply(bank.slot_matrix(si), grad_i);
  if (si != sj)
  {
    opt.slots[sj].apply(bank.slot_matrix(sj), grad_j);
  }

  LossBreakdown out;
  out.adversarial_term = tape.scalar(l.adversarial);
  out.anchor_term      = tape.scalar(l.anchor);
  out.ortho_term       = tape.scalar(l.ortho);
  out.total            = out.adversarial_term + w.eta * out.anchor_term + w.lambda * out.ortho_term;
  if (dist.kind == losses::DistributionTerm::Kind::critic)
  {
    out.wasserstein_estimate = out.adversarial_term;
  }
  return out;
}

struct SinkhornStepResult
{
  std::optional<LossBreakdown> loss;  ///< nullopt when the step was skipped
  std::string                  diagnostic;
};

/// Generator step whose distribution term is the entropic transport cost
/// between the projected batches. The plan is solved once and held fixed
/// while differentiating.
inline SinkhornStepResult sinkhorn_generator_step(StepBatch const &batch, GeneratorBank &bank,
                                                  GeneratorOptimizer &opt, LossWeights const &w,
                                                  double reg_fraction,
                                                  GroundCost ground = GroundCost::squared_euclidean,
                                                  std::size_t max_iter = 2000, double tol = 1e-6)
{
  Matrix const si  = project_rows(batch.items_i, batch.cat_i, bank);
  Matrix const sj  = project_rows(batch.items_j, batch.cat_j, bank);
  Matrix const c   = cost_matrix(si, sj, ground);
  double const reg = reg_fraction * median({c.data().begin(), c.data().end()});
  Matrix       plan;
  if (reg > 0.0)
  {
    auto res = sinkhorn_cost_matrix(c, reg, max_iter, tol);
    if (!res.converged)
    {
      return {std::nullopt, "sinkhorn did not converge for (" + batch.cat_i + ", " + batch.cat_j +
                              "): marginal error " + format_number(res.marginal_error)};
    }
    plan = std::move(res.plan.gamma);
  }
  else
  {
    // every projected point coincides; any coupling is optimal
    plan = Matrix(c.rows(), c.cols(), 1.0 / static_cast<double>(c.rows() * c.cols()));
  }
  Critic const unused;
  return {generator_step(batch, bank, unused, opt, w,
                         {losses::DistributionTerm::Kind::transport, &plan, ground}),
          {}};
}

// ---------------------------------------------------------------------------
// training loop

struct TrainOptions
{
  EvalOptions eval;  ///< negatives for checkpoint AUC
  /// Called once per eval_every iterations with a progress line.
  std::function<void(std::string const &)> log;
  /// Called after every iteration with the end-of-iteration state.
  std::function<void(std::size_t, StepBatch const &, GeneratorBank const &, Critic const &,
                     IterationRecord const &)>
    on_iteration;
  /// Start from this state instead of init_model.
  std::optional<std::pair<GeneratorBank, Critic>> initial;
};

struct TrainResult
{
  GeneratorBank bank;
  Critic        critic;
  TrainTrace    trace;
};

inline std::uint64_t sampling_seed(std::uint64_t seed) { return splitmix64(seed ^ 0x5a3d1e0c7b9f2468ULL); }

inline TrainResult train(Dataset const &ds, TrainConfig const &cfg, TrainOptions const &opts = {})
{
  cfg.validate();
  if (ds.categories().size() < 2)
  {
    throw ValidationError("train: need at least 2 categories");
  }
  auto [bank, critic] = opts.initial ? *opts.initial
                                     : init_model(cfg, ds.categories(), ds.feature_dim(), cfg.seed);
  validate_critic(critic);
  if (critic.input_dim() != bank.style_dim())
  {
    throw ShapeError("train: critic input dim does not match style dim");
  }

  TrainTrace         trace;
  PairIndex const    index(ds, ds.train_pairs());
  Rng                rng(sampling_seed(cfg.seed));
  CriticOptimizer    copt(critic, cfg.rmsprop());
  GeneratorOptimizer gopt(bank, cfg.rmsprop());
  LossWeights const  weights = LossWeights::from(cfg);

  std::vector<double> ortho_cache(bank.slot_count());
  auto refresh_ortho = [&](std::size_t slot) {
    ortho_cache[slot] = ortho_penalty(bank.slot_matrix(slot), weights.ortho_squared);
  };
  for (std::size_t s = 0; s < bank.slot_count(); ++s)
  {
    refresh_ortho(s);
  }
  double last_transport = 0.0;

  auto abort = [&](std::string const &msg) { throw TrainingAborted(msg, std::move(trace)); };

  for (std::size_t t = 1; t <= cfg.max_iterations; ++t)
  {
    SampledStep const step  = sample_step(ds, index, rng, cfg.batch_size, cfg.pair_sampling,
                                          cfg.anchor_full_set);
    StepBatch const   batch = materialize(ds, step);

    try
    {
      if (t % cfg.n_critic == 0)
      {
        if (cfg.adversarial)
        {
          generator_step(batch, bank, critic, gopt, weights);
          ++trace.generator_updates;
        }
        else if (cfg.sinkhorn_alignment)
        {
          auto res = sinkhorn_generator_step(batch, bank, gopt, weights, cfg.sinkhorn_reg,
                                             cfg.sinkhorn_ground);
          if (res.loss)
          {
            last_transport = res.loss->adversarial_term;
            ++trace.generator_updates;
          }
          else
          {
            ++trace.skipped_steps;
            trace.diagnostics.push_back("iteration " + std::to_string(t) + ": " + res.diagnostic);
          }
        }
        else
        {
          generator_step(batch, bank, critic, gopt, weights, {losses::DistributionTerm::Kind::none});
          ++trace.generator_updates;
        }
        refresh_ortho(bank.slot(batch.cat_i));
        refresh_ortho(bank.slot(batch.cat_j));
      }

      Matrix const styles_i = project_rows(batch.items_i, batch.cat_i, bank);
      Matrix const styles_j = project_rows(batch.items_j, batch.cat_j, bank);
      critic_step(styles_i, styles_j, critic, copt);
      ++trace.critic_updates;
      if (cfg.debug_checks)
      {
        for (auto const &layer : critic.layers)
        {
          if (max_abs(layer.weight) > critic.clip_bound)
          {
            throw NumericError("clipping invariant violated at iteration " + std::to_string(t));
          }
        }
      }

      IterationRecord rec;
      rec.iteration = t;
      rec.cat_i     = batch.cat_i;
      rec.cat_j     = batch.cat_j;
      double const w_est = critic_objective(styles_i, styles_j, critic);
      rec.loss.wasserstein_estimate = w_est;
      rec.loss.adversarial_term     = cfg.adversarial ? w_est : (cfg.sinkhorn_alignment ? last_transport : 0.0);
      if (batch.anchors_i.rows() > 0)
      {
        Matrix const ai = project_rows(batch.anchors_i, batch.cat_i, bank);
        Matrix const aj = project_rows(batch.anchors_j, batch.cat_j, bank);
        Matrix       diff = ai;
        diff -= aj;
        rec.loss.anchor_term = frobenius_sq(diff);
        if (weights.anchor_normalized)
        {
          rec.loss.anchor_term /= static_cast<double>(ai.rows());
        }
      }
      rec.loss.ortho_term = ortho_cache[bank.slot(batch.cat_i)] + ortho_cache[bank.slot(batch.cat_j)];
      rec.loss.total      = rec.loss.adversarial_term + weights.eta * rec.loss.anchor_term +
                       weights.lambda * rec.loss.ortho_term;
      if (!std::isfinite(rec.loss.total) || !std::isfinite(w_est))
      {
        throw NumericError("non-finite loss at iteration " + std::to_string(t));
      }
      trace.iterations.push_back(rec);
      if (opts.on_iteration)
      {
        opts.on_iteration(t, batch, bank, critic, trace.iterations.back());
      }
    }
    catch (NumericError const &e)
    {
      abort(e.what());
    }

    bool const last = t == cfg.max_iterations;
    if ((t % cfg.eval_every == 0 || last) && !ds.test_pairs().empty())
    {
      double const a = auc(bank, ds.test_pairs(), ds, opts.eval).auc;
      trace.checkpoints.push_back({t, a});
      if (opts.log)
      {
        opts.log("iter " + std::to_string(t) + "  auc " + format_number(a) + "  w " +
                 format_number(trace.iterations.back().loss.wasserstein_estimate));
      }
    }

    if (cfg.early_stop && t % cfg.early_stop_window == 0 && t >= 2 * cfg.early_stop_window)
    {
      std::size_t const W = cfg.early_stop_window;
      double            recent = 0.0;
      double            before = 0.0;
      for (std::size_t k = 0; k < W; ++k)
      {
        recent += std::abs(trace.iterations[t - 1 - k].loss.wasserstein_estimate);
        before += std::abs(trace.iterations[t - 1 - W - k].loss.wasserstein_estimate);
      }
      double const rel = std::abs(recent - before) / std::max(std::abs(before), 1e-300);
      if (rel < cfg.early_stop_tol)
      {
        trace.stopped_early = true;
        if (trace.checkpoints.empty() || trace.checkpoints.back().iteration != t)
        {
          if (!ds.test_pairs().empty())
          {
            trace.checkpoints.push_back({t, auc(bank, ds.test_pairs(), ds, opts.eval).auc});
          }
        }
        break;
      }
    }
  }
  return {std::move(bank), std::move(critic), std::move(trace)};
}

}  // namespace scgan
