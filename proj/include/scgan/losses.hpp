#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "scgan/ground_cost.hpp"
#include "scgan/model.hpp"

namespace scgan {

/// Feature rows sampled for one training iteration.
struct StepBatch
{
  std::string cat_i;
  std::string cat_j;
  Matrix      items_i;    ///< m x F, category cat_i
  Matrix      items_j;    ///< m x F, category cat_j
  Matrix      anchors_i;  ///< k x F, left members of anchor pairs (cat_i), k may be 0
  Matrix      anchors_j;  ///< k x F, right members (cat_j)
};

/// Terms of the generator objective. ortho_term is the unweighted sum over
/// the two sampled generators; total = adversarial + eta * anchor + lambda * ortho.
struct LossBreakdown
{
  double adversarial_term     = 0.0;
  double anchor_term          = 0.0;
  double ortho_term           = 0.0;
  double total                = 0.0;
  double wasserstein_estimate = 0.0;
};

struct LossWeights
{
  double eta               = 0.1;
  double lambda            = 0.01;
  bool   ortho_squared     = true;
  bool   anchor_normalized = true;

  static LossWeights from(TrainConfig const &c)
  {
    return {c.effective_eta(), c.effective_lambda(), c.ortho_squared, c.anchor_normalized};
  }
};

/// mean D(batch_i) - mean D(batch_j) over projected style vectors.
inline double critic_objective(Matrix const &styles_i, Matrix const &styles_j,
                               Critic const &critic)
{
  if (styles_i.rows() == 0 || styles_j.rows() == 0)
  {
    throw ValidationError("critic_objective: empty batch");
  }
  auto mean_of = [&](Matrix const &s) {
    Matrix const out = critic_forward(s, critic);
    double       acc = 0.0;
    for (double v : out.data())
    {
      acc += v;
    }
    return acc / static_cast<double>(out.rows());
  };
  return mean_of(styles_i) - mean_of(styles_j);
}

using ItemRefPair = std::pair<ItemRecord const *, ItemRecord const *>;

/// Sum over pairs of ||G_a v_a - G_b v_b||^2 (unnormalized).
inline double anchor_loss(std::span<const ItemRefPair> pairs, GeneratorBank const &bank)
{
  double acc = 0.0;
  for (auto const &[x, y] : pairs)
  {
    acc += squared_distance(project(*x, bank), project(*y, bank));
  }
  return acc;
}

/// ||G G^T - E||_F^2, or the plain Frobenius norm when squared is false.
inline double ortho_penalty(Matrix const &g, bool squared = true)
{
  Matrix gram = matmul_nt(g, g);
  for (std::size_t i = 0; i < gram.rows(); ++i)
  {
    gram(i, i) -= 1.0;
  }
  double const sq = frobenius_sq(gram);
  return squared ? sq : std::sqrt(sq);
}

namespace losses {

inline Var critic_objective(CriticVars const &critic, double slope, Var styles_i, Var styles_j)
{
  return ops::sub(ops::mean(critic_forward(critic, styles_i, slope)),
                  ops::mean(critic_forward(critic, styles_j, slope)));
}

inline Var ortho_penalty(Var g, bool squared)
{
  Tape       &t    = ops::tape_of(g);
  std::size_t d    = t.value(g).rows();
  Var         diff = ops::sub(ops::matmul_nt(g, g), t.constant(Matrix::identity(d)));
  return squared ? ops::sum_squares(diff) : ops::frobenius_norm(diff);
}

/// Sum of squared distances between projected anchor rows.
inline Var anchor_sum(Var g_i, Var g_j, Var anchors_i, Var anchors_j)
{
  return ops::sum_squares(ops::sub(ops::matmul_nt(anchors_i, g_i), ops::matmul_nt(anchors_j, g_j)));
}

/// Sum_ij plan_ij * c(s_i, s'_j) with the plan held fixed.
inline Var transport_cost(Var styles_i, Var styles_j, Matrix const &plan,
                          GroundCost ground = GroundCost::squared_euclidean)
{
  Tape &t    = ops::tape_of(styles_i);
  Var   cost = ops::pairwise_sq_dist(styles_i, styles_j);
  if (ground == GroundCost::euclidean)
  {
    cost = ops::sqrt(cost);
  }
  return ops::sum(ops::hadamard(cost, t.constant(plan)));
}

struct GeneratorLossVars
{
  Var adversarial;
  Var anchor;
  Var ortho;
  Var total;
};

/// Distribution-level term used by the generator loss.
struct DistributionTerm
{
  enum class Kind
  {
    critic,
    transport,
    none,
  };
  Kind          kind   = Kind::critic;
  Matrix const *plan   = nullptr;  ///< for Kind::transport
  GroundCost    ground = GroundCost::squared_euclidean;
};

/// Full generator loss on the tape. g_i and g_j may be the same handle (shared mode).
inline GeneratorLossVars build_generator_loss(Tape &tape, StepBatch const &batch, Var g_i, Var g_j,
                                              CriticVars const &critic, double slope,
                                              LossWeights const &w, DistributionTerm dist = {})
{
  Var const vi = tape.constant(batch.items_i);
  Var const vj = tape.constant(batch.items_j);
  Var const si = ops::matmul_nt(vi, g_i);
  Var const sj = ops::matmul_nt(vj, g_j);

  Var adversarial;
  switch (dist.kind)
  {
  case DistributionTerm::Kind::critic:
    adversarial = critic_objective(critic, slope, si, sj);
    break;
  case DistributionTerm::Kind::transport:
    adversarial = transport_cost(si, sj, *dist.plan, dist.ground);
    break;
  case DistributionTerm::Kind::none:
    adversarial = tape.constant(Matrix(1, 1));
    break;
  }

  Var anchor = tape.constant(Matrix(1, 1));
  if (batch.anchors_i.rows() > 0)
  {
    anchor = anchor_sum(g_i, g_j, tape.constant(batch.anchors_i), tape.constant(batch.anchors_j));
    if (w.anchor_normalized)
    {
      anchor = ops::scale(anchor, 1.0 / static_cast<double>(batch.anchors_i.rows()));
    }
  }

  Var const ortho = ops::add(ortho_penalty(g_i, w.ortho_squared), ortho_penalty(g_j, w.ortho_squared));

  Var total = adversarial;
  if (w.eta != 0.0)
  {
    total = ops::add(total, ops::scale(anchor, w.eta));
  }
  if (w.lambda != 0.0)
  {
    total = ops::add(total, ops::scale(ortho, w.lambda));
  }
  return {adversarial, anchor, ortho, total};
}

}  // namespace losses

/// Evaluates the generator objective for one step batch.
inline LossBreakdown generator_objective(StepBatch const &batch, GeneratorBank const &bank,
                                         Critic const &critic, LossWeights const &w)
{
  if (batch.items_i.rows() == 0 || batch.items_j.rows() == 0)
  {
    throw ValidationError("generator_objective: empty batch");
  }
  Tape       tape;
  Var const  gi = tape.constant(bank.matrix(batch.cat_i));
  Var const  gj = tape.constant(bank.matrix(batch.cat_j));
  auto const cv = bind_critic(tape, critic, false);
  auto const l  = losses::build_generator_loss(tape, batch, gi, gj, cv, critic.leaky_slope, w);

  LossBreakdown out;
  out.adversarial_term     = tape.scalar(l.adversarial);
  out.anchor_term          = tape.scalar(l.anchor);
  out.ortho_term           = tape.scalar(l.ortho);
  out.total                = out.adversarial_term + w.eta * out.anchor_term + w.lambda * out.ortho_term;
  out.wasserstein_estimate = out.adversarial_term;
  return out;
}

}  // namespace scgan
