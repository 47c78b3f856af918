#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <sstream>

#include "scgan/data.hpp"
#include "scgan/numcore/random_matrix.hpp"
#include "scgan/trainer.hpp"

using namespace scgan;

namespace {

Dataset small_dataset(std::size_t n_categories = 3, double seed_permille = 500.0)
{
  SynthConfig sc;
  sc.n_categories       = n_categories;
  sc.items_per_category = 40;
  sc.feature_dim        = 12;
  sc.style_dim_true     = 4;
  sc.n_styles           = 3;
  Dataset ds            = synth_generate(sc);
  ds.set_split(split_pairs(ds.pairs(), seed_permille, 0.2, 3));
  return ds;
}

TrainConfig small_config(std::size_t iterations)
{
  TrainConfig cfg;
  cfg.style_dim      = 6;
  cfg.critic_hidden  = {8, 8};
  cfg.batch_size     = 8;
  cfg.max_iterations = iterations;
  cfg.eval_every     = 10;
  return cfg;
}

ItemRecord rec(std::string id, std::string cat, Vector f) { return {std::move(id), std::move(cat), std::move(f)}; }

}  // namespace

TEST(SampleStep, TwoCategoriesAlwaysThatPair)
{
  Dataset const   ds = small_dataset(2);
  PairIndex const index(ds, ds.train_pairs());
  Rng             rng(1);
  for (int k = 0; k < 50; ++k)
  {
    auto const s = sample_step(ds, index, rng, 7);
    EXPECT_EQ(s.cat_i, "cat0");
    EXPECT_EQ(s.cat_j, "cat1");
    EXPECT_EQ(s.items_i.size(), 7u);
    EXPECT_EQ(s.items_j.size(), 7u);
    for (auto i : s.items_i)
      EXPECT_EQ(ds.item(i).category, "cat0");
    for (auto j : s.items_j)
      EXPECT_EQ(ds.item(j).category, "cat1");
  }
}

TEST(SampleStep, AnchorsOrientedAndCappedAtBatchSize)
{
  Dataset const   ds = small_dataset(3);
  PairIndex const index(ds, ds.train_pairs());
  Rng             rng(2);
  for (int k = 0; k < 50; ++k)
  {
    auto const  s     = sample_step(ds, index, rng, 5);
    std::size_t avail = index.between(s.cat_i, s.cat_j).size();
    EXPECT_EQ(s.anchors.size(), std::min<std::size_t>(5, avail));
    EXPECT_LT(s.cat_i, s.cat_j);
    for (auto const &p : s.anchors)
    {
      EXPECT_EQ(ds.item(p.a).category, s.cat_i);
      EXPECT_EQ(ds.item(p.b).category, s.cat_j);
    }
    std::set<std::pair<std::size_t, std::size_t>> distinct;
    for (auto const &p : s.anchors)
      distinct.insert({p.a, p.b});
    EXPECT_EQ(distinct.size(), s.anchors.size());
  }
}

TEST(SampleStep, NoAnchorsGivesEmptyAnchorBatch)
{
  Dataset const   ds = small_dataset(2, 0.0);
  PairIndex const index(ds, ds.train_pairs());
  Rng             rng(3);
  auto const      s = sample_step(ds, index, rng, 4);
  EXPECT_TRUE(s.anchors.empty());
  StepBatch const b = materialize(ds, s);
  EXPECT_EQ(b.anchors_i.rows(), 0u);
  EXPECT_EQ(b.anchors_i.cols(), ds.feature_dim());
  EXPECT_EQ(b.items_i.rows(), 4u);
}

TEST(SampleStep, UniformOverUnorderedPairs)
{
  Dataset const   ds = small_dataset(4);
  PairIndex const index(ds, ds.train_pairs());
  Rng             rng(4);
  std::map<std::pair<std::string, std::string>, int> counts;
  int const n = 10000;
  for (int k = 0; k < n; ++k)
  {
    auto const s = sample_step(ds, index, rng, 1);
    ++counts[{s.cat_i, s.cat_j}];
  }
  ASSERT_EQ(counts.size(), 6u);
  for (auto const &[pair, c] : counts)
    EXPECT_NEAR(static_cast<double>(c) / n, 1.0 / 6.0, 0.02) << pair.first << "," << pair.second;
}

TEST(SampleStep, FewerThanTwoCategoriesRejected)
{
  Dataset const   ds({rec("a", "top", {1.0}), rec("b", "top", {2.0})}, {});
  PairIndex const index(ds, {});
  Rng             rng(5);
  EXPECT_THROW(sample_step(ds, index, rng, 2), ValidationError);
}

TEST(CriticStep, IdenticalBatchesKeepObjectiveZeroAndClip)
{
  Rng             rng(6);
  Critic          critic = make_critic(3, {4, 4}, 0.2, 0.01, rng);
  CriticOptimizer opt(critic, {0.001, 0.9, 1e-8});
  Matrix const    s = random_normal(6, 3, 1.0, rng);
  for (int k = 0; k < 5; ++k)
  {
    EXPECT_EQ(critic_step(s, s, critic, opt), 0.0);
    EXPECT_EQ(critic_objective(s, s, critic), 0.0);
    for (auto const &l : critic.layers)
      EXPECT_LE(max_abs(l.weight), 0.01);
  }
}

TEST(CriticStep, WeightsClippedAfterLargeStep)
{
  Rng             rng(7);
  Critic          critic = make_critic(2, {3}, 0.2, 0.01, rng);
  CriticOptimizer opt(critic, {0.5, 0.9, 1e-8});
  critic_step(random_normal(5, 2, 1.0, rng), random_normal(5, 2, 1.0, rng), critic, opt);
  for (auto const &l : critic.layers)
    EXPECT_LE(max_abs(l.weight), 0.01);
}

TEST(CriticStep, ObjectiveRisesOnTwoGaussianToy)
{
  // 1-D: N(-1, 0.25) against N(+1, 0.25), 64 samples each, fixed batches
  Rng    rng(8);
  Matrix a(64, 1), b(64, 1);
  for (std::size_t r = 0; r < 64; ++r)
  {
    a(r, 0) = -1.0 + 0.5 * rng.normal();
    b(r, 0) = 1.0 + 0.5 * rng.normal();
  }
  Critic          critic = make_critic(1, {8, 8}, 0.2, 0.01, rng);
  CriticOptimizer opt(critic, {0.001, 0.9, 1e-8});
  double          prev = critic_objective(a, b, critic);
  for (int k = 0; k < 50; ++k)
  {
    critic_step(a, b, critic, opt);
    double const now = critic_objective(a, b, critic);
    EXPECT_GT(now, prev) << "step " << k;
    prev = now;
  }
}

TEST(CriticStep, NonFiniteGradientAborts)
{
  Rng             rng(9);
  Critic          critic = make_critic(2, {3}, 0.2, 0.01, rng);
  CriticOptimizer opt(critic, {0.001, 0.9, 1e-8});
  Matrix          s = random_normal(3, 2, 1.0, rng);
  s(0, 0)           = std::numeric_limits<double>::infinity();
  EXPECT_THROW(critic_step(s, random_normal(3, 2, 1.0, rng), critic, opt), NumericError);
}

namespace {

struct GenFixture
{
  GeneratorBank bank;
  Critic        critic;
  StepBatch     batch;
};

GenFixture gen_fixture(std::uint64_t seed)
{
  Rng           rng(seed);
  GeneratorBank bank(3, 5, {"a", "b", "c"}, false);
  for (auto const &c : bank.categories())
    bank.set_matrix(c, random_uniform(3, 5, 0.4, rng));
  Critic    critic = make_critic(3, {4}, 0.2, 0.01, rng);
  StepBatch batch{"a", "c", random_normal(6, 5, 1.0, rng), random_normal(6, 5, 1.0, rng),
                  random_normal(1, 5, 1.0, rng), random_normal(1, 5, 1.0, rng)};
  return {std::move(bank), std::move(critic), std::move(batch)};
}

}  // namespace

TEST(GeneratorStep, DeadObjectiveLeavesBankUnchanged)
{
  auto fx = gen_fixture(10);
  for (auto &l : fx.critic.layers)
    for (auto &w : l.weight.data())
      w = 0.0;
  GeneratorBank const before = fx.bank;
  GeneratorOptimizer  opt(fx.bank, {0.001, 0.9, 1e-8});
  generator_step(fx.batch, fx.bank, fx.critic, opt, {0.0, 0.0, true, true});
  EXPECT_EQ(fx.bank, before);
}

TEST(GeneratorStep, AnchorOnlyStepShrinksPairDistance)
{
  auto fx = gen_fixture(11);
  for (auto &l : fx.critic.layers)
    for (auto &w : l.weight.data())
      w = 0.0;
  auto pair_distance = [&](GeneratorBank const &bank) {
    Matrix d = project_rows(fx.batch.anchors_i, "a", bank);
    d -= project_rows(fx.batch.anchors_j, "c", bank);
    return frobenius_sq(d);
  };
  double const       before = pair_distance(fx.bank);
  GeneratorOptimizer opt(fx.bank, {1e-4, 0.9, 1e-8});
  generator_step(fx.batch, fx.bank, fx.critic, opt, {0.1, 0.0, true, true});
  EXPECT_LT(pair_distance(fx.bank), before);
}

TEST(GeneratorStep, OnlySampledCategoriesMove)
{
  auto               fx       = gen_fixture(12);
  Matrix const       b_before = fx.bank.matrix("b");
  Matrix const       a_before = fx.bank.matrix("a");
  GeneratorOptimizer opt(fx.bank, {0.001, 0.9, 1e-8});
  generator_step(fx.batch, fx.bank, fx.critic, opt, {});
  EXPECT_EQ(fx.bank.matrix("b"), b_before);
  EXPECT_NE(fx.bank.matrix("a"), a_before);
}

TEST(GeneratorStep, ReturnsPreStepObjective)
{
  auto               fx       = gen_fixture(13);
  LossWeights const  w{0.1, 0.01, true, true};
  LossBreakdown const expected = generator_objective(fx.batch, fx.bank, fx.critic, w);
  GeneratorOptimizer opt(fx.bank, {0.001, 0.9, 1e-8});
  LossBreakdown const got = generator_step(fx.batch, fx.bank, fx.critic, opt, w);
  EXPECT_NEAR(got.total, expected.total, 1e-12);
  EXPECT_NEAR(got.adversarial_term, expected.adversarial_term, 1e-12);
}

TEST(GeneratorStep, NonFiniteGradientAborts)
{
  auto fx              = gen_fixture(14);
  fx.batch.items_i(0, 0) = std::numeric_limits<double>::quiet_NaN();
  GeneratorOptimizer opt(fx.bank, {0.001, 0.9, 1e-8});
  EXPECT_THROW(generator_step(fx.batch, fx.bank, fx.critic, opt, {}), NumericError);
}

TEST(SinkhornGeneratorStep, IdenticalBatchesHaveZeroCost)
{
  auto fx          = gen_fixture(15);
  fx.bank.set_matrix("c", fx.bank.matrix("a"));
  fx.batch.items_j = fx.batch.items_i;
  GeneratorOptimizer opt(fx.bank, {0.001, 0.9, 1e-8});
  Matrix const       a_before = fx.bank.matrix("a");
  auto const         r = sinkhorn_generator_step(fx.batch, fx.bank, opt, {0.0, 0.0, true, true}, 0.002,
                                                 GroundCost::squared_euclidean, 100000, 1e-9);
  ASSERT_TRUE(r.loss.has_value()) << r.diagnostic;
  EXPECT_NEAR(r.loss->adversarial_term, 0.0, 1e-6);
}

TEST(SinkhornGeneratorStep, PointMassesCostDeltaSquared)
{
  GeneratorBank bank(2, 2, {"a", "b"}, false);
  bank.set_matrix("a", Matrix::identity(2));
  bank.set_matrix("b", Matrix::identity(2));
  double const delta = 1.5;
  StepBatch    batch{"a", "b", Matrix{{0.0, 0.0}, {0.0, 0.0}}, Matrix{{delta, 0.0}, {delta, 0.0}},
                  Matrix(0, 2), Matrix(0, 2)};
  GeneratorOptimizer opt(bank, {0.001, 0.9, 1e-8});
  auto const r = sinkhorn_generator_step(batch, bank, opt, {0.0, 0.0, true, true}, 1e-3);
  ASSERT_TRUE(r.loss.has_value()) << r.diagnostic;
  EXPECT_NEAR(r.loss->adversarial_term, delta * delta, 1e-9);
}

TEST(SinkhornGeneratorStep, FixedPlanGradientMatchesFiniteDifferences)
{
  // The plan is the minimizer of <gamma, C> + reg * sum gamma log gamma, so
  // differentiating through it held fixed gives the gradient of that
  // objective. Probes re-solve the plan at a fixed absolute reg.
  Rng          rng(16);
  Matrix const xa = random_normal(6, 4, 1.0, rng), xb = random_normal(6, 4, 1.0, rng);
  Matrix const gb = random_uniform(3, 4, 0.5, rng);
  Matrix const ga = random_uniform(3, 4, 0.5, rng);
  auto costs = [&](Matrix const &g) {
    return cost_matrix(matmul_nt(xa, g), matmul_nt(xb, gb), GroundCost::squared_euclidean);
  };
  Matrix const c0  = costs(ga);
  double const reg = 0.1 * median({c0.data().begin(), c0.data().end()});
  auto objective = [&](Matrix const &g) {
    auto const r = sinkhorn_cost_matrix(costs(g), reg, 100000, 1e-12);
    EXPECT_TRUE(r.converged);
    double entropy = 0.0;
    for (double v : r.plan.gamma.data())
      entropy += v > 0.0 ? v * std::log(v) : 0.0;
    return r.cost + reg * entropy;
  };
  auto const base = sinkhorn_cost_matrix(c0, reg, 100000, 1e-12);
  ASSERT_TRUE(base.converged);

  Tape      t;
  Var const g = t.parameter(ga);
  Var const l = losses::transport_cost(ops::matmul_nt(t.constant(xa), g), t.constant(matmul_nt(xb, gb)),
                                       base.plan.gamma, GroundCost::squared_euclidean);
  t.backward(l);
  Matrix const analytic = t.grad(g);

  Matrix       numeric(3, 4);
  double const h = 1e-5;
  for (std::size_t k = 0; k < ga.size(); ++k)
  {
    Matrix up = ga, down = ga;
    up.data()[k] += h;
    down.data()[k] -= h;
    numeric.data()[k] = (objective(up) - objective(down)) / (2 * h);
  }
  Matrix diff = analytic;
  diff -= numeric;
  EXPECT_LT(std::sqrt(frobenius_sq(diff) / frobenius_sq(numeric)), 1e-2);
}

TEST(Train, ZeroIterationsReturnsInitialModel)
{
  Dataset const ds  = small_dataset();
  auto          cfg = small_config(0);
  auto const    r   = train(ds, cfg);
  auto const    init = init_model(cfg, ds.categories(), ds.feature_dim(), cfg.seed);
  EXPECT_EQ(r.bank, init.first);
  EXPECT_EQ(r.critic, init.second);
  EXPECT_TRUE(r.trace.iterations.empty());
  EXPECT_TRUE(r.trace.checkpoints.empty());
}

TEST(Train, DeterministicForFixedSeed)
{
  Dataset const ds  = small_dataset();
  auto const    cfg = small_config(60);
  auto const    a   = train(ds, cfg);
  auto const    b   = train(ds, cfg);
  EXPECT_EQ(a.bank, b.bank);
  EXPECT_EQ(a.critic, b.critic);
  std::ostringstream ta, tb;
  write_trace_csv(ta, a.trace);
  write_trace_csv(tb, b.trace);
  EXPECT_EQ(ta.str(), tb.str());
  auto cfg2 = cfg;
  cfg2.seed = 2;
  EXPECT_NE(train(ds, cfg2).bank, a.bank);
}

TEST(Train, ScheduleInvariant)
{
  Dataset const ds = small_dataset();
  for (std::size_t T : {1u, 4u, 5u, 23u, 40u})
  {
    auto cfg = small_config(T);
    auto r   = train(ds, cfg);
    EXPECT_EQ(r.trace.critic_updates, T);
    EXPECT_EQ(r.trace.generator_updates, T / cfg.n_critic);
    EXPECT_EQ(r.trace.iterations.size(), T);
  }
}

TEST(Train, TraceIterationsAndCheckpointsConsistent)
{
  Dataset const ds  = small_dataset();
  auto          cfg = small_config(35);
  auto const    r   = train(ds, cfg);
  for (std::size_t k = 1; k < r.trace.iterations.size(); ++k)
    EXPECT_LT(r.trace.iterations[k - 1].iteration, r.trace.iterations[k].iteration);
  std::vector<std::size_t> cps;
  for (auto const &c : r.trace.checkpoints)
  {
    cps.push_back(c.iteration);
    EXPECT_GE(c.auc, 0.0);
    EXPECT_LE(c.auc, 1.0);
    EXPECT_EQ(r.trace.iterations.at(c.iteration - 1).iteration, c.iteration);
  }
  EXPECT_EQ(cps, (std::vector<std::size_t>{10, 20, 30, 35}));
}

TEST(Train, ClippingHoldsEveryIterationInDebugMode)
{
  Dataset const ds  = small_dataset();
  auto          cfg = small_config(30);
  cfg.debug_checks  = true;
  TrainOptions opts;
  opts.on_iteration = [](std::size_t, StepBatch const &, GeneratorBank const &, Critic const &c,
                         IterationRecord const &) {
    for (auto const &l : c.layers)
      ASSERT_LE(max_abs(l.weight), c.clip_bound);
  };
  EXPECT_NO_THROW(train(ds, cfg, opts));
}

TEST(Train, WassersteinEstimateMatchesRecomputation)
{
  Dataset const ds  = small_dataset();
  auto          cfg = small_config(25);
  TrainOptions  opts;
  int           checked = 0;
  opts.on_iteration = [&](std::size_t, StepBatch const &b, GeneratorBank const &bank, Critic const &c,
                          IterationRecord const &rec) {
    double const w = critic_objective(project_rows(b.items_i, b.cat_i, bank), project_rows(b.items_j, b.cat_j, bank), c);
    EXPECT_EQ(rec.loss.wasserstein_estimate, w);
    EXPECT_NEAR(rec.loss.total,
                rec.loss.adversarial_term + cfg.eta * rec.loss.anchor_term + cfg.lambda * rec.loss.ortho_term, 1e-10);
    ++checked;
  };
  train(ds, cfg, opts);
  EXPECT_EQ(checked, 25);
}

TEST(Train, NoLearningSignalLeavesGeneratorsAtInit)
{
  Dataset const ds      = small_dataset();
  auto          cfg     = small_config(30);
  cfg.adversarial        = false;
  cfg.sinkhorn_alignment = false;
  cfg.anchor_enabled     = false;
  cfg.ortho_enabled      = false;
  auto const r          = train(ds, cfg);
  auto const init       = init_model(cfg, ds.categories(), ds.feature_dim(), cfg.seed);
  EXPECT_EQ(r.bank, init.first);
  EXPECT_EQ(r.trace.generator_updates, 6u);
}

TEST(Train, SinkhornModeRuns)
{
  Dataset const ds = small_dataset();
  auto          cfg = small_config(20);
  cfg.adversarial   = false;
  auto const r      = train(ds, cfg);
  EXPECT_EQ(r.trace.generator_updates + r.trace.skipped_steps, 4u);
  EXPECT_EQ(r.trace.skipped_steps, r.trace.diagnostics.size());
}

TEST(Train, SharedGeneratorUsesOneMatrix)
{
  Dataset const ds     = small_dataset();
  auto          cfg    = small_config(20);
  cfg.shared_generator = true;
  auto const r         = train(ds, cfg);
  EXPECT_EQ(r.bank.slot_count(), 1u);
}

TEST(Train, EarlyStopAtPlateau)
{
  Dataset const ds       = small_dataset();
  auto          cfg      = small_config(500);
  cfg.early_stop         = true;
  cfg.early_stop_window  = 20;
  cfg.early_stop_tol     = 10.0;  // any change counts as a plateau
  auto const r           = train(ds, cfg);
  EXPECT_TRUE(r.trace.stopped_early);
  EXPECT_EQ(r.trace.iterations.size(), 40u);
  EXPECT_EQ(r.trace.checkpoints.back().iteration, 40u);
}

TEST(Train, AbortCarriesPartialTrace)
{
  // features large enough that squared anchor distances overflow
  std::vector<ItemRecord> items;
  std::vector<ItemPair>   pairs;
  Rng                     rng(17);
  for (std::size_t i = 0; i < 6; ++i)
  {
    items.push_back(rec("a" + std::to_string(i), "a", {1e170 * rng.normal(), 1e170 * rng.normal()}));
    items.push_back(rec("b" + std::to_string(i), "b", {1e170 * rng.normal(), 1e170 * rng.normal()}));
    pairs.push_back({2 * i, 2 * i + 1});
  }
  Dataset ds(items, pairs);
  ds.set_split(split_pairs(ds.pairs(), 500, 0.2, 1));
  auto cfg          = small_config(10);
  cfg.style_dim     = 2;
  cfg.batch_size    = 2;
  try
  {
    train(ds, cfg);
    FAIL() << "expected TrainingAborted";
  }
  catch (TrainingAborted const &e)
  {
    EXPECT_NE(std::string(e.what()).find("non-finite"), std::string::npos);
    EXPECT_LT(e.trace.iterations.size(), 10u);
  }
}

TEST(Train, RejectsInvalidConfig)
{
  Dataset const ds  = small_dataset();
  auto          cfg = small_config(5);
  cfg.n_critic      = 0;
  EXPECT_THROW(train(ds, cfg), ValidationError);
}

TEST(TraceCorrelation, PerfectAnticorrelation)
{
  TrainTrace tr;
  for (std::size_t t = 1; t <= 12; ++t)
  {
    IterationRecord r;
    r.iteration                 = t;
    r.loss.wasserstein_estimate = 2.0 - 0.1 * static_cast<double>(t);
    tr.iterations.push_back(r);
    tr.checkpoints.push_back({t, 0.5 + 0.01 * static_cast<double>(t)});
  }
  auto const r = trace_correlation(tr, 1);
  ASSERT_TRUE(r.has_value());
  EXPECT_NEAR(*r, -1.0, 1e-12);
  // smoothing keeps a monotone series monotone
  auto const smoothed = trace_correlation(tr, 3);
  ASSERT_TRUE(smoothed.has_value());
  EXPECT_LT(*smoothed, -0.99);
}

TEST(TraceCorrelation, IndependentSeriesNearZero)
{
  Rng        rng(18);
  TrainTrace tr;
  for (std::size_t t = 1; t <= 100; ++t)
  {
    IterationRecord r;
    r.iteration                 = t;
    r.loss.wasserstein_estimate = rng.uniform();
    tr.iterations.push_back(r);
    tr.checkpoints.push_back({t, rng.uniform()});
  }
  auto const r = trace_correlation(tr, 1);
  ASSERT_TRUE(r.has_value());
  EXPECT_LT(std::abs(*r), 0.3);
}

TEST(TraceCorrelation, ConstantSeriesUndefinedAndShortTraceRejected)
{
  TrainTrace tr;
  for (std::size_t t = 1; t <= 12; ++t)
  {
    IterationRecord r;
    r.iteration                 = t;
    r.loss.wasserstein_estimate = 1.0;
    tr.iterations.push_back(r);
    tr.checkpoints.push_back({t, 0.1 * static_cast<double>(t)});
  }
  EXPECT_FALSE(trace_correlation(tr).has_value());
  tr.checkpoints.resize(9);
  EXPECT_THROW(trace_correlation(tr), ValidationError);
}

TEST(TraceCsv, HeaderAndRows)
{
  TrainTrace      tr;
  IterationRecord r;
  r.iteration = 3;
  r.cat_i     = "cat0";
  r.cat_j     = "cat2";
  r.loss      = {0.5, 2.0, 1.0, 0.71, 0.5};
  tr.iterations.push_back(r);
  std::ostringstream out;
  write_trace_csv(out, tr);
  EXPECT_EQ(out.str().substr(0, out.str().find('\n')), "iter,cat_i,cat_j,w_estimate,adv,anchor,ortho,total");
  EXPECT_NE(out.str().find("3,cat0,cat2,"), std::string::npos);
}
