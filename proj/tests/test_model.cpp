#include <gtest/gtest.h>

#include <cmath>

#include "scgan/model.hpp"
#include "scgan/numcore/random_matrix.hpp"

using namespace scgan;

namespace {

ItemRecord item(std::string cat, Vector f) { return {"x", std::move(cat), std::move(f)}; }

Vector random_vector(std::size_t n, Rng &rng)
{
  Vector v(n);
  for (auto &x : v)
    x = rng.uniform(-1.0, 1.0);
  return v;
}

// Straight-line forward pass, written without the library's matrix helpers.
double forward_oracle(Vector const &s, Critic const &c)
{
  std::vector<double> h = s;
  for (std::size_t l = 0; l < c.layers.size(); ++l)
  {
    auto const         &w = c.layers[l].weight;
    std::vector<double> next(w.cols(), 0.0);
    for (std::size_t o = 0; o < w.cols(); ++o)
    {
      double acc = c.layers[l].bias(0, o);
      for (std::size_t i = 0; i < w.rows(); ++i)
        acc += h[i] * w(i, o);
      if (l + 1 < c.layers.size() && acc < 0.0)
        acc *= c.leaky_slope;
      next[o] = acc;
    }
    h = std::move(next);
  }
  return h[0];
}

}  // namespace

TEST(Project, IdentityGeneratorReturnsFeatures)
{
  GeneratorBank bank(3, 3, {"top"}, false);
  bank.set_matrix("top", Matrix::identity(3));
  Vector const f{0.5, -1.0, 2.0};
  EXPECT_EQ(project(item("top", f), bank), f);
}

TEST(Project, ZeroGeneratorGivesZero)
{
  GeneratorBank bank(2, 4, {"top"}, false);
  EXPECT_EQ(project(item("top", {1, 2, 3, 4}), bank), (Vector{0.0, 0.0}));
}

TEST(Project, MatchesMatvecOracle)
{
  Rng           rng(1);
  GeneratorBank bank(4, 6, {"a", "b"}, false);
  Matrix const  g = random_uniform(4, 6, 1.0, rng);
  bank.set_matrix("b", g);
  Vector const f = random_vector(6, rng);
  Vector const s = project(item("b", f), bank);
  ASSERT_EQ(s.size(), 4u);
  for (std::size_t r = 0; r < 4; ++r)
  {
    double acc = 0.0;
    for (std::size_t c = 0; c < 6; ++c)
      acc += g(r, c) * f[c];
    EXPECT_NEAR(s[r], acc, 1e-12);
  }
}

TEST(Project, Errors)
{
  GeneratorBank bank(2, 3, {"a"}, false);
  EXPECT_THROW(project(item("zzz", {1, 2, 3}), bank), LookupError);
  EXPECT_THROW(project(item("a", {1, 2}), bank), ShapeError);
  EXPECT_THROW(bank.set_matrix("a", Matrix(3, 2)), ShapeError);
}

TEST(ProjectProperty, Linear)
{
  Rng rng(2);
  for (int trial = 0; trial < 50; ++trial)
  {
    std::size_t const d = 1 + rng.index(5), f = 1 + rng.index(7);
    GeneratorBank     bank(d, f, {"c"}, false);
    bank.set_matrix("c", random_uniform(d, f, 1.0, rng));
    Vector const x = random_vector(f, rng), y = random_vector(f, rng);
    double const a = rng.uniform(-3, 3), b = rng.uniform(-3, 3);
    Vector       mix(f);
    for (std::size_t k = 0; k < f; ++k)
      mix[k] = a * x[k] + b * y[k];
    Vector const pm = project(item("c", mix), bank);
    Vector const px = project(item("c", x), bank), py = project(item("c", y), bank);
    for (std::size_t k = 0; k < d; ++k)
      EXPECT_NEAR(pm[k], a * px[k] + b * py[k], 1e-10);
  }
}

TEST(GeneratorBank, SharedModeResolvesToOneMatrix)
{
  Rng           rng(3);
  GeneratorBank bank(2, 3, {"a", "b", "c"}, true);
  EXPECT_EQ(bank.slot_count(), 1u);
  EXPECT_EQ(bank.slot("a"), bank.slot("c"));
  bank.set_matrix("b", random_uniform(2, 3, 1.0, rng));
  EXPECT_EQ(&bank.matrix("a"), &bank.matrix("c"));
  Vector const f{0.1, 0.2, -0.3};
  EXPECT_EQ(project(item("a", f), bank), project(item("c", f), bank));
}

TEST(GeneratorBank, PerCategoryShapesAndSortedCategories)
{
  GeneratorBank bank(5, 7, {"z", "a", "m", "a"}, false);
  EXPECT_EQ(bank.categories(), (std::vector<std::string>{"a", "m", "z"}));
  EXPECT_EQ(bank.slot_count(), 3u);
  for (auto const &c : bank.categories())
  {
    EXPECT_EQ(bank.matrix(c).rows(), 5u);
    EXPECT_EQ(bank.matrix(c).cols(), 7u);
  }
  EXPECT_THROW(GeneratorBank(0, 3, {"a"}, false), ValidationError);
  EXPECT_THROW(GeneratorBank(2, 3, {}, false), ValidationError);
}

TEST(Critic, ZeroNetworkOutputsZero)
{
  Rng    rng(4);
  Critic c = make_critic(4, {3, 3}, 0.2, 0.01, rng);
  for (auto &l : c.layers)
  {
    l.weight = Matrix(l.weight.rows(), l.weight.cols());
    l.bias   = Matrix(1, l.bias.cols());
  }
  EXPECT_EQ(critic_eval(random_vector(4, rng), c), 0.0);
}

TEST(Critic, SingleLinearLayerIsDotProduct)
{
  Critic c;
  c.layers.push_back({Matrix{{0.5}, {-2.0}, {1.0}}, Matrix(1, 1)});
  validate_critic(c);
  EXPECT_DOUBLE_EQ(critic_eval(Vector{2.0, 1.0, 3.0}, c), 0.5 * 2.0 - 2.0 * 1.0 + 3.0);
}

TEST(Critic, TwoHiddenLayersMatchForwardOracle)
{
  Rng    rng(5);
  Critic c = make_critic(6, {5, 4}, 0.2, 1.0, rng);
  for (auto &l : c.layers)
    l.bias = random_uniform(1, l.bias.cols(), 0.5, rng);
  for (int trial = 0; trial < 20; ++trial)
  {
    Vector const s = random_vector(6, rng);
    EXPECT_NEAR(critic_eval(s, c), forward_oracle(s, c), 1e-12);
  }
}

TEST(Critic, InputDimensionMismatchRejected)
{
  Rng    rng(6);
  Critic c = make_critic(4, {3}, 0.2, 0.01, rng);
  EXPECT_THROW(critic_eval(Vector{1.0, 2.0}, c), ShapeError);
}

TEST(Critic, TapeForwardMatchesPlainForward)
{
  Rng          rng(7);
  Critic       c     = make_critic(3, {4, 4}, 0.2, 1.0, rng);
  Matrix const batch = random_uniform(5, 3, 2.0, rng);
  Tape         t;
  auto const   vars = bind_critic(t, c, true);
  Var const    out  = critic_forward(vars, t.constant(batch), c.leaky_slope);
  Matrix const ref  = critic_forward(batch, c);
  for (std::size_t r = 0; r < 5; ++r)
    EXPECT_NEAR(t.value(out)(r, 0), ref(r, 0), 1e-14);
}

TEST(CriticProperty, ClippedCriticRespectsLipschitzBound)
{
  Rng rng(8);
  for (int trial = 0; trial < 30; ++trial)
  {
    std::size_t const d      = 1 + rng.index(6);
    double const      clip   = rng.uniform(0.005, 1.0);
    Critic            c      = make_critic(d, {1 + rng.index(6), 1 + rng.index(6)}, 0.2, clip, rng);
    // push weights to the clip boundary where the bound is tightest
    for (auto &l : c.layers)
    {
      for (auto &w : l.weight.data())
        w = (w >= 0 ? 1.0 : -1.0) * 10.0;
      l.bias = random_uniform(1, l.bias.cols(), 1.0, rng);
    }
    clip_critic(c);
    EXPECT_LE(max_abs(c.layers.front().weight), clip);
    double const bound = critic_lipschitz_bound(c);
    for (int k = 0; k < 20; ++k)
    {
      Vector const a = random_vector(d, rng), b = random_vector(d, rng);
      double const dist = std::sqrt(squared_distance(a, b));
      EXPECT_LE(std::abs(critic_eval(a, c) - critic_eval(b, c)), bound * dist * (1 + 1e-12) + 1e-15);
    }
  }
}

TEST(InitModel, DeterministicPerSeed)
{
  TrainConfig cfg;
  cfg.style_dim = 4;
  auto const a  = init_model(cfg, {"a", "b"}, 6, 11);
  auto const b  = init_model(cfg, {"a", "b"}, 6, 11);
  auto const c  = init_model(cfg, {"a", "b"}, 6, 12);
  EXPECT_EQ(a.first, b.first);
  EXPECT_EQ(a.second, b.second);
  EXPECT_NE(a.first, c.first);
  EXPECT_NE(a.second, c.second);
}

TEST(InitModel, CriticClippedAndGeneratorsScaled)
{
  TrainConfig cfg;
  cfg.style_dim  = 8;
  auto const [bank, critic] = init_model(cfg, {"a", "b", "c"}, 16, 3);
  for (auto const &l : critic.layers)
  {
    EXPECT_LE(max_abs(l.weight), cfg.clip_bound);
  }
  EXPECT_EQ(critic.input_dim(), 8u);
  EXPECT_EQ(critic.hidden_sizes(), cfg.critic_hidden);
  for (auto const &cat : bank.categories())
  {
    EXPECT_LE(max_abs(bank.matrix(cat)), 1.0 / std::sqrt(16.0));
  }
}

TEST(InitModel, OrthonormalModeHasZeroPenalty)
{
  TrainConfig cfg;
  cfg.style_dim      = 4;
  cfg.generator_init = GeneratorInit::orthonormal;
  auto const [bank, critic] = init_model(cfg, {"a", "b"}, 9, 3);
  Matrix const gram = matmul_nt(bank.matrix("a"), bank.matrix("a"));
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j)
      EXPECT_NEAR(gram(i, j), i == j ? 1.0 : 0.0, 1e-12);
}

TEST(InitModel, Errors)
{
  TrainConfig cfg;
  EXPECT_THROW(init_model(cfg, {}, 4, 1), ValidationError);
  EXPECT_THROW(init_model(cfg, {"a"}, 0, 1), ValidationError);
}
