#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "scgan/item.hpp"
#include "scgan/numcore/random_matrix.hpp"
#include "scgan/numcore/rmsprop.hpp"
#include "scgan/numcore/tape.hpp"
#include "scgan/train_config.hpp"

namespace scgan {

/// Per-category style transformations G_c (style_dim x feature_dim).
///
/// In shared mode every category resolves to slot 0, so one matrix serves
/// all categories.
class GeneratorBank
{
public:
  GeneratorBank() = default;

  GeneratorBank(std::size_t style_dim, std::size_t feature_dim,
                std::vector<std::string> categories, bool shared)
    : style_dim_(style_dim), feature_dim_(feature_dim), shared_(shared)
  {
    if (style_dim == 0 || feature_dim == 0)
    {
      throw ValidationError("generator bank: dimensions must be positive");
    }
    if (categories.empty())
    {
      throw ValidationError("generator bank: empty category list");
    }
    std::sort(categories.begin(), categories.end());
    categories.erase(std::unique(categories.begin(), categories.end()), categories.end());
    for (auto const &c : categories)
    {
      slot_of_[c] = shared ? 0 : matrices_.size();
      if (!shared || matrices_.empty())
      {
        matrices_.emplace_back(style_dim, feature_dim);
      }
    }
    categories_ = std::move(categories);
  }

  std::size_t                     style_dim() const noexcept { return style_dim_; }
  std::size_t                     feature_dim() const noexcept { return feature_dim_; }
  bool                            shared() const noexcept { return shared_; }
  std::vector<std::string> const &categories() const noexcept { return categories_; }
  std::size_t                     slot_count() const noexcept { return matrices_.size(); }

  bool contains(std::string const &category) const { return slot_of_.count(category) != 0; }

  std::size_t slot(std::string const &category) const
  {
    auto it = slot_of_.find(category);
    if (it == slot_of_.end())
    {
      throw LookupError("generator bank: unknown category '" + category + "'");
    }
    return it->second;
  }

  Matrix const &matrix(std::string const &category) const { return matrices_[slot(category)]; }
  Matrix       &matrix(std::string const &category) { return matrices_[slot(category)]; }
  Matrix const &slot_matrix(std::size_t s) const { return matrices_.at(s); }
  Matrix       &slot_matrix(std::size_t s) { return matrices_.at(s); }

  void set_matrix(std::string const &category, Matrix m)
  {
    if (m.rows() != style_dim_ || m.cols() != feature_dim_)
    {
      throw ShapeError("generator bank: matrix " + m.shape_string() + " for category '" +
                       category + "', expected " + std::to_string(style_dim_) + "x" +
                       std::to_string(feature_dim_));
    }
    matrices_[slot(category)] = std::move(m);
  }

  bool operator==(GeneratorBank const &) const = default;

private:
  std::size_t                        style_dim_   = 0;
  std::size_t                        feature_dim_ = 0;
  bool                               shared_      = false;
  std::vector<std::string>           categories_;
  std::map<std::string, std::size_t> slot_of_;
  std::vector<Matrix>                matrices_;
};

/// s_x = G_c v_x
inline Vector project(ItemRecord const &item, GeneratorBank const &bank)
{
  auto const &g = bank.matrix(item.category);
  if (item.features.size() != bank.feature_dim())
  {
    throw ShapeError("project: item '" + item.id + "' has feature dim " +
                     std::to_string(item.features.size()) + ", bank expects " +
                     std::to_string(bank.feature_dim()));
  }
  return matvec(g, item.features);
}

/// Projects a stack of feature rows (n x F) of one category: returns n x d.
inline Matrix project_rows(Matrix const &features, std::string const &category,
                           GeneratorBank const &bank)
{
  return matmul_nt(features, bank.matrix(category));
}

struct CriticLayer
{
  Matrix weight;  ///< in x out
  Matrix bias;    ///< 1 x out

  bool operator==(CriticLayer const &) const = default;
};

/// Scalar-output MLP with leaky-ReLU hidden units and a linear output. Weight
/// matrices (not biases) are kept inside [-clip_bound, clip_bound].
struct Critic
{
  std::vector<CriticLayer> layers;
  double                   leaky_slope = 0.2;
  double                   clip_bound  = 0.01;

  std::size_t input_dim() const { return layers.empty() ? 0 : layers.front().weight.rows(); }

  std::vector<std::size_t> hidden_sizes() const
  {
    std::vector<std::size_t> out;
    for (std::size_t l = 0; l + 1 < layers.size(); ++l)
    {
      out.push_back(layers[l].weight.cols());
    }
    return out;
  }

  bool operator==(Critic const &) const = default;
};

inline void validate_critic(Critic const &critic)
{
  if (critic.layers.empty())
  {
    throw ValidationError("critic: no layers");
  }
  for (std::size_t l = 0; l < critic.layers.size(); ++l)
  {
    auto const &layer = critic.layers[l];
    if (layer.bias.rows() != 1 || layer.bias.cols() != layer.weight.cols())
    {
      throw ShapeError("critic: layer " + std::to_string(l) + " bias shape mismatch");
    }
    if (l > 0 && critic.layers[l - 1].weight.cols() != layer.weight.rows())
    {
      throw ShapeError("critic: layer " + std::to_string(l) + " input width mismatch");
    }
  }
  if (critic.layers.back().weight.cols() != 1)
  {
    throw ShapeError("critic: output layer must have width 1");
  }
}

/// Critic outputs for a batch of style vectors (n x d): returns n x 1.
inline Matrix critic_forward(Matrix const &batch, Critic const &critic)
{
  if (batch.cols() != critic.input_dim())
  {
    throw ShapeError("critic: input dim " + std::to_string(batch.cols()) + ", expected " +
                     std::to_string(critic.input_dim()));
  }
  Matrix h = batch;
  for (std::size_t l = 0; l < critic.layers.size(); ++l)
  {
    auto const &layer = critic.layers[l];
    h                 = matmul(h, layer.weight);
    bool const hidden = l + 1 < critic.layers.size();
    for (std::size_t r = 0; r < h.rows(); ++r)
    {
      auto row = h.row(r);
      for (std::size_t c = 0; c < h.cols(); ++c)
      {
        double v = row[c] + layer.bias(0, c);
        if (hidden && v <= 0.0)
        {
          v *= critic.leaky_slope;
        }
        row[c] = v;
      }
    }
  }
  return h;
}

inline double critic_eval(std::span<const double> s, Critic const &critic)
{
  return critic_forward(Matrix::row_vector(s), critic)(0, 0);
}

/// Critic parameters bound onto a tape.
struct CriticVars
{
  std::vector<Var> weights;
  std::vector<Var> biases;
};

inline CriticVars bind_critic(Tape &tape, Critic const &critic, bool trainable)
{
  CriticVars vars;
  for (auto const &layer : critic.layers)
  {
    vars.weights.push_back(trainable ? tape.parameter(layer.weight) : tape.constant(layer.weight));
    vars.biases.push_back(trainable ? tape.parameter(layer.bias) : tape.constant(layer.bias));
  }
  return vars;
}

inline Var critic_forward(CriticVars const &vars, Var input, double leaky_slope)
{
  Var h = input;
  for (std::size_t l = 0; l < vars.weights.size(); ++l)
  {
    h = ops::add_row(ops::matmul(h, vars.weights[l]), vars.biases[l]);
    if (l + 1 < vars.weights.size())
    {
      h = ops::leaky_relu(h, leaky_slope);
    }
  }
  return h;
}

inline void clip_critic(Critic &critic)
{
  for (auto &layer : critic.layers)
  {
    clip_weights_inplace(layer.weight, critic.clip_bound);
  }
}

/// Upper bound on the critic's Lipschitz constant implied by clipping alone:
/// each clipped in x out layer has operator norm <= c * sqrt(in * out) and
/// leaky ReLU is 1-Lipschitz.
inline double critic_lipschitz_bound(Critic const &critic)
{
  double bound = 1.0;
  for (auto const &layer : critic.layers)
  {
    bound *= critic.clip_bound *
             std::sqrt(static_cast<double>(layer.weight.rows() * layer.weight.cols()));
  }
  return bound;
}

inline Critic make_critic(std::size_t input_dim, std::vector<std::size_t> const &hidden,
                          double leaky_slope, double clip_bound, Rng &rng)
{
  Critic critic;
  critic.leaky_slope = leaky_slope;
  critic.clip_bound  = clip_bound;
  std::size_t in     = input_dim;
  std::vector<std::size_t> widths = hidden;
  widths.push_back(1);
  for (auto out : widths)
  {
    double const bound = 1.0 / std::sqrt(static_cast<double>(in));
    critic.layers.push_back({random_uniform(in, out, bound, rng), Matrix(1, out)});
    in = out;
  }
  clip_critic(critic);
  return critic;
}

/// Randomly initialized generators and clipped critic; deterministic per seed.
inline std::pair<GeneratorBank, Critic> init_model(TrainConfig const &config,
                                                   std::vector<std::string> const &categories,
                                                   std::size_t feature_dim, std::uint64_t seed)
{
  if (categories.empty())
  {
    throw ValidationError("init_model: empty category list");
  }
  if (feature_dim == 0 || config.style_dim == 0)
  {
    throw ValidationError("init_model: feature_dim and style_dim must be positive");
  }
  Rng           rng(seed);
  GeneratorBank bank(config.style_dim, feature_dim, categories, config.shared_generator);
  double const  bound = 1.0 / std::sqrt(static_cast<double>(feature_dim));
  for (std::size_t s = 0; s < bank.slot_count(); ++s)
  {
    bank.slot_matrix(s) = config.generator_init == GeneratorInit::orthonormal
                            ? random_orthonormal(config.style_dim, feature_dim, rng)
                            : random_uniform(config.style_dim, feature_dim, bound, rng);
  }
  Critic critic =
    make_critic(config.style_dim, config.critic_hidden, config.leaky_slope, config.clip_bound, rng);
  return {std::move(bank), std::move(critic)};
}

}  // namespace scgan
