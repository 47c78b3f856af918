#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Eigenvalues>

#include "scgan/data.hpp"
#include "scgan/eval.hpp"
#include "scgan/model.hpp"

namespace scgan {

// ---------------------------------------------------------------------------
// PCA

struct PcaModel
{
  Vector mean;
  Matrix axes;       ///< k x F, orthonormal rows
  Vector variances;  ///< non-increasing
  bool   rank_deficient = false;  ///< fewer axes than requested were kept

  std::size_t components() const noexcept { return axes.rows(); }

  bool operator==(PcaModel const &) const = default;
};

/// Top-d principal axes of the sample covariance (divided by n - 1). Each
/// axis is signed so that its largest-magnitude entry is positive. Axes whose
/// variance is negligible relative to the largest are dropped.
inline PcaModel pca_fit(Matrix const &samples, std::size_t d, double rank_tol = 1e-10)
{
  std::size_t const n = samples.rows();
  std::size_t const f = samples.cols();
  if (d == 0 || d > f)
  {
    throw ValidationError("pca_fit: need 1 <= d <= feature dim (" + std::to_string(f) + "), got " +
                          std::to_string(d));
  }
  if (n < d || n < 2)
  {
    throw ValidationError("pca_fit: need at least max(d, 2) samples, got " + std::to_string(n));
  }
  PcaModel model;
  auto const x = detail::view(samples);
  Eigen::RowVectorXd const mu = x.colwise().mean();
  Eigen::MatrixXd const centered = x.rowwise() - mu;
  Eigen::MatrixXd const cov = (centered.transpose() * centered) / static_cast<double>(n - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success)
  {
    throw NumericError("pca_fit: eigendecomposition failed");
  }
  model.mean.assign(mu.data(), mu.data() + f);

  // eigenvalues come back ascending
  auto const &values  = solver.eigenvalues();
  auto const &vectors = solver.eigenvectors();
  double const top    = std::max(values(static_cast<Eigen::Index>(f - 1)), 0.0);
  std::vector<Vector> kept;
  for (std::size_t r = 0; r < d; ++r)
  {
    auto const   col = static_cast<Eigen::Index>(f - 1 - r);
    double const var = std::max(values(col), 0.0);
    if (top == 0.0 || var <= rank_tol * top)
    {
      model.rank_deficient = true;
      break;
    }
    Vector axis(f);
    std::size_t arg = 0;
    for (std::size_t k = 0; k < f; ++k)
    {
      axis[k] = vectors(static_cast<Eigen::Index>(k), col);
      if (std::abs(axis[k]) > std::abs(axis[arg]))
      {
        arg = k;
      }
    }
    if (axis[arg] < 0.0)
    {
      for (auto &v : axis)
      {
        v = -v;
      }
    }
    kept.push_back(std::move(axis));
    model.variances.push_back(var);
  }
  model.axes = Matrix(kept.size(), f);
  for (std::size_t r = 0; r < kept.size(); ++r)
  {
    std::copy(kept[r].begin(), kept[r].end(), model.axes.row(r).begin());
  }
  return model;
}

inline Vector pca_project(PcaModel const &model, std::span<const double> v)
{
  if (v.size() != model.mean.size())
  {
    throw ShapeError("pca_project: vector dim " + std::to_string(v.size()) + ", model expects " +
                     std::to_string(model.mean.size()));
  }
  Vector centered(v.begin(), v.end());
  for (std::size_t k = 0; k < centered.size(); ++k)
  {
    centered[k] -= model.mean[k];
  }
  return matvec(model.axes, centered);
}

/// Rows of `samples` projected onto the model's axes.
inline Matrix pca_transform(PcaModel const &model, Matrix const &samples)
{
  Matrix out(samples.rows(), model.components());
  for (std::size_t r = 0; r < samples.rows(); ++r)
  {
    auto p = pca_project(model, samples.row(r));
    std::copy(p.begin(), p.end(), out.row(r).begin());
  }
  return out;
}

inline Matrix all_features(Dataset const &ds)
{
  std::vector<std::size_t> idx(ds.items().size());
  for (std::size_t i = 0; i < idx.size(); ++i)
  {
    idx[i] = i;
  }
  return ds.features_of(idx);
}

// ---------------------------------------------------------------------------
// NN

/// PCA to min(d, F) dimensions fitted on every item's raw features.
inline PcaModel nn_fit(Dataset const &ds, std::size_t d)
{
  return pca_fit(all_features(ds), std::min(d, ds.feature_dim()));
}

inline double nn_score(ItemRecord const &x, ItemRecord const &y, PcaModel const &pca)
{
  return compatibility_from_distance(squared_distance(pca_project(pca, x.features),
                                                      pca_project(pca, y.features)));
}

inline PairScorer nn_scorer(PcaModel const &pca)
{
  return [&pca](ItemRecord const &x, ItemRecord const &y) -> std::optional<PairScore> {
    double const d = squared_distance(pca_project(pca, x.features), pca_project(pca, y.features));
    return PairScore{d, compatibility_from_distance(d)};
  };
}

// ---------------------------------------------------------------------------
// CT

/// Symmetric co-occurrence counts between categories over training pairs.
class CoocTable
{
public:
  CoocTable() = default;

  CoocTable(std::vector<std::string> categories, double smoothing)
    : categories_(std::move(categories)), smoothing_(smoothing)
  {
    if (!(smoothing >= 0.0))
    {
      throw ValidationError("cooc: smoothing must be non-negative");
    }
    std::sort(categories_.begin(), categories_.end());
    categories_.erase(std::unique(categories_.begin(), categories_.end()), categories_.end());
  }

  void add(std::string const &a, std::string const &b, double count = 1.0)
  {
    counts_[key(a, b)] += count;
  }

  double count(std::string const &a, std::string const &b) const
  {
    auto it = counts_.find(key(a, b));
    return it == counts_.end() ? 0.0 : it->second;
  }

  double smoothing() const noexcept { return smoothing_; }
  std::vector<std::string> const &categories() const noexcept { return categories_; }
  std::map<std::pair<std::string, std::string>, double> const &counts() const noexcept { return counts_; }

  /// Normalizer: smoothed counts summed over unordered pairs of distinct known categories.
  double total() const
  {
    double z = 0.0;
    for (std::size_t a = 0; a < categories_.size(); ++a)
    {
      for (std::size_t b = a + 1; b < categories_.size(); ++b)
      {
        z += count(categories_[a], categories_[b]) + smoothing_;
      }
    }
    return z;
  }

  bool operator==(CoocTable const &) const = default;

private:
  static std::pair<std::string, std::string> key(std::string const &a, std::string const &b)
  {
    return a < b ? std::pair{a, b} : std::pair{b, a};
  }

  std::vector<std::string>                              categories_;
  double                                                smoothing_ = 1.0;
  std::map<std::pair<std::string, std::string>, double> counts_;
};

inline CoocTable ct_fit(Dataset const &ds, std::vector<ItemPair> const &pairs, double smoothing = 1.0)
{
  CoocTable table(ds.categories(), smoothing);
  for (auto const &p : pairs)
  {
    table.add(ds.item(p.a).category, ds.item(p.b).category);
  }
  return table;
}

/// Smoothed, normalized co-occurrence frequency of the two categories.
/// Unknown categories get the smoothing floor.
inline double ct_score(std::string const &cat_x, std::string const &cat_y, CoocTable const &table)
{
  double const z = table.total();
  if (z == 0.0)
  {
    return 0.0;
  }
  return (table.count(cat_x, cat_y) + table.smoothing()) / z;
}

inline double ct_score(ItemRecord const &x, ItemRecord const &y, CoocTable const &table)
{
  return ct_score(x.category, y.category, table);
}

inline PairScorer ct_scorer(CoocTable const &table)
{
  return [&table](ItemRecord const &x, ItemRecord const &y) -> std::optional<PairScore> {
    return PairScore{std::numeric_limits<double>::quiet_NaN(), ct_score(x, y, table)};
  };
}

// ---------------------------------------------------------------------------
// LMT

struct LmtConfig
{
  std::size_t   style_dim     = 128;
  std::size_t   epochs        = 200;
  double        learning_rate = 0.001;
  std::size_t   neg_per_pos   = 1;
  std::size_t   batch_size    = 30;
  std::uint64_t seed          = 1;

  void validate() const
  {
    if (style_dim == 0 || batch_size == 0)
    {
      throw ValidationError("lmt: style_dim and batch_size must be positive");
    }
    if (!(learning_rate > 0.0))
    {
      throw ValidationError("lmt: learning_rate must be positive");
    }
  }
};

inline json to_json(LmtConfig const &c)
{
  return json{{"style_dim", c.style_dim},       {"epochs", c.epochs},
              {"learning_rate", c.learning_rate}, {"neg_per_pos", c.neg_per_pos},
              {"batch_size", c.batch_size},     {"seed", c.seed}};
}

inline LmtConfig lmt_config_from_json(json const &j, LmtConfig c = {})
{
  StrictObject o(j, "lmt");
  o.get("style_dim", c.style_dim);
  o.get("epochs", c.epochs);
  o.get("learning_rate", c.learning_rate);
  o.get("neg_per_pos", c.neg_per_pos);
  o.get("batch_size", c.batch_size);
  o.get("seed", c.seed);
  o.finish();
  c.validate();
  return c;
}

struct LmtResult
{
  Matrix              embedding;   ///< d x F, shared by every category
  std::vector<double> epoch_loss;  ///< mean minibatch loss per epoch
};

namespace losses {

/// Mean over positives of softplus(d) plus mean over negatives of softplus(-d),
/// i.e. -log sigma(-d) and -log(1 - sigma(-d)), with d = ||M(x - y)||^2.
inline Var lmt_loss(Var m, Matrix const &pos_x, Matrix const &pos_y, Matrix const &neg_x,
                    Matrix const &neg_y)
{
  Tape &t = ops::tape_of(m);
  auto row_sq = [&](Matrix const &a, Matrix const &b) {
    Matrix diff = a;
    diff -= b;
    Var const proj = ops::matmul_nt(t.constant(std::move(diff)), m);
    Var const ones = t.constant(Matrix(t.value(m).rows(), 1, 1.0));
    return ops::matmul(ops::hadamard(proj, proj), ones);
  };
  Var loss = ops::mean(ops::softplus(row_sq(pos_x, pos_y)));
  if (neg_x.rows() > 0)
  {
    loss = ops::add(loss, ops::mean(ops::softplus(ops::scale(row_sq(neg_x, neg_y), -1.0))));
  }
  return loss;
}

}  // namespace losses

/// Low-rank Mahalanobis transform trained by logistic loss over training pairs
/// and same-category negatives, with RMSProp.
inline LmtResult lmt_train(Dataset const &ds, LmtConfig const &cfg)
{
  cfg.validate();
  auto const &train = ds.train_pairs();
  if (train.empty() && cfg.epochs > 0)
  {
    throw ValidationError("lmt: no training pairs");
  }
  Rng       rng(cfg.seed);
  LmtResult out;
  out.embedding = random_uniform(cfg.style_dim, ds.feature_dim(),
                                 1.0 / std::sqrt(static_cast<double>(ds.feature_dim())), rng);

  // the loss is symmetric in (x, y); a canonical orientation makes the
  // negative draws independent of how pairs were listed
  std::vector<ItemPair> pairs = train;
  for (auto &p : pairs)
  {
    auto const &a = ds.item(p.a);
    auto const &b = ds.item(p.b);
    if (std::tie(b.category, b.id) < std::tie(a.category, a.id))
    {
      std::swap(p.a, p.b);
    }
  }
  std::sort(pairs.begin(), pairs.end(), [&](ItemPair const &l, ItemPair const &r) {
    return std::tie(ds.item(l.a).id, ds.item(l.b).id) < std::tie(ds.item(r.a).id, ds.item(r.b).id);
  });

  RmsPropState opt({cfg.learning_rate, 0.9, 1e-8});
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch)
  {
    rng.shuffle(pairs);
    double      total   = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < pairs.size(); start += cfg.batch_size)
    {
      std::size_t const end = std::min(pairs.size(), start + cfg.batch_size);
      std::vector<std::size_t> px, py, nx, ny;
      for (std::size_t k = start; k < end; ++k)
      {
        px.push_back(pairs[k].a);
        py.push_back(pairs[k].b);
        auto const &pool = ds.items_in(ds.item(pairs[k].b).category);
        for (std::size_t n = 0; n < cfg.neg_per_pos; ++n)
        {
          if (auto neg = detail::draw_excluding(pool, pairs[k].b, rng))
          {
            nx.push_back(pairs[k].a);
            ny.push_back(*neg);
          }
        }
      }
      Tape      tape;
      Var const m    = tape.parameter(out.embedding);
      Var const loss = losses::lmt_loss(m, ds.features_of(px), ds.features_of(py),
                                        nx.empty() ? Matrix(0, ds.feature_dim()) : ds.features_of(nx),
                                        ny.empty() ? Matrix(0, ds.feature_dim()) : ds.features_of(ny));
      double const value = tape.scalar(loss);
      if (!std::isfinite(value))
      {
        throw NumericError("lmt: loss diverged in epoch " + std::to_string(epoch));
      }
      tape.backward(loss);
      opt.apply(out.embedding, tape.grad(m));
      total += value;
      ++batches;
    }
    out.epoch_loss.push_back(total / static_cast<double>(batches));
  }
  return out;
}

/// The LMT embedding as a shared-mode bank, so it scores like any generator bank.
inline GeneratorBank lmt_bank(Matrix const &embedding, std::vector<std::string> const &categories)
{
  GeneratorBank bank(embedding.rows(), embedding.cols(), categories, true);
  bank.slot_matrix(0) = embedding;
  return bank;
}

// ---------------------------------------------------------------------------
// ablations

inline std::vector<std::string> const &ablation_names()
{
  static std::vector<std::string> const names = {"full", "minus_O", "minus_A", "one_G", "uc"};
  return names;
}

/// `base` with the single switch that defines the named variant flipped.
inline TrainConfig ablation_preset(std::string const &name, TrainConfig base = {})
{
  if (name == "full")
  {
    return base;
  }
  if (name == "minus_O")
  {
    base.lambda = 0.0;
  }
  else if (name == "minus_A")
  {
    base.adversarial = false;
  }
  else if (name == "one_G")
  {
    base.shared_generator = true;
  }
  else if (name == "uc")
  {
    base.eta = 0.0;
  }
  else
  {
    throw ValidationError("unknown ablation preset '" + name +
                          "' (expected full, minus_O, minus_A, one_G or uc)");
  }
  return base;
}

}  // namespace scgan
