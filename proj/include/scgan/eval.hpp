#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "scgan/data.hpp"
#include "scgan/format.hpp"
#include "scgan/model.hpp"

namespace scgan {

/// Squared Euclidean distance between the style projections of x and y.
inline double distance(ItemRecord const &x, ItemRecord const &y, GeneratorBank const &bank)
{
  return squared_distance(project(x, bank), project(y, bank));
}

/// sigma(-d) = 1 / (1 + e^d), in (0, 0.5] for d >= 0.
inline double compatibility_from_distance(double d) { return 1.0 / (1.0 + std::exp(d)); }

inline double compatibility(ItemRecord const &x, ItemRecord const &y, GeneratorBank const &bank)
{
  return compatibility_from_distance(distance(x, y, bank));
}

enum class NegativeMode
{
  same_category,
  any,
};

enum class TieMode
{
  strict,
  half_credit,
};

NLOHMANN_JSON_SERIALIZE_ENUM(NegativeMode, {{NegativeMode::same_category, "same_category"},
                                            {NegativeMode::any, "any"}})
NLOHMANN_JSON_SERIALIZE_ENUM(TieMode, {{TieMode::strict, "strict"},
                                       {TieMode::half_credit, "half_credit"}})

struct EvalOptions
{
  NegativeMode  negative_mode = NegativeMode::same_category;
  TieMode       tie_mode      = TieMode::strict;
  std::uint64_t negative_seed = 1;
};

/// What a scorer says about one candidate pair. Ranking uses the distance
/// when one is given, because r saturates to exactly 0 once d exceeds ~745.
struct PairScore
{
  double distance = std::numeric_limits<double>::quiet_NaN();
  double r        = 0.0;
};

/// Returns nullopt when the scorer cannot handle the pair (e.g. unknown category).
using PairScorer = std::function<std::optional<PairScore>(ItemRecord const &, ItemRecord const &)>;

inline PairScorer bank_scorer(GeneratorBank const &bank)
{
  return [&bank](ItemRecord const &x, ItemRecord const &y) -> std::optional<PairScore> {
    if (!bank.contains(x.category) || !bank.contains(y.category))
    {
      return std::nullopt;
    }
    double const d = distance(x, y, bank);
    return PairScore{d, compatibility_from_distance(d)};
  };
}

struct PairOutcome
{
  std::size_t pair_index = 0;
  std::size_t x          = 0;
  std::size_t y          = 0;
  std::size_t negative   = 0;
  PairScore   positive;
  PairScore   negative_score;
  double      hit = 0.0;  ///< 1, 0, or 0.5 for a tie under half-credit
};

struct CategoryPairAuc
{
  std::string cat_a;
  std::string cat_b;
  std::size_t n_pairs = 0;
  double      auc     = 0.0;
};

struct EvalReport
{
  double                       auc           = 0.0;
  std::vector<CategoryPairAuc> breakdown;
  std::size_t                  n_test_pairs  = 0;  ///< pairs submitted
  std::size_t                  n_scored      = 0;
  std::size_t                  n_skipped     = 0;
  std::uint64_t                negative_seed = 0;
  NegativeMode                 negative_mode = NegativeMode::same_category;
  TieMode                      tie_mode      = TieMode::strict;
  std::vector<PairOutcome>     outcomes;
};

inline json to_json(EvalReport const &r)
{
  json breakdown = json::array();
  for (auto const &b : r.breakdown)
  {
    breakdown.push_back({{"cat_a", b.cat_a}, {"cat_b", b.cat_b}, {"n_pairs", b.n_pairs}, {"auc", b.auc}});
  }
  return json{{"auc", r.auc},
              {"breakdown", breakdown},
              {"n_test_pairs", r.n_test_pairs},
              {"n_scored", r.n_scored},
              {"n_skipped", r.n_skipped},
              {"negative_seed", r.negative_seed},
              {"negative_mode", r.negative_mode},
              {"tie_mode", r.tie_mode}};
}

/// Per-pair CSV: pair id, d, r, d_neg, r_neg, hit.
inline void write_pair_scores_csv(std::ostream &out, EvalReport const &r)
{
  out << "pair,d,r,d_neg,r_neg,hit\n";
  for (auto const &o : r.outcomes)
  {
    out << o.pair_index << ',' << format_number(o.positive.distance) << ',' << format_number(o.positive.r) << ','
        << format_number(o.negative_score.distance) << ',' << format_number(o.negative_score.r) << ','
        << format_number(o.hit) << '\n';
  }
}

namespace detail {

inline double rank_hit(PairScore const &pos, PairScore const &neg, TieMode tie)
{
  bool const by_distance = !std::isnan(pos.distance) && !std::isnan(neg.distance);
  double const a = by_distance ? -pos.distance : pos.r;
  double const b = by_distance ? -neg.distance : neg.r;
  if (a > b)
  {
    return 1.0;
  }
  if (a == b && tie == TieMode::half_credit)
  {
    return 0.5;
  }
  return 0.0;
}

/// Draws one index from pool other than `exclude`; nullopt when none exists.
inline std::optional<std::size_t> draw_excluding(std::vector<std::size_t> const &pool,
                                                 std::size_t exclude, Rng &rng)
{
  std::size_t n_valid = 0;
  for (auto p : pool)
  {
    n_valid += p != exclude ? 1 : 0;
  }
  if (n_valid == 0)
  {
    return std::nullopt;
  }
  std::size_t k = rng.index(n_valid);
  for (auto p : pool)
  {
    if (p == exclude)
    {
      continue;
    }
    if (k == 0)
    {
      return p;
    }
    --k;
  }
  return std::nullopt;
}

inline std::uint64_t pair_seed(std::uint64_t negative_seed, std::size_t pair_index)
{
  return splitmix64(negative_seed ^ splitmix64(static_cast<std::uint64_t>(pair_index)));
}

}  // namespace detail

/// Fraction of test pairs (x, y) scored above (x, y-) for one sampled
/// negative y- per pair. Each pair's negative depends only on
/// (negative_seed, pair index).
inline EvalReport auc(PairScorer const &scorer, std::vector<ItemPair> const &test_pairs,
                      Dataset const &ds, EvalOptions const &opts = {})
{
  if (test_pairs.empty())
  {
    throw ValidationError("auc: no test pairs");
  }
  EvalReport report;
  report.n_test_pairs  = test_pairs.size();
  report.negative_seed = opts.negative_seed;
  report.negative_mode = opts.negative_mode;
  report.tie_mode      = opts.tie_mode;

  std::vector<std::size_t> all_items;
  if (opts.negative_mode == NegativeMode::any)
  {
    all_items.resize(ds.items().size());
    for (std::size_t i = 0; i < all_items.size(); ++i)
    {
      all_items[i] = i;
    }
  }

  std::map<std::pair<std::string, std::string>, std::pair<double, std::size_t>> per_cat;
  double                                                                        hits = 0.0;
  for (std::size_t i = 0; i < test_pairs.size(); ++i)
  {
    auto const &p = test_pairs[i];
    auto const &x = ds.item(p.a);
    auto const &y = ds.item(p.b);
    Rng         rng(detail::pair_seed(opts.negative_seed, i));
    auto const &pool = opts.negative_mode == NegativeMode::any ? all_items : ds.items_in(y.category);
    auto const  neg  = detail::draw_excluding(pool, p.b, rng);
    if (!neg)
    {
      ++report.n_skipped;
      continue;
    }
    auto const pos_score = scorer(x, y);
    auto const neg_score = scorer(x, ds.item(*neg));
    if (!pos_score || !neg_score)
    {
      ++report.n_skipped;
      continue;
    }
    double const hit = detail::rank_hit(*pos_score, *neg_score, opts.tie_mode);
    hits += hit;
    ++report.n_scored;
    auto key  = std::minmax(x.category, y.category);
    auto &acc = per_cat[{key.first, key.second}];
    acc.first += hit;
    ++acc.second;
    report.outcomes.push_back({i, p.a, p.b, *neg, *pos_score, *neg_score, hit});
  }
  if (report.n_scored == 0)
  {
    throw ValidationError("auc: every test pair was skipped");
  }
  report.auc = hits / static_cast<double>(report.n_scored);
  for (auto const &[key, acc] : per_cat)
  {
    report.breakdown.push_back(
      {key.first, key.second, acc.second, acc.first / static_cast<double>(acc.second)});
  }
  return report;
}

inline EvalReport auc(GeneratorBank const &bank, std::vector<ItemPair> const &test_pairs,
                      Dataset const &ds, EvalOptions const &opts = {})
{
  return auc(bank_scorer(bank), test_pairs, ds, opts);
}

/// Scorer that knows the planted distortions: undoes standardization, offset,
/// scale and rotation, then compares latent points. Only meaningful on
/// synthetic data.
inline PairScorer cheat_scorer(SynthTruth const &truth)
{
  return [&truth](ItemRecord const &x, ItemRecord const &y) -> std::optional<PairScore> {
    auto latent = [&truth](ItemRecord const &it) -> std::optional<Vector> {
      auto b = truth.basis.find(it.category);
      if (b == truth.basis.end())
      {
        return std::nullopt;
      }
      auto const &offset = truth.offset.at(it.category);
      double const scale = truth.scale.at(it.category);
      Vector raw(it.features.size());
      for (std::size_t f = 0; f < raw.size(); ++f)
      {
        raw[f] = it.features[f] * truth.feature_std[f] + truth.feature_mean[f] - offset[f];
      }
      Vector z(truth.latent_dim, 0.0);
      for (std::size_t f = 0; f < raw.size(); ++f)
      {
        for (std::size_t d = 0; d < z.size(); ++d)
        {
          z[d] += b->second(f, d) * raw[f];
        }
      }
      for (auto &v : z)
      {
        v /= scale;
      }
      return z;
    };
    auto zx = latent(x);
    auto zy = latent(y);
    if (!zx || !zy)
    {
      return std::nullopt;
    }
    double const d = squared_distance(*zx, *zy);
    return PairScore{d, compatibility_from_distance(d)};
  };
}

/// Pearson correlation; nullopt when either series is constant.
inline std::optional<double> pearson(std::span<const double> x, std::span<const double> y)
{
  if (x.size() != y.size())
  {
    throw ShapeError("pearson: series lengths differ");
  }
  if (x.size() < 2)
  {
    return std::nullopt;
  }
  auto const n  = static_cast<double>(x.size());
  double     mx = 0.0;
  double     my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i)
  {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i)
  {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0)
  {
    return std::nullopt;
  }
  return sxy / std::sqrt(sxx * syy);
}

/// Mean silhouette of labelled points under Euclidean distance. Points whose
/// cluster is a singleton contribute 0.
inline double silhouette(Matrix const &points, std::vector<int> const &labels)
{
  std::size_t const n = points.rows();
  if (labels.size() != n)
  {
    throw ShapeError("silhouette: label count differs from point count");
  }
  std::map<int, std::size_t> label_index;
  for (int l : labels)
  {
    label_index.emplace(l, 0);
  }
  if (label_index.size() < 2)
  {
    throw ValidationError("silhouette: need at least two clusters");
  }
  std::size_t k = 0;
  for (auto &[l, idx] : label_index)
  {
    idx = k++;
  }
  std::vector<std::size_t> label_of(n);
  std::vector<std::size_t> sizes(k, 0);
  for (std::size_t i = 0; i < n; ++i)
  {
    label_of[i] = label_index[labels[i]];
    ++sizes[label_of[i]];
  }

  double              total = 0.0;
  std::vector<double> sums(k);
  for (std::size_t i = 0; i < n; ++i)
  {
    std::fill(sums.begin(), sums.end(), 0.0);
    for (std::size_t j = 0; j < n; ++j)
    {
      if (j != i)
      {
        sums[label_of[j]] += std::sqrt(squared_distance(points.row(i), points.row(j)));
      }
    }
    std::size_t const own = label_of[i];
    if (sizes[own] < 2)
    {
      continue;
    }
    double const a = sums[own] / static_cast<double>(sizes[own] - 1);
    double       b = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < k; ++c)
    {
      if (c != own && sizes[c] > 0)
      {
        b = std::min(b, sums[c] / static_cast<double>(sizes[c]));
      }
    }
    double const denom = std::max(a, b);
    total += denom > 0.0 ? (b - a) / denom : 0.0;
  }
  return total / static_cast<double>(n);
}

}  // namespace scgan
