#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "scgan/item.hpp"
#include "scgan/json_util.hpp"
#include "scgan/numcore/random_matrix.hpp"

namespace scgan {

/// Planted ground truth of a synthetic corpus. Lives beside the items, never
/// inside them, so nothing that consumes ItemRecords can see style labels.
struct SynthTruth
{
  std::size_t                   latent_dim = 0;
  std::map<std::string, int>    style_of;    ///< item id -> planted style cluster
  std::map<std::string, Matrix> basis;       ///< category -> F x latent orthonormal columns (embedding * rotation)
  std::map<std::string, double> scale;       ///< category -> scale factor
  std::map<std::string, Vector> offset;      ///< category -> mean offset in feature space
  Vector                        feature_mean;  ///< standardization applied after generation
  Vector                        feature_std;

  bool operator==(SynthTruth const &) const = default;
};

struct Provenance
{
  json                      meta = json::object();
  std::optional<SynthTruth> truth;
};

struct PairSplit
{
  std::vector<ItemPair> train;
  std::vector<ItemPair> test;
};

/// Items, compatible pairs and the train/test partition of those pairs.
class Dataset
{
public:
  Dataset() = default;

  /// Validates ids, feature dims and pair integrity; pairs are deduplicated
  /// as unordered pairs, keeping first occurrence.
  Dataset(std::vector<ItemRecord> items, std::vector<ItemPair> pairs)
    : items_(std::move(items))
  {
    if (items_.empty())
    {
      throw ValidationError("dataset: no items");
    }
    feature_dim_ = items_.front().features.size();
    if (feature_dim_ == 0)
    {
      throw ValidationError("dataset: zero feature dimension");
    }
    for (std::size_t i = 0; i < items_.size(); ++i)
    {
      auto const &it = items_[i];
      if (it.features.size() != feature_dim_)
      {
        throw ShapeError("dataset: item '" + it.id + "' has feature dim " +
                         std::to_string(it.features.size()) + ", expected " +
                         std::to_string(feature_dim_));
      }
      if (!all_finite(it.features))
      {
        throw ValidationError("dataset: item '" + it.id + "' has non-finite features");
      }
      if (!index_.emplace(it.id, i).second)
      {
        throw ValidationError("dataset: duplicate item id '" + it.id + "'");
      }
      by_category_[it.category].push_back(i);
    }
    for (auto const &[c, _] : by_category_)
    {
      categories_.push_back(c);
    }
    std::set<std::pair<std::size_t, std::size_t>> seen;
    for (auto const &p : pairs)
    {
      check_pair(p);
      auto key = std::minmax(p.a, p.b);
      if (seen.insert(key).second)
      {
        pairs_.push_back(p);
      }
    }
  }

  std::vector<ItemRecord> const  &items() const noexcept { return items_; }
  ItemRecord const               &item(std::size_t i) const { return items_.at(i); }
  std::size_t                     feature_dim() const noexcept { return feature_dim_; }
  std::vector<std::string> const &categories() const noexcept { return categories_; }
  std::vector<ItemPair> const    &pairs() const noexcept { return pairs_; }
  std::vector<ItemPair> const    &train_pairs() const noexcept { return split_.train; }
  std::vector<ItemPair> const    &test_pairs() const noexcept { return split_.test; }

  std::vector<std::size_t> const &items_in(std::string const &category) const
  {
    auto it = by_category_.find(category);
    if (it == by_category_.end())
    {
      throw LookupError("dataset: unknown category '" + category + "'");
    }
    return it->second;
  }

  std::optional<std::size_t> find(std::string const &id) const
  {
    auto it = index_.find(id);
    if (it == index_.end())
    {
      return std::nullopt;
    }
    return it->second;
  }

  void set_split(PairSplit split)
  {
    std::set<std::pair<std::size_t, std::size_t>> train_keys;
    for (auto const &p : split.train)
    {
      check_pair(p);
      train_keys.insert(std::minmax(p.a, p.b));
    }
    for (auto const &p : split.test)
    {
      check_pair(p);
      if (train_keys.count(std::minmax(p.a, p.b)) != 0)
      {
        throw ValidationError("dataset: train and test pairs overlap");
      }
    }
    split_ = std::move(split);
  }

  /// Feature rows of the given item indices, stacked.
  Matrix features_of(std::span<const std::size_t> indices) const
  {
    Matrix out(indices.size(), feature_dim_);
    for (std::size_t r = 0; r < indices.size(); ++r)
    {
      auto const &f = items_.at(indices[r]).features;
      std::copy(f.begin(), f.end(), out.row(r).begin());
    }
    return out;
  }

  Provenance provenance;

private:
  void check_pair(ItemPair const &p) const
  {
    if (p.a >= items_.size() || p.b >= items_.size())
    {
      throw ValidationError("dataset: pair references a missing item");
    }
    if (items_[p.a].category == items_[p.b].category)
    {
      throw ValidationError("dataset: pair (" + items_[p.a].id + ", " + items_[p.b].id +
                            ") lies within one category");
    }
  }

  std::vector<ItemRecord>                          items_;
  std::size_t                                      feature_dim_ = 0;
  std::unordered_map<std::string, std::size_t>     index_;
  std::map<std::string, std::vector<std::size_t>>  by_category_;
  std::vector<std::string>                         categories_;
  std::vector<ItemPair>                            pairs_;
  PairSplit                                        split_;
};

// ---------------------------------------------------------------------------
// standardization

struct Standardization
{
  Vector mean;
  Vector std;
};

/// Per-dimension zero mean / unit variance over all items (population std;
/// constant dimensions are only centered).
inline Standardization standardize_features(std::vector<ItemRecord> &items)
{
  Standardization st;
  if (items.empty())
  {
    return st;
  }
  std::size_t const dim = items.front().features.size();
  auto const        n   = static_cast<double>(items.size());
  st.mean.assign(dim, 0.0);
  st.std.assign(dim, 0.0);
  for (auto const &it : items)
  {
    for (std::size_t k = 0; k < dim; ++k)
    {
      st.mean[k] += it.features[k];
    }
  }
  for (auto &m : st.mean)
  {
    m /= n;
  }
  for (auto const &it : items)
  {
    for (std::size_t k = 0; k < dim; ++k)
    {
      double const d = it.features[k] - st.mean[k];
      st.std[k] += d * d;
    }
  }
  for (auto &s : st.std)
  {
    s = std::sqrt(s / n);
    if (s == 0.0)
    {
      s = 1.0;
    }
  }
  for (auto &it : items)
  {
    for (std::size_t k = 0; k < dim; ++k)
    {
      it.features[k] = (it.features[k] - st.mean[k]) / st.std[k];
    }
  }
  return st;
}

/// True when every dimension already has |mean| and |std - 1| below tol.
inline bool is_standardized(std::vector<ItemRecord> const &items, double tol = 1e-9)
{
  if (items.empty())
  {
    return true;
  }
  std::size_t const dim = items.front().features.size();
  auto const        n   = static_cast<double>(items.size());
  for (std::size_t k = 0; k < dim; ++k)
  {
    double mean = 0.0;
    for (auto const &it : items)
    {
      mean += it.features[k];
    }
    mean /= n;
    double var = 0.0;
    for (auto const &it : items)
    {
      var += (it.features[k] - mean) * (it.features[k] - mean);
    }
    double const sd = std::sqrt(var / n);
    if (std::abs(mean) > tol || (std::abs(sd - 1.0) > tol && sd != 0.0))
    {
      return false;
    }
  }
  return true;
}

// ---------------------------------------------------------------------------
// synthetic lab

/// Planted-style corpus. Each "outfit" is a latent style point (cluster center
/// plus jitter) and contributes one item per category; compatible pairs join
/// items of the same outfit across categories. Every category sees the shared
/// latent space through its own rotation, scale and offset, followed by a
/// common embedding into feature space.
struct SynthConfig
{
  std::size_t   n_categories       = 4;
  std::size_t   items_per_category = 500;
  std::size_t   n_styles           = 6;
  std::size_t   style_dim_true     = 16;
  std::size_t   feature_dim        = 64;
  double        scale_min          = 0.5;
  double        scale_max          = 2.0;
  double        center_spread      = 1.0;  ///< std of style cluster centers per latent dim
  double        style_jitter       = 1.0;  ///< std of outfits around their center
  double        item_jitter        = 0.1;  ///< std of items around their outfit
  double        category_offset    = 2.0;  ///< std of per-category feature offsets
  double        noise_sigma        = 0.1;
  double        pair_density       = 2.0 / 3.0;
  std::uint64_t seed               = 7;

  void validate() const
  {
    auto require = [](bool ok, char const *msg) {
      if (!ok)
      {
        throw ValidationError(std::string("data.synth.") + msg);
      }
    };
    require(n_categories >= 2, "n_categories: must be >= 2");
    require(items_per_category >= 1, "items_per_category: must be >= 1");
    require(n_styles >= 2, "n_styles: must be >= 2");
    require(style_dim_true >= 1, "style_dim_true: must be >= 1");
    require(style_dim_true <= feature_dim, "style_dim_true: must not exceed feature_dim");
    require(scale_min > 0.0 && scale_min <= scale_max, "scale_min: need 0 < scale_min <= scale_max");
    require(center_spread >= 0.0, "center_spread: must be non-negative");
    require(style_jitter >= 0.0, "style_jitter: must be non-negative");
    require(item_jitter >= 0.0, "item_jitter: must be non-negative");
    require(category_offset >= 0.0, "category_offset: must be non-negative");
    require(noise_sigma >= 0.0, "noise_sigma: must be non-negative");
    require(pair_density >= 0.0 && pair_density <= 1.0, "pair_density: must be in [0, 1]");
  }
};

inline json to_json(SynthConfig const &c)
{
  return json{{"n_categories", c.n_categories},
              {"items_per_category", c.items_per_category},
              {"n_styles", c.n_styles},
              {"style_dim_true", c.style_dim_true},
              {"feature_dim", c.feature_dim},
              {"scale_min", c.scale_min},
              {"scale_max", c.scale_max},
              {"center_spread", c.center_spread},
              {"style_jitter", c.style_jitter},
              {"item_jitter", c.item_jitter},
              {"category_offset", c.category_offset},
              {"noise_sigma", c.noise_sigma},
              {"pair_density", c.pair_density},
              {"seed", c.seed}};
}

inline SynthConfig synth_config_from_json(json const &j, SynthConfig c = {})
{
  StrictObject o(j, "data.synth");
  o.get("n_categories", c.n_categories);
  o.get("items_per_category", c.items_per_category);
  o.get("n_styles", c.n_styles);
  o.get("style_dim_true", c.style_dim_true);
  o.get("feature_dim", c.feature_dim);
  o.get("scale_min", c.scale_min);
  o.get("scale_max", c.scale_max);
  o.get("center_spread", c.center_spread);
  o.get("style_jitter", c.style_jitter);
  o.get("item_jitter", c.item_jitter);
  o.get("category_offset", c.category_offset);
  o.get("noise_sigma", c.noise_sigma);
  o.get("pair_density", c.pair_density);
  o.get("seed", c.seed);
  o.finish();
  c.validate();
  return c;
}

struct SynthOptions
{
  bool identity_distortion = false;  ///< basis = first latent coordinates, scale 1, no offset
  bool standardize         = true;
};

inline std::string category_name(std::size_t c) { return "cat" + std::to_string(c); }

inline Dataset synth_generate(SynthConfig const &cfg, SynthOptions const &opts = {})
{
  cfg.validate();
  Rng rng(cfg.seed);

  std::size_t const k = cfg.style_dim_true;
  std::size_t const F = cfg.feature_dim;

  // style cluster centers, re-centered so the latent cloud has zero mean
  Matrix centers = random_normal(cfg.n_styles, k, cfg.center_spread, rng);
  for (std::size_t d = 0; d < k; ++d)
  {
    double m = 0.0;
    for (std::size_t s = 0; s < cfg.n_styles; ++s)
    {
      m += centers(s, d);
    }
    m /= static_cast<double>(cfg.n_styles);
    for (std::size_t s = 0; s < cfg.n_styles; ++s)
    {
      centers(s, d) -= m;
    }
  }

  std::size_t const n_outfits = cfg.items_per_category;
  std::vector<int>  outfit_style(n_outfits);
  Matrix            outfit_latent(n_outfits, k);
  for (std::size_t o = 0; o < n_outfits; ++o)
  {
    outfit_style[o] = static_cast<int>(o % cfg.n_styles);
    for (std::size_t d = 0; d < k; ++d)
    {
      outfit_latent(o, d) = centers(static_cast<std::size_t>(outfit_style[o]), d) +
                            rng.normal(0.0, cfg.style_jitter);
    }
  }

  SynthTruth truth;
  truth.latent_dim = k;

  // every category observes the latent space through the same embedding,
  // after its own rotation; a single linear map cannot undo differing rotations
  Matrix embedding(F, k);
  if (opts.identity_distortion)
  {
    for (std::size_t d = 0; d < k; ++d)
    {
      embedding(d, d) = 1.0;
    }
  }
  else
  {
    embedding = random_orthonormal(F, k, rng);
  }

  std::vector<ItemRecord>               items;
  std::vector<std::vector<std::size_t>> item_of_outfit(n_outfits);
  items.reserve(cfg.n_categories * n_outfits);
  for (std::size_t c = 0; c < cfg.n_categories; ++c)
  {
    std::string const name = category_name(c);
    Matrix            basis = embedding;
    double            scale = 1.0;
    Vector            offset(F, 0.0);
    if (!opts.identity_distortion)
    {
      basis = matmul(embedding, random_orthonormal(k, k, rng));
      scale = rng.uniform(cfg.scale_min, cfg.scale_max);
      for (auto &v : offset)
      {
        v = rng.normal(0.0, cfg.category_offset);
      }
    }

    // item positions within a category are shuffled so ids carry no outfit information
    std::vector<std::size_t> order(n_outfits);
    for (std::size_t o = 0; o < n_outfits; ++o)
    {
      order[o] = o;
    }
    rng.shuffle(order);

    std::size_t const width = std::to_string(n_outfits - 1).size();
    for (std::size_t p = 0; p < n_outfits; ++p)
    {
      std::size_t const o = order[p];
      Vector            z(k);
      for (std::size_t d = 0; d < k; ++d)
      {
        z[d] = outfit_latent(o, d) + (cfg.item_jitter > 0.0 ? rng.normal(0.0, cfg.item_jitter) : 0.0);
      }
      Vector v(F);
      for (std::size_t f = 0; f < F; ++f)
      {
        double acc = 0.0;
        for (std::size_t d = 0; d < k; ++d)
        {
          acc += basis(f, d) * z[d];
        }
        v[f] = offset[f] + scale * acc + (cfg.noise_sigma > 0.0 ? rng.normal(0.0, cfg.noise_sigma) : 0.0);
      }
      std::string idx = std::to_string(p);
      idx.insert(0, width - idx.size(), '0');
      std::string id = name + "-" + idx;
      truth.style_of[id] = outfit_style[o];
      item_of_outfit[o].push_back(items.size());
      items.push_back({std::move(id), name, std::move(v)});
    }
    truth.basis[name]  = std::move(basis);
    truth.scale[name]  = scale;
    truth.offset[name] = std::move(offset);
  }

  if (opts.standardize)
  {
    auto st            = standardize_features(items);
    truth.feature_mean = std::move(st.mean);
    truth.feature_std  = std::move(st.std);
  }
  else
  {
    truth.feature_mean.assign(F, 0.0);
    truth.feature_std.assign(F, 1.0);
  }

  std::vector<ItemPair> pairs;
  for (std::size_t o = 0; o < n_outfits; ++o)
  {
    auto const &members = item_of_outfit[o];
    for (std::size_t a = 0; a < members.size(); ++a)
    {
      for (std::size_t b = a + 1; b < members.size(); ++b)
      {
        if (rng.uniform() < cfg.pair_density)
        {
          pairs.push_back({members[a], members[b]});
        }
      }
    }
  }
  rng.shuffle(pairs);

  Dataset ds(std::move(items), std::move(pairs));
  ds.provenance.meta  = json{{"source", "synthetic"}, {"synth", to_json(cfg)}};
  ds.provenance.truth = std::move(truth);
  return ds;
}

// ---------------------------------------------------------------------------
// splitting

/// Uniform disjoint selection: floor(n * test_fraction) test pairs, then
/// floor(n * seed_permille / 1000) training pairs from the rest. The test set
/// depends only on rng_seed and test_fraction, not on seed_permille.
inline PairSplit split_pairs(std::vector<ItemPair> const &pairs, double seed_permille,
                             double test_fraction, std::uint64_t rng_seed)
{
  if (!(seed_permille >= 0.0))
  {
    throw ValidationError("split: seed_permille must be non-negative");
  }
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
  {
    throw ValidationError("split: test_fraction must be in (0, 1)");
  }
  auto const        n       = static_cast<double>(pairs.size());
  // a tiny epsilon keeps exact products like 1000 * 0.2 from flooring down
  auto const        n_test  = static_cast<std::size_t>(std::floor(n * test_fraction + 1e-9));
  auto const        n_train = static_cast<std::size_t>(std::floor(n * seed_permille / 1000.0 + 1e-9));
  if (n_test + n_train > pairs.size())
  {
    throw ValidationError("split: requested " + std::to_string(n_train) + " train + " +
                          std::to_string(n_test) + " test pairs from a pool of " +
                          std::to_string(pairs.size()));
  }
  std::vector<std::size_t> order(pairs.size());
  for (std::size_t i = 0; i < order.size(); ++i)
  {
    order[i] = i;
  }
  Rng rng(rng_seed);
  rng.shuffle(order);
  PairSplit out;
  for (std::size_t i = 0; i < n_test; ++i)
  {
    out.test.push_back(pairs[order[i]]);
  }
  for (std::size_t i = n_test; i < n_test + n_train; ++i)
  {
    out.train.push_back(pairs[order[i]]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// file formats

struct LoadOptions
{
  bool standardize = true;  ///< skipped when the features already are standardized
};

inline Dataset load_dataset(std::string const &items_path, std::string const &pairs_path,
                            LoadOptions const &opts = {})
{
  std::ifstream items_in(items_path);
  if (!items_in)
  {
    throw ValidationError("cannot open items file '" + items_path + "'");
  }
  std::vector<ItemRecord> items;
  std::string             line;
  std::size_t             line_no = 0;
  auto fail = [&](std::string const &file, std::size_t ln, std::string const &what) {
    throw ValidationError(file + ":" + std::to_string(ln) + ": " + what);
  };
  while (std::getline(items_in, line))
  {
    ++line_no;
    if (line.empty())
    {
      continue;
    }
    json j;
    try
    {
      j = json::parse(line);
    }
    catch (json::parse_error const &e)
    {
      fail(items_path, line_no, std::string("malformed JSON: ") + e.what());
    }
    if (!j.is_object())
    {
      fail(items_path, line_no, "expected an object");
    }
    ItemRecord rec;
    for (char const *field : {"id", "category", "features"})
    {
      if (!j.contains(field))
      {
        fail(items_path, line_no, std::string("missing field '") + field + "'");
      }
    }
    for (auto const &[key, _] : j.items())
    {
      if (key != "id" && key != "category" && key != "features")
      {
        fail(items_path, line_no, "unknown field '" + key + "'");
      }
    }
    if (!j["id"].is_string())
    {
      fail(items_path, line_no, "field 'id' must be a string");
    }
    if (!j["category"].is_string())
    {
      fail(items_path, line_no, "field 'category' must be a string");
    }
    if (!j["features"].is_array())
    {
      fail(items_path, line_no, "field 'features' must be an array");
    }
    rec.id       = j["id"].get<std::string>();
    rec.category = j["category"].get<std::string>();
    for (auto const &v : j["features"])
    {
      if (!v.is_number())
      {
        fail(items_path, line_no, "field 'features' must contain only numbers");
      }
      rec.features.push_back(v.get<double>());
    }
    if (!items.empty() && rec.features.size() != items.front().features.size())
    {
      fail(items_path, line_no,
           "field 'features' has dim " + std::to_string(rec.features.size()) + ", expected " +
             std::to_string(items.front().features.size()));
    }
    items.push_back(std::move(rec));
  }
  if (items.empty())
  {
    throw ValidationError(items_path + ": no items");
  }

  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < items.size(); ++i)
  {
    if (!index.emplace(items[i].id, i).second)
    {
      throw ValidationError(items_path + ": duplicate item id '" + items[i].id + "'");
    }
  }

  std::ifstream pairs_in(pairs_path);
  if (!pairs_in)
  {
    throw ValidationError("cannot open pairs file '" + pairs_path + "'");
  }
  std::vector<ItemPair> pairs;
  line_no = 0;
  bool header_seen = false;
  while (std::getline(pairs_in, line))
  {
    ++line_no;
    if (!line.empty() && line.back() == '\r')
    {
      line.pop_back();
    }
    if (line.empty())
    {
      continue;
    }
    if (!header_seen)
    {
      if (line != "id_a,id_b")
      {
        fail(pairs_path, line_no, "expected header 'id_a,id_b'");
      }
      header_seen = true;
      continue;
    }
    auto const comma = line.find(',');
    if (comma == std::string::npos || line.find(',', comma + 1) != std::string::npos)
    {
      fail(pairs_path, line_no, "expected two fields 'id_a,id_b'");
    }
    std::string const a = line.substr(0, comma);
    std::string const b = line.substr(comma + 1);
    auto ia = index.find(a);
    if (ia == index.end())
    {
      fail(pairs_path, line_no, "field id_a: unknown item id '" + a + "'");
    }
    auto ib = index.find(b);
    if (ib == index.end())
    {
      fail(pairs_path, line_no, "field id_b: unknown item id '" + b + "'");
    }
    if (items[ia->second].category == items[ib->second].category)
    {
      fail(pairs_path, line_no, "pair lies within category '" + items[ia->second].category + "'");
    }
    pairs.push_back({ia->second, ib->second});
  }

  if (opts.standardize && !is_standardized(items))
  {
    standardize_features(items);
  }
  Dataset ds(std::move(items), std::move(pairs));
  ds.provenance.meta = json{{"source", "files"}, {"items", items_path}, {"pairs", pairs_path}};
  return ds;
}

inline void save_dataset(Dataset const &ds, std::string const &items_path,
                         std::string const &pairs_path)
{
  std::ofstream items_out(items_path, std::ios::binary);
  if (!items_out)
  {
    throw IoError("cannot write '" + items_path + "'");
  }
  for (auto const &it : ds.items())
  {
    json j;
    j["id"]       = it.id;
    j["category"] = it.category;
    j["features"] = it.features;
    items_out << j.dump() << '\n';
  }
  std::ofstream pairs_out(pairs_path, std::ios::binary);
  if (!pairs_out)
  {
    throw IoError("cannot write '" + pairs_path + "'");
  }
  pairs_out << "id_a,id_b\n";
  for (auto const &p : ds.pairs())
  {
    pairs_out << ds.item(p.a).id << ',' << ds.item(p.b).id << '\n';
  }
  if (!items_out || !pairs_out)
  {
    throw IoError("write failed for dataset files");
  }
}

inline json truth_to_json(SynthTruth const &t)
{
  json basis  = json::object();
  json scale  = json::object();
  json offset = json::object();
  for (auto const &[c, m] : t.basis)
  {
    basis[c] = matrix_to_json(m);
  }
  for (auto const &[c, s] : t.scale)
  {
    scale[c] = s;
  }
  for (auto const &[c, o] : t.offset)
  {
    offset[c] = o;
  }
  return json{{"latent_dim", t.latent_dim},     {"styles", t.style_of},
              {"basis", basis},                 {"scale", scale},
              {"offset", offset},               {"feature_mean", t.feature_mean},
              {"feature_std", t.feature_std}};
}

inline SynthTruth truth_from_json(json const &j)
{
  try
  {
    SynthTruth t;
    t.latent_dim = j.at("latent_dim").get<std::size_t>();
    t.style_of   = j.at("styles").get<std::map<std::string, int>>();
    for (auto const &[c, m] : j.at("basis").items())
    {
      t.basis[c] = matrix_from_json(m);
    }
    t.scale        = j.at("scale").get<std::map<std::string, double>>();
    t.offset       = j.at("offset").get<std::map<std::string, Vector>>();
    t.feature_mean = j.at("feature_mean").get<Vector>();
    t.feature_std  = j.at("feature_std").get<Vector>();
    return t;
  }
  catch (json::exception const &e)
  {
    throw ValidationError(std::string("provenance truth: ") + e.what());
  }
}

inline json provenance_to_json(Provenance const &p)
{
  json j = p.meta;
  if (p.truth)
  {
    j["truth"] = truth_to_json(*p.truth);
  }
  return j;
}

inline Provenance provenance_from_json(json j)
{
  Provenance p;
  if (j.contains("truth"))
  {
    p.truth = truth_from_json(j["truth"]);
    j.erase("truth");
  }
  p.meta = std::move(j);
  return p;
}

inline void save_provenance(Provenance const &p, std::string const &path)
{
  std::ofstream out(path, std::ios::binary);
  if (!out)
  {
    throw IoError("cannot write '" + path + "'");
  }
  out << provenance_to_json(p).dump(1) << '\n';
}

inline Provenance load_provenance(std::string const &path)
{
  std::ifstream in(path);
  if (!in)
  {
    throw ValidationError("cannot open provenance file '" + path + "'");
  }
  try
  {
    return provenance_from_json(json::parse(in));
  }
  catch (json::parse_error const &e)
  {
    throw ValidationError(path + ": " + e.what());
  }
}

/// Planted style label for each item, or nullopt without synthetic truth.
inline std::optional<std::vector<int>> style_labels(Dataset const &ds)
{
  if (!ds.provenance.truth)
  {
    return std::nullopt;
  }
  std::vector<int> labels;
  labels.reserve(ds.items().size());
  for (auto const &it : ds.items())
  {
    auto f = ds.provenance.truth->style_of.find(it.id);
    if (f == ds.provenance.truth->style_of.end())
    {
      return std::nullopt;
    }
    labels.push_back(f->second);
  }
  return labels;
}

}  // namespace scgan
