#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "scgan/data.hpp"
#include "scgan/eval.hpp"
#include "scgan/manifest.hpp"
#include "scgan/projection.hpp"

using namespace scgan;
namespace fs = std::filesystem;

namespace {

// sha256 of the items JSONL and pairs CSV written for the default SynthConfig
constexpr char const *golden_items = "65891ea954153664f6d0b57f0fd458fefc9accd424d754903c280c6e74f57606";
constexpr char const *golden_pairs = "dbbb809d32fea2f6af8f0ede5179243cc3f8f50df1884e8d5d3713eba7192357";

struct TempDir
{
  fs::path path;
  TempDir()
  {
    path = fs::temp_directory_path() /
           ("scgan_data_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) + "_" +
            ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(std::string const &name) const { return (path / name).string(); }
};

void write_text(std::string const &path, std::string const &text)
{
  std::ofstream out(path, std::ios::binary);
  out << text;
}

std::string load_error(std::string const &items, std::string const &pairs)
{
  try
  {
    load_dataset(items, pairs);
  }
  catch (ValidationError const &e)
  {
    return e.what();
  }
  return "";
}

SynthConfig small_config()
{
  SynthConfig c;
  c.n_categories       = 3;
  c.items_per_category = 30;
  c.feature_dim        = 8;
  c.style_dim_true     = 3;
  c.n_styles           = 3;
  return c;
}

}  // namespace

TEST(Synth, DefaultCorpusMatchesGoldenDigests)
{
  TempDir    dir;
  auto const ds = synth_generate(SynthConfig{});
  save_dataset(ds, dir / "items.jsonl", dir / "pairs.csv");
  EXPECT_EQ(sha256_hex(read_file(dir / "items.jsonl")), golden_items);
  EXPECT_EQ(sha256_hex(read_file(dir / "pairs.csv")), golden_pairs);
  EXPECT_EQ(ds.items().size(), 2000u);
  EXPECT_EQ(ds.categories().size(), 4u);
  EXPECT_EQ(ds.feature_dim(), 64u);
}

TEST(Synth, SameSeedSameBytesOtherSeedDiffers)
{
  TempDir     dir;
  SynthConfig c = small_config();
  save_dataset(synth_generate(c), dir / "a.jsonl", dir / "a.csv");
  save_dataset(synth_generate(c), dir / "b.jsonl", dir / "b.csv");
  c.seed += 1;
  save_dataset(synth_generate(c), dir / "c.jsonl", dir / "c.csv");
  EXPECT_EQ(read_file(dir / "a.jsonl"), read_file(dir / "b.jsonl"));
  EXPECT_EQ(read_file(dir / "a.csv"), read_file(dir / "b.csv"));
  EXPECT_NE(read_file(dir / "a.jsonl"), read_file(dir / "c.jsonl"));
}

TEST(Synth, UndistortedNoiselessPairsCoincide)
{
  SynthConfig c    = small_config();
  c.n_categories   = 2;
  c.noise_sigma    = 0.0;
  c.item_jitter    = 0.0;
  c.pair_density   = 1.0;
  auto const ds    = synth_generate(c, {.identity_distortion = true, .standardize = false});
  ASSERT_EQ(ds.pairs().size(), c.items_per_category);
  for (auto const &p : ds.pairs())
    EXPECT_EQ(ds.item(p.a).features, ds.item(p.b).features);
}

TEST(Synth, PairsJoinSameStyleAcrossCategoriesAndLabelsStayOut)
{
  auto const  ds = synth_generate(small_config());
  auto const &t  = *ds.provenance.truth;
  EXPECT_EQ(t.style_of.size(), ds.items().size());
  for (auto const &p : ds.pairs())
  {
    EXPECT_NE(ds.item(p.a).category, ds.item(p.b).category);
    EXPECT_EQ(t.style_of.at(ds.item(p.a).id), t.style_of.at(ds.item(p.b).id));
  }
  auto const labels = style_labels(ds);
  ASSERT_TRUE(labels.has_value());
  EXPECT_EQ(std::set<int>(labels->begin(), labels->end()).size(), 3u);
}

TEST(Synth, FeaturesStandardized)
{
  auto const ds = synth_generate(small_config());
  std::vector<ItemRecord> items = ds.items();
  EXPECT_TRUE(is_standardized(items, 1e-9));
}

TEST(Synth, ValidationErrors)
{
  auto expect_bad = [](auto mutate) {
    SynthConfig c = small_config();
    mutate(c);
    EXPECT_THROW(synth_generate(c), ValidationError);
  };
  expect_bad([](SynthConfig &c) { c.n_styles = 1; });
  expect_bad([](SynthConfig &c) { c.style_dim_true = 9; });
  expect_bad([](SynthConfig &c) { c.noise_sigma = -0.1; });
  expect_bad([](SynthConfig &c) { c.n_categories = 1; });
  expect_bad([](SynthConfig &c) { c.scale_min = 3.0; });
  EXPECT_THROW(synth_config_from_json(json{{"n_stiles", 3}}), ValidationError);
}

TEST(Synth, CheatOracleSolvesDefaultTask)
{
  Dataset ds = synth_generate(SynthConfig{});
  ds.set_split(split_pairs(ds.pairs(), 15, 0.2, 11));
  EXPECT_GE(auc(cheat_scorer(*ds.provenance.truth), ds.test_pairs(), ds).auc, 0.99);
}

TEST(Split, ArithmeticExample)
{
  std::vector<ItemPair> pairs;
  for (std::size_t i = 0; i < 1000; ++i)
    pairs.push_back({i, i + 1000});
  auto const s = split_pairs(pairs, 2, 0.2, 5);
  EXPECT_EQ(s.train.size(), 2u);
  EXPECT_EQ(s.test.size(), 200u);
  auto const zero = split_pairs(pairs, 0, 0.2, 5);
  EXPECT_TRUE(zero.train.empty());
  EXPECT_EQ(zero.test, s.test);  // test set does not depend on the permillage
  auto const other = split_pairs(pairs, 2, 0.2, 6);
  EXPECT_EQ(other.train.size(), 2u);
  EXPECT_NE(other.train, s.train);
}

TEST(Split, Errors)
{
  std::vector<ItemPair> pairs(10, ItemPair{0, 1});
  EXPECT_THROW(split_pairs(pairs, -1, 0.2, 1), ValidationError);
  EXPECT_THROW(split_pairs(pairs, 1, 0.0, 1), ValidationError);
  EXPECT_THROW(split_pairs(pairs, 1, 1.0, 1), ValidationError);
  EXPECT_THROW(split_pairs(pairs, 900, 0.2, 1), ValidationError);
}

TEST(SplitProperty, DisjointSubsetWithFloorSizes)
{
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial)
  {
    std::size_t const     n = 1 + rng.index(3000);
    std::vector<ItemPair> pairs;
    for (std::size_t i = 0; i < n; ++i)
      pairs.push_back({i, i + n});
    double const tf = rng.uniform(0.01, 0.5);
    double const pm = rng.uniform(0.0, 400.0);
    auto const   s  = split_pairs(pairs, pm, tf, rng.next_u64());
    EXPECT_EQ(s.test.size(), static_cast<std::size_t>(std::floor(n * tf + 1e-9)));
    EXPECT_EQ(s.train.size(), static_cast<std::size_t>(std::floor(n * pm / 1000.0 + 1e-9)));
    std::set<std::size_t> seen;
    for (auto const &p : s.test)
      EXPECT_TRUE(seen.insert(p.a).second);
    for (auto const &p : s.train)
      EXPECT_TRUE(seen.insert(p.a).second);
    for (auto a : seen)
      EXPECT_LT(a, n);
  }
}

TEST(Dataset, Invariants)
{
  std::vector<ItemRecord> items{{"a", "x", {1.0}}, {"b", "y", {2.0}}, {"c", "x", {3.0}}};
  EXPECT_THROW(Dataset(items, {{0, 2}}), ValidationError);  // within one category
  EXPECT_THROW(Dataset(items, {{0, 7}}), ValidationError);
  Dataset ds(items, {{0, 1}, {1, 0}, {2, 1}});
  EXPECT_EQ(ds.pairs().size(), 2u);  // (b, a) duplicates (a, b)
  EXPECT_THROW(ds.set_split({{{0, 1}}, {{1, 0}}}), ValidationError);
  ds.set_split({{{0, 1}}, {{2, 1}}});
  EXPECT_EQ(ds.train_pairs().size(), 1u);
  items.push_back({"a", "y", {0.0}});
  EXPECT_THROW(Dataset(items, {}), ValidationError);
  EXPECT_THROW(Dataset({{"a", "x", {1.0}}, {"b", "y", {1.0, 2.0}}}, {}), ShapeError);
}

TEST(Load, RoundTripIsValueIdentical)
{
  TempDir    dir;
  auto const ds = synth_generate(small_config());
  save_dataset(ds, dir / "i.jsonl", dir / "p.csv");
  auto const back = load_dataset(dir / "i.jsonl", dir / "p.csv");
  EXPECT_EQ(back.items(), ds.items());
  EXPECT_EQ(back.pairs(), ds.pairs());
  // and save -> load is a fixed point
  save_dataset(back, dir / "i2.jsonl", dir / "p2.csv");
  EXPECT_EQ(read_file(dir / "i2.jsonl"), read_file(dir / "i.jsonl"));
  EXPECT_EQ(read_file(dir / "p2.csv"), read_file(dir / "p.csv"));

  save_provenance(ds.provenance, dir / "prov.json");
  auto const prov = load_provenance(dir / "prov.json");
  EXPECT_EQ(prov.meta, ds.provenance.meta);
  ASSERT_TRUE(prov.truth.has_value());
  EXPECT_EQ(*prov.truth, *ds.provenance.truth);
}

TEST(Load, UnstandardizedInputGetsStandardized)
{
  TempDir dir;
  write_text(dir / "i.jsonl", R"({"id":"a","category":"x","features":[1,10]}
{"id":"b","category":"y","features":[3,10]}
)");
  write_text(dir / "p.csv", "id_a,id_b\n");
  auto const ds = load_dataset(dir / "i.jsonl", dir / "p.csv");
  EXPECT_EQ(ds.item(0).features, (Vector{-1.0, 0.0}));
  EXPECT_EQ(ds.item(1).features, (Vector{1.0, 0.0}));
  EXPECT_TRUE(ds.pairs().empty());  // empty pairs file is a valid unsupervised corpus
}

TEST(Load, ErrorsNameFileLineAndField)
{
  TempDir           dir;
  std::string const good = R"({"id":"a","category":"x","features":[1,2]}
{"id":"b","category":"y","features":[3,4]}
)";
  write_text(dir / "i.jsonl", good);
  write_text(dir / "p.csv", "id_a,id_b\na,b\na,zz\n");
  std::string err = load_error(dir / "i.jsonl", dir / "p.csv");
  EXPECT_NE(err.find("p.csv:3"), std::string::npos) << err;
  EXPECT_NE(err.find("id_b"), std::string::npos) << err;

  write_text(dir / "bad.jsonl", good + R"({"id":"c","category":"y","features":[3]})" + "\n");
  err = load_error(dir / "bad.jsonl", dir / "p.csv");
  EXPECT_NE(err.find("bad.jsonl:3"), std::string::npos) << err;
  EXPECT_NE(err.find("features"), std::string::npos) << err;

  write_text(dir / "dup.jsonl", good + R"({"id":"a","category":"y","features":[3,4]})" + "\n");
  EXPECT_NE(load_error(dir / "dup.jsonl", dir / "p.csv").find("duplicate"), std::string::npos);

  write_text(dir / "junk.jsonl", "{not json\n");
  EXPECT_NE(load_error(dir / "junk.jsonl", dir / "p.csv").find("junk.jsonl:1"), std::string::npos);

  write_text(dir / "nohdr.csv", "a,b\n");
  EXPECT_NE(load_error(dir / "i.jsonl", dir / "nohdr.csv").find("nohdr.csv:1"), std::string::npos);

  EXPECT_THROW(load_dataset(dir / "missing.jsonl", dir / "p.csv"), ValidationError);
}

TEST(Project2d, TwoDimensionalInputIsRigid)
{
  Rng                     rng(4);
  std::vector<ItemRecord> items;
  Matrix                  pts(12, 2);
  for (std::size_t i = 0; i < 12; ++i)
  {
    items.push_back({"i" + std::to_string(i), i % 2 ? "x" : "y", {}});
    pts(i, 0) = rng.normal(0.0, 3.0);
    pts(i, 1) = rng.normal(0.0, 1.0);
  }
  auto const out = project_2d(items, pts);
  for (std::size_t i = 0; i < 12; ++i)
    for (std::size_t j = 0; j < 12; ++j)
    {
      double const d_in  = std::hypot(pts(i, 0) - pts(j, 0), pts(i, 1) - pts(j, 1));
      double const d_out = std::hypot(out[i].x - out[j].x, out[i].y - out[j].y);
      EXPECT_NEAR(d_in, d_out, 1e-8);
    }
  EXPECT_THROW(project_2d({items[0], items[1]}, Matrix(2, 2)), ValidationError);
}

TEST(Project2d, RawFeaturesClusterByCategory)
{
  auto const ds     = synth_generate(SynthConfig{});
  auto const labels = *style_labels(ds);
  Matrix     raw(ds.items().size(), ds.feature_dim());
  std::vector<int> cats;
  for (std::size_t i = 0; i < ds.items().size(); ++i)
  {
    std::copy(ds.item(i).features.begin(), ds.item(i).features.end(), raw.row(i).begin());
    cats.push_back(ds.item(i).category.back() - '0');
  }
  EXPECT_GT(silhouette(raw, cats), silhouette(raw, labels));
}

TEST(Project2d, CsvShape)
{
  std::vector<ProjectedPoint> pts{{"a", "x", 2, 1.0, 2.0}, {"b", "y", std::nullopt, 3.0, 4.0}};
  std::ostringstream          out;
  write_projection_csv(out, pts);
  std::string const s = out.str();
  EXPECT_EQ(s.substr(0, s.find('\n')), "id,category,style,x,y");
  EXPECT_NE(s.find("b,y,,"), std::string::npos) << s;
}
