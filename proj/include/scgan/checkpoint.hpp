#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "scgan/baselines.hpp"
#include "scgan/json_util.hpp"
#include "scgan/model.hpp"

namespace scgan {

inline constexpr char const    *kCheckpointFormat  = "scgan-checkpoint";
inline constexpr int            kCheckpointVersion = 1;
inline constexpr char           kBinaryMagic[8]    = {'S', 'C', 'G', 'A', 'N', 'B', 'I', 'N'};

/// Everything needed to score pairs with one trained method. `method` is one
/// of scgan, lmt, nn, ct; scgan and lmt carry a bank, nn a PCA model and ct a
/// co-occurrence table. `config` is the configuration the model was built with.
struct Checkpoint
{
  std::string                  method = "scgan";
  json                         config = json::object();
  std::optional<GeneratorBank> bank;
  std::optional<Critic>        critic;
  std::optional<PcaModel>      pca;
  std::optional<CoocTable>     cooc;

  bool operator==(Checkpoint const &) const = default;
};

inline PairScorer checkpoint_scorer(Checkpoint const &ckpt)
{
  if (ckpt.bank)
  {
    return bank_scorer(*ckpt.bank);
  }
  if (ckpt.pca)
  {
    return nn_scorer(*ckpt.pca);
  }
  if (ckpt.cooc)
  {
    return ct_scorer(*ckpt.cooc);
  }
  throw ValidationError("checkpoint: method '" + ckpt.method + "' carries no scoring model");
}

namespace detail {

/// Matrices either inline as {rows, cols, data} or, when a blob is given, as
/// {rows, cols, offset} into a flat array of doubles stored after the header.
class MatrixCodec
{
public:
  explicit MatrixCodec(std::vector<double> *blob) : blob_(blob) {}

  json put(Matrix const &m)
  {
    if (!blob_)
    {
      return matrix_to_json(m);
    }
    json j{{"rows", m.rows()}, {"cols", m.cols()}, {"offset", blob_->size()}};
    blob_->insert(blob_->end(), m.storage().begin(), m.storage().end());
    return j;
  }

  json put(Vector const &v) { return put(Matrix::row_vector(v)); }

  Matrix get(json const &j) const
  {
    if (!blob_)
    {
      return matrix_from_json(j);
    }
    try
    {
      std::size_t const rows   = j.at("rows").get<std::size_t>();
      std::size_t const cols   = j.at("cols").get<std::size_t>();
      std::size_t const offset = j.at("offset").get<std::size_t>();
      if (offset > blob_->size() || rows * cols > blob_->size() - offset)
      {
        throw ValidationError("checkpoint: matrix block out of range");
      }
      auto const first = blob_->begin() + static_cast<std::ptrdiff_t>(offset);
      return Matrix(rows, cols, std::vector<double>(first, first + static_cast<std::ptrdiff_t>(rows * cols)));
    }
    catch (json::exception const &e)
    {
      throw ValidationError(std::string("checkpoint: bad matrix block: ") + e.what());
    }
  }

  Vector get_vector(json const &j) const
  {
    Matrix m = get(j);
    if (m.rows() != 1)
    {
      throw ValidationError("checkpoint: expected a row vector");
    }
    return m.storage();
  }

private:
  std::vector<double> *blob_;
};

inline json encode(Checkpoint const &c, MatrixCodec &codec)
{
  json j{{"format", kCheckpointFormat}, {"version", kCheckpointVersion}, {"method", c.method},
         {"config", c.config}};
  if (c.bank)
  {
    json slots = json::array();
    for (std::size_t s = 0; s < c.bank->slot_count(); ++s)
    {
      slots.push_back(codec.put(c.bank->slot_matrix(s)));
    }
    json map = json::object();
    for (auto const &cat : c.bank->categories())
    {
      map[cat] = c.bank->slot(cat);
    }
    j["generators"] = {{"style_dim", c.bank->style_dim()},
                       {"feature_dim", c.bank->feature_dim()},
                       {"shared", c.bank->shared()},
                       {"slot_of", map},
                       {"slots", slots}};
  }
  if (c.critic)
  {
    json layers = json::array();
    for (auto const &l : c.critic->layers)
    {
      layers.push_back({{"weight", codec.put(l.weight)}, {"bias", codec.put(l.bias)}});
    }
    j["critic"] = {{"leaky_slope", c.critic->leaky_slope},
                   {"clip_bound", c.critic->clip_bound},
                   {"layers", layers}};
  }
  if (c.pca)
  {
    j["pca"] = {{"mean", codec.put(c.pca->mean)},
                {"axes", codec.put(c.pca->axes)},
                {"variances", codec.put(c.pca->variances)},
                {"rank_deficient", c.pca->rank_deficient}};
  }
  if (c.cooc)
  {
    json counts = json::array();
    for (auto const &[k, n] : c.cooc->counts())
    {
      counts.push_back({k.first, k.second, n});
    }
    j["cooc"] = {{"categories", c.cooc->categories()}, {"smoothing", c.cooc->smoothing()}, {"counts", counts}};
  }
  return j;
}

inline Checkpoint decode(json const &j, MatrixCodec const &codec)
{
  try
  {
    if (j.at("format").get<std::string>() != kCheckpointFormat)
    {
      throw ValidationError("checkpoint: not a checkpoint document");
    }
    if (j.at("version").get<int>() != kCheckpointVersion)
    {
      throw ValidationError("checkpoint: unsupported version " + j.at("version").dump());
    }
    Checkpoint c;
    c.method = j.at("method").get<std::string>();
    c.config = j.at("config");
    if (j.contains("generators"))
    {
      auto const &g = j.at("generators");
      std::vector<std::string>           cats;
      std::map<std::string, std::size_t> slot_of;
      for (auto const &[cat, s] : g.at("slot_of").items())
      {
        cats.push_back(cat);
        slot_of[cat] = s.get<std::size_t>();
      }
      GeneratorBank bank(g.at("style_dim").get<std::size_t>(), g.at("feature_dim").get<std::size_t>(), cats,
                         g.at("shared").get<bool>());
      auto const &slots = g.at("slots");
      if (slots.size() != bank.slot_count())
      {
        throw ValidationError("checkpoint: generator slot count mismatch");
      }
      for (auto const &[cat, s] : slot_of)
      {
        if (bank.slot(cat) != s)
        {
          throw ValidationError("checkpoint: generator slot map is inconsistent for '" + cat + "'");
        }
      }
      for (std::size_t s = 0; s < slots.size(); ++s)
      {
        Matrix m = codec.get(slots[s]);
        if (m.rows() != bank.style_dim() || m.cols() != bank.feature_dim())
        {
          throw ValidationError("checkpoint: generator " + std::to_string(s) + " is " + m.shape_string());
        }
        bank.slot_matrix(s) = std::move(m);
      }
      c.bank = std::move(bank);
    }
    if (j.contains("critic"))
    {
      auto const &k = j.at("critic");
      Critic      critic;
      critic.leaky_slope = k.at("leaky_slope").get<double>();
      critic.clip_bound  = k.at("clip_bound").get<double>();
      for (auto const &l : k.at("layers"))
      {
        critic.layers.push_back({codec.get(l.at("weight")), codec.get(l.at("bias"))});
      }
      validate_critic(critic);
      c.critic = std::move(critic);
    }
    if (j.contains("pca"))
    {
      auto const &p = j.at("pca");
      PcaModel    pca;
      pca.mean           = codec.get_vector(p.at("mean"));
      pca.axes           = codec.get(p.at("axes"));
      pca.variances      = codec.get_vector(p.at("variances"));
      pca.rank_deficient = p.at("rank_deficient").get<bool>();
      if (pca.axes.cols() != pca.mean.size() || pca.axes.rows() != pca.variances.size())
      {
        throw ValidationError("checkpoint: inconsistent PCA shapes");
      }
      c.pca = std::move(pca);
    }
    if (j.contains("cooc"))
    {
      auto const &t = j.at("cooc");
      CoocTable   table(t.at("categories").get<std::vector<std::string>>(), t.at("smoothing").get<double>());
      for (auto const &row : t.at("counts"))
      {
        table.add(row.at(0).get<std::string>(), row.at(1).get<std::string>(), row.at(2).get<double>());
      }
      c.cooc = std::move(table);
    }
    return c;
  }
  catch (json::exception const &e)
  {
    throw ValidationError(std::string("checkpoint: malformed document: ") + e.what());
  }
}

}  // namespace detail

inline json checkpoint_to_json(Checkpoint const &c)
{
  detail::MatrixCodec codec(nullptr);
  return detail::encode(c, codec);
}

inline Checkpoint checkpoint_from_json(json const &j)
{
  return detail::decode(j, detail::MatrixCodec(nullptr));
}

// Binary layout (little-endian):
//   8 bytes  magic "SCGANBIN"
//   u32      version
//   u64      header length H
//   H bytes  UTF-8 JSON header, matrices given as {rows, cols, offset}
//   u64      number of doubles N
//   N x f64  matrix payload, row-major, in offset order
inline std::string checkpoint_to_binary(Checkpoint const &c)
{
  static_assert(std::endian::native == std::endian::little, "binary checkpoints assume a little-endian host");
  std::vector<double> blob;
  detail::MatrixCodec codec(&blob);
  std::string const   header = detail::encode(c, codec).dump();

  std::string out(kBinaryMagic, sizeof kBinaryMagic);
  auto put = [&out](auto value) {
    char bytes[sizeof value];
    std::memcpy(bytes, &value, sizeof value);
    out.append(bytes, sizeof value);
  };
  put(static_cast<std::uint32_t>(kCheckpointVersion));
  put(static_cast<std::uint64_t>(header.size()));
  out += header;
  put(static_cast<std::uint64_t>(blob.size()));
  out.append(reinterpret_cast<char const *>(blob.data()), blob.size() * sizeof(double));
  return out;
}

inline Checkpoint checkpoint_from_binary(std::string const &bytes)
{
  std::size_t pos  = 0;
  auto        take = [&](std::size_t n) {
    if (bytes.size() - pos < n)
    {
      throw ValidationError("checkpoint: truncated binary file");
    }
    char const *p = bytes.data() + pos;
    pos += n;
    return p;
  };
  auto read_u = [&]<typename T>(T) {
    T v;
    std::memcpy(&v, take(sizeof v), sizeof v);
    return v;
  };
  if (std::memcmp(take(sizeof kBinaryMagic), kBinaryMagic, sizeof kBinaryMagic) != 0)
  {
    throw ValidationError("checkpoint: bad magic");
  }
  if (read_u(std::uint32_t{}) != kCheckpointVersion)
  {
    throw ValidationError("checkpoint: unsupported binary version");
  }
  std::uint64_t const header_len = read_u(std::uint64_t{});
  std::string const   header(take(header_len), header_len);
  std::uint64_t const n = read_u(std::uint64_t{});
  if (n > (bytes.size() - pos) / sizeof(double))
  {
    throw ValidationError("checkpoint: truncated binary payload");
  }
  std::vector<double> blob(n);
  std::memcpy(blob.data(), take(n * sizeof(double)), n * sizeof(double));
  if (pos != bytes.size())
  {
    throw ValidationError("checkpoint: trailing bytes after payload");
  }
  json j;
  try
  {
    j = json::parse(header);
  }
  catch (json::exception const &e)
  {
    throw ValidationError(std::string("checkpoint: bad binary header: ") + e.what());
  }
  return detail::decode(j, detail::MatrixCodec(&blob));
}

inline bool is_binary_path(std::string const &path)
{
  return path.size() >= 4 && path.compare(path.size() - 4, 4, ".bin") == 0;
}

/// Writes JSON, or the binary layout when the path ends in ".bin".
inline void save_checkpoint(Checkpoint const &c, std::string const &path)
{
  std::ofstream out(path, std::ios::binary);
  if (!out)
  {
    throw IoError("cannot write checkpoint '" + path + "'");
  }
  if (is_binary_path(path))
  {
    out << checkpoint_to_binary(c);
  }
  else
  {
    out << checkpoint_to_json(c).dump(1) << '\n';
  }
  if (!out)
  {
    throw IoError("failed writing checkpoint '" + path + "'");
  }
}

inline Checkpoint load_checkpoint(std::string const &path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in)
  {
    throw ValidationError("cannot read checkpoint '" + path + "'");
  }
  std::stringstream buf;
  buf << in.rdbuf();
  std::string const bytes = buf.str();
  if (bytes.size() >= sizeof kBinaryMagic && std::memcmp(bytes.data(), kBinaryMagic, sizeof kBinaryMagic) == 0)
  {
    return checkpoint_from_binary(bytes);
  }
  try
  {
    return checkpoint_from_json(json::parse(bytes));
  }
  catch (json::parse_error const &e)
  {
    throw ValidationError("checkpoint '" + path + "': " + e.what());
  }
}

}  // namespace scgan
