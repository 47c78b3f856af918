#pragma once

#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "scgan/errors.hpp"
#include "scgan/numcore/matrix.hpp"

namespace scgan {

using json = nlohmann::json;

/// Reads fields out of a JSON object and rejects keys nobody asked for.
class StrictObject
{
public:
  StrictObject(json const &j, std::string path) : j_(j), path_(std::move(path))
  {
    if (!j_.is_object())
    {
      throw ValidationError(path_ + ": expected a JSON object");
    }
  }

  bool has(char const *key) const { return j_.contains(key); }

  /// Leaves `out` untouched when the key is absent.
  template <typename T>
  void get(char const *key, T &out)
  {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end())
    {
      return;
    }
    try
    {
      out = it->template get<T>();
    }
    catch (json::exception const &e)
    {
      throw ValidationError(path_ + "." + key + ": " + e.what());
    }
  }

  json const &child(char const *key)
  {
    seen_.insert(key);
    return j_.at(key);
  }

  std::string field(char const *key) const { return path_ + "." + key; }

  void finish() const
  {
    for (auto const &[k, v] : j_.items())
    {
      if (seen_.count(k) == 0)
      {
        throw ValidationError(path_ + ": unknown key '" + k + "'");
      }
    }
  }

private:
  json const           &j_;
  std::string           path_;
  std::set<std::string> seen_;
};

inline json matrix_to_json(Matrix const &m)
{
  return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", m.storage()}};
}

inline Matrix matrix_from_json(json const &j)
{
  try
  {
    return Matrix(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>(),
                  j.at("data").get<std::vector<double>>());
  }
  catch (json::exception const &e)
  {
    throw ValidationError(std::string("matrix: ") + e.what());
  }
}

}  // namespace scgan
