#pragma once

#include <string>

#include "scgan/numcore/matrix.hpp"

namespace scgan {

/// One catalogue item: identifier, category and raw feature vector.
struct ItemRecord
{
  std::string id;
  std::string category;
  Vector      features;

  bool operator==(ItemRecord const &) const = default;
};

/// Unordered compatible pair, stored as item indices into a Dataset.
struct ItemPair
{
  std::size_t a = 0;
  std::size_t b = 0;

  bool operator==(ItemPair const &) const = default;
};

}  // namespace scgan
