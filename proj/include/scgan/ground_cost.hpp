#pragma once

#include "scgan/json_util.hpp"

namespace scgan {

enum class GroundCost
{
  euclidean,
  squared_euclidean,
};

NLOHMANN_JSON_SERIALIZE_ENUM(GroundCost, {{GroundCost::euclidean, "euclidean"},
                                          {GroundCost::squared_euclidean, "squared_euclidean"}})

}  // namespace scgan
