#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <utility>
#include <vector>

namespace scgan {

inline std::uint64_t splitmix64(std::uint64_t x)
{
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30U)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27U)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31U);
}

/// Seeded generator with distributions spelled out here rather than taken from
/// <random>, whose distribution algorithms differ between standard libraries.
/// Generated datasets are byte-compared against golden digests.
class Rng
{
public:
  explicit Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform()
  {
    return static_cast<double>(engine_() >> 11U) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform index in [0, n). Rejection sampling keeps it unbiased.
  std::size_t index(std::size_t n)
  {
    auto const bound = static_cast<std::uint64_t>(n);
    std::uint64_t const limit = UINT64_MAX - (UINT64_MAX % bound);
    std::uint64_t x = engine_();
    while (x >= limit)
    {
      x = engine_();
    }
    return static_cast<std::size_t>(x % bound);
  }

  /// Standard normal via Box-Muller; the second variate is cached.
  double normal()
  {
    if (has_spare_)
    {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0)
    {
      u1 = uniform();
    }
    double const u2  = uniform();
    double const rad = std::sqrt(-2.0 * std::log(u1));
    double const ang = 2.0 * std::numbers::pi * u2;
    spare_           = rad * std::sin(ang);
    has_spare_       = true;
    return rad * std::cos(ang);
  }

  double normal(double mean, double sigma) { return mean + sigma * normal(); }

  template <typename T>
  void shuffle(std::vector<T> &v)
  {
    for (std::size_t i = v.size(); i > 1; --i)
    {
      std::swap(v[i - 1], v[index(i)]);
    }
  }

private:
  std::mt19937_64 engine_;
  double          spare_     = 0.0;
  bool            has_spare_ = false;
};

}  // namespace scgan
