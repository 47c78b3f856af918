#pragma once

#include <cmath>

#include "scgan/numcore/matrix.hpp"
#include "scgan/numcore/random.hpp"

namespace scgan {

inline Matrix random_uniform(std::size_t rows, std::size_t cols, double bound, Rng &rng)
{
  Matrix m(rows, cols);
  for (auto &v : m.data())
  {
    v = rng.uniform(-bound, bound);
  }
  return m;
}

inline Matrix random_normal(std::size_t rows, std::size_t cols, double sigma, Rng &rng)
{
  Matrix m(rows, cols);
  for (auto &v : m.data())
  {
    v = rng.normal(0.0, sigma);
  }
  return m;
}

/// Random matrix with orthonormal rows (rows <= cols) or orthonormal columns
/// (rows > cols), via modified Gram-Schmidt on Gaussian draws.
inline Matrix random_orthonormal(std::size_t rows, std::size_t cols, Rng &rng)
{
  bool const   by_rows = rows <= cols;
  std::size_t  n       = by_rows ? rows : cols;
  std::size_t  dim     = by_rows ? cols : rows;
  Matrix       basis(n, dim);
  for (std::size_t i = 0; i < n; ++i)
  {
    auto v = basis.row(i);
    for (;;)
    {
      for (auto &x : v)
      {
        x = rng.normal();
      }
      // two passes keep the rows orthogonal to machine precision
      for (int pass = 0; pass < 2; ++pass)
      {
        for (std::size_t k = 0; k < i; ++k)
        {
          auto   u   = basis.row(k);
          double dot = 0.0;
          for (std::size_t c = 0; c < dim; ++c)
          {
            dot += u[c] * v[c];
          }
          for (std::size_t c = 0; c < dim; ++c)
          {
            v[c] -= dot * u[c];
          }
        }
      }
      double norm = 0.0;
      for (double x : v)
      {
        norm += x * x;
      }
      norm = std::sqrt(norm);
      if (norm > 1e-8)
      {
        for (auto &x : v)
        {
          x /= norm;
        }
        break;
      }
    }
  }
  return by_rows ? basis : transpose(basis);
}

}  // namespace scgan
