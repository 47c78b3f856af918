#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "scgan/errors.hpp"

namespace scgan {

using Vector = std::vector<double>;

/// Dense row-major matrix of doubles.
class Matrix
{
public:
  Matrix() = default;

  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
    : rows_(rows), cols_(cols), data_(rows * cols, fill)
  {}

  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data))
  {
    if (data_.size() != rows_ * cols_)
    {
      throw ShapeError("matrix data length " + std::to_string(data_.size()) + " != " +
                       std::to_string(rows_) + "x" + std::to_string(cols_));
    }
  }

  Matrix(std::initializer_list<std::initializer_list<double>> rows)
  {
    rows_ = rows.size();
    cols_ = rows_ == 0 ? 0 : rows.begin()->size();
    data_.reserve(rows_ * cols_);
    for (auto const &r : rows)
    {
      if (r.size() != cols_)
      {
        throw ShapeError("ragged initializer list");
      }
      data_.insert(data_.end(), r.begin(), r.end());
    }
  }

  static Matrix identity(std::size_t n)
  {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i)
    {
      m(i, i) = 1.0;
    }
    return m;
  }

  static Matrix row_vector(std::span<const double> v)
  {
    return Matrix(1, v.size(), std::vector<double>(v.begin(), v.end()));
  }

  static Matrix column_vector(std::span<const double> v)
  {
    return Matrix(v.size(), 1, std::vector<double>(v.begin(), v.end()));
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double &operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  std::vector<double> const &storage() const noexcept { return data_; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  bool same_shape(Matrix const &o) const noexcept { return rows_ == o.rows_ && cols_ == o.cols_; }

  bool operator==(Matrix const &o) const = default;

  Matrix &operator+=(Matrix const &o)
  {
    require_same_shape(o, "+=");
    for (std::size_t i = 0; i < data_.size(); ++i)
    {
      data_[i] += o.data_[i];
    }
    return *this;
  }

  Matrix &operator-=(Matrix const &o)
  {
    require_same_shape(o, "-=");
    for (std::size_t i = 0; i < data_.size(); ++i)
    {
      data_[i] -= o.data_[i];
    }
    return *this;
  }

  Matrix &operator*=(double s)
  {
    for (auto &v : data_)
    {
      v *= s;
    }
    return *this;
  }

  friend Matrix operator+(Matrix a, Matrix const &b) { return a += b; }
  friend Matrix operator-(Matrix a, Matrix const &b) { return a -= b; }
  friend Matrix operator*(Matrix a, double s) { return a *= s; }
  friend Matrix operator*(double s, Matrix a) { return a *= s; }

  std::string shape_string() const { return std::to_string(rows_) + "x" + std::to_string(cols_); }

  void require_same_shape(Matrix const &o, char const *what) const
  {
    if (!same_shape(o))
    {
      throw ShapeError(std::string(what) + ": shape mismatch " + shape_string() + " vs " +
                       o.shape_string());
    }
  }

private:
  std::size_t         rows_ = 0;
  std::size_t         cols_ = 0;
  std::vector<double> data_;
};

namespace detail {

using EigenRowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline Eigen::Map<const EigenRowMajor> view(Matrix const &m)
{
  return {m.data().data(), static_cast<Eigen::Index>(m.rows()),
          static_cast<Eigen::Index>(m.cols())};
}

inline Eigen::Map<EigenRowMajor> view(Matrix &m)
{
  return {m.data().data(), static_cast<Eigen::Index>(m.rows()),
          static_cast<Eigen::Index>(m.cols())};
}

}  // namespace detail

/// a * b
inline Matrix matmul(Matrix const &a, Matrix const &b)
{
  if (a.cols() != b.rows())
  {
    throw ShapeError("matmul: " + a.shape_string() + " * " + b.shape_string());
  }
  Matrix out(a.rows(), b.cols());
  if (!out.empty() && a.cols() > 0)
  {
    detail::view(out).noalias() = detail::view(a) * detail::view(b);
  }
  return out;
}

/// a * b^T
inline Matrix matmul_nt(Matrix const &a, Matrix const &b)
{
  if (a.cols() != b.cols())
  {
    throw ShapeError("matmul_nt: " + a.shape_string() + " * (" + b.shape_string() + ")^T");
  }
  Matrix out(a.rows(), b.rows());
  if (!out.empty() && a.cols() > 0)
  {
    detail::view(out).noalias() = detail::view(a) * detail::view(b).transpose();
  }
  return out;
}

/// a^T * b
inline Matrix matmul_tn(Matrix const &a, Matrix const &b)
{
  if (a.rows() != b.rows())
  {
    throw ShapeError("matmul_tn: (" + a.shape_string() + ")^T * " + b.shape_string());
  }
  Matrix out(a.cols(), b.cols());
  if (!out.empty() && a.rows() > 0)
  {
    detail::view(out).noalias() = detail::view(a).transpose() * detail::view(b);
  }
  return out;
}

inline Matrix transpose(Matrix const &a)
{
  Matrix out(a.cols(), a.rows());
  for (std::size_t r = 0; r < a.rows(); ++r)
  {
    for (std::size_t c = 0; c < a.cols(); ++c)
    {
      out(c, r) = a(r, c);
    }
  }
  return out;
}

/// Matrix-vector product m * v.
inline Vector matvec(Matrix const &m, std::span<const double> v)
{
  if (m.cols() != v.size())
  {
    throw ShapeError("matvec: " + m.shape_string() + " * vector of dim " +
                     std::to_string(v.size()));
  }
  Vector out(m.rows(), 0.0);
  for (std::size_t r = 0; r < m.rows(); ++r)
  {
    auto   row = m.row(r);
    double acc = 0.0;
    for (std::size_t c = 0; c < m.cols(); ++c)
    {
      acc += row[c] * v[c];
    }
    out[r] = acc;
  }
  return out;
}

inline double frobenius_sq(Matrix const &m)
{
  double acc = 0.0;
  for (double v : m.data())
  {
    acc += v * v;
  }
  return acc;
}

inline double max_abs(Matrix const &m)
{
  double best = 0.0;
  for (double v : m.data())
  {
    best = std::max(best, std::abs(v));
  }
  return best;
}

inline bool all_finite(std::span<const double> values)
{
  return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

inline bool all_finite(Matrix const &m) { return all_finite(m.data()); }

inline double squared_distance(std::span<const double> a, std::span<const double> b)
{
  if (a.size() != b.size())
  {
    throw ShapeError("squared_distance: dim " + std::to_string(a.size()) + " vs " +
                     std::to_string(b.size()));
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
  {
    double const d = a[i] - b[i];
    acc += d * d;
  }
  return acc;
}

/// Stack equally sized rows into a matrix.
inline Matrix stack_rows(std::span<const std::span<const double>> rows, std::size_t cols)
{
  Matrix out(rows.size(), cols);
  for (std::size_t r = 0; r < rows.size(); ++r)
  {
    if (rows[r].size() != cols)
    {
      throw ShapeError("stack_rows: row " + std::to_string(r) + " has dim " +
                       std::to_string(rows[r].size()) + ", expected " + std::to_string(cols));
    }
    std::copy(rows[r].begin(), rows[r].end(), out.row(r).begin());
  }
  return out;
}

}  // namespace scgan
