#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "scgan/ground_cost.hpp"
#include "scgan/numcore/matrix.hpp"

namespace scgan {

/// Coupling between two uniform point clouds.
struct TransportPlan
{
  Matrix gamma;  ///< n x m, rows sum to a, columns to b
  Vector a;
  Vector b;
  double cost = 0.0;
};

struct SinkhornResult
{
  double        cost = 0.0;  ///< <gamma, C>, without the entropy term
  TransportPlan plan;
  bool          converged       = false;
  std::size_t   iterations      = 0;
  double        marginal_error  = 0.0;
};

inline constexpr std::size_t kExactEmdMaxPoints = 256;

/// Pairwise ground-cost matrix between the rows of xs and ys.
inline Matrix cost_matrix(Matrix const &xs, Matrix const &ys, GroundCost ground)
{
  if (xs.cols() != ys.cols())
  {
    throw ShapeError("cost_matrix: point dims " + std::to_string(xs.cols()) + " vs " +
                     std::to_string(ys.cols()));
  }
  Matrix c(xs.rows(), ys.rows());
  for (std::size_t i = 0; i < xs.rows(); ++i)
  {
    for (std::size_t j = 0; j < ys.rows(); ++j)
    {
      double const d2 = squared_distance(xs.row(i), ys.row(j));
      c(i, j)         = ground == GroundCost::euclidean ? std::sqrt(d2) : d2;
    }
  }
  return c;
}

inline double median(std::vector<double> values)
{
  if (values.empty())
  {
    throw ValidationError("median of empty set");
  }
  auto const mid = values.begin() + static_cast<std::ptrdiff_t>(values.size() / 2);
  std::nth_element(values.begin(), mid, values.end());
  double hi = *mid;
  if (values.size() % 2 == 1)
  {
    return hi;
  }
  double lo = *std::max_element(values.begin(), mid);
  return 0.5 * (lo + hi);
}

/// Minimum-cost perfect matching on a square cost matrix (Hungarian method with
/// potentials, O(n^3)). Returns column assigned to each row.
inline std::vector<std::size_t> hungarian(Matrix const &cost)
{
  std::size_t const n = cost.rows();
  if (cost.cols() != n)
  {
    throw ShapeError("hungarian: cost matrix must be square, got " + cost.shape_string());
  }
  double const inf = std::numeric_limits<double>::infinity();
  // 1-based: index 0 is the virtual starting column
  std::vector<double>      u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i)
  {
    p[0]           = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char>   used(n + 1, 0);
    do
    {
      used[j0]        = 1;
      std::size_t i0  = p[j0];
      double      delta = inf;
      std::size_t j1    = 0;
      for (std::size_t j = 1; j <= n; ++j)
      {
        if (used[j])
        {
          continue;
        }
        double const cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j])
        {
          minv[j] = cur;
          way[j]  = j0;
        }
        if (minv[j] < delta)
        {
          delta = minv[j];
          j1    = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j)
      {
        if (used[j])
        {
          u[p[j]] += delta;
          v[j] -= delta;
        }
        else
        {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do
    {
      std::size_t const j1 = way[j0];
      p[j0]                = p[j1];
      j0                   = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> assignment(n);
  for (std::size_t j = 1; j <= n; ++j)
  {
    assignment[p[j] - 1] = j - 1;
  }
  return assignment;
}

namespace detail {

/// Transportation problem with integer supplies/demands by successive shortest
/// paths (Dijkstra with Johnson potentials). Returns the flow matrix.
inline Matrix min_cost_transport(Matrix const &cost, long supply_each, long demand_each)
{
  std::size_t const n = cost.rows();
  std::size_t const m = cost.cols();
  std::size_t const nodes  = n + m + 2;
  std::size_t const source = n + m;
  std::size_t const sink   = n + m + 1;

  struct Edge
  {
    std::size_t to;
    long        cap;
    double      cost;
  };
  std::vector<Edge>                     edges;
  std::vector<std::vector<std::size_t>> adj(nodes);
  auto add_edge = [&](std::size_t from, std::size_t to, long cap, double c) {
    adj[from].push_back(edges.size());
    edges.push_back({to, cap, c});
    adj[to].push_back(edges.size());
    edges.push_back({from, 0, -c});
  };
  for (std::size_t i = 0; i < n; ++i)
  {
    add_edge(source, i, supply_each, 0.0);
  }
  long const big = supply_each * static_cast<long>(n);
  std::vector<std::size_t> cell_edge(n * m);
  for (std::size_t i = 0; i < n; ++i)
  {
    for (std::size_t j = 0; j < m; ++j)
    {
      cell_edge[i * m + j] = edges.size();
      add_edge(i, n + j, big, cost(i, j));
    }
  }
  for (std::size_t j = 0; j < m; ++j)
  {
    add_edge(n + j, sink, demand_each, 0.0);
  }

  double const             inf = std::numeric_limits<double>::infinity();
  std::vector<double>      potential(nodes, 0.0);
  std::vector<double>      dist(nodes);
  std::vector<std::size_t> prev_edge(nodes);
  long                     remaining = big;
  while (remaining > 0)
  {
    std::fill(dist.begin(), dist.end(), inf);
    std::vector<char> done(nodes, 0);
    dist[source] = 0.0;
    // dense Dijkstra: the graph is nearly complete bipartite
    for (;;)
    {
      std::size_t u    = nodes;
      double      best = inf;
      for (std::size_t k = 0; k < nodes; ++k)
      {
        if (!done[k] && dist[k] < best)
        {
          best = dist[k];
          u    = k;
        }
      }
      if (u == nodes)
      {
        break;
      }
      done[u] = 1;
      for (std::size_t e : adj[u])
      {
        auto const &ed = edges[e];
        if (ed.cap <= 0)
        {
          continue;
        }
        double const nd = dist[u] + ed.cost + potential[u] - potential[ed.to];
        if (nd < dist[ed.to] - 1e-15)
        {
          dist[ed.to]      = nd;
          prev_edge[ed.to] = e;
        }
      }
    }
    if (!std::isfinite(dist[sink]))
    {
      throw std::logic_error("min_cost_transport: infeasible");
    }
    for (std::size_t k = 0; k < nodes; ++k)
    {
      if (std::isfinite(dist[k]))
      {
        potential[k] += dist[k];
      }
    }
    long push = remaining;
    for (std::size_t v = sink; v != source; v = edges[prev_edge[v] ^ 1U].to)
    {
      push = std::min(push, edges[prev_edge[v]].cap);
    }
    for (std::size_t v = sink; v != source; v = edges[prev_edge[v] ^ 1U].to)
    {
      edges[prev_edge[v]].cap -= push;
      edges[prev_edge[v] ^ 1U].cap += push;
    }
    remaining -= push;
  }

  Matrix flow(n, m);
  for (std::size_t i = 0; i < n; ++i)
  {
    for (std::size_t j = 0; j < m; ++j)
    {
      flow(i, j) = static_cast<double>(edges[cell_edge[i * m + j] ^ 1U].cap);
    }
  }
  return flow;
}

inline void require_point_sets(Matrix const &xs, Matrix const &ys, char const *what)
{
  if (xs.rows() == 0 || ys.rows() == 0)
  {
    throw ValidationError(std::string(what) + ": empty point set");
  }
  if (xs.cols() != ys.cols())
  {
    throw ShapeError(std::string(what) + ": point dims differ");
  }
}

}  // namespace detail

/// Exact optimal transport between uniform point clouds (rows of xs, ys).
/// Equal sizes reduce to an assignment problem; otherwise a min-cost flow.
inline TransportPlan exact_emd(Matrix const &xs, Matrix const &ys,
                               GroundCost ground = GroundCost::euclidean)
{
  detail::require_point_sets(xs, ys, "exact_emd");
  std::size_t const n = xs.rows();
  std::size_t const m = ys.rows();
  if (n > kExactEmdMaxPoints || m > kExactEmdMaxPoints)
  {
    throw ValidationError("exact_emd: at most " + std::to_string(kExactEmdMaxPoints) +
                          " points per side");
  }
  Matrix const  c = cost_matrix(xs, ys, ground);
  TransportPlan plan;
  plan.a     = Vector(n, 1.0 / static_cast<double>(n));
  plan.b     = Vector(m, 1.0 / static_cast<double>(m));
  plan.gamma = Matrix(n, m);
  if (n == m)
  {
    auto const assignment = hungarian(c);
    for (std::size_t i = 0; i < n; ++i)
    {
      plan.gamma(i, assignment[i]) = 1.0 / static_cast<double>(n);
    }
  }
  else
  {
    Matrix const flow  = detail::min_cost_transport(c, static_cast<long>(m), static_cast<long>(n));
    double const total = static_cast<double>(n * m);
    for (std::size_t k = 0; k < flow.size(); ++k)
    {
      plan.gamma.data()[k] = flow.data()[k] / total;
    }
  }
  for (std::size_t k = 0; k < c.size(); ++k)
  {
    plan.cost += plan.gamma.data()[k] * c.data()[k];
  }
  return plan;
}

/// Log-domain Sinkhorn on a precomputed cost matrix with uniform marginals.
inline SinkhornResult sinkhorn_cost_matrix(Matrix const &c, double reg, std::size_t max_iter,
                                           double tol)
{
  if (!(reg > 0.0))
  {
    throw ValidationError("sinkhorn: reg must be positive");
  }
  std::size_t const n = c.rows();
  std::size_t const m = c.cols();
  if (n == 0 || m == 0)
  {
    throw ValidationError("sinkhorn: empty point set");
  }
  double const log_a = -std::log(static_cast<double>(n));
  double const log_b = -std::log(static_cast<double>(m));
  Vector       f(n, 0.0), g(m, 0.0);
  Vector       scratch(std::max(n, m));

  auto lse = [](std::span<const double> vals) {
    double const hi = *std::max_element(vals.begin(), vals.end());
    if (!std::isfinite(hi))
    {
      return hi;
    }
    double acc = 0.0;
    for (double v : vals)
    {
      acc += std::exp(v - hi);
    }
    return hi + std::log(acc);
  };

  SinkhornResult res;
  for (std::size_t it = 0; it < max_iter; ++it)
  {
    for (std::size_t i = 0; i < n; ++i)
    {
      for (std::size_t j = 0; j < m; ++j)
      {
        scratch[j] = (g[j] - c(i, j)) / reg;
      }
      f[i] = reg * (log_a - lse({scratch.data(), m}));
    }
    for (std::size_t j = 0; j < m; ++j)
    {
      for (std::size_t i = 0; i < n; ++i)
      {
        scratch[i] = (f[i] - c(i, j)) / reg;
      }
      g[j] = reg * (log_b - lse({scratch.data(), n}));
    }
    double err = 0.0;
    for (std::size_t i = 0; i < n; ++i)
    {
      double row = 0.0;
      for (std::size_t j = 0; j < m; ++j)
      {
        row += std::exp((f[i] + g[j] - c(i, j)) / reg);
      }
      err += std::abs(row - std::exp(log_a));
    }
    res.iterations     = it + 1;
    res.marginal_error = err;
    if (err < tol)
    {
      res.converged = true;
      break;
    }
  }

  res.plan.a     = Vector(n, std::exp(log_a));
  res.plan.b     = Vector(m, std::exp(log_b));
  res.plan.gamma = Matrix(n, m);
  for (std::size_t i = 0; i < n; ++i)
  {
    for (std::size_t j = 0; j < m; ++j)
    {
      double const gij     = std::exp((f[i] + g[j] - c(i, j)) / reg);
      res.plan.gamma(i, j) = gij;
      res.cost += gij * c(i, j);
    }
  }
  res.plan.cost = res.cost;
  return res;
}

/// Entropically regularized transport by log-domain Sinkhorn scaling.
/// Converged once the row-marginal L1 violation drops below tol (columns are
/// exact after each sweep). On non-convergence the last iterate is returned
/// with converged = false.
inline SinkhornResult sinkhorn(Matrix const &xs, Matrix const &ys, double reg, std::size_t max_iter,
                               double tol, GroundCost ground = GroundCost::euclidean)
{
  detail::require_point_sets(xs, ys, "sinkhorn");
  return sinkhorn_cost_matrix(cost_matrix(xs, ys, ground), reg, max_iter, tol);
}

}  // namespace scgan
