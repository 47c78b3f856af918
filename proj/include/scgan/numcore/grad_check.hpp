#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "scgan/numcore/random.hpp"
#include "scgan/numcore/tape.hpp"

namespace scgan {

/// Builds a scalar loss on `tape` from the given parameter handles.
using TapeLoss = std::function<Var(Tape &tape, std::span<const Var> params)>;

struct GradCheckResult
{
  double                     max_relative_error = 0.0;
  std::size_t                worst_param        = 0;
  std::size_t                worst_entry        = 0;
  std::size_t                entries_checked    = 0;
  std::size_t                entries_below_noise = 0;  ///< analytic and numeric both within rounding noise of 0
  std::optional<std::size_t> non_finite_param;  ///< set when the loss went NaN/Inf

  bool ok(double tol) const { return !non_finite_param && max_relative_error < tol; }
};

struct GradCheckOptions
{
  double        eps                 = 1e-5;
  std::size_t   max_entries_per_param = 0;  ///< 0 checks every entry
  std::uint64_t seed                = 0;
};

/// Compares tape gradients with central differences
/// |analytic - numeric| / max(|analytic|, |numeric|, 1e-8), maximized over entries.
/// Entries where both values are below the rounding noise of the difference
/// quotient are counted in entries_below_noise and not scored.
inline GradCheckResult grad_check(TapeLoss const &loss, std::vector<Matrix> params,
                                  GradCheckOptions const &opts = {})
{
  if (!(opts.eps > 0.0 && opts.eps <= 1e-3))
  {
    throw ValidationError("grad_check: eps must be in (0, 1e-3]");
  }

  auto evaluate = [&](std::vector<Matrix> const &ps) {
    Tape             tape;
    std::vector<Var> vars;
    vars.reserve(ps.size());
    for (auto const &p : ps)
    {
      vars.push_back(tape.constant(p));
    }
    return tape.scalar(loss(tape, vars));
  };

  GradCheckResult result;

  Tape             tape;
  std::vector<Var> vars;
  for (auto const &p : params)
  {
    vars.push_back(tape.parameter(p));
  }
  Var out = loss(tape, vars);
  if (!std::isfinite(tape.scalar(out)))
  {
    result.non_finite_param = 0;
    return result;
  }
  tape.backward(out);

  Rng rng(opts.seed);
  for (std::size_t pi = 0; pi < params.size(); ++pi)
  {
    Matrix const analytic = tape.grad(vars[pi]);

    std::vector<std::size_t> entries(params[pi].size());
    for (std::size_t i = 0; i < entries.size(); ++i)
    {
      entries[i] = i;
    }
    if (opts.max_entries_per_param != 0 && entries.size() > opts.max_entries_per_param)
    {
      rng.shuffle(entries);
      entries.resize(opts.max_entries_per_param);
    }

    for (std::size_t e : entries)
    {
      double const orig = params[pi].data()[e];
      params[pi].data()[e] = orig + opts.eps;
      double const up      = evaluate(params);
      params[pi].data()[e] = orig - opts.eps;
      double const down    = evaluate(params);
      params[pi].data()[e] = orig;

      if (!std::isfinite(up) || !std::isfinite(down))
      {
        result.non_finite_param = pi;
        return result;
      }
      double const numeric = (up - down) / (2.0 * opts.eps);
      double const a       = analytic.data()[e];
      ++result.entries_checked;
      // rounding in up - down alone puts this much noise on the quotient; an
      // entry where both sides sit below it is a zero the difference cannot resolve
      double const noise = 8.0 * std::numeric_limits<double>::epsilon() *
                           std::max({std::abs(up), std::abs(down), 1.0}) / (2.0 * opts.eps);
      if (std::max(std::abs(a), std::abs(numeric)) <= noise)
      {
        ++result.entries_below_noise;
        continue;
      }
      double const denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
      double const rel   = std::abs(a - numeric) / denom;
      if (rel > result.max_relative_error)
      {
        result.max_relative_error = rel;
        result.worst_param        = pi;
        result.worst_entry        = e;
      }
    }
  }
  return result;
}

}  // namespace scgan
