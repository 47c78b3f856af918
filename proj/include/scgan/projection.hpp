#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "scgan/baselines.hpp"
#include "scgan/format.hpp"

namespace scgan {

struct ProjectedPoint
{
  std::string        id;
  std::string        category;
  std::optional<int> style;
  double             x = 0.0;
  double             y = 0.0;
};

/// PCA of `vectors` (one row per item, same order as `items`) down to two
/// dimensions. `styles`, when given, is carried through per item.
inline std::vector<ProjectedPoint> project_2d(std::vector<ItemRecord> const &items, Matrix const &vectors,
                                              std::optional<std::vector<int>> const &styles = std::nullopt)
{
  if (vectors.rows() != items.size())
  {
    throw ShapeError("project_2d: " + std::to_string(vectors.rows()) + " vectors for " +
                     std::to_string(items.size()) + " items");
  }
  if (items.size() < 3)
  {
    throw ValidationError("project_2d: need at least 3 points");
  }
  if (vectors.cols() < 2)
  {
    throw ValidationError("project_2d: vectors must have at least 2 dimensions");
  }
  if (styles && styles->size() != items.size())
  {
    throw ShapeError("project_2d: style label count does not match items");
  }
  PcaModel const pca    = pca_fit(vectors, 2);
  Matrix const   coords = pca_transform(pca, vectors);
  std::vector<ProjectedPoint> out(items.size());
  for (std::size_t i = 0; i < items.size(); ++i)
  {
    out[i].id       = items[i].id;
    out[i].category = items[i].category;
    out[i].style    = styles ? std::optional<int>((*styles)[i]) : std::nullopt;
    out[i].x        = coords(i, 0);
    out[i].y        = coords.cols() > 1 ? coords(i, 1) : 0.0;
  }
  return out;
}

/// Style vectors of every item under `bank`, in dataset order.
inline Matrix style_vectors(Dataset const &ds, GeneratorBank const &bank)
{
  Matrix out(ds.items().size(), bank.style_dim());
  for (std::size_t i = 0; i < ds.items().size(); ++i)
  {
    auto const v = project(ds.item(i), bank);
    std::copy(v.begin(), v.end(), out.row(i).begin());
  }
  return out;
}

inline void write_projection_csv(std::ostream &out, std::vector<ProjectedPoint> const &points)
{
  out << "id,category,style,x,y\n";
  for (auto const &p : points)
  {
    out << p.id << ',' << p.category << ',' << (p.style ? std::to_string(*p.style) : std::string()) << ','
        << format_number(p.x) << ',' << format_number(p.y) << '\n';
  }
}

namespace detail {

inline std::string palette(std::size_t k)
{
  static char const *const colors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                       "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
  return colors[k % (sizeof colors / sizeof colors[0])];
}

}  // namespace detail

/// Scatter plot: fill color by category, outline color by style when known.
inline void write_projection_svg(std::ostream &out, std::vector<ProjectedPoint> const &points,
                                 std::string const &title = {})
{
  double const size = 600.0, margin = 30.0;
  double xmin = points.front().x, xmax = xmin, ymin = points.front().y, ymax = ymin;
  std::vector<std::string> cats;
  for (auto const &p : points)
  {
    xmin = std::min(xmin, p.x);
    xmax = std::max(xmax, p.x);
    ymin = std::min(ymin, p.y);
    ymax = std::max(ymax, p.y);
    cats.push_back(p.category);
  }
  std::sort(cats.begin(), cats.end());
  cats.erase(std::unique(cats.begin(), cats.end()), cats.end());
  double const span_x = xmax > xmin ? xmax - xmin : 1.0;
  double const span_y = ymax > ymin ? ymax - ymin : 1.0;

  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size << "\" height=\"" << size << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (!title.empty())
  {
    out << "<text x=\"" << margin << "\" y=\"20\" font-family=\"sans-serif\" font-size=\"14\">" << title
        << "</text>\n";
  }
  for (auto const &p : points)
  {
    double const cx = margin + (p.x - xmin) / span_x * (size - 2 * margin);
    double const cy = size - margin - (p.y - ymin) / span_y * (size - 2 * margin);
    auto const   c  = static_cast<std::size_t>(std::lower_bound(cats.begin(), cats.end(), p.category) - cats.begin());
    out << "<circle cx=\"" << format_number(cx) << "\" cy=\"" << format_number(cy) << "\" r=\"3\" fill=\""
        << detail::palette(c) << "\"";
    if (p.style)
    {
      out << " stroke=\"" << detail::palette(static_cast<std::size_t>(*p.style) + 5) << "\" stroke-width=\"1\"";
    }
    out << "><title>" << p.id << "</title></circle>\n";
  }
  out << "</svg>\n";
}

}  // namespace scgan
