#pragma once

#include <cstddef>
#include <vector>

#include "rpolab/errors.hpp"

namespace rpolab {

// Dense row-major matrix of doubles, indexed by (prompt, response).
struct Grid {
  int rows = 0;
  int cols = 0;
  std::vector<double> v;

  Grid() = default;
  Grid(int r, int c, double fill = 0.0)
      : rows(r), cols(c), v(static_cast<std::size_t>(r) * static_cast<std::size_t>(c), fill) {
    if (r < 0 || c < 0) throw config_error("Grid: negative dimensions");
  }

  double& at(int r, int c) { return v[static_cast<std::size_t>(r) * cols + c]; }
  double at(int r, int c) const { return v[static_cast<std::size_t>(r) * cols + c]; }

  std::size_t size() const { return v.size(); }

  bool same_shape(const Grid& o) const { return rows == o.rows && cols == o.cols; }

  friend bool operator==(const Grid& a, const Grid& b) {
    return a.rows == b.rows && a.cols == b.cols && a.v == b.v;
  }
};

}  // namespace rpolab
