#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "adaptvo/image.hpp"

namespace adaptvo::detail {

// Uniform-grid spatial hash for "any point closer than r" queries with r <= cell.
class PointGrid {
 public:
  PointGrid(int width, int height, double cell) : cell_(std::max(cell, 1.0)) {
    cols_ = static_cast<int>(std::ceil(width / cell_)) + 1;
    rows_ = static_cast<int>(std::ceil(height / cell_)) + 1;
    cells_.resize(static_cast<std::size_t>(cols_) * rows_);
  }
  void insert(const Point2& p) { cells_[cell_of(p)].push_back(p); }
  bool any_within(const Point2& p, double radius) const {
    const int cx = clampc(static_cast<int>(std::floor(p.x() / cell_)), cols_);
    const int cy = clampc(static_cast<int>(std::floor(p.y() / cell_)), rows_);
    const double r2 = radius * radius;
    for (int y = std::max(0, cy - 1); y <= std::min(rows_ - 1, cy + 1); ++y)
      for (int x = std::max(0, cx - 1); x <= std::min(cols_ - 1, cx + 1); ++x)
        for (const Point2& q : cells_[static_cast<std::size_t>(y) * cols_ + x])
          if ((q - p).squaredNorm() < r2) return true;
    return false;
  }

 private:
  static int clampc(int v, int n) { return std::clamp(v, 0, n - 1); }
  std::size_t cell_of(const Point2& p) const {
    const int cx = clampc(static_cast<int>(std::floor(p.x() / cell_)), cols_);
    const int cy = clampc(static_cast<int>(std::floor(p.y() / cell_)), rows_);
    return static_cast<std::size_t>(cy) * cols_ + cx;
  }
  double cell_;
  int cols_ = 0, rows_ = 0;
  std::vector<std::vector<Point2>> cells_;
};

}  // namespace adaptvo::detail
