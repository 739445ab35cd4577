#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <vector>

namespace glasshands::detail {

/// Pixel statistics of one connected component; coordinates are pixel centers.
struct Component {
  double area = 0.0;
  double sx = 0.0, sy = 0.0;
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  int x_min = 0, x_max = 0, y_min = 0, y_max = 0;
};

/// Horizontal run of set pixels [x0, x1] on row y.
struct Run {
  int y, x0, x1;
};

/// 4-connected labeling over runs. `rows` holds, for each row from `y0`, the runs in
/// increasing x order.
inline std::vector<Component> label_runs(const std::vector<std::vector<Run>>& rows) {
  std::vector<int> parent;
  std::vector<const Run*> runs;
  auto find = [&](int i) {
    while (parent[i] != i) {
      parent[i] = parent[parent[i]];
      i = parent[i];
    }
    return i;
  };
  int prev_begin = 0, prev_end = 0;
  for (const auto& row : rows) {
    const int begin = static_cast<int>(runs.size());
    int p = prev_begin;
    for (const auto& r : row) {
      const int id = static_cast<int>(runs.size());
      runs.push_back(&r);
      parent.push_back(id);
      while (p < prev_end && runs[p]->x1 < r.x0) ++p;
      for (int q = p; q < prev_end && runs[q]->x0 <= r.x1; ++q) {
        const int a = find(id), b = find(q);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
      }
    }
    prev_begin = begin;
    prev_end = static_cast<int>(runs.size());
  }

  std::vector<int> slot(runs.size(), -1);
  std::vector<Component> out;
  for (size_t i = 0; i < runs.size(); ++i) {
    const int root = find(static_cast<int>(i));
    if (slot[root] < 0) {
      slot[root] = static_cast<int>(out.size());
      Component c;
      c.x_min = runs[i]->x0;
      c.x_max = runs[i]->x1;
      c.y_min = c.y_max = runs[i]->y;
      out.push_back(c);
    }
    Component& c = out[slot[root]];
    const Run& r = *runs[i];
    const double n = r.x1 - r.x0 + 1;
    const double a = r.x0, b = r.x1, y = r.y;
    const double sum_x = n * (a + b) / 2.0;
    // Sum of x^2 for x in [a, b].
    const double sum_x2 = (b * (b + 1) * (2 * b + 1) - (a - 1) * a * (2 * a - 1)) / 6.0;
    c.area += n;
    c.sx += sum_x;
    c.sy += n * y;
    c.sxx += sum_x2;
    c.syy += n * y * y;
    c.sxy += y * sum_x;
    c.x_min = std::min(c.x_min, r.x0);
    c.x_max = std::max(c.x_max, r.x1);
    c.y_min = std::min(c.y_min, r.y);
    c.y_max = std::max(c.y_max, r.y);
  }
  return out;
}

}  // namespace glasshands::detail
