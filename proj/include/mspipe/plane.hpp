#pragma once

#include <cstddef>
#include <vector>

namespace mspipe {

/// Single-channel real-valued image plane, row-major.
struct Plane {
  int width = 0;
  int height = 0;
  std::vector<double> v;

  Plane() = default;
  Plane(int w, int h, double fill = 0.0)
      : width(w), height(h), v(static_cast<std::size_t>(w) * h, fill) {}

  double& at(int x, int y) { return v[static_cast<std::size_t>(y) * width + x]; }
  double at(int x, int y) const { return v[static_cast<std::size_t>(y) * width + x]; }
  std::size_t size() const { return v.size(); }
};

/// Axis-aligned pixel rectangle, x/y is the top-left corner.
struct PatchRect {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;
};

/// Reflect-101 index fold: mirrors around the edge samples without
/// repeating them, iterating for indices further than one period out.
int mirror_index(int t, int n);

double plane_min(const Plane& p);
double plane_max(const Plane& p);
double plane_mean(const Plane& p);
double patch_mean(const Plane& p, const PatchRect& r);
bool plane_finite(const Plane& p);

}  // namespace mspipe
