#include "mspipe/plane.hpp"

#include <algorithm>
#include <cmath>

namespace mspipe {

int mirror_index(int t, int n) {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  t %= period;
  if (t < 0) t += period;
  if (t >= n) t = period - t;
  return t;
}

double plane_min(const Plane& p) {
  return *std::min_element(p.v.begin(), p.v.end());
}

double plane_max(const Plane& p) {
  return *std::max_element(p.v.begin(), p.v.end());
}

double plane_mean(const Plane& p) {
  double s = 0.0;
  for (double x : p.v) s += x;
  return s / static_cast<double>(p.v.size());
}

double patch_mean(const Plane& p, const PatchRect& r) {
  double s = 0.0;
  for (int y = r.y; y < r.y + r.h; ++y)
    for (int x = r.x; x < r.x + r.w; ++x) s += p.at(x, y);
  return s / (static_cast<double>(r.w) * r.h);
}

bool plane_finite(const Plane& p) {
  for (double x : p.v)
    if (!std::isfinite(x)) return false;
  return true;
}

}  // namespace mspipe
