#pragma once

#include <filesystem>
#include <vector>

#include "mspipe/cube.hpp"
#include "mspipe/plane.hpp"

namespace mspipe {

/// Ring-shaped convolution kernel with a Gaussian radial profile:
/// pre-normalization value at offset r from the center is
/// exp(-(r - beta)^2 / sigma^2), then the kernel is scaled to unit sum.
/// Support is (2*alpha+1) x (2*alpha+1) with an exact integer center.
struct RingKernel {
  int alpha = 0;
  double beta = 0.0;
  double sigma = 0.0;
  std::vector<double> values;  // row-major, unit sum

  int size() const { return 2 * alpha + 1; }
  double at(int x, int y) const {
    return values[static_cast<std::size_t>(y) * size() + x];
  }
};

RingKernel make_ring_kernel(int alpha, double beta, double sigma);

/// The four production kernels: alpha = 50 with (beta, sigma) pairs
/// (4, 0.781), (8, 1.56), (16, 3.13), (32, 6.25).
std::vector<RingKernel> make_default_bank();

/// "Same"-size spatial convolution with reflect-101 border handling.
Plane convolve_plane(const Plane& plane, const RingKernel& kernel);

/// Mean kernel value at each integer radius bin (bin r covers distances
/// rounding to r); used to locate the ring peak.
std::vector<double> azimuthal_mean_profile(const RingKernel& kernel);

/// Per-pixel feature stack of 40 planes: the 8 normalized bands in
/// wavelength order, then the convolution responses at plane index
/// 8 + 4*band + kernel.
struct FeatureCube {
  int width = 0;
  int height = 0;
  std::vector<Plane> planes;

  void pixel_features(int x, int y, std::vector<double>& out) const {
    out.resize(planes.size());
    for (std::size_t p = 0; p < planes.size(); ++p) out[p] = planes[p].at(x, y);
  }
};

inline constexpr int kFeatureCount = 40;
inline int feature_plane_index(int band, int kernel) {
  return kNumBands + 4 * band + kernel;
}

FeatureCube build_feature_cube(const SpectralCube& cube,
                               const std::vector<RingKernel>& bank,
                               int jobs = 1);

FeatureCube load_feature_cube(const std::filesystem::path& path);
void save_feature_cube(const FeatureCube& fcube,
                       const std::filesystem::path& path);

/// Kernel dump in the planar sidecar format, for visual inspection.
void save_kernel(const RingKernel& kernel, const std::filesystem::path& path);

}  // namespace mspipe
