#include "mspipe/ringconv.hpp"

#include <cmath>
#include <string>

#include "mspipe/errors.hpp"
#include "mspipe/util.hpp"

namespace mspipe {

RingKernel make_ring_kernel(int alpha, double beta, double sigma) {
  if (alpha < 1) fail("kernel alpha must be >= 1");
  if (!(beta > 0.0)) fail("kernel beta must be positive");
  if (!(sigma > 0.0)) fail("kernel sigma must be positive");
  // The ring plus two radial deviations has to fit inside the support,
  // otherwise the peak is clipped by the kernel edge.
  if (beta + 2.0 * sigma > static_cast<double>(alpha))
    fail("ring exceeds kernel support: beta + 2*sigma > alpha");

  RingKernel k;
  k.alpha = alpha;
  k.beta = beta;
  k.sigma = sigma;
  const int n = k.size();
  k.values.resize(static_cast<std::size_t>(n) * n);

  double sum = 0.0;
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      const double dx = static_cast<double>(x - alpha);
      const double dy = static_cast<double>(y - alpha);
      const double r = std::sqrt(dx * dx + dy * dy);
      const double d = (r - beta) / sigma;
      const double v = std::exp(-d * d);
      k.values[static_cast<std::size_t>(y) * n + x] = v;
      sum += v;
    }
  }
  for (double& v : k.values) v /= sum;
  return k;
}

std::vector<RingKernel> make_default_bank() {
  return {make_ring_kernel(50, 4.0, 0.781), make_ring_kernel(50, 8.0, 1.56),
          make_ring_kernel(50, 16.0, 3.13), make_ring_kernel(50, 32.0, 6.25)};
}

std::vector<double> azimuthal_mean_profile(const RingKernel& kernel) {
  const int n = kernel.size();
  std::vector<double> sum(kernel.alpha + 1, 0.0);
  std::vector<std::size_t> count(kernel.alpha + 1, 0);
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      const double dx = static_cast<double>(x - kernel.alpha);
      const double dy = static_cast<double>(y - kernel.alpha);
      const int r = static_cast<int>(std::lround(std::sqrt(dx * dx + dy * dy)));
      if (r > kernel.alpha) continue;
      sum[r] += kernel.at(x, y);
      count[r] += 1;
    }
  }
  for (std::size_t r = 0; r < sum.size(); ++r)
    if (count[r] > 0) sum[r] /= static_cast<double>(count[r]);
  return sum;
}

Plane convolve_plane(const Plane& plane, const RingKernel& kernel) {
  if (plane.width < 1 || plane.height < 1) fail("empty plane");
  const int a = kernel.alpha;
  const int kn = kernel.size();
  const int w = plane.width;
  const int h = plane.height;

  // Mirror-padded copy so the inner accumulation is a contiguous dot
  // product; rows with only underflowed-to-zero weights are skipped.
  const int pw = w + 2 * a;
  const int ph = h + 2 * a;
  std::vector<double> padded(static_cast<std::size_t>(pw) * ph);
  std::vector<int> col_map(pw);
  for (int x = 0; x < pw; ++x) col_map[x] = mirror_index(x - a, w);
  for (int y = 0; y < ph; ++y) {
    const int sy = mirror_index(y - a, h);
    double* dst = padded.data() + static_cast<std::size_t>(y) * pw;
    const double* src = plane.v.data() + static_cast<std::size_t>(sy) * w;
    for (int x = 0; x < pw; ++x) dst[x] = src[col_map[x]];
  }

  struct RowSpan {
    int ky;
    int x0;
    int x1;  // inclusive
  };
  std::vector<RowSpan> spans;
  spans.reserve(kn);
  for (int ky = 0; ky < kn; ++ky) {
    const double* krow = kernel.values.data() + static_cast<std::size_t>(ky) * kn;
    int x0 = 0;
    while (x0 < kn && krow[x0] == 0.0) ++x0;
    if (x0 == kn) continue;
    int x1 = kn - 1;
    while (krow[x1] == 0.0) --x1;
    spans.push_back({ky, x0, x1});
  }

  Plane out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (const RowSpan& s : spans) {
        const double* krow =
            kernel.values.data() + static_cast<std::size_t>(s.ky) * kn + s.x0;
        const double* prow = padded.data() +
                             static_cast<std::size_t>(y + s.ky) * pw + x + s.x0;
        const int len = s.x1 - s.x0 + 1;
        double row_acc = 0.0;
        for (int i = 0; i < len; ++i) row_acc += krow[i] * prow[i];
        acc += row_acc;
      }
      out.at(x, y) = acc;
    }
  }
  return out;
}

FeatureCube build_feature_cube(const SpectralCube& cube,
                               const std::vector<RingKernel>& bank, int jobs) {
  if (!cube.normalized) fail("feature cube requires a normalized cube");
  if (bank.size() != 4) fail("kernel bank must hold 4 kernels");

  FeatureCube fc;
  fc.width = cube.width;
  fc.height = cube.height;
  fc.planes.resize(kFeatureCount);
  for (int b = 0; b < kNumBands; ++b) fc.planes[b] = cube.bands[b];

  parallel_for(static_cast<std::size_t>(kNumBands) * bank.size(), jobs,
               [&](std::size_t task) {
                 const int b = static_cast<int>(task / bank.size());
                 const int k = static_cast<int>(task % bank.size());
                 fc.planes[feature_plane_index(b, k)] =
                     convolve_plane(cube.bands[b], bank[k]);
               });
  return fc;
}

FeatureCube load_feature_cube(const std::filesystem::path& path) {
  PlanarImage img = load_planar(path);
  if (img.has_pan || img.planes.size() != kFeatureCount)
    fail("not a 40-plane feature file: " + path.string());
  FeatureCube fc;
  fc.width = img.width;
  fc.height = img.height;
  fc.planes = std::move(img.planes);
  return fc;
}

void save_feature_cube(const FeatureCube& fcube,
                       const std::filesystem::path& path) {
  PlanarImage img;
  img.width = fcube.width;
  img.height = fcube.height;
  img.has_pan = false;
  img.normalized = true;
  img.planes = fcube.planes;
  for (int i = 0; i < kFeatureCount; ++i)
    img.band_labels.push_back(static_cast<double>(i));
  img.extra["kind"] = "features";
  img.extra["order"] = "8 raw bands, then plane 8 + 4*band + kernel";
  save_planar(img, path);
}

void save_kernel(const RingKernel& kernel, const std::filesystem::path& path) {
  PlanarImage img;
  img.width = kernel.size();
  img.height = kernel.size();
  img.has_pan = false;
  img.normalized = false;
  img.band_labels.push_back(0.0);
  Plane p(kernel.size(), kernel.size());
  p.v = kernel.values;
  img.planes.push_back(std::move(p));
  img.extra["kind"] = "ring_kernel";
  img.extra["alpha"] = kernel.alpha;
  img.extra["beta"] = kernel.beta;
  img.extra["sigma"] = kernel.sigma;
  save_planar(img, path);
}

}  // namespace mspipe
