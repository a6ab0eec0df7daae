#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "mspipe/errors.hpp"
#include "mspipe/ringconv.hpp"
#include "mspipe/rng.hpp"
#include "test_util.hpp"

using namespace mspipe;

namespace {

// Reference reflect-101 fold, written independently of the library.
int ref_mirror(int t, int n) {
  if (n == 1) return 0;
  while (t < 0 || t >= n) {
    if (t < 0) t = -t;
    if (t >= n) t = 2 * (n - 1) - t;
  }
  return t;
}

// Direct quadruple-loop convolution oracle.
Plane ref_convolve(const Plane& p, const RingKernel& k) {
  Plane out(p.width, p.height);
  const int kn = k.size();
  for (int y = 0; y < p.height; ++y)
    for (int x = 0; x < p.width; ++x) {
      double acc = 0.0;
      for (int ky = 0; ky < kn; ++ky)
        for (int kx = 0; kx < kn; ++kx) {
          const int sy = ref_mirror(y + ky - k.alpha, p.height);
          const int sx = ref_mirror(x + kx - k.alpha, p.width);
          acc += k.at(kx, ky) * p.at(sx, sy);
        }
      out.at(x, y) = acc;
    }
  return out;
}

Plane random_plane(int w, int h, std::uint64_t seed) {
  Plane p(w, h);
  Rng rng(seed);
  for (double& v : p.v) v = rng.uniform();
  return p;
}

}  // namespace

TEST_CASE("kernel peaks on the ring and is hollow at the center") {
  const RingKernel k = make_ring_kernel(50, 4.0, 0.781);
  const int c = k.alpha;
  const double on_ring = k.at(c + 4, c);
  CHECK(on_ring == *std::max_element(k.values.begin(), k.values.end()));
  // Lattice points at exact ring distance all hit the pre-normalization
  // maximum of 1: compare against (c, c+4) and the diagonal-free axes.
  CHECK(k.at(c, c + 4) == on_ring);
  CHECK(k.at(c - 4, c) == on_ring);
  // value(r=0)/value(r=beta) = exp(-beta^2/sigma^2)
  const double expected = std::exp(-16.0 / (0.781 * 0.781));
  CHECK(k.at(c, c) / on_ring == doctest::Approx(expected).epsilon(1e-9));
}

TEST_CASE("kernel is normalized, symmetric, and radially consistent") {
  const RingKernel k = make_ring_kernel(50, 8.0, 1.56);
  double sum = 0.0;
  for (double v : k.values) {
    CHECK(v >= 0.0);
    sum += v;
  }
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));

  const int n = k.size();
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) {
      CHECK(k.at(x, y) == doctest::Approx(k.at(y, x)).epsilon(1e-12));
      CHECK(k.at(x, y) ==
            doctest::Approx(k.at(n - 1 - y, x)).epsilon(1e-12));  // 90 deg
      CHECK(k.at(x, y) ==
            doctest::Approx(k.at(n - 1 - x, n - 1 - y)).epsilon(1e-12));
    }
}

TEST_CASE("kernel preconditions reject rings that do not fit") {
  CHECK_THROWS_AS(make_ring_kernel(0, 4.0, 1.0), Error);
  CHECK_THROWS_AS(make_ring_kernel(50, 0.0, 1.0), Error);
  CHECK_THROWS_AS(make_ring_kernel(50, 4.0, 0.0), Error);
  CHECK_THROWS_AS(make_ring_kernel(50, 48.0, 2.0), Error);
  CHECK_THROWS_AS(make_ring_kernel(10, 8.0, 4.0), Error);
}

TEST_CASE("default bank carries the four production parameter pairs") {
  const std::vector<RingKernel> bank = make_default_bank();
  REQUIRE(bank.size() == 4);
  const double betas[4] = {4.0, 8.0, 16.0, 32.0};
  const double sigmas[4] = {0.781, 1.56, 3.13, 6.25};
  for (int i = 0; i < 4; ++i) {
    CHECK(bank[i].alpha == 50);
    CHECK(bank[i].beta == betas[i]);
    CHECK(bank[i].sigma == sigmas[i]);
    CHECK(bank[i].size() == 101);
  }
}

TEST_CASE("azimuthal mean profile peaks at beta for every bank kernel") {
  for (const RingKernel& k : make_default_bank()) {
    const std::vector<double> profile = azimuthal_mean_profile(k);
    int argmax = 0;
    for (std::size_t r = 1; r < profile.size(); ++r)
      if (profile[r] > profile[argmax]) argmax = static_cast<int>(r);
    CHECK(std::abs(argmax - k.beta) <= 0.5);
  }
}

TEST_CASE("constant plane convolves to the same constant") {
  const RingKernel k = make_ring_kernel(12, 4.0, 1.0);
  Plane p(20, 17, 3.25);
  Plane out = convolve_plane(p, k);
  for (double v : out.v) CHECK(v == doctest::Approx(3.25).epsilon(1e-12));
}

TEST_CASE("impulse response reproduces the kernel") {
  const RingKernel k = make_ring_kernel(6, 3.0, 1.0);
  Plane p(31, 31, 0.0);
  p.at(15, 15) = 1.0;
  Plane out = convolve_plane(p, k);
  for (int dy = -6; dy <= 6; ++dy)
    for (int dx = -6; dx <= 6; ++dx)
      CHECK(out.at(15 + dx, 15 + dy) ==
            doctest::Approx(k.at(6 + dx, 6 + dy)).epsilon(1e-12));
}

TEST_CASE("convolution matches the quadruple-loop oracle") {
  const Plane p = random_plane(40, 33, 99);
  for (const RingKernel& k :
       {make_ring_kernel(10, 4.0, 1.5), make_ring_kernel(25, 9.0, 2.0)}) {
    const Plane got = convolve_plane(p, k);
    const Plane want = ref_convolve(p, k);
    double worst = 0.0;
    for (std::size_t i = 0; i < got.size(); ++i)
      worst = std::max(worst, std::abs(got.v[i] - want.v[i]));
    CHECK(worst < 1e-9);
  }
}

TEST_CASE("convolution preserves the plane mean on a linear gradient") {
  const RingKernel k = make_ring_kernel(9, 3.0, 1.2);
  Plane p(30, 24);
  for (int y = 0; y < p.height; ++y)
    for (int x = 0; x < p.width; ++x) p.at(x, y) = 0.3 * x - 0.7 * y + 2.0;
  const Plane out = convolve_plane(p, k);
  CHECK(plane_mean(out) == doctest::Approx(plane_mean(p)).epsilon(1e-9));
}

TEST_CASE("feature cube has 40 planes in the documented order") {
  TempDir tmp("ringconv");
  Rng rng(4);
  SpectralCube cube;
  cube.width = 12;
  cube.height = 10;
  cube.normalized = true;
  for (int b = 0; b < kNumBands; ++b) {
    cube.bands[b] = Plane(12, 10);
    for (double& v : cube.bands[b].v) v = rng.uniform();
  }
  cube.pan = Plane(12, 10, 1.0);

  std::vector<RingKernel> bank = {
      make_ring_kernel(4, 1.5, 0.6), make_ring_kernel(4, 2.0, 0.7),
      make_ring_kernel(5, 2.5, 0.8), make_ring_kernel(6, 3.0, 0.9)};
  FeatureCube fc = build_feature_cube(cube, bank);
  REQUIRE(fc.planes.size() == 40);

  // Raw bands first, each convolution response at 8 + 4*band + kernel.
  for (int b = 0; b < kNumBands; ++b) CHECK(fc.planes[b].v == cube.bands[b].v);
  for (int b = 0; b < kNumBands; ++b)
    for (int k = 0; k < 4; ++k) {
      const Plane want = convolve_plane(cube.bands[b], bank[k]);
      const Plane& got = fc.planes[feature_plane_index(b, k)];
      for (std::size_t i = 0; i < want.size(); ++i)
        CHECK(got.v[i] == doctest::Approx(want.v[i]).epsilon(1e-12));
    }

  // Per-pixel vector equals raw spectrum plus responses.
  std::vector<double> feat;
  fc.pixel_features(3, 7, feat);
  REQUIRE(feat.size() == 40);
  for (int b = 0; b < kNumBands; ++b) CHECK(feat[b] == cube.bands[b].at(3, 7));

  // Disk round trip via the planar container.
  save_feature_cube(fc, tmp.path / "s.feat");
  FeatureCube back = load_feature_cube(tmp.path / "s.feat");
  REQUIRE(back.planes.size() == 40);
  CHECK(back.width == fc.width);
}

TEST_CASE("feature cube rejects unnormalized input") {
  SpectralCube cube;
  cube.width = 4;
  cube.height = 4;
  cube.normalized = false;
  for (int b = 0; b < kNumBands; ++b) cube.bands[b] = Plane(4, 4, 1.0);
  cube.pan = Plane(4, 4, 1.0);
  CHECK_THROWS_AS(build_feature_cube(cube, make_default_bank()), Error);
}

TEST_CASE("constant cube yields constant feature planes of the band value") {
  SpectralCube cube;
  cube.width = 8;
  cube.height = 8;
  cube.normalized = true;
  for (int b = 0; b < kNumBands; ++b)
    cube.bands[b] = Plane(8, 8, 0.1 * (b + 1));
  cube.pan = Plane(8, 8, 1.0);
  std::vector<RingKernel> bank = {
      make_ring_kernel(3, 1.2, 0.5), make_ring_kernel(3, 1.4, 0.6),
      make_ring_kernel(4, 1.6, 0.7), make_ring_kernel(4, 1.8, 0.8)};
  FeatureCube fc = build_feature_cube(cube, bank);
  for (int b = 0; b < kNumBands; ++b)
    for (int k = 0; k < 4; ++k)
      for (double v : fc.planes[feature_plane_index(b, k)].v)
        CHECK(v == doctest::Approx(0.1 * (b + 1)).epsilon(1e-12));
}

TEST_CASE("feature extraction is linear in the cube") {
  auto make = [](std::uint64_t seed) {
    SpectralCube cube;
    cube.width = 9;
    cube.height = 9;
    cube.normalized = true;
    Rng rng(seed);
    for (int b = 0; b < kNumBands; ++b) {
      cube.bands[b] = Plane(9, 9);
      for (double& v : cube.bands[b].v) v = rng.uniform();
    }
    cube.pan = Plane(9, 9, 1.0);
    return cube;
  };
  SpectralCube a = make(1), b = make(2), mix = make(3);
  const double ca = 2.0, cb = -0.5;
  for (int band = 0; band < kNumBands; ++band)
    for (std::size_t i = 0; i < mix.bands[band].v.size(); ++i)
      mix.bands[band].v[i] = ca * a.bands[band].v[i] + cb * b.bands[band].v[i];

  std::vector<RingKernel> bank = {
      make_ring_kernel(3, 1.2, 0.5), make_ring_kernel(3, 1.4, 0.6),
      make_ring_kernel(4, 1.6, 0.7), make_ring_kernel(4, 1.8, 0.8)};
  FeatureCube fa = build_feature_cube(a, bank);
  FeatureCube fb = build_feature_cube(b, bank);
  FeatureCube fm = build_feature_cube(mix, bank);
  for (int p = 0; p < kFeatureCount; ++p)
    for (std::size_t i = 0; i < fm.planes[p].v.size(); ++i)
      CHECK(fm.planes[p].v[i] ==
            doctest::Approx(ca * fa.planes[p].v[i] + cb * fb.planes[p].v[i])
                .epsilon(1e-9));
}

TEST_CASE("kernel dump writes a loadable planar file") {
  TempDir tmp("ringconv");
  const RingKernel k = make_ring_kernel(8, 3.0, 1.0);
  save_kernel(k, tmp.path / "k.img");
  PlanarImage img = load_planar(tmp.path / "k.img");
  CHECK(img.width == k.size());
  CHECK(img.extra.at("beta").get<double>() == 3.0);
}
