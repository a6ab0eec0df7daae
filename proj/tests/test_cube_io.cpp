#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "mspipe/cube.hpp"
#include "mspipe/errors.hpp"
#include "mspipe/rng.hpp"
#include "test_util.hpp"

using namespace mspipe;

namespace {

std::string sidecar_json(int w, int h, const std::vector<int>& bands,
                         bool normalized = false) {
  std::string s = "{\"width\":" + std::to_string(w) +
                  ",\"height\":" + std::to_string(h) + ",\"bands\":[";
  for (std::size_t i = 0; i < bands.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(bands[i]);
  }
  s += "],\"has_pan\":true,\"normalized\":";
  s += normalized ? "true" : "false";
  s += "}";
  return s;
}

SpectralCube make_cube(int w, int h, std::uint64_t seed) {
  Rng rng(seed);
  SpectralCube cube;
  cube.width = w;
  cube.height = h;
  for (int b = 0; b < kNumBands; ++b) {
    cube.bands[b] = Plane(w, h);
    for (double& v : cube.bands[b].v) v = rng.uniform(0.05, 2.0);
  }
  cube.pan = Plane(w, h);
  for (double& v : cube.pan.v) v = rng.uniform(0.05, 2.0);
  return cube;
}

}  // namespace

TEST_CASE("constant cube file loads with identity payload") {
  TempDir tmp("cube_io");
  const auto path = tmp.path / "c.cube";
  write_f32(path, std::vector<float>(4 * 4 * 9, 1.0f));
  write_text(tmp.path / "c.cube.json",
             sidecar_json(4, 4, {545, 579, 622, 658, 701, 737, 779, 816}));

  SpectralCube cube = load_cube(path);
  CHECK(cube.width == 4);
  CHECK(cube.height == 4);
  CHECK_FALSE(cube.normalized);
  for (const Plane& p : cube.bands)
    for (double v : p.v) CHECK(v == 1.0);
  for (double v : cube.pan.v) CHECK(v == 1.0);
}

TEST_CASE("payload size mismatch is rejected") {
  TempDir tmp("cube_io");
  const auto path = tmp.path / "c.cube";
  // One row short of the declared 4x4x9.
  write_f32(path, std::vector<float>(4 * 3 * 9, 1.0f));
  write_text(tmp.path / "c.cube.json",
             sidecar_json(4, 4, {545, 579, 622, 658, 701, 737, 779, 816}));
  CHECK_THROWS_AS(load_cube(path), Error);
}

TEST_CASE("missing sidecar is rejected") {
  TempDir tmp("cube_io");
  const auto path = tmp.path / "c.cube";
  write_f32(path, std::vector<float>(16 * 9, 1.0f));
  CHECK_THROWS_AS(load_cube(path), Error);
}

TEST_CASE("non-finite and negative payloads are rejected") {
  TempDir tmp("cube_io");
  const auto path = tmp.path / "c.cube";
  std::vector<float> payload(2 * 2 * 9, 1.0f);
  payload[5] = std::numeric_limits<float>::quiet_NaN();
  write_f32(path, payload);
  write_text(tmp.path / "c.cube.json",
             sidecar_json(2, 2, {545, 579, 622, 658, 701, 737, 779, 816}));
  CHECK_THROWS_AS(load_cube(path), Error);

  payload[5] = -0.5f;
  write_f32(path, payload);
  CHECK_THROWS_AS(load_cube(path), Error);
}

TEST_CASE("reordered sidecar bands are sorted back to ascending wavelength") {
  TempDir tmp("cube_io");
  const auto path = tmp.path / "c.cube";
  // 545 stored last: plane p holds constant value of its band label.
  const std::vector<int> order{579, 622, 658, 701, 737, 779, 816, 545};
  std::vector<float> payload;
  for (int nm : order)
    payload.insert(payload.end(), 4, static_cast<float>(nm));
  payload.insert(payload.end(), 4, 999.0f);  // PAN
  write_f32(path, payload);
  write_text(tmp.path / "c.cube.json", sidecar_json(2, 2, order));

  SpectralCube cube = load_cube(path);
  for (int b = 0; b < kNumBands; ++b)
    CHECK(cube.bands[b].v[0] == doctest::Approx(kWavelengths[b]));
  CHECK(cube.pan.v[0] == doctest::Approx(999.0));

  // Round-trip oracle: saving the sorted cube and re-loading is bit-exact
  // and canonical regardless of the original plane order.
  const auto path2 = tmp.path / "c2.cube";
  save_cube(cube, path2);
  SpectralCube cube2 = load_cube(path2);
  for (int b = 0; b < kNumBands; ++b) CHECK(cube2.bands[b].v == cube.bands[b].v);
  CHECK(cube2.pan.v == cube.pan.v);
}

TEST_CASE("save then load round-trips float32 payloads bit-exactly") {
  TempDir tmp("cube_io");
  SpectralCube cube = make_cube(7, 5, 42);
  const auto path = tmp.path / "c.cube";
  save_cube(cube, path);
  SpectralCube once = load_cube(path);
  save_cube(once, tmp.path / "c2.cube");
  SpectralCube twice = load_cube(tmp.path / "c2.cube");
  for (int b = 0; b < kNumBands; ++b) {
    REQUIRE(once.bands[b].v.size() == twice.bands[b].v.size());
    CHECK(once.bands[b].v == twice.bands[b].v);
  }
  CHECK(once.pan.v == twice.pan.v);
}

TEST_CASE("duplicate or unknown bands are rejected") {
  TempDir tmp("cube_io");
  const auto path = tmp.path / "c.cube";
  write_f32(path, std::vector<float>(2 * 2 * 9, 1.0f));
  write_text(tmp.path / "c.cube.json",
             sidecar_json(2, 2, {545, 545, 622, 658, 701, 737, 779, 816}));
  CHECK_THROWS_AS(load_cube(path), Error);
  write_text(tmp.path / "c.cube.json",
             sidecar_json(2, 2, {500, 579, 622, 658, 701, 737, 779, 816}));
  CHECK_THROWS_AS(load_cube(path), Error);
}

TEST_CASE("coefficients: equal band and PAN patches give 1.0") {
  SpectralCube cube = make_cube(8, 8, 1);
  for (int b = 0; b < kNumBands; ++b) cube.bands[b] = cube.pan;
  NormCoefficients c =
      compute_norm_coefficients(cube, PatchRect{1, 1, 5, 5});
  for (double v : c.c) CHECK(v == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("coefficients: direct quotient of constant planes") {
  SpectralCube cube = make_cube(6, 6, 2);
  for (double& v : cube.pan.v) v = 1.0;
  for (double& v : cube.bands[0].v) v = 0.5;  // 545 nm
  NormCoefficients c = compute_norm_coefficients(cube, PatchRect{0, 0, 6, 6});
  CHECK(c.c[0] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("coefficients match a brute-force mean-ratio oracle") {
  SpectralCube cube = make_cube(16, 12, 3);
  const PatchRect patch{3, 2, 9, 7};
  NormCoefficients got = compute_norm_coefficients(cube, patch);

  for (int b = 0; b < kNumBands; ++b) {
    double band_sum = 0.0, pan_sum = 0.0;
    std::size_t n = 0;
    for (int y = patch.y; y < patch.y + patch.h; ++y)
      for (int x = patch.x; x < patch.x + patch.w; ++x) {
        band_sum += cube.bands[b].at(x, y);
        pan_sum += cube.pan.at(x, y);
        ++n;
      }
    const double expected = (band_sum / n) / (pan_sum / n);
    CHECK(got.c[b] == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("coefficient preconditions") {
  SpectralCube cube = make_cube(4, 4, 4);
  CHECK_THROWS_AS(compute_norm_coefficients(cube, PatchRect{0, 0, 0, 4}), Error);
  CHECK_THROWS_AS(compute_norm_coefficients(cube, PatchRect{2, 2, 4, 4}), Error);
  for (double& v : cube.pan.v) v = 0.0;
  CHECK_THROWS_AS(compute_norm_coefficients(cube, PatchRect{0, 0, 4, 4}), Error);
}

TEST_CASE("normalize: unit coefficients are identity, values divide") {
  SpectralCube cube = make_cube(5, 5, 5);
  NormCoefficients unit;
  unit.c.fill(1.0);
  SpectralCube out = normalize_cube(cube, unit);
  for (int b = 0; b < kNumBands; ++b) CHECK(out.bands[b].v == cube.bands[b].v);
  CHECK(out.normalized);

  NormCoefficients half;
  half.c.fill(1.0);
  half.c[0] = 0.5;
  cube.bands[0].v[0] = 0.4;
  SpectralCube scaled = normalize_cube(cube, half);
  CHECK(scaled.bands[0].v[0] == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(scaled.pan.v == cube.pan.v);
}

TEST_CASE("normalize rejects a second application") {
  SpectralCube cube = make_cube(4, 4, 6);
  NormCoefficients unit;
  unit.c.fill(1.0);
  SpectralCube once = normalize_cube(cube, unit);
  CHECK_THROWS_AS(normalize_cube(once, unit), Error);
}

TEST_CASE("self-calibration: normalized white cube has band means equal PAN") {
  SpectralCube white = make_cube(20, 20, 7);
  const PatchRect patch{4, 4, 10, 10};
  NormCoefficients c = compute_norm_coefficients(white, patch);
  SpectralCube norm = normalize_cube(white, c);
  const double pan_mean = patch_mean(norm.pan, patch);
  for (int b = 0; b < kNumBands; ++b)
    CHECK(patch_mean(norm.bands[b], patch) ==
          doctest::Approx(pan_mean).epsilon(1e-9));

  // Recomputed coefficients on the normalized cube are all 1.
  SpectralCube recal = norm;
  recal.normalized = false;
  NormCoefficients again = compute_norm_coefficients(recal, patch);
  for (double v : again.c) CHECK(v == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("normalization is linear in the cube intensities") {
  SpectralCube cube = make_cube(9, 9, 8);
  NormCoefficients c;
  for (int b = 0; b < kNumBands; ++b) c.c[b] = 0.25 + 0.2 * b;

  SpectralCube scaled = cube;
  const double a = 3.5;
  for (int b = 0; b < kNumBands; ++b)
    for (double& v : scaled.bands[b].v) v *= a;

  SpectralCube n1 = normalize_cube(scaled, c);
  SpectralCube n2 = normalize_cube(cube, c);
  for (int b = 0; b < kNumBands; ++b)
    for (std::size_t i = 0; i < n1.bands[b].v.size(); ++i)
      CHECK(n1.bands[b].v[i] ==
            doctest::Approx(a * n2.bands[b].v[i]).epsilon(1e-9));
}

TEST_CASE("coefficient files round-trip") {
  TempDir tmp("cube_io");
  NormCoefficients c;
  for (int b = 0; b < kNumBands; ++b) c.c[b] = 0.5 + 0.07 * b;
  save_coefficients(c, tmp.path / "coeffs.json");
  NormCoefficients back = load_coefficients(tmp.path / "coeffs.json");
  for (int b = 0; b < kNumBands; ++b) CHECK(back.c[b] == c.c[b]);
}
