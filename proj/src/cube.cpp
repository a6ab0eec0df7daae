#include "mspipe/cube.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <numeric>

#include "mspipe/errors.hpp"
#include "mspipe/util.hpp"

namespace mspipe {

namespace fs = std::filesystem;
using nlohmann::json;

int wavelength_index(int nm) {
  for (int i = 0; i < kNumBands; ++i)
    if (kWavelengths[i] == nm) return i;
  fail("unknown wavelength: " + std::to_string(nm) + " nm");
}

static fs::path sidecar_path(const fs::path& path) {
  fs::path p = path;
  p += ".json";
  return p;
}

static_assert(std::endian::native == std::endian::little,
              "payload format is little-endian float32");

PlanarImage load_planar(const fs::path& path) {
  const fs::path side = sidecar_path(path);
  if (!fs::exists(side)) fail("missing sidecar: " + side.string());
  json meta = json::parse(read_file(side));

  PlanarImage img;
  img.width = meta.at("width").get<int>();
  img.height = meta.at("height").get<int>();
  img.band_labels = meta.at("bands").get<std::vector<double>>();
  img.has_pan = meta.at("has_pan").get<bool>();
  img.normalized = meta.at("normalized").get<bool>();
  for (auto& [key, value] : meta.items()) {
    if (key != "width" && key != "height" && key != "bands" &&
        key != "has_pan" && key != "normalized")
      img.extra[key] = value;
  }
  if (img.width <= 0 || img.height <= 0)
    fail("sidecar declares non-positive dimensions: " + side.string());

  const std::size_t n_planes = img.band_labels.size() + (img.has_pan ? 1 : 0);
  const std::size_t plane_px =
      static_cast<std::size_t>(img.width) * img.height;
  const std::string payload = read_file(path);
  if (payload.size() != n_planes * plane_px * sizeof(float))
    fail("dimension mismatch: " + path.string() + " holds " +
         std::to_string(payload.size()) + " bytes, sidecar implies " +
         std::to_string(n_planes * plane_px * sizeof(float)));

  const auto* src = reinterpret_cast<const unsigned char*>(payload.data());
  img.planes.reserve(n_planes);
  for (std::size_t p = 0; p < n_planes; ++p) {
    Plane plane(img.width, img.height);
    for (std::size_t i = 0; i < plane_px; ++i) {
      float f;
      std::memcpy(&f, src + (p * plane_px + i) * sizeof(float), sizeof(float));
      plane.v[i] = static_cast<double>(f);
    }
    img.planes.push_back(std::move(plane));
  }
  return img;
}

void save_planar(const PlanarImage& img, const fs::path& path) {
  const std::size_t n_planes = img.band_labels.size() + (img.has_pan ? 1 : 0);
  if (img.planes.size() != n_planes)
    fail("plane count does not match sidecar metadata for " + path.string());
  const std::size_t plane_px =
      static_cast<std::size_t>(img.width) * img.height;

  std::string payload(n_planes * plane_px * sizeof(float), '\0');
  auto* dst = reinterpret_cast<unsigned char*>(payload.data());
  for (std::size_t p = 0; p < n_planes; ++p) {
    if (img.planes[p].width != img.width || img.planes[p].height != img.height)
      fail("plane dimensions differ from image dimensions");
    for (std::size_t i = 0; i < plane_px; ++i) {
      float f = static_cast<float>(img.planes[p].v[i]);
      std::memcpy(dst + (p * plane_px + i) * sizeof(float), &f, sizeof(float));
    }
  }

  json meta = img.extra;
  meta["width"] = img.width;
  meta["height"] = img.height;
  meta["bands"] = img.band_labels;
  meta["has_pan"] = img.has_pan;
  meta["normalized"] = img.normalized;

  atomic_write(path, payload);
  atomic_write(sidecar_path(path), meta.dump(2) + "\n");
}

SpectralCube load_cube(const fs::path& path) {
  PlanarImage img = load_planar(path);
  if (!img.has_pan) fail("cube lacks a PAN plane: " + path.string());
  if (img.band_labels.size() != kNumBands)
    fail("cube must carry exactly 8 band planes, got " +
         std::to_string(img.band_labels.size()));

  SpectralCube cube;
  cube.width = img.width;
  cube.height = img.height;
  cube.normalized = img.normalized;

  std::array<bool, kNumBands> seen{};
  for (std::size_t p = 0; p < img.band_labels.size(); ++p) {
    double label = img.band_labels[p];
    int nm = static_cast<int>(std::lround(label));
    if (static_cast<double>(nm) != label)
      fail("non-integer band label in cube sidecar");
    int idx = wavelength_index(nm);
    if (seen[idx]) fail("duplicate band " + std::to_string(nm) + " nm");
    seen[idx] = true;
    cube.bands[idx] = std::move(img.planes[p]);
  }
  cube.pan = std::move(img.planes.back());

  for (const Plane& plane : cube.bands)
    if (!plane_finite(plane)) fail("non-finite band value in " + path.string());
  if (!plane_finite(cube.pan)) fail("non-finite PAN value in " + path.string());
  for (const Plane& plane : cube.bands)
    for (double x : plane.v)
      if (x < 0.0) fail("negative intensity in " + path.string());
  return cube;
}

void save_cube(const SpectralCube& cube, const fs::path& path) {
  PlanarImage img;
  img.width = cube.width;
  img.height = cube.height;
  img.has_pan = true;
  img.normalized = cube.normalized;
  for (int i = 0; i < kNumBands; ++i) {
    img.band_labels.push_back(kWavelengths[i]);
    img.planes.push_back(cube.bands[i]);
  }
  img.planes.push_back(cube.pan);
  save_planar(img, path);
}

NormCoefficients compute_norm_coefficients(const SpectralCube& white_cube,
                                           const PatchRect& patch) {
  if (patch.w <= 0 || patch.h <= 0) fail("empty calibration patch");
  if (patch.x < 0 || patch.y < 0 || patch.x + patch.w > white_cube.width ||
      patch.y + patch.h > white_cube.height)
    fail("calibration patch outside cube bounds");

  const double pan_mean = patch_mean(white_cube.pan, patch);
  if (!(pan_mean > 0.0)) fail("PAN patch mean is not positive");

  NormCoefficients coeffs;
  for (int b = 0; b < kNumBands; ++b) {
    double c = patch_mean(white_cube.bands[b], patch) / pan_mean;
    if (!std::isfinite(c) || c <= 0.0)
      fail("band " + std::to_string(kWavelengths[b]) +
           " nm yields a non-positive coefficient");
    coeffs.c[b] = c;
  }
  return coeffs;
}

SpectralCube normalize_cube(const SpectralCube& cube,
                            const NormCoefficients& coeffs) {
  if (cube.normalized) fail("cube is already normalized");
  for (double c : coeffs.c)
    if (!std::isfinite(c) || c <= 0.0) fail("invalid normalization coefficient");

  SpectralCube out = cube;
  for (int b = 0; b < kNumBands; ++b)
    for (double& x : out.bands[b].v) x /= coeffs.c[b];
  out.normalized = true;
  return out;
}

NormCoefficients load_coefficients(const fs::path& path) {
  json doc = json::parse(read_file(path));
  NormCoefficients coeffs;
  for (int b = 0; b < kNumBands; ++b) {
    const std::string key = std::to_string(kWavelengths[b]);
    if (!doc.contains(key)) fail("coefficients file lacks band " + key);
    coeffs.c[b] = doc.at(key).get<double>();
    if (!std::isfinite(coeffs.c[b]) || coeffs.c[b] <= 0.0)
      fail("coefficient for band " + key + " is not positive");
  }
  return coeffs;
}

void save_coefficients(const NormCoefficients& coeffs, const fs::path& path) {
  json doc;
  for (int b = 0; b < kNumBands; ++b)
    doc[std::to_string(kWavelengths[b])] = coeffs.c[b];
  atomic_write(path, doc.dump(2) + "\n");
}

}  // namespace mspipe
