#include "mspipe/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>

#include <nlohmann/json.hpp>

#include "mspipe/errors.hpp"
#include "mspipe/rng.hpp"
#include "mspipe/util.hpp"

namespace mspipe {

namespace fs = std::filesystem;
using nlohmann::json;

SyntheticSceneSpec load_synthetic_spec(const fs::path& path) {
  return synthetic_spec_from_json(json::parse(read_file(path)));
}

SyntheticSceneSpec synthetic_spec_from_json(const json& doc) {
  SyntheticSceneSpec spec;
  spec.width = doc.value("width", spec.width);
  spec.height = doc.value("height", spec.height);
  auto read_bands = [&](const char* key, std::array<double, kNumBands>& out) {
    auto values = doc.at(key).get<std::vector<double>>();
    if (values.size() != kNumBands)
      fail(std::string("synthetic spec field ") + key + " must list 8 values");
    std::copy(values.begin(), values.end(), out.begin());
  };
  read_bands("leaf_mean", spec.leaf_mean);
  read_bands("leaf_sd", spec.leaf_sd);
  read_bands("scab_mean", spec.scab_mean);
  read_bands("scab_sd", spec.scab_sd);
  if (doc.contains("illumination"))
    read_bands("illumination", spec.illumination);
  else
    spec.illumination.fill(1.0);
  spec.min_lesions = doc.value("min_lesions", spec.min_lesions);
  spec.max_lesions = doc.value("max_lesions", spec.max_lesions);
  spec.min_radius = doc.value("min_radius", spec.min_radius);
  spec.max_radius = doc.value("max_radius", spec.max_radius);

  for (double sd : spec.leaf_sd)
    if (sd < 0.0) fail("synthetic spec: negative leaf SD");
  for (double sd : spec.scab_sd)
    if (sd < 0.0) fail("synthetic spec: negative scab SD");
  if (spec.min_lesions < 0 || spec.max_lesions < spec.min_lesions)
    fail("synthetic spec: bad lesion count range");
  if (!(spec.min_radius > 0.0) || spec.max_radius < spec.min_radius)
    fail("synthetic spec: bad lesion radius range");
  if (2.0 * spec.max_radius + 4.0 >= std::min(spec.width, spec.height))
    fail("synthetic spec: lesions do not fit the image");
  return spec;
}

namespace {

struct Lesion {
  double cx, cy, a, b;  // center and semi-axes, pixel units
};

bool bbox_overlap(const Lesion& p, const Lesion& q, double pad) {
  return std::abs(p.cx - q.cx) < p.a + q.a + pad &&
         std::abs(p.cy - q.cy) < p.b + q.b + pad;
}

}  // namespace

SyntheticScene gen_scene(const SyntheticSceneSpec& spec,
                         std::uint64_t scene_seed) {
  Rng rng(scene_seed);
  const int w = spec.width;
  const int h = spec.height;

  const int n_lesions =
      spec.min_lesions +
      static_cast<int>(rng.below(spec.max_lesions - spec.min_lesions + 1));
  std::vector<Lesion> lesions;
  for (int i = 0; i < n_lesions; ++i) {
    for (int attempt = 0; attempt < 50; ++attempt) {
      Lesion cand;
      cand.a = rng.uniform(spec.min_radius, spec.max_radius);
      cand.b = rng.uniform(spec.min_radius, spec.max_radius);
      cand.cx = rng.uniform(cand.a + 1.0, w - cand.a - 1.0);
      cand.cy = rng.uniform(cand.b + 1.0, h - cand.b - 1.0);
      bool clash = false;
      for (const Lesion& l : lesions)
        if (bbox_overlap(cand, l, 2.0)) {
          clash = true;
          break;
        }
      if (!clash) {
        lesions.push_back(cand);
        break;
      }
    }
  }

  SyntheticScene scene;
  scene.mask.width = w;
  scene.mask.height = h;
  scene.mask.labels.assign(static_cast<std::size_t>(w) * h, kMaskLeaf);
  for (const Lesion& l : lesions) {
    int minx = w, maxx = -1, miny = h, maxy = -1;
    const int x0 = std::max(0, static_cast<int>(std::floor(l.cx - l.a - 1)));
    const int x1 = std::min(w - 1, static_cast<int>(std::ceil(l.cx + l.a + 1)));
    const int y0 = std::max(0, static_cast<int>(std::floor(l.cy - l.b - 1)));
    const int y1 = std::min(h - 1, static_cast<int>(std::ceil(l.cy + l.b + 1)));
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x) {
        const double u = (x + 0.5 - l.cx) / l.a;
        const double v = (y + 0.5 - l.cy) / l.b;
        if (u * u + v * v <= 1.0) {
          scene.mask.labels[static_cast<std::size_t>(y) * w + x] = kMaskScab;
          minx = std::min(minx, x);
          maxx = std::max(maxx, x);
          miny = std::min(miny, y);
          maxy = std::max(maxy, y);
        }
      }
    if (maxx < minx) continue;  // degenerate ellipse missed every center
    BoxAnnotation box;
    box.class_id = 0;
    box.cx = (minx + maxx + 1) / 2.0 / w;
    box.cy = (miny + maxy + 1) / 2.0 / h;
    box.w = static_cast<double>(maxx + 1 - minx) / w;
    box.h = static_cast<double>(maxy + 1 - miny) / h;
    scene.boxes.push_back(box);
  }

  scene.cube.width = w;
  scene.cube.height = h;
  scene.cube.normalized = false;
  for (int b = 0; b < kNumBands; ++b) scene.cube.bands[b] = Plane(w, h);
  scene.cube.pan = Plane(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const bool scab =
          scene.mask.labels[static_cast<std::size_t>(y) * w + x] == kMaskScab;
      double pan = 0.0;
      for (int b = 0; b < kNumBands; ++b) {
        const double mean = scab ? spec.scab_mean[b] : spec.leaf_mean[b];
        const double sd = scab ? spec.scab_sd[b] : spec.leaf_sd[b];
        const double refl = std::max(0.0, rng.normal(mean, sd));
        const double value = refl * spec.illumination[b];
        scene.cube.bands[b].at(x, y) = value;
        pan += value;
      }
      scene.cube.pan.at(x, y) = pan / kNumBands;
    }

  // Colour preview: red/green/blue stand-ins from 658, 545, 579 nm.
  scene.rgb.width = w;
  scene.rgb.height = h;
  const int rgb_bands[3] = {wavelength_index(658), wavelength_index(545),
                            wavelength_index(579)};
  for (int c = 0; c < 3; ++c) {
    const Plane& src = scene.cube.bands[rgb_bands[c]];
    const double lo = plane_min(src);
    const double hi = plane_max(src);
    Plane out(w, h);
    if (hi > lo)
      for (std::size_t i = 0; i < src.size(); ++i)
        out.v[i] = (src.v[i] - lo) / (hi - lo);
    scene.rgb.ch[c] = std::move(out);
  }
  return scene;
}

SpectralCube gen_white_cube(const SyntheticSceneSpec& spec,
                            std::uint64_t seed) {
  Rng rng(seed);
  SpectralCube cube;
  cube.width = spec.width;
  cube.height = spec.height;
  cube.normalized = false;
  for (int b = 0; b < kNumBands; ++b)
    cube.bands[b] = Plane(spec.width, spec.height);
  cube.pan = Plane(spec.width, spec.height);
  for (int y = 0; y < spec.height; ++y)
    for (int x = 0; x < spec.width; ++x) {
      double pan = 0.0;
      for (int b = 0; b < kNumBands; ++b) {
        const double v =
            spec.illumination[b] * std::max(0.1, 1.0 + 0.03 * rng.normal());
        cube.bands[b].at(x, y) = v;
        pan += v;
      }
      cube.pan.at(x, y) = pan / kNumBands;
    }
  return cube;
}

DatasetManifest gen_synthetic(const SyntheticSceneSpec& spec, int n_scenes,
                              std::uint64_t seed, const fs::path& out_dir) {
  if (n_scenes < 1) fail("gen_synthetic: need at least one scene");
  fs::create_directories(out_dir / "cubes");
  fs::create_directories(out_dir / "masks");
  fs::create_directories(out_dir / "boxes");
  fs::create_directories(out_dir / "rgb");

  DatasetManifest manifest;
  manifest.base_dir = out_dir;
  for (int i = 0; i < n_scenes; ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "scene_%04d", i);
    // Scene seeds are derived, not sequential, so inserting scenes does
    // not reshuffle every later scene's pixels.
    const std::uint64_t scene_seed =
        fnv1a(name, std::strlen(name), seed ^ 0x9e3779b97f4a7c15ULL);
    SyntheticScene scene = gen_scene(spec, scene_seed);

    SceneEntry entry;
    entry.scene_id = name;
    entry.cube = std::string("cubes/") + name + ".cube";
    entry.mask = std::string("masks/") + name + ".png";
    entry.boxes = std::string("boxes/") + name + ".txt";
    entry.rgb = std::string("rgb/") + name + ".png";
    save_cube(scene.cube, out_dir / entry.cube);
    save_mask(scene.mask, out_dir / entry.mask);
    save_annotations(scene.boxes, out_dir / entry.boxes);
    save_rgb_image(scene.rgb, out_dir / entry.rgb);
    manifest.entries.push_back(std::move(entry));
  }
  save_cube(gen_white_cube(spec, seed ^ 0xdeadbeefULL), out_dir / "white.cube");
  save_manifest(manifest, out_dir / "manifest.json");
  return manifest;
}

}  // namespace mspipe
