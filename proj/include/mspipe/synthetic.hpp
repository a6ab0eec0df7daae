#pragma once

#include <array>
#include <cstdint>
#include <filesystem>

#include <nlohmann/json.hpp>

#include "mspipe/annotations.hpp"
#include "mspipe/composer.hpp"
#include "mspipe/cube.hpp"
#include "mspipe/manifest.hpp"

namespace mspipe {

/// Generator parameters for desk-scale scenes: a leaf-coloured canvas
/// with elliptical scab lesions, per-band intensities drawn from the
/// class reflectance statistics, PAN as the band mean, plus a noisy
/// white calibration target sharing the illumination profile.
struct SyntheticSceneSpec {
  int width = 80;
  int height = 80;
  std::array<double, kNumBands> leaf_mean{};
  std::array<double, kNumBands> leaf_sd{};
  std::array<double, kNumBands> scab_mean{};
  std::array<double, kNumBands> scab_sd{};
  std::array<double, kNumBands> illumination{};
  int min_lesions = 1;
  int max_lesions = 3;
  double min_radius = 5.0;
  double max_radius = 12.0;
};

SyntheticSceneSpec load_synthetic_spec(const std::filesystem::path& path);
SyntheticSceneSpec synthetic_spec_from_json(const nlohmann::json& doc);

struct SyntheticScene {
  SpectralCube cube;  // raw (unnormalized) intensities
  PixelMask mask;
  std::vector<BoxAnnotation> boxes;
  RgbImage rgb;
};

SyntheticScene gen_scene(const SyntheticSceneSpec& spec,
                         std::uint64_t scene_seed);

SpectralCube gen_white_cube(const SyntheticSceneSpec& spec,
                            std::uint64_t seed);

/// Writes n scenes (cubes, masks, box files, RGB previews), the white
/// cube, and a manifest under out_dir; returns the manifest.
DatasetManifest gen_synthetic(const SyntheticSceneSpec& spec, int n_scenes,
                              std::uint64_t seed,
                              const std::filesystem::path& out_dir);

}  // namespace mspipe
