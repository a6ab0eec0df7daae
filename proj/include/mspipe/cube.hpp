#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mspipe/plane.hpp"

namespace mspipe {

/// The eight narrow-band center wavelengths of the spectral camera, nm.
inline constexpr std::array<int, 8> kWavelengths{545, 579, 622, 658,
                                                 701, 737, 779, 816};
inline constexpr int kNumBands = 8;

int wavelength_index(int nm);

/// Generic planar container backing every binary image artifact: raw
/// little-endian float32 planes plus a JSON sidecar at <path>.json with
/// {width, height, bands, has_pan, normalized}. When has_pan is set the
/// PAN plane is stored last. `extra` round-trips any additional sidecar
/// fields (image-set name, kernel parameters, ...).
struct PlanarImage {
  int width = 0;
  int height = 0;
  std::vector<double> band_labels;
  bool has_pan = false;
  bool normalized = false;
  std::vector<Plane> planes;  // band planes in label order, PAN last if any
  nlohmann::json extra = nlohmann::json::object();
};

PlanarImage load_planar(const std::filesystem::path& path);
void save_planar(const PlanarImage& img, const std::filesystem::path& path);

/// Eight-band spectral cube with its panchromatic plane. Bands are held
/// in ascending-wavelength order matching kWavelengths.
struct SpectralCube {
  int width = 0;
  int height = 0;
  std::array<Plane, kNumBands> bands;
  Plane pan;
  bool normalized = false;
};

SpectralCube load_cube(const std::filesystem::path& path);
void save_cube(const SpectralCube& cube, const std::filesystem::path& path);

/// Per-band white-reference coefficients: band patch mean over PAN
/// patch mean, computed from a white checker-board cube.
struct NormCoefficients {
  std::array<double, kNumBands> c{};
};

NormCoefficients compute_norm_coefficients(const SpectralCube& white_cube,
                                           const PatchRect& patch);

/// Divides each band plane by its coefficient, placing every band on
/// the PAN intensity scale. PAN itself is left untouched. Refuses a
/// cube that is already normalized.
SpectralCube normalize_cube(const SpectralCube& cube,
                            const NormCoefficients& coeffs);

NormCoefficients load_coefficients(const std::filesystem::path& path);
void save_coefficients(const NormCoefficients& coeffs,
                       const std::filesystem::path& path);

}  // namespace mspipe
