#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "mspipe/manifest.hpp"

namespace mspipe {

inline constexpr std::uint8_t kClassLeaf = 0;
inline constexpr std::uint8_t kClassScab = 1;

/// Row-major n x dim matrix of labelled pixel vectors (8 raw bands or
/// 40 ring-convolution features) with {leaf=0, scab=1} labels.
struct LabeledSpectra {
  int dim = 0;
  std::vector<double> x;           // n * dim
  std::vector<std::uint8_t> labels;
  std::vector<std::string> sources;  // contributing scene ids

  std::size_t count() const { return labels.size(); }
  std::span<const double> row(std::size_t i) const {
    return {x.data() + i * static_cast<std::size_t>(dim),
            static_cast<std::size_t>(dim)};
  }
};

/// Fisher discriminant fitted on two classes. `weights` are the
/// normalized absolute direction entries; `ranking` (populated for
/// dim == 8) orders the wavelengths by descending weight.
struct LdaModel {
  std::vector<double> w;
  double bias = 0.0;
  std::vector<double> weights;
  std::vector<int> ranking;
  double ridge = 0.0;

  double project(std::span<const double> v) const;
  int predict(std::span<const double> v) const;
};

/// Closed-form fit: w = S^-1 (mu_scab - mu_leaf) with S the pooled
/// within-class covariance plus ridge 1e-6 * trace(S)/dim; bias at the
/// midpoint of the projected class means.
LdaModel fit_lda(const LabeledSpectra& data);

/// Wavelengths by descending weight, ties broken by ascending wavelength.
std::vector<int> rank_channels(const LdaModel& model);

/// Row-normalized 2x2 confusion (rows = true class, cols = predicted).
struct Confusion {
  std::array<std::array<std::int64_t, 2>, 2> counts{};
  std::array<std::array<double, 2>, 2> rows{};
};

Confusion lda_confusion(const LdaModel& model, const LabeledSpectra& heldout);

/// Per-class per-band mean and unbiased standard deviation.
struct ClassBandStats {
  int dim = 0;
  std::array<std::vector<double>, 2> mean;
  std::array<std::vector<double>, 2> sd;
};

ClassBandStats class_spectra_stats(const LabeledSpectra& data);

enum class SpectraSource { raw_bands, features40 };

/// Balanced seeded sampling without replacement of labelled pixels from
/// every manifest scene that has a mask. raw_bands reads the manifest
/// cubes; features40 reads <feature_dir>/<scene_id>.feat.
LabeledSpectra sample_pixels(const DatasetManifest& manifest, int per_class,
                             std::uint64_t seed, SpectraSource source,
                             const std::filesystem::path& feature_dir = {});

/// Same sampling restricted to scenes in one split.
LabeledSpectra sample_pixels_in_split(const DatasetManifest& manifest,
                                      Split split, int per_class,
                                      std::uint64_t seed, SpectraSource source,
                                      const std::filesystem::path& feature_dir = {});

LdaModel load_lda_model(const std::filesystem::path& path);
void save_lda_model(const LdaModel& model, const std::filesystem::path& path);

}  // namespace mspipe
