#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace mspipe {

/// One labelled box in the single-file-per-image detection label format:
/// class id plus center/size normalized to the image dimensions.
struct BoxAnnotation {
  int class_id = 0;
  double cx = 0.0;
  double cy = 0.0;
  double w = 0.0;
  double h = 0.0;
};

std::vector<BoxAnnotation> load_annotations(const std::filesystem::path& path);
void save_annotations(const std::vector<BoxAnnotation>& boxes,
                      const std::filesystem::path& path);

/// Per-pixel class labels: 0 background, 1 leaf, 2 scab.
struct PixelMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> labels;

  std::uint8_t at(int x, int y) const {
    return labels[static_cast<std::size_t>(y) * width + x];
  }
};

inline constexpr std::uint8_t kMaskBackground = 0;
inline constexpr std::uint8_t kMaskLeaf = 1;
inline constexpr std::uint8_t kMaskScab = 2;

PixelMask load_mask(const std::filesystem::path& path);
void save_mask(const PixelMask& mask, const std::filesystem::path& path);

}  // namespace mspipe
