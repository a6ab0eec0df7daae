#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mspipe/annotations.hpp"
#include "mspipe/cube.hpp"
#include "mspipe/pixelnet.hpp"
#include "mspipe/plane.hpp"

namespace mspipe {

/// One channel of a composed image set: a spectral band (by nm), the PAN
/// plane as grayscale, one channel of the colour camera image, or the
/// segmentation-net probability map.
struct ChannelSource {
  enum class Kind { band, pan_gray, rgb, seg_mask };
  Kind kind = Kind::band;
  int value = 0;  // wavelength nm for band, channel index 0/1/2 for rgb

  static ChannelSource band(int nm) { return {Kind::band, nm}; }
  static ChannelSource pan() { return {Kind::pan_gray, 0}; }
  static ChannelSource rgb(int ch) { return {Kind::rgb, ch}; }
  static ChannelSource seg() { return {Kind::seg_mask, 0}; }
};

struct ImageSetSpec {
  std::string name;
  std::vector<ChannelSource> channels;
};

/// The six named image sets, in their published order. Digits name the
/// bands in ascending-wavelength order (1=545 ... 8=816) and 0 the PAN
/// grayscale plane.
const std::vector<ImageSetSpec>& image_set_table();
const ImageSetSpec& image_set_by_name(const std::string& name);
/// Filesystem-safe form of a set name (commas/plus signs replaced).
std::string image_set_slug(const std::string& name);

/// Colour camera image with channels in [0, 1].
struct RgbImage {
  int width = 0;
  int height = 0;
  std::array<Plane, 3> ch;
};

RgbImage load_rgb_image(const std::filesystem::path& path);
void save_rgb_image(const RgbImage& img, const std::filesystem::path& path);

/// Channel stack in spec order, every value in [0, 1]. Band and PAN
/// channels are min-max rescaled per image (a constant plane maps to 0);
/// probability-map and colour channels pass through unchanged.
struct ComposedImage {
  std::string scene_id;
  std::string set_name;
  int width = 0;
  int height = 0;
  std::vector<Plane> channels;
};

ComposedImage compose(const ImageSetSpec& spec, const SpectralCube* cube,
                      const ProbabilityMap* prob_map, const RgbImage* rgb);

ComposedImage load_composed(const std::filesystem::path& path);
void save_composed(const ComposedImage& img, const std::filesystem::path& path);
/// 8-bit preview for 1- or 3-channel sets.
void save_composed_png(const ComposedImage& img,
                       const std::filesystem::path& path);

/// First detector-layer weights, values indexed [out][in][ky][kx].
struct FirstLayerWeights {
  int out_channels = 0;
  int in_channels = 0;
  int kernel_h = 0;
  int kernel_w = 0;
  std::vector<double> values;

  double at(int o, int i, int ky, int kx) const {
    return values[((static_cast<std::size_t>(o) * in_channels + i) * kernel_h +
                   ky) *
                      kernel_w +
                  kx];
  }
};

/// Replicates a 3-input-channel weight tensor n times along the input
/// axis, so 6- and 9-channel composites can reuse transfer weights.
FirstLayerWeights stack_first_layer(const FirstLayerWeights& base, int n);

FirstLayerWeights load_first_layer(const std::filesystem::path& path);
void save_first_layer(const FirstLayerWeights& w,
                      const std::filesystem::path& path);

/// Geometric augmentation of an image and its boxes. Pixels use reflect
/// fill where the transform exposes out-of-frame area; quarter-turn
/// rotations are exact index permutations (90/270 swap the canvas
/// dimensions). Boxes become the axis-aligned hulls of their transformed
/// corners, are clipped to the unit square, and are dropped when the
/// clip removes more than 90% of the transformed area.
struct AugmentOp {
  enum class Kind { hflip, vflip, rotate, translate, scale };
  Kind kind = Kind::hflip;
  double angle_deg = 0.0;  // rotate
  double dx = 0.0;         // translate, fraction of width
  double dy = 0.0;         // translate, fraction of height
  double s = 1.0;          // scale factor about the image center

  static AugmentOp hflip() { return {Kind::hflip}; }
  static AugmentOp vflip() { return {Kind::vflip}; }
  static AugmentOp rotate(double deg) { return {Kind::rotate, deg}; }
  static AugmentOp translate(double dx, double dy) {
    return {Kind::translate, 0.0, dx, dy};
  }
  static AugmentOp scale(double s) { return {Kind::scale, 0.0, 0.0, 0.0, s}; }
};

struct AugmentedScene {
  ComposedImage image;
  std::vector<BoxAnnotation> boxes;
};

AugmentedScene augment(const ComposedImage& image,
                       const std::vector<BoxAnnotation>& boxes,
                       const AugmentOp& op);

/// 2x2 assemblage of four equal-channel images at half scale; boxes are
/// remapped into their quadrants.
AugmentedScene mosaic(const std::array<const ComposedImage*, 4>& images,
                      const std::array<const std::vector<BoxAnnotation>*, 4>& boxes);

}  // namespace mspipe
