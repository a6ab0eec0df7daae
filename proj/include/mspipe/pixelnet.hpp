#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "mspipe/lda.hpp"
#include "mspipe/plane.hpp"
#include "mspipe/ringconv.hpp"

namespace mspipe {

/// Feed-forward pixel classifier: input (40 features, or 8 raw bands in
/// the ablation mode), two rectifier hidden layers of 16 and 8 nodes,
/// and a 2-node softmax output. Weights are stored input-major, so
/// layer l holds dims[l] x dims[l+1] values.
struct PixelNetModel {
  std::vector<int> dims;  // {input, 16, 8, 2}
  std::vector<std::vector<double>> weights;
  std::vector<std::vector<double>> biases;

  std::uint64_t seed = 0;
  int epochs = 0;
  int batch_size = 0;
  double learning_rate = 0.0;

  std::size_t parameter_count() const;
  int input_dim() const { return dims.front(); }
};

/// Zero-mean normal init with per-layer SD 1/sqrt(fan_in); biases zero.
PixelNetModel init_model(std::uint64_t seed, int input_dim = kFeatureCount);

/// Softmax class probabilities (leaf, scab) for one feature vector.
std::array<double, 2> forward(const PixelNetModel& model,
                              std::span<const double> features);

struct TrainHyper {
  int epochs = 100;
  int batch_size = 256;
  double learning_rate = 1e-2;
  std::uint64_t seed = 0;
};

struct TrainResult {
  PixelNetModel model;
  std::vector<double> epoch_losses;  // mean cross-entropy per epoch
};

/// Mini-batch gradient descent on mean cross-entropy. Deterministic for
/// a given seed; throws on a non-finite loss, naming the epoch.
TrainResult train(PixelNetModel model, const LabeledSpectra& data,
                  const TrainHyper& hyper);

/// Compares analytic gradients against central finite differences
/// (step 1e-5) on n_params randomly chosen parameters; returns the
/// largest relative error seen.
double gradient_check(const PixelNetModel& model, const LabeledSpectra& batch,
                      int n_params = 120, std::uint64_t seed = 0);

/// Per-pixel scab probability in [0, 1].
struct ProbabilityMap {
  int width = 0;
  int height = 0;
  Plane prob;
};

ProbabilityMap infer_map(const PixelNetModel& model, const FeatureCube& fcube,
                         int jobs = 1);

ProbabilityMap load_probability_map(const std::filesystem::path& path);
void save_probability_map(const ProbabilityMap& map,
                          const std::filesystem::path& path);
/// 8-bit preview, value = round(255 * p).
void save_probability_png(const ProbabilityMap& map,
                          const std::filesystem::path& path);

PixelNetModel load_pixelnet(const std::filesystem::path& path);
void save_pixelnet(const PixelNetModel& model,
                   const std::filesystem::path& path);

}  // namespace mspipe
