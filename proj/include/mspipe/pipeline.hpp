#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mspipe/synthetic.hpp"

namespace mspipe {

inline constexpr const char* kVersion = "0.1.0";

/// Batch configuration, one JSON document with explicit seeds for every
/// stochastic stage. Stages communicate only through files under
/// out_dir, each in its own subdirectory.
struct PipelineConfig {
  std::filesystem::path config_dir;  // directory of the config file
  std::uint64_t config_hash = 0;     // hash of the raw config text
  std::filesystem::path out_dir = "out";
  int jobs = 1;

  std::string manifest;  // may be empty when synthetic generation is on

  struct White {
    std::string cube;                  // empty -> synthetic white cube
    std::optional<PatchRect> patch;    // absent -> full image
  } white;

  struct Kernels {
    int alpha = 50;
    std::vector<std::pair<double, double>> rings;  // (beta, sigma)
    bool dump = false;
  } kernels;

  struct Lda {
    int train_per_class = 4000;
    int heldout_per_class = 1500;
    std::uint64_t seed = 11;
  } lda;

  struct Segnet {
    int train_per_class = 6000;
    int epochs = 120;
    int batch_size = 256;
    double learning_rate = 0.05;
    std::uint64_t seed = 7;
    int input_dim = 40;  // 8 = raw-spectrum ablation mode
    double detect_threshold = 0.5;
  } segnet;

  std::vector<std::string> compose_sets;

  struct SplitCfg {
    std::array<double, 3> ratios{0.70, 0.15, 0.15};
    std::uint64_t seed = 42;
  } split;

  struct Augment {
    int per_image = 1;
    std::uint64_t seed = 5;
    std::vector<std::string> ops{"hflip", "vflip", "rot90"};
    std::vector<std::string> sets{"RGB"};
  } augment;

  struct Evaluate {
    double confidence_threshold = 0.1;
    double nms_iou = 0.2;
    int min_component_area = 4;
  } evaluate;

  struct Synthetic {
    bool enabled = false;
    int scenes = 30;
    std::uint64_t seed = 99;
    std::string defaults = "data/synthetic_defaults.json";
    SyntheticSceneSpec spec;
  } synthetic;

  std::filesystem::path resolve(const std::string& rel) const;
  std::filesystem::path stage_dir(const std::string& stage) const;
};

PipelineConfig load_pipeline_config(const std::filesystem::path& path);

/// Stage names accepted by run_stage, in pipeline order.
const std::vector<std::string>& stage_names();

/// Runs one stage; outputs land under out_dir/<stage>/ atomically and a
/// run.json records the config hash, seeds, and version. Throws Error
/// on missing inputs or validation failures.
void run_stage(const std::string& stage, const PipelineConfig& config);

/// Runs every stage in order (gen-synthetic only when configured).
void run_pipeline(const PipelineConfig& config);

}  // namespace mspipe
