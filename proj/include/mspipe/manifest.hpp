#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace mspipe {

enum class Split { train, val, test, unassigned };

std::string to_string(Split s);
Split split_from_string(const std::string& s);

/// One acquired scene. Paths are stored as written in the manifest and
/// resolved relative to the manifest's directory when relative.
struct SceneEntry {
  std::string scene_id;
  std::string cube;
  std::string rgb;    // optional, empty when absent
  std::string mask;   // optional
  std::string boxes;  // optional
  Split split = Split::unassigned;
};

struct DatasetManifest {
  std::filesystem::path base_dir;
  std::vector<SceneEntry> entries;

  std::filesystem::path resolve(const std::string& rel) const;
  std::vector<const SceneEntry*> in_split(Split s) const;
};

/// check_files also verifies that every referenced file exists.
DatasetManifest load_manifest(const std::filesystem::path& path,
                              bool check_files = true);
void save_manifest(const DatasetManifest& manifest,
                   const std::filesystem::path& path);

/// Deterministic split: seeded shuffle, then floor-then-largest-remainder
/// allocation of the three ratio shares (ties on remainder go to the
/// earlier share). Every entry ends up in exactly one split.
DatasetManifest split_manifest(const DatasetManifest& manifest,
                               const std::array<double, 3>& ratios,
                               std::uint64_t seed);

/// The floor-then-largest-remainder counts on their own.
std::array<std::size_t, 3> split_sizes(std::size_t n,
                                       const std::array<double, 3>& ratios);

}  // namespace mspipe
