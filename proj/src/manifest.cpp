#include "mspipe/manifest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include <nlohmann/json.hpp>

#include "mspipe/errors.hpp"
#include "mspipe/rng.hpp"
#include "mspipe/util.hpp"

namespace mspipe {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
    case Split::unassigned: return "unassigned";
  }
  fail("bad split value");
}

Split split_from_string(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "val") return Split::val;
  if (s == "test") return Split::test;
  if (s == "unassigned") return Split::unassigned;
  fail("unknown split tag: " + s);
}

fs::path DatasetManifest::resolve(const std::string& rel) const {
  fs::path p(rel);
  if (p.is_absolute()) return p;
  return base_dir / p;
}

std::vector<const SceneEntry*> DatasetManifest::in_split(Split s) const {
  std::vector<const SceneEntry*> out;
  for (const SceneEntry& e : entries)
    if (e.split == s) out.push_back(&e);
  return out;
}

DatasetManifest load_manifest(const fs::path& path, bool check_files) {
  json doc = json::parse(read_file(path));
  if (!doc.is_array()) fail("manifest must be a JSON list: " + path.string());

  DatasetManifest manifest;
  manifest.base_dir = path.has_parent_path() ? path.parent_path() : fs::path(".");

  std::set<std::string> ids;
  for (const json& rec : doc) {
    SceneEntry e;
    e.scene_id = rec.at("scene_id").get<std::string>();
    e.cube = rec.at("cube").get<std::string>();
    if (rec.contains("rgb") && !rec["rgb"].is_null())
      e.rgb = rec["rgb"].get<std::string>();
    if (rec.contains("mask") && !rec["mask"].is_null())
      e.mask = rec["mask"].get<std::string>();
    if (rec.contains("boxes") && !rec["boxes"].is_null())
      e.boxes = rec["boxes"].get<std::string>();
    e.split = rec.contains("split")
                  ? split_from_string(rec["split"].get<std::string>())
                  : Split::unassigned;
    if (!ids.insert(e.scene_id).second)
      fail("duplicate scene id: " + e.scene_id);
    manifest.entries.push_back(std::move(e));
  }

  if (check_files) {
    for (const SceneEntry& e : manifest.entries) {
      for (const std::string& rel : {e.cube, e.rgb, e.mask, e.boxes}) {
        if (rel.empty()) continue;
        if (!fs::exists(manifest.resolve(rel)))
          fail("manifest references missing file: " + rel);
      }
    }
  }
  return manifest;
}

void save_manifest(const DatasetManifest& manifest, const fs::path& path) {
  json doc = json::array();
  for (const SceneEntry& e : manifest.entries) {
    json rec;
    rec["scene_id"] = e.scene_id;
    rec["cube"] = e.cube;
    if (!e.rgb.empty()) rec["rgb"] = e.rgb;
    if (!e.mask.empty()) rec["mask"] = e.mask;
    if (!e.boxes.empty()) rec["boxes"] = e.boxes;
    rec["split"] = to_string(e.split);
    doc.push_back(rec);
  }
  atomic_write(path, doc.dump(2) + "\n");
}

std::array<std::size_t, 3> split_sizes(std::size_t n,
                                       const std::array<double, 3>& ratios) {
  double sum = ratios[0] + ratios[1] + ratios[2];
  if (std::abs(sum - 1.0) > 1e-9) fail("split ratios must sum to 1");
  for (double r : ratios)
    if (!(r > 0.0)) fail("split ratios must be positive");
  if (n < 3) fail("fewer entries than split parts");

  std::array<std::size_t, 3> sizes{};
  std::array<double, 3> remainder{};
  std::size_t assigned = 0;
  for (int i = 0; i < 3; ++i) {
    double share = static_cast<double>(n) * ratios[i];
    sizes[i] = static_cast<std::size_t>(std::floor(share));
    remainder[i] = share - std::floor(share);
    assigned += sizes[i];
  }
  std::array<int, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return remainder[a] > remainder[b]; });
  for (int i = 0; assigned < n; ++i) {
    sizes[order[i % 3]] += 1;
    ++assigned;
  }
  return sizes;
}

DatasetManifest split_manifest(const DatasetManifest& manifest,
                               const std::array<double, 3>& ratios,
                               std::uint64_t seed) {
  const std::size_t n = manifest.entries.size();
  const std::array<std::size_t, 3> sizes = split_sizes(n, ratios);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(order);

  DatasetManifest out = manifest;
  std::size_t pos = 0;
  const std::array<Split, 3> tags{Split::train, Split::val, Split::test};
  for (int part = 0; part < 3; ++part)
    for (std::size_t i = 0; i < sizes[part]; ++i)
      out.entries[order[pos++]].split = tags[part];
  return out;
}

}  // namespace mspipe
