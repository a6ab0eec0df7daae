#include "mspipe/lda.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <nlohmann/json.hpp>

#include "mspipe/annotations.hpp"
#include "mspipe/cube.hpp"
#include "mspipe/errors.hpp"
#include "mspipe/ringconv.hpp"
#include "mspipe/rng.hpp"
#include "mspipe/util.hpp"

namespace mspipe {

using nlohmann::json;

double LdaModel::project(std::span<const double> v) const {
  double s = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) s += w[i] * v[i];
  return s;
}

int LdaModel::predict(std::span<const double> v) const {
  return project(v) > bias ? kClassScab : kClassLeaf;
}

// Solves A x = b for symmetric positive-definite A (row-major d x d)
// by Cholesky decomposition.
static std::vector<double> spd_solve(std::vector<double> a,
                                     std::vector<double> b, int d) {
  std::vector<double> chol(static_cast<std::size_t>(d) * d, 0.0);
  for (int j = 0; j < d; ++j) {
    double diag = a[static_cast<std::size_t>(j) * d + j];
    for (int k = 0; k < j; ++k) {
      double v = chol[static_cast<std::size_t>(j) * d + k];
      diag -= v * v;
    }
    if (!(diag > 0.0)) fail("covariance numerically singular beyond ridge");
    diag = std::sqrt(diag);
    chol[static_cast<std::size_t>(j) * d + j] = diag;
    for (int i = j + 1; i < d; ++i) {
      double s = a[static_cast<std::size_t>(i) * d + j];
      for (int k = 0; k < j; ++k)
        s -= chol[static_cast<std::size_t>(i) * d + k] *
             chol[static_cast<std::size_t>(j) * d + k];
      chol[static_cast<std::size_t>(i) * d + j] = s / diag;
    }
  }
  // Forward then backward substitution.
  for (int i = 0; i < d; ++i) {
    double s = b[i];
    for (int k = 0; k < i; ++k)
      s -= chol[static_cast<std::size_t>(i) * d + k] * b[k];
    b[i] = s / chol[static_cast<std::size_t>(i) * d + i];
  }
  for (int i = d - 1; i >= 0; --i) {
    double s = b[i];
    for (int k = i + 1; k < d; ++k)
      s -= chol[static_cast<std::size_t>(k) * d + i] * b[k];
    b[i] = s / chol[static_cast<std::size_t>(i) * d + i];
  }
  return b;
}

LdaModel fit_lda(const LabeledSpectra& data) {
  const int d = data.dim;
  const std::size_t n = data.count();
  if (d < 1) fail("fit_lda: empty feature dimension");
  if (n < 2) fail("fit_lda: need at least two samples");

  std::array<std::size_t, 2> n_class{};
  std::array<std::vector<double>, 2> mu{std::vector<double>(d, 0.0),
                                        std::vector<double>(d, 0.0)};
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint8_t c = data.labels[i];
    if (c > 1) fail("fit_lda: labels must be 0 or 1");
    n_class[c] += 1;
    auto row = data.row(i);
    for (int j = 0; j < d; ++j) mu[c][j] += row[j];
  }
  if (n_class[0] == 0 || n_class[1] == 0)
    fail("fit_lda: both classes must be present");
  for (int c = 0; c < 2; ++c)
    for (int j = 0; j < d; ++j) mu[c][j] /= static_cast<double>(n_class[c]);

  // Pooled within-class covariance (unbiased, n - 2 denominator).
  std::vector<double> cov(static_cast<std::size_t>(d) * d, 0.0);
  std::vector<double> centered(d);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint8_t c = data.labels[i];
    auto row = data.row(i);
    for (int j = 0; j < d; ++j) centered[j] = row[j] - mu[c][j];
    for (int j = 0; j < d; ++j)
      for (int k = j; k < d; ++k)
        cov[static_cast<std::size_t>(j) * d + k] += centered[j] * centered[k];
  }
  if (n <= 2) fail("fit_lda: too few samples for a covariance estimate");
  for (int j = 0; j < d; ++j)
    for (int k = j; k < d; ++k) {
      double v = cov[static_cast<std::size_t>(j) * d + k] /
                 static_cast<double>(n - 2);
      cov[static_cast<std::size_t>(j) * d + k] = v;
      cov[static_cast<std::size_t>(k) * d + j] = v;
    }

  double trace = 0.0;
  for (int j = 0; j < d; ++j) trace += cov[static_cast<std::size_t>(j) * d + j];
  const double ridge = 1e-6 * trace / static_cast<double>(d);
  if (!(ridge > 0.0)) fail("covariance numerically singular beyond ridge");
  for (int j = 0; j < d; ++j) cov[static_cast<std::size_t>(j) * d + j] += ridge;

  std::vector<double> diff(d);
  for (int j = 0; j < d; ++j) diff[j] = mu[1][j] - mu[0][j];

  LdaModel model;
  model.ridge = ridge;
  model.w = spd_solve(std::move(cov), diff, d);

  double abs_sum = 0.0;
  for (double v : model.w) abs_sum += std::abs(v);
  if (!(abs_sum > 0.0)) fail("degenerate discriminant: class means coincide");
  model.weights.resize(d);
  for (int j = 0; j < d; ++j) model.weights[j] = std::abs(model.w[j]) / abs_sum;

  double proj0 = 0.0, proj1 = 0.0;
  for (int j = 0; j < d; ++j) {
    proj0 += model.w[j] * mu[0][j];
    proj1 += model.w[j] * mu[1][j];
  }
  model.bias = 0.5 * (proj0 + proj1);
  if (!(proj1 > model.bias && proj0 < model.bias))
    fail("fitted model fails to separate the training class means");

  if (d == kNumBands) model.ranking = rank_channels(model);
  return model;
}

std::vector<int> rank_channels(const LdaModel& model) {
  if (model.weights.size() != kNumBands)
    fail("channel ranking requires an 8-band model");
  std::array<int, kNumBands> idx{};
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](int a, int b) {
    if (model.weights[a] != model.weights[b])
      return model.weights[a] > model.weights[b];
    return kWavelengths[a] < kWavelengths[b];
  });
  std::vector<int> ranking;
  ranking.reserve(kNumBands);
  for (int i : idx) ranking.push_back(kWavelengths[i]);
  return ranking;
}

Confusion lda_confusion(const LdaModel& model, const LabeledSpectra& heldout) {
  Confusion cm;
  for (std::size_t i = 0; i < heldout.count(); ++i) {
    const std::uint8_t c = heldout.labels[i];
    if (c > 1) fail("lda_confusion: labels must be 0 or 1");
    cm.counts[c][model.predict(heldout.row(i))] += 1;
  }
  for (int c = 0; c < 2; ++c) {
    const std::int64_t total = cm.counts[c][0] + cm.counts[c][1];
    if (total == 0) fail("lda_confusion: held-out set lacks a class");
    for (int p = 0; p < 2; ++p)
      cm.rows[c][p] =
          static_cast<double>(cm.counts[c][p]) / static_cast<double>(total);
  }
  return cm;
}

ClassBandStats class_spectra_stats(const LabeledSpectra& data) {
  const int d = data.dim;
  ClassBandStats stats;
  stats.dim = d;
  std::array<std::size_t, 2> n_class{};
  for (std::uint8_t c : data.labels) {
    if (c > 1) fail("class_spectra_stats: labels must be 0 or 1");
    n_class[c] += 1;
  }
  for (int c = 0; c < 2; ++c) {
    if (n_class[c] < 2)
      fail("class_spectra_stats: class " + std::to_string(c) +
           " has fewer than 2 pixels, SD undefined");
    stats.mean[c].assign(d, 0.0);
    stats.sd[c].assign(d, 0.0);
  }
  for (std::size_t i = 0; i < data.count(); ++i) {
    auto row = data.row(i);
    for (int j = 0; j < d; ++j) stats.mean[data.labels[i]][j] += row[j];
  }
  for (int c = 0; c < 2; ++c)
    for (int j = 0; j < d; ++j)
      stats.mean[c][j] /= static_cast<double>(n_class[c]);
  for (std::size_t i = 0; i < data.count(); ++i) {
    const std::uint8_t c = data.labels[i];
    auto row = data.row(i);
    for (int j = 0; j < d; ++j) {
      const double e = row[j] - stats.mean[c][j];
      stats.sd[c][j] += e * e;
    }
  }
  for (int c = 0; c < 2; ++c)
    for (int j = 0; j < d; ++j)
      stats.sd[c][j] =
          std::sqrt(stats.sd[c][j] / static_cast<double>(n_class[c] - 1));
  return stats;
}

namespace {

struct SceneCounts {
  const SceneEntry* entry = nullptr;
  std::size_t leaf = 0;
  std::size_t scab = 0;
};

// Ordinals (scan-order position within class and scene) wanted from one
// scene, already sorted.
struct ScenePick {
  std::vector<std::size_t> leaf;
  std::vector<std::size_t> scab;
};

}  // namespace

static LabeledSpectra sample_from_entries(
    const DatasetManifest& manifest,
    const std::vector<const SceneEntry*>& entries, int per_class,
    std::uint64_t seed, SpectraSource source,
    const std::filesystem::path& feature_dir) {
  if (per_class <= 0) fail("sample_pixels: per-class count must be positive");

  std::vector<SceneCounts> scenes;
  for (const SceneEntry* e : entries) {
    if (e->mask.empty()) continue;
    PixelMask mask = load_mask(manifest.resolve(e->mask));
    SceneCounts sc;
    sc.entry = e;
    for (std::uint8_t v : mask.labels) {
      if (v == kMaskLeaf) ++sc.leaf;
      if (v == kMaskScab) ++sc.scab;
    }
    scenes.push_back(sc);
  }
  std::size_t total_leaf = 0, total_scab = 0;
  for (const SceneCounts& sc : scenes) {
    total_leaf += sc.leaf;
    total_scab += sc.scab;
  }
  const std::size_t want = static_cast<std::size_t>(per_class);
  if (total_leaf < want || total_scab < want)
    fail("sample_pixels: insufficient labelled pixels (leaf " +
         std::to_string(total_leaf) + ", scab " + std::to_string(total_scab) +
         ", requested " + std::to_string(want) + " per class)");

  Rng rng(seed);
  auto draw = [&](std::size_t total) {
    std::vector<std::uint64_t> picks = rng.sample_without_replacement(total, want);
    std::sort(picks.begin(), picks.end());
    return picks;
  };
  const std::vector<std::uint64_t> leaf_picks = draw(total_leaf);
  const std::vector<std::uint64_t> scab_picks = draw(total_scab);

  // Scatter the global class ordinals back onto scenes.
  std::vector<ScenePick> picks(scenes.size());
  {
    std::size_t base = 0, si = 0;
    for (std::uint64_t g : leaf_picks) {
      while (g >= base + scenes[si].leaf) base += scenes[si++].leaf;
      picks[si].leaf.push_back(g - base);
    }
    base = 0;
    si = 0;
    for (std::uint64_t g : scab_picks) {
      while (g >= base + scenes[si].scab) base += scenes[si++].scab;
      picks[si].scab.push_back(g - base);
    }
  }

  const int dim = source == SpectraSource::raw_bands ? kNumBands : kFeatureCount;
  LabeledSpectra out;
  out.dim = dim;
  out.x.reserve(2 * want * dim);
  out.labels.reserve(2 * want);

  std::vector<double> feat;
  for (std::size_t si = 0; si < scenes.size(); ++si) {
    if (picks[si].leaf.empty() && picks[si].scab.empty()) continue;
    const SceneEntry* e = scenes[si].entry;
    PixelMask mask = load_mask(manifest.resolve(e->mask));

    SpectralCube cube;
    FeatureCube fcube;
    if (source == SpectraSource::raw_bands) {
      cube = load_cube(manifest.resolve(e->cube));
      if (cube.width != mask.width || cube.height != mask.height)
        fail("mask and cube dimensions differ for scene " + e->scene_id);
    } else {
      fcube = load_feature_cube(feature_dir / (e->scene_id + ".feat"));
      if (fcube.width != mask.width || fcube.height != mask.height)
        fail("mask and feature dimensions differ for scene " + e->scene_id);
    }

    auto emit = [&](int x, int y, std::uint8_t label) {
      if (source == SpectraSource::raw_bands) {
        for (int b = 0; b < kNumBands; ++b)
          out.x.push_back(cube.bands[b].at(x, y));
      } else {
        fcube.pixel_features(x, y, feat);
        out.x.insert(out.x.end(), feat.begin(), feat.end());
      }
      out.labels.push_back(label);
    };

    std::size_t leaf_seen = 0, scab_seen = 0;
    std::size_t leaf_next = 0, scab_next = 0;
    for (int y = 0; y < mask.height; ++y) {
      for (int x = 0; x < mask.width; ++x) {
        const std::uint8_t m = mask.at(x, y);
        if (m == kMaskLeaf) {
          if (leaf_next < picks[si].leaf.size() &&
              picks[si].leaf[leaf_next] == leaf_seen) {
            emit(x, y, kClassLeaf);
            ++leaf_next;
          }
          ++leaf_seen;
        } else if (m == kMaskScab) {
          if (scab_next < picks[si].scab.size() &&
              picks[si].scab[scab_next] == scab_seen) {
            emit(x, y, kClassScab);
            ++scab_next;
          }
          ++scab_seen;
        }
      }
    }
    out.sources.push_back(e->scene_id);
  }
  return out;
}

LabeledSpectra sample_pixels(const DatasetManifest& manifest, int per_class,
                             std::uint64_t seed, SpectraSource source,
                             const std::filesystem::path& feature_dir) {
  std::vector<const SceneEntry*> entries;
  for (const SceneEntry& e : manifest.entries) entries.push_back(&e);
  return sample_from_entries(manifest, entries, per_class, seed, source,
                             feature_dir);
}

LabeledSpectra sample_pixels_in_split(const DatasetManifest& manifest,
                                      Split split, int per_class,
                                      std::uint64_t seed, SpectraSource source,
                                      const std::filesystem::path& feature_dir) {
  return sample_from_entries(manifest, manifest.in_split(split), per_class,
                             seed, source, feature_dir);
}

LdaModel load_lda_model(const std::filesystem::path& path) {
  json doc = json::parse(read_file(path));
  LdaModel model;
  model.w = doc.at("w").get<std::vector<double>>();
  model.bias = doc.at("bias").get<double>();
  model.weights = doc.at("weights").get<std::vector<double>>();
  model.ranking = doc.at("ranking").get<std::vector<int>>();
  model.ridge = doc.at("ridge").get<double>();
  if (model.weights.size() != model.w.size())
    fail("inconsistent LDA model file: " + path.string());
  return model;
}

void save_lda_model(const LdaModel& model, const std::filesystem::path& path) {
  json doc;
  doc["w"] = model.w;
  doc["bias"] = model.bias;
  doc["weights"] = model.weights;
  doc["ranking"] = model.ranking;
  doc["ridge"] = model.ridge;
  atomic_write(path, doc.dump(2) + "\n");
}

}  // namespace mspipe
