#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mspipe/annotations.hpp"
#include "mspipe/cube.hpp"
#include "mspipe/errors.hpp"
#include "mspipe/lda.hpp"
#include "mspipe/rng.hpp"
#include "test_util.hpp"

using namespace mspipe;

namespace {

LabeledSpectra gaussian_classes(int d, std::size_t n_per_class,
                                const std::vector<double>& mu0,
                                const std::vector<double>& mu1,
                                const std::vector<double>& mix,  // d*d or empty
                                std::uint64_t seed) {
  LabeledSpectra data;
  data.dim = d;
  Rng rng(seed);
  std::vector<double> z(d);
  for (int cls = 0; cls < 2; ++cls) {
    const std::vector<double>& mu = cls == 0 ? mu0 : mu1;
    for (std::size_t i = 0; i < n_per_class; ++i) {
      for (double& v : z) v = rng.normal();
      for (int j = 0; j < d; ++j) {
        double x = mu[j];
        if (mix.empty()) {
          x += z[j];
        } else {
          for (int k = 0; k < d; ++k) x += mix[j * d + k] * z[k];
        }
        data.x.push_back(x);
      }
      data.labels.push_back(static_cast<std::uint8_t>(cls));
    }
  }
  return data;
}

// Independent closed-form oracle: pooled covariance with the same ridge,
// inverted by Gauss-Jordan elimination with partial pivoting.
std::vector<double> ref_lda_direction(const LabeledSpectra& data) {
  const int d = data.dim;
  const std::size_t n = data.count();
  std::vector<double> mu0(d, 0.0), mu1(d, 0.0);
  std::size_t n0 = 0, n1 = 0;
  for (std::size_t i = 0; i < n; ++i) {
    auto row = data.row(i);
    if (data.labels[i] == 0) {
      ++n0;
      for (int j = 0; j < d; ++j) mu0[j] += row[j];
    } else {
      ++n1;
      for (int j = 0; j < d; ++j) mu1[j] += row[j];
    }
  }
  for (int j = 0; j < d; ++j) {
    mu0[j] /= n0;
    mu1[j] /= n1;
  }
  std::vector<double> cov(d * d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    auto row = data.row(i);
    const std::vector<double>& mu = data.labels[i] == 0 ? mu0 : mu1;
    for (int j = 0; j < d; ++j)
      for (int k = 0; k < d; ++k)
        cov[j * d + k] += (row[j] - mu[j]) * (row[k] - mu[k]);
  }
  for (double& v : cov) v /= static_cast<double>(n - 2);
  double trace = 0.0;
  for (int j = 0; j < d; ++j) trace += cov[j * d + j];
  for (int j = 0; j < d; ++j) cov[j * d + j] += 1e-6 * trace / d;

  // Gauss-Jordan inverse.
  std::vector<double> inv(d * d, 0.0);
  for (int j = 0; j < d; ++j) inv[j * d + j] = 1.0;
  for (int col = 0; col < d; ++col) {
    int pivot = col;
    for (int r = col + 1; r < d; ++r)
      if (std::abs(cov[r * d + col]) > std::abs(cov[pivot * d + col]))
        pivot = r;
    for (int c = 0; c < d; ++c) {
      std::swap(cov[pivot * d + c], cov[col * d + c]);
      std::swap(inv[pivot * d + c], inv[col * d + c]);
    }
    const double p = cov[col * d + col];
    for (int c = 0; c < d; ++c) {
      cov[col * d + c] /= p;
      inv[col * d + c] /= p;
    }
    for (int r = 0; r < d; ++r) {
      if (r == col) continue;
      const double f = cov[r * d + col];
      for (int c = 0; c < d; ++c) {
        cov[r * d + c] -= f * cov[col * d + c];
        inv[r * d + c] -= f * inv[col * d + c];
      }
    }
  }
  std::vector<double> w(d, 0.0);
  for (int j = 0; j < d; ++j)
    for (int k = 0; k < d; ++k) w[j] += inv[j * d + k] * (mu1[k] - mu0[k]);
  return w;
}

}  // namespace

TEST_CASE("single informative axis puts 779 nm first with dominant weight") {
  std::vector<double> mu0(8, 0.0), mu1(8, 0.0);
  mu1[wavelength_index(779)] = 10.0;
  LabeledSpectra data = gaussian_classes(8, 10000, mu0, mu1, {}, 3);
  LdaModel model = fit_lda(data);
  CHECK(model.ranking.front() == 779);
  CHECK(model.weights[wavelength_index(779)] > 0.9);
}

TEST_CASE("symmetric two-dimensional problem gives equal weights") {
  // Exact dataset: identity-proportional pooled scatter, means (0,0)/(1,1).
  LabeledSpectra data;
  data.dim = 2;
  const double a = 0.5;
  const double pts[4][2] = {{a, 0}, {-a, 0}, {0, a}, {0, -a}};
  for (int cls = 0; cls < 2; ++cls)
    for (const auto& p : pts) {
      data.x.push_back(p[0] + cls);
      data.x.push_back(p[1] + cls);
      data.labels.push_back(static_cast<std::uint8_t>(cls));
    }
  LdaModel model = fit_lda(data);
  CHECK(model.w[0] == doctest::Approx(model.w[1]).epsilon(1e-12));
  CHECK(model.weights[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(model.weights[1] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("fitted direction matches the closed-form oracle") {
  Rng seeder(77);
  for (int rep = 0; rep < 5; ++rep) {
    std::vector<double> mu0(8), mu1(8), mix(64);
    for (double& v : mu0) v = seeder.uniform(-1, 1);
    for (double& v : mu1) v = seeder.uniform(-1, 1);
    for (double& v : mix) v = seeder.uniform(-0.4, 0.4);
    for (int j = 0; j < 8; ++j) mix[j * 8 + j] += 1.0;
    LabeledSpectra data =
        gaussian_classes(8, 3000, mu0, mu1, mix, seeder.next_u64());

    LdaModel model = fit_lda(data);
    std::vector<double> want = ref_lda_direction(data);
    double num = 0.0, den = 0.0;
    for (int j = 0; j < 8; ++j) {
      num += (model.w[j] - want[j]) * (model.w[j] - want[j]);
      den += want[j] * want[j];
    }
    CHECK(std::sqrt(num / den) < 1e-6);
  }
}

TEST_CASE("published weight vector ranks exactly as published") {
  LdaModel model;
  model.w = model.weights = {0.162, 0.124, 0.213, 0.011,
                             0.151, 0.080, 0.244, 0.015};
  const std::vector<int> want{779, 622, 545, 701, 579, 737, 816, 658};
  CHECK(rank_channels(model) == want);
}

TEST_CASE("equal weights rank by ascending wavelength") {
  LdaModel model;
  model.w = model.weights = std::vector<double>(8, 0.125);
  const std::vector<int> want{545, 579, 622, 658, 701, 737, 779, 816};
  CHECK(rank_channels(model) == want);
}

TEST_CASE("ranking agrees with an independent sort on random weights") {
  Rng rng(11);
  for (int rep = 0; rep < 1000; ++rep) {
    LdaModel model;
    model.weights.resize(8);
    for (double& v : model.weights) v = rng.uniform();
    model.w = model.weights;

    std::vector<int> idx(8);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
      return model.weights[a] > model.weights[b];
    });
    std::vector<int> want;
    for (int i : idx) want.push_back(kWavelengths[i]);
    CHECK(rank_channels(model) == want);
  }
}

TEST_CASE("confusion is identity on separable data and rows sum to one") {
  std::vector<double> mu0(8, 0.0), mu1(8, 20.0);
  LabeledSpectra train = gaussian_classes(8, 500, mu0, mu1, {}, 5);
  LabeledSpectra heldout = gaussian_classes(8, 300, mu0, mu1, {}, 6);
  LdaModel model = fit_lda(train);
  Confusion cm = lda_confusion(model, heldout);
  CHECK(cm.rows[0][0] == 1.0);
  CHECK(cm.rows[1][1] == 1.0);
  for (int c = 0; c < 2; ++c)
    CHECK(cm.rows[c][0] + cm.rows[c][1] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("confusion equals a per-pixel counting oracle on mixed data") {
  std::vector<double> mu0(8, 0.0), mu1(8, 0.8);
  LabeledSpectra train = gaussian_classes(8, 2000, mu0, mu1, {}, 7);
  LabeledSpectra heldout = gaussian_classes(8, 700, mu0, mu1, {}, 8);
  LdaModel model = fit_lda(train);
  Confusion cm = lda_confusion(model, heldout);

  std::int64_t counts[2][2] = {};
  for (std::size_t i = 0; i < heldout.count(); ++i) {
    double s = 0.0;
    auto row = heldout.row(i);
    for (int j = 0; j < 8; ++j) s += model.w[j] * row[j];
    const int pred = s > model.bias ? 1 : 0;
    counts[heldout.labels[i]][pred] += 1;
  }
  for (int c = 0; c < 2; ++c)
    for (int p = 0; p < 2; ++p) CHECK(cm.counts[c][p] == counts[c][p]);
  // Mixed-mean problem must actually be mixed.
  CHECK(cm.counts[0][1] > 0);
  CHECK(cm.counts[1][0] > 0);
}

TEST_CASE("confusion requires both classes held out") {
  std::vector<double> mu0(8, 0.0), mu1(8, 5.0);
  LabeledSpectra train = gaussian_classes(8, 100, mu0, mu1, {}, 9);
  LdaModel model = fit_lda(train);
  LabeledSpectra single = train;
  std::fill(single.labels.begin(), single.labels.end(), 0);
  CHECK_THROWS_AS(lda_confusion(model, single), Error);
}

TEST_CASE("fit preconditions") {
  LabeledSpectra empty;
  empty.dim = 8;
  CHECK_THROWS_AS(fit_lda(empty), Error);

  std::vector<double> mu(8, 0.0);
  LabeledSpectra one_class = gaussian_classes(8, 50, mu, mu, {}, 10);
  std::fill(one_class.labels.begin(), one_class.labels.end(), 1);
  CHECK_THROWS_AS(fit_lda(one_class), Error);
}

TEST_CASE("label swap negates the direction and keeps the ranking") {
  std::vector<double> mu0(8, 0.1), mu1(8, 0.9);
  mu1[2] = 2.0;
  LabeledSpectra data = gaussian_classes(8, 400, mu0, mu1, {}, 12);
  LabeledSpectra swapped = data;
  for (std::uint8_t& label : swapped.labels) label ^= 1;

  LdaModel a = fit_lda(data);
  LdaModel b = fit_lda(swapped);
  for (int j = 0; j < 8; ++j) {
    CHECK(b.w[j] == doctest::Approx(-a.w[j]).epsilon(1e-12));
    CHECK(b.weights[j] == doctest::Approx(a.weights[j]).epsilon(1e-12));
  }
  CHECK(b.ranking == a.ranking);
}

TEST_CASE("scaling all spectra leaves weights and ranking unchanged") {
  std::vector<double> mu0(8, 0.2), mu1(8, 0.7);
  mu1[6] = 1.4;
  LabeledSpectra data = gaussian_classes(8, 400, mu0, mu1, {}, 13);
  LabeledSpectra scaled = data;
  for (double& v : scaled.x) v *= 4.0;  // power of two, exact

  LdaModel a = fit_lda(data);
  LdaModel b = fit_lda(scaled);
  for (int j = 0; j < 8; ++j)
    CHECK(b.weights[j] == doctest::Approx(a.weights[j]).epsilon(1e-12));
  CHECK(b.ranking == a.ranking);
}

TEST_CASE("fitted direction maximizes the Fisher criterion") {
  std::vector<double> mu0(8, 0.0), mu1(8, 0.5);
  mu1[4] = 1.5;
  std::vector<double> mix(64, 0.0);
  Rng mixer(14);
  for (double& v : mix) v = mixer.uniform(-0.3, 0.3);
  for (int j = 0; j < 8; ++j) mix[j * 8 + j] += 1.0;
  LabeledSpectra data = gaussian_classes(8, 2500, mu0, mu1, mix, 14);
  LdaModel model = fit_lda(data);

  // Recompute the regularized pooled covariance and projected-mean gap.
  const int d = 8;
  std::vector<double> mu_a(d, 0.0), mu_b(d, 0.0);
  std::size_t na = 0, nb = 0;
  for (std::size_t i = 0; i < data.count(); ++i) {
    auto row = data.row(i);
    if (data.labels[i] == 0) {
      ++na;
      for (int j = 0; j < d; ++j) mu_a[j] += row[j];
    } else {
      ++nb;
      for (int j = 0; j < d; ++j) mu_b[j] += row[j];
    }
  }
  for (int j = 0; j < d; ++j) {
    mu_a[j] /= na;
    mu_b[j] /= nb;
  }
  std::vector<double> cov(d * d, 0.0);
  for (std::size_t i = 0; i < data.count(); ++i) {
    auto row = data.row(i);
    const std::vector<double>& mu = data.labels[i] == 0 ? mu_a : mu_b;
    for (int j = 0; j < d; ++j)
      for (int k = 0; k < d; ++k)
        cov[j * d + k] += (row[j] - mu[j]) * (row[k] - mu[k]);
  }
  for (double& v : cov) v /= static_cast<double>(data.count() - 2);
  double trace = 0.0;
  for (int j = 0; j < d; ++j) trace += cov[j * d + j];
  for (int j = 0; j < d; ++j) cov[j * d + j] += 1e-6 * trace / d;

  auto fisher = [&](const std::vector<double>& v) {
    double gap = 0.0, spread = 0.0;
    for (int j = 0; j < d; ++j) gap += v[j] * (mu_b[j] - mu_a[j]);
    for (int j = 0; j < d; ++j)
      for (int k = 0; k < d; ++k) spread += v[j] * cov[j * d + k] * v[k];
    return gap * gap / spread;
  };

  const double best = fisher(model.w);
  Rng rng(15);
  for (int rep = 0; rep < 1000; ++rep) {
    std::vector<double> v(d);
    for (double& x : v) x = rng.normal();
    CHECK(fisher(v) <= best + 1e-9);
  }
}

TEST_CASE("class statistics match a two-pass oracle and reject degenerates") {
  std::vector<double> mu0(8, 0.3), mu1(8, 0.6);
  LabeledSpectra data = gaussian_classes(8, 200, mu0, mu1, {}, 16);
  ClassBandStats stats = class_spectra_stats(data);

  for (int cls = 0; cls < 2; ++cls) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < data.count(); ++i)
      if (data.labels[i] == cls) members.push_back(i);
    for (int j = 0; j < 8; ++j) {
      double mean = 0.0;
      for (std::size_t i : members) mean += data.row(i)[j];
      mean /= static_cast<double>(members.size());
      double var = 0.0;
      for (std::size_t i : members) {
        const double e = data.row(i)[j] - mean;
        var += e * e;
      }
      var /= static_cast<double>(members.size() - 1);
      CHECK(stats.mean[cls][j] == doctest::Approx(mean).epsilon(1e-12));
      CHECK(stats.sd[cls][j] ==
            doctest::Approx(std::sqrt(var)).epsilon(1e-12));
    }
  }

  // Constant class: zero SD, mean = the constant.
  LabeledSpectra flat;
  flat.dim = 2;
  for (int i = 0; i < 3; ++i) {
    flat.x.insert(flat.x.end(), {2.5, 1.5});
    flat.labels.push_back(0);
    flat.x.insert(flat.x.end(), {0.5, 0.25});
    flat.labels.push_back(1);
  }
  ClassBandStats flat_stats = class_spectra_stats(flat);
  CHECK(flat_stats.mean[0][0] == 2.5);
  CHECK(flat_stats.sd[0][0] == 0.0);
  CHECK(flat_stats.mean[1][1] == 0.25);

  // A class with a single pixel has no defined SD.
  LabeledSpectra tiny;
  tiny.dim = 2;
  tiny.x = {1.0, 2.0, 3.0, 4.0, 5.0, 6.0};
  tiny.labels = {0, 0, 1};
  CHECK_THROWS_AS(class_spectra_stats(tiny), Error);
}

TEST_CASE("model files round-trip") {
  TempDir tmp("lda");
  std::vector<double> mu0(8, 0.0), mu1(8, 1.0);
  LabeledSpectra data = gaussian_classes(8, 300, mu0, mu1, {}, 17);
  LdaModel model = fit_lda(data);
  save_lda_model(model, tmp.path / "model.json");
  LdaModel back = load_lda_model(tmp.path / "model.json");
  CHECK(back.w == model.w);
  CHECK(back.bias == model.bias);
  CHECK(back.weights == model.weights);
  CHECK(back.ranking == model.ranking);
}

namespace {

// Two tiny labelled scenes; band value encodes (band, x, y) so sampled
// spectra can be traced back to their pixel.
DatasetManifest write_scenes(const TempDir& tmp) {
  DatasetManifest manifest;
  manifest.base_dir = tmp.path;
  for (int s = 0; s < 2; ++s) {
    const std::string id = "s" + std::to_string(s);
    SpectralCube cube;
    cube.width = 6;
    cube.height = 4;
    cube.normalized = true;
    for (int b = 0; b < kNumBands; ++b) {
      cube.bands[b] = Plane(6, 4);
      for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 6; ++x)
          cube.bands[b].at(x, y) = b * 1000 + (s * 100 + y * 10 + x);
    }
    cube.pan = Plane(6, 4, 1.0);

    PixelMask mask;
    mask.width = 6;
    mask.height = 4;
    mask.labels.assign(24, kMaskBackground);
    // 5 leaf and 5 scab pixels per scene.
    for (int i = 0; i < 5; ++i) {
      mask.labels[i] = kMaskLeaf;
      mask.labels[12 + i] = kMaskScab;
    }

    SceneEntry e;
    e.scene_id = id;
    e.cube = id + ".cube";
    e.mask = id + ".png";
    save_cube(cube, tmp.path / e.cube);
    save_mask(mask, tmp.path / e.mask);
    manifest.entries.push_back(e);
  }
  return manifest;
}

}  // namespace

TEST_CASE("pixel sampling is balanced, deterministic, and traceable") {
  TempDir tmp("lda_sample");
  DatasetManifest manifest = write_scenes(tmp);

  // Exhaustion: exactly the available 10+10 pixels come back.
  LabeledSpectra all =
      sample_pixels(manifest, 10, 42, SpectraSource::raw_bands);
  CHECK(all.count() == 20);
  std::size_t leaf = 0, scab = 0;
  for (std::uint8_t c : all.labels) (c == kClassLeaf ? leaf : scab) += 1;
  CHECK(leaf == 10);
  CHECK(scab == 10);

  // Every sampled spectrum decodes to a pixel with the right mask label.
  for (std::size_t i = 0; i < all.count(); ++i) {
    auto row = all.row(i);
    const int code = static_cast<int>(row[0]);
    const int y = (code % 100) / 10;
    CHECK((all.labels[i] == kClassLeaf ? y == 0 : y == 2));
    for (int b = 0; b < kNumBands; ++b)
      CHECK(row[b] == doctest::Approx(b * 1000 + code));
  }

  // Determinism and seed sensitivity on a subsample.
  LabeledSpectra a = sample_pixels(manifest, 4, 7, SpectraSource::raw_bands);
  LabeledSpectra b = sample_pixels(manifest, 4, 7, SpectraSource::raw_bands);
  CHECK(a.x == b.x);
  CHECK(a.labels == b.labels);

  CHECK_THROWS_AS(sample_pixels(manifest, 11, 7, SpectraSource::raw_bands),
                  Error);
}
