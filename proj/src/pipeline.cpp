#include "mspipe/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include <nlohmann/json.hpp>

#include "mspipe/composer.hpp"
#include "mspipe/detmetrics.hpp"
#include "mspipe/errors.hpp"
#include "mspipe/lda.hpp"
#include "mspipe/pixelnet.hpp"
#include "mspipe/ringconv.hpp"
#include "mspipe/rng.hpp"
#include "mspipe/util.hpp"

namespace mspipe {

namespace fs = std::filesystem;
using nlohmann::json;

fs::path PipelineConfig::resolve(const std::string& rel) const {
  fs::path p(rel);
  if (p.is_absolute()) return p;
  return config_dir / p;
}

fs::path PipelineConfig::stage_dir(const std::string& stage) const {
  return out_dir / stage;
}

PipelineConfig load_pipeline_config(const fs::path& path) {
  const std::string text = read_file(path);
  json doc = json::parse(text);

  PipelineConfig cfg;
  cfg.config_dir = path.has_parent_path() ? path.parent_path() : fs::path(".");
  cfg.config_hash = fnv1a(text);
  if (doc.contains("out_dir"))
    cfg.out_dir = cfg.resolve(doc["out_dir"].get<std::string>());
  cfg.jobs = doc.value("jobs", 1);
  cfg.manifest = doc.value("manifest", std::string());

  if (doc.contains("white")) {
    const json& w = doc["white"];
    cfg.white.cube = w.value("cube", std::string());
    if (w.contains("patch")) {
      const json& p = w["patch"];
      cfg.white.patch = PatchRect{p.at("x").get<int>(), p.at("y").get<int>(),
                                  p.at("w").get<int>(), p.at("h").get<int>()};
    }
  }

  if (doc.contains("kernels")) {
    const json& k = doc["kernels"];
    cfg.kernels.alpha = k.value("alpha", 50);
    cfg.kernels.dump = k.value("dump", false);
    if (k.contains("rings"))
      for (const json& ring : k["rings"])
        cfg.kernels.rings.emplace_back(ring.at("beta").get<double>(),
                                       ring.at("sigma").get<double>());
  }
  if (cfg.kernels.rings.empty())
    cfg.kernels.rings = {{4.0, 0.781}, {8.0, 1.56}, {16.0, 3.13}, {32.0, 6.25}};

  if (doc.contains("lda")) {
    const json& l = doc["lda"];
    cfg.lda.train_per_class = l.value("train_per_class", cfg.lda.train_per_class);
    cfg.lda.heldout_per_class =
        l.value("heldout_per_class", cfg.lda.heldout_per_class);
    cfg.lda.seed = l.value("seed", cfg.lda.seed);
  }

  if (doc.contains("segnet")) {
    const json& s = doc["segnet"];
    cfg.segnet.train_per_class =
        s.value("train_per_class", cfg.segnet.train_per_class);
    cfg.segnet.epochs = s.value("epochs", cfg.segnet.epochs);
    cfg.segnet.batch_size = s.value("batch_size", cfg.segnet.batch_size);
    cfg.segnet.learning_rate =
        s.value("learning_rate", cfg.segnet.learning_rate);
    cfg.segnet.seed = s.value("seed", cfg.segnet.seed);
    cfg.segnet.input_dim = s.value("input_dim", cfg.segnet.input_dim);
    cfg.segnet.detect_threshold =
        s.value("detect_threshold", cfg.segnet.detect_threshold);
    if (cfg.segnet.input_dim != kFeatureCount &&
        cfg.segnet.input_dim != kNumBands)
      fail("segnet.input_dim must be 40 or 8");
  }

  if (doc.contains("compose") && doc["compose"].contains("sets"))
    cfg.compose_sets = doc["compose"]["sets"].get<std::vector<std::string>>();
  if (cfg.compose_sets.empty())
    for (const ImageSetSpec& spec : image_set_table())
      cfg.compose_sets.push_back(spec.name);
  for (const std::string& name : cfg.compose_sets) image_set_by_name(name);

  if (doc.contains("split")) {
    const json& s = doc["split"];
    if (s.contains("ratios")) {
      auto r = s["ratios"].get<std::vector<double>>();
      if (r.size() != 3) fail("split.ratios must list 3 values");
      std::copy(r.begin(), r.end(), cfg.split.ratios.begin());
    }
    cfg.split.seed = s.value("seed", cfg.split.seed);
  }
  if (std::abs(cfg.split.ratios[0] + cfg.split.ratios[1] + cfg.split.ratios[2] -
               1.0) > 1e-9)
    fail("split ratios must sum to 1");

  if (doc.contains("augment")) {
    const json& a = doc["augment"];
    cfg.augment.per_image = a.value("per_image", cfg.augment.per_image);
    cfg.augment.seed = a.value("seed", cfg.augment.seed);
    if (a.contains("ops"))
      cfg.augment.ops = a["ops"].get<std::vector<std::string>>();
    if (a.contains("sets"))
      cfg.augment.sets = a["sets"].get<std::vector<std::string>>();
  }

  if (doc.contains("evaluate")) {
    const json& e = doc["evaluate"];
    cfg.evaluate.confidence_threshold =
        e.value("confidence_threshold", cfg.evaluate.confidence_threshold);
    cfg.evaluate.nms_iou = e.value("nms_iou", cfg.evaluate.nms_iou);
    cfg.evaluate.min_component_area =
        e.value("min_component_area", cfg.evaluate.min_component_area);
  }
  for (double t : {cfg.evaluate.confidence_threshold, cfg.evaluate.nms_iou})
    if (!(t >= 0.0 && t <= 1.0)) fail("evaluation thresholds must be in [0,1]");

  if (doc.contains("synthetic")) {
    const json& s = doc["synthetic"];
    cfg.synthetic.enabled = true;
    cfg.synthetic.scenes = s.value("scenes", cfg.synthetic.scenes);
    cfg.synthetic.seed = s.value("seed", cfg.synthetic.seed);
    cfg.synthetic.defaults = s.value("defaults", cfg.synthetic.defaults);
    json merged = json::parse(read_file(cfg.resolve(cfg.synthetic.defaults)));
    if (s.contains("spec"))
      for (const auto& [key, value] : s["spec"].items()) merged[key] = value;
    cfg.synthetic.spec = synthetic_spec_from_json(merged);
  }

  if (cfg.manifest.empty() && !cfg.synthetic.enabled)
    fail("config needs either a manifest or a synthetic block");
  return cfg;
}

namespace {

void write_run_log(const PipelineConfig& cfg, const std::string& stage,
                   json seeds) {
  json doc;
  doc["stage"] = stage;
  char hash[32];
  std::snprintf(hash, sizeof(hash), "%016llx",
                static_cast<unsigned long long>(cfg.config_hash));
  doc["config_hash"] = hash;
  doc["version"] = kVersion;
  doc["seeds"] = std::move(seeds);
  atomic_write(cfg.stage_dir(stage) / "run.json", doc.dump(2) + "\n");
}

// The most processed manifest available for downstream stages.
fs::path source_manifest_path(const PipelineConfig& cfg, bool want_split) {
  if (want_split) {
    const fs::path split = cfg.stage_dir("split") / "manifest.json";
    if (fs::exists(split)) return split;
  }
  if (cfg.synthetic.enabled) {
    const fs::path synth = cfg.stage_dir("gen-synthetic") / "manifest.json";
    if (fs::exists(synth)) return synth;
    fail("synthetic manifest missing; run gen-synthetic first");
  }
  if (cfg.manifest.empty()) fail("no manifest configured");
  return cfg.resolve(cfg.manifest);
}

// Rewrites entry paths relative to a new manifest location.
void save_manifest_rebased(const DatasetManifest& manifest,
                           const fs::path& new_path) {
  DatasetManifest rebased = manifest;
  const fs::path new_dir =
      new_path.has_parent_path() ? new_path.parent_path() : fs::path(".");
  fs::create_directories(new_dir);
  auto rebase = [&](std::string& rel) {
    if (rel.empty()) return;
    rel = fs::relative(fs::absolute(manifest.resolve(rel)),
                       fs::absolute(new_dir))
              .generic_string();
  };
  for (SceneEntry& e : rebased.entries) {
    rebase(e.cube);
    rebase(e.rgb);
    rebase(e.mask);
    rebase(e.boxes);
  }
  save_manifest(rebased, new_path);
}

fs::path white_cube_path(const PipelineConfig& cfg) {
  if (!cfg.white.cube.empty()) return cfg.resolve(cfg.white.cube);
  if (cfg.synthetic.enabled) {
    const fs::path p = cfg.stage_dir("gen-synthetic") / "white.cube";
    if (fs::exists(p)) return p;
    fail("synthetic white cube missing; run gen-synthetic first");
  }
  fail("no white calibration cube configured");
}

std::vector<RingKernel> build_bank(const PipelineConfig& cfg) {
  std::vector<RingKernel> bank;
  for (const auto& [beta, sigma] : cfg.kernels.rings)
    bank.push_back(make_ring_kernel(cfg.kernels.alpha, beta, sigma));
  return bank;
}

void stage_gen_synthetic(const PipelineConfig& cfg) {
  if (!cfg.synthetic.enabled) fail("config has no synthetic block");
  gen_synthetic(cfg.synthetic.spec, cfg.synthetic.scenes, cfg.synthetic.seed,
                cfg.stage_dir("gen-synthetic"));
  write_run_log(cfg, "gen-synthetic", {{"seed", cfg.synthetic.seed}});
}

void stage_split(const PipelineConfig& cfg) {
  DatasetManifest manifest =
      load_manifest(source_manifest_path(cfg, /*want_split=*/false));
  DatasetManifest tagged =
      split_manifest(manifest, cfg.split.ratios, cfg.split.seed);
  save_manifest_rebased(tagged, cfg.stage_dir("split") / "manifest.json");
  write_run_log(cfg, "split", {{"seed", cfg.split.seed}});
}

void stage_calibrate(const PipelineConfig& cfg) {
  SpectralCube white = load_cube(white_cube_path(cfg));
  const PatchRect patch = cfg.white.patch.value_or(
      PatchRect{0, 0, white.width, white.height});
  NormCoefficients coeffs = compute_norm_coefficients(white, patch);
  save_coefficients(coeffs, cfg.stage_dir("calibrate") / "coefficients.json");
  write_run_log(cfg, "calibrate", json::object());
}

void stage_normalize(const PipelineConfig& cfg) {
  const fs::path coeff_path = cfg.stage_dir("calibrate") / "coefficients.json";
  if (!fs::exists(coeff_path))
    fail("coefficients missing; run calibrate first");
  const NormCoefficients coeffs = load_coefficients(coeff_path);

  DatasetManifest manifest = load_manifest(source_manifest_path(cfg, true));
  const fs::path dir = cfg.stage_dir("normalize");
  fs::create_directories(dir);

  parallel_for(manifest.entries.size(), cfg.jobs, [&](std::size_t i) {
    const SceneEntry& e = manifest.entries[i];
    SpectralCube cube = load_cube(manifest.resolve(e.cube));
    save_cube(normalize_cube(cube, coeffs), dir / (e.scene_id + ".cube"));
  });

  DatasetManifest out = manifest;
  auto rebase = [&](std::string& rel) {
    if (rel.empty()) return;
    rel = fs::relative(fs::absolute(manifest.resolve(rel)), fs::absolute(dir))
              .generic_string();
  };
  for (SceneEntry& e : out.entries) {
    e.cube = e.scene_id + ".cube";
    rebase(e.rgb);
    rebase(e.mask);
    rebase(e.boxes);
  }
  out.base_dir = dir;
  save_manifest(out, dir / "manifest.json");
  write_run_log(cfg, "normalize", json::object());
}

DatasetManifest normalized_manifest(const PipelineConfig& cfg) {
  const fs::path p = cfg.stage_dir("normalize") / "manifest.json";
  if (!fs::exists(p)) fail("normalized manifest missing; run normalize first");
  return load_manifest(p);
}

void stage_features(const PipelineConfig& cfg) {
  DatasetManifest manifest = normalized_manifest(cfg);
  const std::vector<RingKernel> bank = build_bank(cfg);
  const fs::path dir = cfg.stage_dir("features");
  fs::create_directories(dir);

  if (cfg.kernels.dump)
    for (std::size_t k = 0; k < bank.size(); ++k)
      save_kernel(bank[k],
                  dir / ("kernel_" + std::to_string(k) + ".img"));

  for (const SceneEntry& e : manifest.entries) {
    SpectralCube cube = load_cube(manifest.resolve(e.cube));
    FeatureCube fc = build_feature_cube(cube, bank, cfg.jobs);
    save_feature_cube(fc, dir / (e.scene_id + ".feat"));
  }
  write_run_log(cfg, "features", json::object());
}

void stage_lda(const PipelineConfig& cfg) {
  DatasetManifest manifest = normalized_manifest(cfg);
  const bool has_split = !manifest.in_split(Split::train).empty();
  const fs::path dir = cfg.stage_dir("lda");

  LabeledSpectra train =
      has_split ? sample_pixels_in_split(manifest, Split::train,
                                         cfg.lda.train_per_class, cfg.lda.seed,
                                         SpectraSource::raw_bands)
                : sample_pixels(manifest, cfg.lda.train_per_class, cfg.lda.seed,
                                SpectraSource::raw_bands);
  LdaModel model = fit_lda(train);
  save_lda_model(model, dir / "model.json");

  ClassBandStats stats = class_spectra_stats(train);
  json stats_doc;
  stats_doc["wavelengths"] = kWavelengths;
  stats_doc["leaf_mean"] = stats.mean[kClassLeaf];
  stats_doc["leaf_sd"] = stats.sd[kClassLeaf];
  stats_doc["scab_mean"] = stats.mean[kClassScab];
  stats_doc["scab_sd"] = stats.sd[kClassScab];
  atomic_write(dir / "class_stats.json", stats_doc.dump(2) + "\n");
  std::string csv = "wavelength_nm,leaf_mean,leaf_sd,scab_mean,scab_sd\n";
  for (int b = 0; b < kNumBands; ++b) {
    char row[160];
    std::snprintf(row, sizeof(row), "%d,%.6f,%.6f,%.6f,%.6f\n",
                  kWavelengths[b], stats.mean[0][b], stats.sd[0][b],
                  stats.mean[1][b], stats.sd[1][b]);
    csv += row;
  }
  atomic_write(dir / "class_stats.csv", csv);

  // Held-out confusion from the test split when tagged, otherwise from
  // an independently seeded sample.
  LabeledSpectra heldout =
      has_split
          ? sample_pixels_in_split(manifest, Split::test,
                                   cfg.lda.heldout_per_class, cfg.lda.seed + 1,
                                   SpectraSource::raw_bands)
          : sample_pixels(manifest, cfg.lda.heldout_per_class, cfg.lda.seed + 1,
                          SpectraSource::raw_bands);
  Confusion cm = lda_confusion(model, heldout);
  json cm_doc;
  cm_doc["rows"] = {{"leaf", {cm.rows[0][0], cm.rows[0][1]}},
                    {"scab", {cm.rows[1][0], cm.rows[1][1]}}};
  cm_doc["counts"] = {{"leaf", {cm.counts[0][0], cm.counts[0][1]}},
                      {"scab", {cm.counts[1][0], cm.counts[1][1]}}};
  atomic_write(dir / "confusion.json", cm_doc.dump(2) + "\n");
  char cm_csv[256];
  std::snprintf(cm_csv, sizeof(cm_csv),
                "true_label,pred_leaf,pred_scab\nleaf,%.6f,%.6f\nscab,%.6f,%.6f\n",
                cm.rows[0][0], cm.rows[0][1], cm.rows[1][0], cm.rows[1][1]);
  atomic_write(dir / "confusion.csv", std::string(cm_csv));

  write_run_log(cfg, "lda",
                {{"seed", cfg.lda.seed}, {"heldout_seed", cfg.lda.seed + 1}});
}

void stage_seg_train(const PipelineConfig& cfg) {
  DatasetManifest manifest = normalized_manifest(cfg);
  const bool has_split = !manifest.in_split(Split::train).empty();
  const bool use_features = cfg.segnet.input_dim == kFeatureCount;
  const SpectraSource source =
      use_features ? SpectraSource::features40 : SpectraSource::raw_bands;
  const fs::path feature_dir = cfg.stage_dir("features");
  if (use_features && !fs::exists(feature_dir))
    fail("feature files missing; run features first");

  LabeledSpectra train_data =
      has_split ? sample_pixels_in_split(manifest, Split::train,
                                         cfg.segnet.train_per_class,
                                         cfg.segnet.seed, source, feature_dir)
                : sample_pixels(manifest, cfg.segnet.train_per_class,
                                cfg.segnet.seed, source, feature_dir);

  PixelNetModel model = init_model(cfg.segnet.seed, cfg.segnet.input_dim);
  TrainHyper hyper;
  hyper.epochs = cfg.segnet.epochs;
  hyper.batch_size = cfg.segnet.batch_size;
  hyper.learning_rate = cfg.segnet.learning_rate;
  hyper.seed = cfg.segnet.seed + 1;
  TrainResult result = train(std::move(model), train_data, hyper);

  const fs::path dir = cfg.stage_dir("segnet");
  save_pixelnet(result.model, dir / "model.json");
  json losses;
  losses["epoch_losses"] = result.epoch_losses;
  atomic_write(dir / "loss_history.json", losses.dump(2) + "\n");
  write_run_log(cfg, "seg-train",
                {{"init_seed", cfg.segnet.seed},
                 {"shuffle_seed", cfg.segnet.seed + 1}});
}

struct PixelCounts {
  std::int64_t tp = 0, fp = 0, fn = 0;

  void add(const PixelCounts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
  }
  json to_json() const {
    const double p = tp + fp > 0 ? double(tp) / double(tp + fp) : 0.0;
    const double r = tp + fn > 0 ? double(tp) / double(tp + fn) : 0.0;
    const double f1 = p + r > 0 ? 2 * p * r / (p + r) : 0.0;
    return {{"tp", tp},        {"fp", fp}, {"fn", fn},
            {"precision", p},  {"recall", r}, {"f1", f1}};
  }
};

void stage_seg_infer(const PipelineConfig& cfg) {
  DatasetManifest manifest = normalized_manifest(cfg);
  const fs::path model_path = cfg.stage_dir("segnet") / "model.json";
  if (!fs::exists(model_path)) fail("segnet model missing; run seg-train first");
  const PixelNetModel model = load_pixelnet(model_path);
  const bool use_features = model.input_dim() == kFeatureCount;
  const fs::path dir = cfg.stage_dir("probmaps");
  fs::create_directories(dir);

  std::map<std::string, PixelCounts> by_split;
  PixelCounts all;
  for (const SceneEntry& e : manifest.entries) {
    FeatureCube fc;
    if (use_features) {
      fc = load_feature_cube(cfg.stage_dir("features") / (e.scene_id + ".feat"));
    } else {
      SpectralCube cube = load_cube(manifest.resolve(e.cube));
      fc.width = cube.width;
      fc.height = cube.height;
      fc.planes.assign(cube.bands.begin(), cube.bands.end());
    }
    ProbabilityMap map = infer_map(model, fc, cfg.jobs);
    save_probability_map(map, dir / (e.scene_id + ".prob"));
    save_probability_png(map, dir / (e.scene_id + ".png"));

    if (e.mask.empty()) continue;
    PixelMask mask = load_mask(manifest.resolve(e.mask));
    PixelCounts counts;
    for (int y = 0; y < map.height; ++y)
      for (int x = 0; x < map.width; ++x) {
        const bool pred = map.prob.at(x, y) >= cfg.segnet.detect_threshold;
        const bool truth = mask.at(x, y) == kMaskScab;
        if (pred && truth) ++counts.tp;
        if (pred && !truth) ++counts.fp;
        if (!pred && truth) ++counts.fn;
      }
    by_split[to_string(e.split)].add(counts);
    all.add(counts);
  }

  json metrics;
  metrics["threshold"] = cfg.segnet.detect_threshold;
  metrics["all"] = all.to_json();
  for (const auto& [split, counts] : by_split)
    metrics[split] = counts.to_json();
  atomic_write(dir / "pixel_metrics.json", metrics.dump(2) + "\n");
  write_run_log(cfg, "seg-infer", json::object());
}

void stage_compose(const PipelineConfig& cfg) {
  DatasetManifest manifest = normalized_manifest(cfg);
  const fs::path prob_dir = cfg.stage_dir("probmaps");
  const fs::path base = cfg.stage_dir("compose");

  for (const SceneEntry& e : manifest.entries) {
    SpectralCube cube = load_cube(manifest.resolve(e.cube));
    std::optional<ProbabilityMap> prob;
    const fs::path prob_path = prob_dir / (e.scene_id + ".prob");
    if (fs::exists(prob_path)) prob = load_probability_map(prob_path);
    std::optional<RgbImage> rgb;
    if (!e.rgb.empty()) rgb = load_rgb_image(manifest.resolve(e.rgb));

    for (const std::string& set_name : cfg.compose_sets) {
      const ImageSetSpec& spec = image_set_by_name(set_name);
      ComposedImage img = compose(spec, &cube, prob ? &*prob : nullptr,
                                  rgb ? &*rgb : nullptr);
      img.scene_id = e.scene_id;
      const fs::path set_dir = base / image_set_slug(set_name);
      save_composed(img, set_dir / (e.scene_id + ".img"));
      if (img.channels.size() == 1 || img.channels.size() == 3)
        save_composed_png(img, set_dir / (e.scene_id + ".png"));
    }
  }
  write_run_log(cfg, "compose", json::object());
}

void stage_augment(const PipelineConfig& cfg) {
  DatasetManifest manifest = normalized_manifest(cfg);
  const fs::path base = cfg.stage_dir("augment");
  Rng rng(cfg.augment.seed);

  std::vector<const SceneEntry*> train = manifest.in_split(Split::train);
  if (train.empty())
    for (const SceneEntry& e : manifest.entries) train.push_back(&e);

  for (const std::string& set_name : cfg.augment.sets) {
    const fs::path src_dir = cfg.stage_dir("compose") / image_set_slug(set_name);
    const fs::path dst_dir = base / image_set_slug(set_name);
    for (const SceneEntry* e : train) {
      const fs::path img_path = src_dir / (e->scene_id + ".img");
      if (!fs::exists(img_path))
        fail("composed image missing for augment: " + img_path.string());
      ComposedImage img = load_composed(img_path);
      std::vector<BoxAnnotation> boxes;
      if (!e->boxes.empty())
        boxes = load_annotations(manifest.resolve(e->boxes));

      for (int i = 0; i < cfg.augment.per_image; ++i) {
        const std::string& op_name =
            cfg.augment.ops[rng.below(cfg.augment.ops.size())];
        AugmentedScene aug;
        if (op_name == "hflip") {
          aug = augment(img, boxes, AugmentOp::hflip());
        } else if (op_name == "vflip") {
          aug = augment(img, boxes, AugmentOp::vflip());
        } else if (op_name == "rot90") {
          aug = augment(img, boxes,
                        AugmentOp::rotate(90.0 * (1 + rng.below(3))));
        } else if (op_name == "rotate") {
          aug = augment(img, boxes, AugmentOp::rotate(rng.uniform(-30, 30)));
        } else if (op_name == "translate") {
          aug = augment(img, boxes,
                        AugmentOp::translate(rng.uniform(-0.2, 0.2),
                                             rng.uniform(-0.2, 0.2)));
        } else if (op_name == "scale") {
          aug = augment(img, boxes, AugmentOp::scale(rng.uniform(0.7, 1.3)));
        } else {
          fail("unknown augment op: " + op_name);
        }
        const std::string stem = e->scene_id + ".aug" + std::to_string(i);
        save_composed(aug.image, dst_dir / (stem + ".img"));
        save_annotations(aug.boxes, dst_dir / (stem + ".txt"));
      }
    }
  }
  write_run_log(cfg, "augment", {{"seed", cfg.augment.seed}});
}

void stage_evaluate(const PipelineConfig& cfg) {
  DatasetManifest manifest = normalized_manifest(cfg);
  const fs::path prob_dir = cfg.stage_dir("probmaps");
  const fs::path dir = cfg.stage_dir("eval");

  std::vector<const SceneEntry*> scenes = manifest.in_split(Split::test);
  if (scenes.empty())
    for (const SceneEntry& e : manifest.entries) scenes.push_back(&e);

  std::vector<Detection> dets;
  std::vector<GroundTruthBox> gts;
  for (const SceneEntry* e : scenes) {
    const fs::path prob_path = prob_dir / (e->scene_id + ".prob");
    if (!fs::exists(prob_path))
      fail("probability map missing for evaluate: " + prob_path.string());
    ProbabilityMap map = load_probability_map(prob_path);
    std::vector<Detection> scene_dets =
        detections_from_map(e->scene_id, map, cfg.segnet.detect_threshold,
                            cfg.evaluate.min_component_area);
    dets.insert(dets.end(), scene_dets.begin(), scene_dets.end());
    if (e->boxes.empty()) continue;
    std::vector<GroundTruthBox> scene_gts = boxes_to_ground_truth(
        e->scene_id, load_annotations(manifest.resolve(e->boxes)), map.width,
        map.height);
    gts.insert(gts.end(), scene_gts.begin(), scene_gts.end());
  }

  save_predictions(dets, dir / "predictions.txt");
  EvalThresholds thresholds;
  thresholds.min_confidence = cfg.evaluate.confidence_threshold;
  thresholds.nms_iou = cfg.evaluate.nms_iou;
  EvalReport report = evaluate(dets, gts, thresholds);
  atomic_write(dir / "report.json", report_to_json(report).dump(2) + "\n");
  atomic_write(dir / "report.csv",
               report_csv_header() + report_csv_row("SegN-boxes", report));
  write_run_log(cfg, "evaluate", json::object());
}

}  // namespace

const std::vector<std::string>& stage_names() {
  static const std::vector<std::string> names = {
      "gen-synthetic", "split",     "calibrate", "normalize",
      "features",      "lda",       "seg-train", "seg-infer",
      "compose",       "augment",   "evaluate"};
  return names;
}

void run_stage(const std::string& stage, const PipelineConfig& cfg) {
  if (stage == "gen-synthetic") return stage_gen_synthetic(cfg);
  if (stage == "split") return stage_split(cfg);
  if (stage == "calibrate") return stage_calibrate(cfg);
  if (stage == "normalize") return stage_normalize(cfg);
  if (stage == "features") return stage_features(cfg);
  if (stage == "lda") return stage_lda(cfg);
  if (stage == "seg-train") return stage_seg_train(cfg);
  if (stage == "seg-infer") return stage_seg_infer(cfg);
  if (stage == "compose") return stage_compose(cfg);
  if (stage == "augment") return stage_augment(cfg);
  if (stage == "evaluate") return stage_evaluate(cfg);
  fail("unknown stage: " + stage);
}

void run_pipeline(const PipelineConfig& cfg) {
  for (const std::string& stage : stage_names()) {
    if (stage == "gen-synthetic" && !cfg.synthetic.enabled) continue;
    run_stage(stage, cfg);
  }
}

}  // namespace mspipe
