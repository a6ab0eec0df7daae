#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mspipe/annotations.hpp"
#include "mspipe/pixelnet.hpp"

namespace mspipe {

/// Axis-aligned box in pixels, x1 < x2 and y1 < y2.
struct PixelBox {
  double x1 = 0, y1 = 0, x2 = 0, y2 = 0;
};

struct Detection {
  std::string image_id;
  int class_id = 0;
  PixelBox box;
  double confidence = 0.0;
};

struct GroundTruthBox {
  std::string image_id;
  int class_id = 0;
  PixelBox box;
};

double iou(const PixelBox& a, const PixelBox& b);

/// Detections with confidence >= min_conf, input order preserved.
std::vector<Detection> filter_confidence(const std::vector<Detection>& dets,
                                         double min_conf = 0.1);

/// Greedy per-class suppression within one image: boxes are visited by
/// descending confidence (ties by input order) and a box is dropped when
/// its IoU with any kept box of the same class exceeds iou_thresh.
std::vector<Detection> nms(const std::vector<Detection>& dets,
                           double iou_thresh = 0.2);

/// Greedy confidence-ordered one-to-one matching. det_is_tp[i] and
/// gt_matched[j] refer to the input orders.
struct MatchResult {
  std::vector<bool> det_is_tp;
  std::vector<bool> gt_matched;
};

MatchResult match(const std::vector<Detection>& dets,
                  const std::vector<GroundTruthBox>& gts, double iou_thresh);

/// 101-point interpolated average precision over all classes present in
/// gts (macro mean); nullopt when gts is empty.
std::optional<double> average_precision(const std::vector<Detection>& dets,
                                        const std::vector<GroundTruthBox>& gts,
                                        double iou_thresh);

inline constexpr int kNumIouThresholds = 10;
/// 0.50, 0.55, ..., 0.95.
std::vector<double> iou_threshold_grid();

struct EvalThresholds {
  double min_confidence = 0.1;
  double nms_iou = 0.2;
  double match_iou = 0.5;
};

struct ClassReport {
  int class_id = 0;
  std::int64_t tp = 0, fp = 0, fn = 0;
  double precision = 0, recall = 0, f1 = 0;
  std::vector<double> ap_per_iou;  // one per grid threshold, NaN if undefined
};

struct EvalReport {
  EvalThresholds thresholds;
  std::int64_t tp = 0, fp = 0, fn = 0;
  double precision = 0, recall = 0, f1 = 0;
  bool zero_denominator = false;  // some P/R/F1 denominator was empty
  std::vector<double> ap_per_iou;  // macro mean over classes with ground truth
  double map50 = 0;
  double map5095 = 0;
  std::vector<ClassReport> per_class;
};

/// Confidence filter, per-image NMS, then matching and AP over the IoU
/// grid. P/R/F1 are micro-averaged at IoU 0.5.
EvalReport evaluate(const std::vector<Detection>& dets,
                    const std::vector<GroundTruthBox>& gts,
                    const EvalThresholds& thresholds = {});

/// Connected components of prob >= threshold as detections whose
/// confidence is the component's mean probability.
std::vector<Detection> detections_from_map(const std::string& image_id,
                                           const ProbabilityMap& map,
                                           double threshold, int min_area = 1);

/// Ground truth from normalized annotations resolved to pixels.
std::vector<GroundTruthBox> boxes_to_ground_truth(
    const std::string& image_id, const std::vector<BoxAnnotation>& boxes,
    int width, int height);

/// Line format: image_id class conf x1 y1 x2 y2.
std::vector<Detection> load_predictions(const std::filesystem::path& path);
void save_predictions(const std::vector<Detection>& dets,
                      const std::filesystem::path& path);

nlohmann::json report_to_json(const EvalReport& report);
EvalReport report_from_json(const nlohmann::json& doc);
/// One CSV row matching the published results-table column order:
/// image_set, P, R, F1, mAP@0.5, mAP@0.5:0.95.
std::string report_csv_header();
std::string report_csv_row(const std::string& image_set,
                           const EvalReport& report);

}  // namespace mspipe
