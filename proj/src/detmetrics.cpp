#include "mspipe/detmetrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include "mspipe/errors.hpp"
#include "mspipe/util.hpp"

namespace mspipe {

using nlohmann::json;

static void validate_box(const PixelBox& b) {
  if (!(b.x1 < b.x2 && b.y1 < b.y2)) fail("degenerate box: x1<x2, y1<y2 required");
}

double iou(const PixelBox& a, const PixelBox& b) {
  validate_box(a);
  validate_box(b);
  const double ix = std::max(0.0, std::min(a.x2, b.x2) - std::max(a.x1, b.x1));
  const double iy = std::max(0.0, std::min(a.y2, b.y2) - std::max(a.y1, b.y1));
  const double inter = ix * iy;
  if (inter <= 0.0) return 0.0;
  const double area_a = (a.x2 - a.x1) * (a.y2 - a.y1);
  const double area_b = (b.x2 - b.x1) * (b.y2 - b.y1);
  return inter / (area_a + area_b - inter);
}

std::vector<Detection> filter_confidence(const std::vector<Detection>& dets,
                                         double min_conf) {
  std::vector<Detection> out;
  for (const Detection& d : dets)
    if (d.confidence >= min_conf) out.push_back(d);
  return out;
}

// Indices sorted by descending confidence, ties keeping input order.
static std::vector<std::size_t> confidence_order(
    const std::vector<Detection>& dets) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return dets[a].confidence > dets[b].confidence;
  });
  return order;
}

std::vector<Detection> nms(const std::vector<Detection>& dets,
                           double iou_thresh) {
  for (const Detection& d : dets) {
    if (d.image_id != dets.front().image_id)
      fail("nms: detections must share one image");
    if (!(d.confidence >= 0.0 && d.confidence <= 1.0))
      fail("nms: confidence outside [0,1]");
  }
  std::vector<Detection> kept;
  for (std::size_t i : confidence_order(dets)) {
    bool suppressed = false;
    for (const Detection& k : kept) {
      if (k.class_id != dets[i].class_id) continue;
      if (iou(k.box, dets[i].box) > iou_thresh) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) kept.push_back(dets[i]);
  }
  return kept;
}

MatchResult match(const std::vector<Detection>& dets,
                  const std::vector<GroundTruthBox>& gts, double iou_thresh) {
  MatchResult result;
  result.det_is_tp.assign(dets.size(), false);
  result.gt_matched.assign(gts.size(), false);
  for (std::size_t i : confidence_order(dets)) {
    const Detection& d = dets[i];
    double best = 0.0;
    std::size_t best_gt = gts.size();
    for (std::size_t j = 0; j < gts.size(); ++j) {
      if (result.gt_matched[j]) continue;
      if (gts[j].image_id != d.image_id || gts[j].class_id != d.class_id)
        continue;
      const double overlap = iou(d.box, gts[j].box);
      if (overlap > best) {
        best = overlap;
        best_gt = j;
      }
    }
    if (best_gt < gts.size() && best >= iou_thresh) {
      result.det_is_tp[i] = true;
      result.gt_matched[best_gt] = true;
    }
  }
  return result;
}

std::vector<double> iou_threshold_grid() {
  std::vector<double> grid(kNumIouThresholds);
  for (int i = 0; i < kNumIouThresholds; ++i) grid[i] = 0.5 + 0.05 * i;
  return grid;
}

// 101-point interpolated AP for a single class's ranked TP flags.
static double interpolated_ap(const std::vector<bool>& ranked_tp,
                              std::size_t n_gt) {
  std::vector<double> precision, recall;
  std::size_t tp = 0;
  for (std::size_t k = 0; k < ranked_tp.size(); ++k) {
    if (ranked_tp[k]) ++tp;
    precision.push_back(static_cast<double>(tp) / static_cast<double>(k + 1));
    recall.push_back(static_cast<double>(tp) / static_cast<double>(n_gt));
  }
  // Monotone envelope from the high-recall end.
  for (std::size_t k = precision.size(); k-- > 1;)
    precision[k - 1] = std::max(precision[k - 1], precision[k]);

  double sum = 0.0;
  std::size_t k = 0;
  for (int i = 0; i <= 100; ++i) {
    const double r = static_cast<double>(i) / 100.0;
    while (k < recall.size() && recall[k] < r) ++k;
    if (k < recall.size()) sum += precision[k];
  }
  return sum / 101.0;
}

std::optional<double> average_precision(const std::vector<Detection>& dets,
                                        const std::vector<GroundTruthBox>& gts,
                                        double iou_thresh) {
  std::set<int> classes;
  for (const GroundTruthBox& g : gts) classes.insert(g.class_id);
  if (classes.empty()) return std::nullopt;

  const MatchResult m = match(dets, gts, iou_thresh);
  double sum = 0.0;
  for (int c : classes) {
    std::size_t n_gt = 0;
    for (const GroundTruthBox& g : gts)
      if (g.class_id == c) ++n_gt;
    std::vector<bool> ranked_tp;
    for (std::size_t i : confidence_order(dets))
      if (dets[i].class_id == c) ranked_tp.push_back(m.det_is_tp[i]);
    sum += interpolated_ap(ranked_tp, n_gt);
  }
  return sum / static_cast<double>(classes.size());
}

EvalReport evaluate(const std::vector<Detection>& dets,
                    const std::vector<GroundTruthBox>& gts,
                    const EvalThresholds& thresholds) {
  EvalReport report;
  report.thresholds = thresholds;

  // Confidence gate, then per-image suppression.
  const std::vector<Detection> confident =
      filter_confidence(dets, thresholds.min_confidence);
  std::map<std::string, std::vector<Detection>> by_image;
  for (const Detection& d : confident) by_image[d.image_id].push_back(d);
  std::vector<Detection> kept;
  for (auto& [id, image_dets] : by_image) {
    std::vector<Detection> image_kept = nms(image_dets, thresholds.nms_iou);
    kept.insert(kept.end(), image_kept.begin(), image_kept.end());
  }

  const MatchResult m = match(kept, gts, thresholds.match_iou);
  std::set<int> classes;
  for (const GroundTruthBox& g : gts) classes.insert(g.class_id);
  for (const Detection& d : kept) classes.insert(d.class_id);

  auto safe_ratio = [&](std::int64_t num, std::int64_t den, double& out) {
    if (den == 0) {
      report.zero_denominator = true;
      out = 0.0;
    } else {
      out = static_cast<double>(num) / static_cast<double>(den);
    }
  };

  const std::vector<double> grid = iou_threshold_grid();
  std::vector<double> ap_sums(grid.size(), 0.0);
  std::size_t classes_with_gt = 0;

  for (int c : classes) {
    ClassReport cr;
    cr.class_id = c;
    std::size_t n_gt = 0;
    for (std::size_t j = 0; j < gts.size(); ++j)
      if (gts[j].class_id == c) {
        ++n_gt;
        if (!m.gt_matched[j]) ++cr.fn;
      }
    for (std::size_t i = 0; i < kept.size(); ++i)
      if (kept[i].class_id == c) (m.det_is_tp[i] ? cr.tp : cr.fp) += 1;
    safe_ratio(cr.tp, cr.tp + cr.fp, cr.precision);
    safe_ratio(cr.tp, cr.tp + cr.fn, cr.recall);
    cr.f1 = (cr.precision + cr.recall) > 0.0
                ? 2.0 * cr.precision * cr.recall / (cr.precision + cr.recall)
                : 0.0;

    if (n_gt > 0) {
      ++classes_with_gt;
      std::vector<GroundTruthBox> class_gts;
      for (const GroundTruthBox& g : gts)
        if (g.class_id == c) class_gts.push_back(g);
      std::vector<Detection> class_dets;
      for (const Detection& d : kept)
        if (d.class_id == c) class_dets.push_back(d);
      for (std::size_t t = 0; t < grid.size(); ++t) {
        auto ap = average_precision(class_dets, class_gts, grid[t]);
        cr.ap_per_iou.push_back(*ap);
        ap_sums[t] += *ap;
      }
    } else {
      cr.ap_per_iou.assign(grid.size(),
                           std::numeric_limits<double>::quiet_NaN());
    }
    report.tp += cr.tp;
    report.fp += cr.fp;
    report.fn += cr.fn;
    report.per_class.push_back(std::move(cr));
  }

  safe_ratio(report.tp, report.tp + report.fp, report.precision);
  safe_ratio(report.tp, report.tp + report.fn, report.recall);
  report.f1 = (report.precision + report.recall) > 0.0
                  ? 2.0 * report.precision * report.recall /
                        (report.precision + report.recall)
                  : 0.0;

  if (classes_with_gt > 0) {
    for (double s : ap_sums)
      report.ap_per_iou.push_back(s / static_cast<double>(classes_with_gt));
    report.map50 = report.ap_per_iou.front();
    report.map5095 =
        std::accumulate(report.ap_per_iou.begin(), report.ap_per_iou.end(),
                        0.0) /
        static_cast<double>(report.ap_per_iou.size());
  } else {
    report.zero_denominator = true;
  }
  return report;
}

std::vector<Detection> detections_from_map(const std::string& image_id,
                                           const ProbabilityMap& map,
                                           double threshold, int min_area) {
  const int w = map.width;
  const int h = map.height;
  std::vector<bool> visited(static_cast<std::size_t>(w) * h, false);
  std::vector<Detection> out;
  std::deque<std::pair<int, int>> queue;

  for (int y0 = 0; y0 < h; ++y0) {
    for (int x0 = 0; x0 < w; ++x0) {
      const std::size_t i0 = static_cast<std::size_t>(y0) * w + x0;
      if (visited[i0] || map.prob.at(x0, y0) < threshold) continue;
      int minx = x0, maxx = x0, miny = y0, maxy = y0;
      double prob_sum = 0.0;
      std::size_t area = 0;
      visited[i0] = true;
      queue.emplace_back(x0, y0);
      while (!queue.empty()) {
        auto [x, y] = queue.front();
        queue.pop_front();
        prob_sum += map.prob.at(x, y);
        ++area;
        minx = std::min(minx, x);
        maxx = std::max(maxx, x);
        miny = std::min(miny, y);
        maxy = std::max(maxy, y);
        const int nbrs[4][2] = {{x - 1, y}, {x + 1, y}, {x, y - 1}, {x, y + 1}};
        for (const auto& nb : nbrs) {
          if (nb[0] < 0 || nb[0] >= w || nb[1] < 0 || nb[1] >= h) continue;
          const std::size_t ni = static_cast<std::size_t>(nb[1]) * w + nb[0];
          if (visited[ni] || map.prob.at(nb[0], nb[1]) < threshold) continue;
          visited[ni] = true;
          queue.emplace_back(nb[0], nb[1]);
        }
      }
      if (area < static_cast<std::size_t>(min_area)) continue;
      Detection d;
      d.image_id = image_id;
      d.class_id = 0;
      d.box = {static_cast<double>(minx), static_cast<double>(miny),
               static_cast<double>(maxx + 1), static_cast<double>(maxy + 1)};
      d.confidence = prob_sum / static_cast<double>(area);
      out.push_back(std::move(d));
    }
  }
  return out;
}

std::vector<GroundTruthBox> boxes_to_ground_truth(
    const std::string& image_id, const std::vector<BoxAnnotation>& boxes,
    int width, int height) {
  std::vector<GroundTruthBox> out;
  for (const BoxAnnotation& b : boxes) {
    GroundTruthBox g;
    g.image_id = image_id;
    g.class_id = b.class_id;
    g.box.x1 = std::clamp((b.cx - b.w / 2) * width, 0.0, double(width));
    g.box.x2 = std::clamp((b.cx + b.w / 2) * width, 0.0, double(width));
    g.box.y1 = std::clamp((b.cy - b.h / 2) * height, 0.0, double(height));
    g.box.y2 = std::clamp((b.cy + b.h / 2) * height, 0.0, double(height));
    if (!(g.box.x1 < g.box.x2 && g.box.y1 < g.box.y2)) continue;
    out.push_back(std::move(g));
  }
  return out;
}

std::vector<Detection> load_predictions(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  std::vector<Detection> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    Detection d;
    if (!(ls >> d.image_id >> d.class_id >> d.confidence >> d.box.x1 >>
          d.box.y1 >> d.box.x2 >> d.box.y2))
      fail("malformed prediction line " + std::to_string(lineno) + " in " +
           path.string());
    if (!(d.confidence >= 0.0 && d.confidence <= 1.0))
      fail("confidence outside [0,1] at line " + std::to_string(lineno));
    validate_box(d.box);
    out.push_back(std::move(d));
  }
  return out;
}

void save_predictions(const std::vector<Detection>& dets,
                      const std::filesystem::path& path) {
  std::string out;
  char buf[256];
  for (const Detection& d : dets) {
    std::snprintf(buf, sizeof(buf), "%s %d %.6f %.3f %.3f %.3f %.3f\n",
                  d.image_id.c_str(), d.class_id, d.confidence, d.box.x1,
                  d.box.y1, d.box.x2, d.box.y2);
    out += buf;
  }
  atomic_write(path, out);
}

json report_to_json(const EvalReport& r) {
  json doc;
  doc["thresholds"] = {{"confidence", r.thresholds.min_confidence},
                       {"nms_iou", r.thresholds.nms_iou},
                       {"match_iou", r.thresholds.match_iou}};
  doc["tp"] = r.tp;
  doc["fp"] = r.fp;
  doc["fn"] = r.fn;
  doc["precision"] = r.precision;
  doc["recall"] = r.recall;
  doc["f1"] = r.f1;
  doc["zero_denominator"] = r.zero_denominator;
  doc["ap_per_iou"] = json::object();
  const std::vector<double> grid = iou_threshold_grid();
  for (std::size_t t = 0; t < r.ap_per_iou.size(); ++t) {
    char key[8];
    std::snprintf(key, sizeof(key), "%.2f", grid[t]);
    doc["ap_per_iou"][key] = r.ap_per_iou[t];
  }
  doc["map50"] = r.map50;
  doc["map5095"] = r.map5095;
  doc["per_class"] = json::array();
  for (const ClassReport& c : r.per_class) {
    json cls;
    cls["class_id"] = c.class_id;
    cls["tp"] = c.tp;
    cls["fp"] = c.fp;
    cls["fn"] = c.fn;
    cls["precision"] = c.precision;
    cls["recall"] = c.recall;
    cls["f1"] = c.f1;
    cls["ap_per_iou"] = json::array();
    for (double ap : c.ap_per_iou)
      cls["ap_per_iou"].push_back(std::isnan(ap) ? json(nullptr) : json(ap));
    doc["per_class"].push_back(std::move(cls));
  }
  return doc;
}

EvalReport report_from_json(const json& doc) {
  EvalReport r;
  r.precision = doc.at("precision").get<double>();
  r.recall = doc.at("recall").get<double>();
  for (double v : {r.precision, r.recall})
    if (!(v >= 0.0 && v <= 1.0)) fail("report metric outside [0,1]");
  if (doc.contains("f1")) {
    r.f1 = doc.at("f1").get<double>();
  } else {
    r.f1 = (r.precision + r.recall) > 0.0
               ? 2.0 * r.precision * r.recall / (r.precision + r.recall)
               : 0.0;
  }
  r.map50 = doc.value("map50", 0.0);
  r.map5095 = doc.value("map5095", 0.0);
  for (double v : {r.f1, r.map50, r.map5095})
    if (!(v >= 0.0 && v <= 1.0)) fail("report metric outside [0,1]");
  if (doc.contains("thresholds")) {
    r.thresholds.min_confidence = doc["thresholds"].value("confidence", 0.1);
    r.thresholds.nms_iou = doc["thresholds"].value("nms_iou", 0.2);
    r.thresholds.match_iou = doc["thresholds"].value("match_iou", 0.5);
  }
  if (doc.contains("tp")) r.tp = doc["tp"].get<std::int64_t>();
  if (doc.contains("fp")) r.fp = doc["fp"].get<std::int64_t>();
  if (doc.contains("fn")) r.fn = doc["fn"].get<std::int64_t>();
  if (doc.contains("ap_per_iou"))
    for (const auto& [key, value] : doc["ap_per_iou"].items())
      r.ap_per_iou.push_back(value.get<double>());
  return r;
}

std::string report_csv_header() {
  return "image_set,precision,recall,f1,map50,map5095\n";
}

std::string report_csv_row(const std::string& image_set,
                           const EvalReport& report) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%s,%.4f,%.4f,%.4f,%.4f,%.4f\n",
                image_set.c_str(), report.precision, report.recall, report.f1,
                report.map50, report.map5095);
  return buf;
}

}  // namespace mspipe
