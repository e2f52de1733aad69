#include "vocada/metrics.hpp"

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <string_view>
#include <unordered_map>

#include "vocada/error.hpp"

namespace vocada {

double iou(const Box& a, const Box& b) {
  const double iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  const double inter = (iw > 0.0 && ih > 0.0) ? iw * ih : 0.0;
  const double uni = a.area() + b.area() - inter;
  if (!(uni > 0.0) || inter <= 0.0) {
    return 0.0;
  }
  return inter / uni;
}

MatchResult match_detections(std::span<const Detection> dets, std::span<const GroundTruthBox> gts,
                             double iou_threshold) {
  MatchResult out;
  out.order.resize(dets.size());
  std::iota(out.order.begin(), out.order.end(), std::size_t{0});
  std::stable_sort(out.order.begin(), out.order.end(),
                   [&](std::size_t a, std::size_t b) { return dets[a].score > dets[b].score; });
  out.det_tp.assign(dets.size(), false);
  out.gt_matched.assign(gts.size(), false);

  std::unordered_map<std::string_view, std::vector<std::size_t>> gts_by_image;
  for (std::size_t g = 0; g < gts.size(); ++g) {
    gts_by_image[gts[g].image_id].push_back(g);
  }

  for (std::size_t d : out.order) {
    const Detection& det = dets[d];
    const auto candidates = gts_by_image.find(det.image_id);
    if (candidates == gts_by_image.end()) {
      continue;
    }
    std::optional<std::size_t> best;
    double best_iou = 0.0;
    for (std::size_t g : candidates->second) {
      if (out.gt_matched[g] || gts[g].class_id != det.class_id) {
        continue;
      }
      const double v = iou(det.box, gts[g].box);
      if (v >= iou_threshold && (!best || v > best_iou)) {
        best = g;
        best_iou = v;
      }
    }
    if (best) {
      out.det_tp[d] = true;
      out.gt_matched[*best] = true;
    }
  }
  return out;
}

std::vector<PRPoint> pr_curve(std::span<const ScoredFlag> flags, std::size_t n_gt) {
  std::vector<std::size_t> order(flags.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return flags[a].confidence > flags[b].confidence; });
  std::vector<PRPoint> out;
  out.reserve(flags.size());
  std::size_t tp = 0;
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (flags[order[i]].tp) {
      ++tp;
    }
    const double precision = static_cast<double>(tp) / static_cast<double>(i + 1);
    const double recall = n_gt == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(n_gt);
    out.push_back({precision, recall, flags[order[i]].confidence});
  }
  return out;
}

std::optional<double> average_precision(std::span<const ScoredFlag> flags, std::size_t n_gt, Interpolation interp) {
  if (n_gt == 0) {
    return std::nullopt;
  }
  const auto curve = pr_curve(flags, n_gt);
  // Precision envelope: best precision at this recall or any later point.
  std::vector<double> envelope(curve.size());
  double running = 0.0;
  for (std::size_t i = curve.size(); i-- > 0;) {
    running = std::max(running, curve[i].precision);
    envelope[i] = running;
  }

  if (interp == Interpolation::k101Point) {
    double sum = 0.0;
    std::size_t idx = 0;
    for (int r = 0; r <= 100; ++r) {
      const double level = r / 100.0;
      while (idx < curve.size() && curve[idx].recall < level) {
        ++idx;
      }
      if (idx < curve.size()) {
        sum += envelope[idx];
      }
    }
    return sum / 101.0;
  }

  double area = 0.0;
  double prev_recall = 0.0;
  for (std::size_t i = 0; i < curve.size(); ++i) {
    if (curve[i].recall > prev_recall) {
      area += (curve[i].recall - prev_recall) * envelope[i];
      prev_recall = curve[i].recall;
    }
  }
  return area;
}

std::string_view to_string(ClassGroup g) {
  return g == ClassGroup::kNovel ? "novel" : "base";
}

std::optional<ClassGroup> parse_class_group(std::string_view s) {
  if (s == "base") {
    return ClassGroup::kBase;
  }
  if (s == "novel") {
    return ClassGroup::kNovel;
  }
  return std::nullopt;
}

namespace {

std::optional<double> mean_of(const std::vector<double>& v) {
  if (v.empty()) {
    return std::nullopt;
  }
  double s = 0.0;
  for (double x : v) {
    s += x;
  }
  return s / static_cast<double>(v.size());
}

EvalReport evaluate_impl(std::span<const Detection> dets, std::span<const GroundTruthBox> gts,
                         const Vocabulary& vocab, const GroupMap& groups, const EvalOptions& opts, bool parallel) {
  if (!groups.empty()) {
    for (const ClassEntry& c : vocab.classes) {
      if (!groups.contains(c.id)) {
        throw DataError("group map has no entry for class " + std::to_string(c.id) + " (" + c.name + ")");
      }
    }
  }
  std::map<ClassId, std::vector<Detection>> dets_by_class;
  std::map<ClassId, std::vector<GroundTruthBox>> gts_by_class;
  for (const Detection& d : dets) {
    if (!vocab.contains(d.class_id)) {
      throw DataError("detection in image '" + d.image_id + "' has class " + std::to_string(d.class_id) +
                      " which is not in the vocabulary");
    }
    dets_by_class[d.class_id].push_back(d);
  }
  for (const GroundTruthBox& g : gts) {
    if (!vocab.contains(g.class_id)) {
      throw DataError("ground truth in image '" + g.image_id + "' has class " + std::to_string(g.class_id) +
                      " which is not in the vocabulary");
    }
    gts_by_class[g.class_id].push_back(g);
  }

  std::vector<ClassId> classes;
  for (const auto& [id, boxes] : gts_by_class) {
    classes.push_back(id);
  }
  const std::size_t n_thr = opts.thresholds.size();
  const auto n_units = static_cast<std::int64_t>(classes.size() * n_thr);
  std::vector<double> ap(static_cast<std::size_t>(n_units), 0.0);
  static const std::vector<Detection> kNone;

#pragma omp parallel for schedule(dynamic) if (parallel)
  for (std::int64_t u = 0; u < n_units; ++u) {
    const ClassId cls = classes[static_cast<std::size_t>(u) / n_thr];
    const double thr = opts.thresholds[static_cast<std::size_t>(u) % n_thr];
    const auto it = dets_by_class.find(cls);
    const std::vector<Detection>& cd = it == dets_by_class.end() ? kNone : it->second;
    const std::vector<GroundTruthBox>& cg = gts_by_class.at(cls);
    const MatchResult m = match_detections(cd, cg, thr);
    std::vector<ScoredFlag> flags(cd.size());
    for (std::size_t i = 0; i < cd.size(); ++i) {
      flags[i] = {cd[i].score, m.det_tp[i]};
    }
    ap[static_cast<std::size_t>(u)] = average_precision(flags, cg.size(), opts.interpolation).value_or(0.0);
  }

  EvalReport report;
  report.thresholds = opts.thresholds;
  const auto t50 = std::find(opts.thresholds.begin(), opts.thresholds.end(), 0.5);
  std::vector<double> ap50_all, ap50_base, ap50_novel, map_all, map_base, map_novel;
  for (std::size_t c = 0; c < classes.size(); ++c) {
    std::vector<double> per_thr(ap.begin() + static_cast<std::ptrdiff_t>(c * n_thr),
                                ap.begin() + static_cast<std::ptrdiff_t>((c + 1) * n_thr));
    const double class_map = mean_of(per_thr).value_or(0.0);
    const std::optional<ClassGroup> group =
        groups.empty() ? std::nullopt : std::optional<ClassGroup>(groups.at(classes[c]));
    map_all.push_back(class_map);
    if (group == ClassGroup::kBase) {
      map_base.push_back(class_map);
    } else if (group == ClassGroup::kNovel) {
      map_novel.push_back(class_map);
    }
    if (t50 != opts.thresholds.end()) {
      const double v = per_thr[static_cast<std::size_t>(t50 - opts.thresholds.begin())];
      ap50_all.push_back(v);
      if (group == ClassGroup::kBase) {
        ap50_base.push_back(v);
      } else if (group == ClassGroup::kNovel) {
        ap50_novel.push_back(v);
      }
    }
    report.ap_per_class.emplace(classes[c], std::move(per_thr));
  }
  report.ap50_all = mean_of(ap50_all);
  report.ap50_base = mean_of(ap50_base);
  report.ap50_novel = mean_of(ap50_novel);
  report.map_all = mean_of(map_all);
  report.map_base = mean_of(map_base);
  report.map_novel = mean_of(map_novel);

  std::set<std::string> images;
  for (const auto& g : gts) {
    images.insert(g.image_id);
  }
  for (const auto& d : dets) {
    images.insert(d.image_id);
  }
  report.counts.images = images.size();
  report.counts.detections = dets.size();
  report.counts.gts = gts.size();
  return report;
}

}  // namespace

EvalReport evaluate(std::span<const Detection> dets, std::span<const GroundTruthBox> gts, const Vocabulary& vocab,
                    const GroupMap& groups, const EvalOptions& opts) {
  return evaluate_impl(dets, gts, vocab, groups, opts, true);
}

EvalReport evaluate_serial(std::span<const Detection> dets, std::span<const GroundTruthBox> gts,
                           const Vocabulary& vocab, const GroupMap& groups, const EvalOptions& opts) {
  return evaluate_impl(dets, gts, vocab, groups, opts, false);
}

VocabQuality vocab_quality(const AdaptedVocabulary& adapted, const std::set<ClassId>& gt_classes,
                           const Vocabulary& vocab) {
  for (ClassId id : gt_classes) {
    if (!vocab.contains(id)) {
      throw DataError("ground-truth class " + std::to_string(id) + " is not in the vocabulary");
    }
  }
  VocabQuality q;
  for (ClassId id : adapted.class_ids) {
    if (gt_classes.contains(id)) {
      ++q.tp;
    } else {
      ++q.fp;
    }
  }
  q.fn = gt_classes.size() - q.tp;
  if (q.tp + q.fp == 0) {
    q.precision = 1.0;
    q.precision_defaulted = true;
  } else {
    q.precision = static_cast<double>(q.tp) / static_cast<double>(q.tp + q.fp);
  }
  q.recall = (q.tp + q.fn == 0) ? 1.0 : static_cast<double>(q.tp) / static_cast<double>(q.tp + q.fn);
  return q;
}

std::pair<double, double> mean_vocab_quality(std::span<const VocabQuality> per_image) {
  if (per_image.empty()) {
    return {1.0, 1.0};
  }
  double p = 0.0;
  double r = 0.0;
  for (const auto& q : per_image) {
    p += q.precision;
    r += q.recall;
  }
  const auto n = static_cast<double>(per_image.size());
  return {p / n, r / n};
}

}  // namespace vocada
