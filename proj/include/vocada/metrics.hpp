#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string_view>
#include <vector>

#include "vocada/domain.hpp"

namespace vocada {

/// Intersection over union of corner boxes. Degenerate or disjoint boxes give 0, never NaN.
double iou(const Box& a, const Box& b);

struct MatchResult {
  std::vector<std::size_t> order;  // detection indices by non-increasing confidence, stable
  std::vector<bool> det_tp;        // indexed like the input detections
  std::vector<bool> gt_matched;    // indexed like the input ground truth
};

/// Greedy confidence-ordered matching. A detection may only match an unmatched ground-truth
/// box of the same image and class; it takes the one with the highest IoU (first on ties)
/// if that IoU reaches the threshold.
MatchResult match_detections(std::span<const Detection> dets, std::span<const GroundTruthBox> gts,
                             double iou_threshold);

enum class Interpolation { k101Point, kAllPoints };

struct ScoredFlag {
  double confidence = 0.0;
  bool tp = false;
};

struct PRPoint {
  double precision = 0.0;
  double recall = 0.0;
  double confidence = 0.0;
};

/// Cumulative precision/recall after each detection, sorted by non-increasing confidence (stable).
std::vector<PRPoint> pr_curve(std::span<const ScoredFlag> flags, std::size_t n_gt);

/// Area under the precision-recall curve; nothing when n_gt == 0.
std::optional<double> average_precision(std::span<const ScoredFlag> flags, std::size_t n_gt,
                                        Interpolation interp = Interpolation::k101Point);

enum class ClassGroup { kBase, kNovel };

std::string_view to_string(ClassGroup g);
std::optional<ClassGroup> parse_class_group(std::string_view s);

using GroupMap = std::map<ClassId, ClassGroup>;

inline constexpr std::array<double, 10> kCocoIouThresholds{0.5,  0.55, 0.6,  0.65, 0.7,
                                                           0.75, 0.8,  0.85, 0.9,  0.95};

struct EvalCounts {
  std::size_t images = 0;
  std::size_t detections = 0;
  std::size_t gts = 0;
  std::size_t fallbacks = 0;
};

struct EvalReport {
  std::vector<double> thresholds;
  // Only classes with at least one ground-truth box; one AP per threshold.
  std::map<ClassId, std::vector<double>> ap_per_class;
  std::optional<double> ap50_all, ap50_base, ap50_novel;
  std::optional<double> map_all, map_base, map_novel;
  std::optional<double> vocab_precision, vocab_recall;
  EvalCounts counts;
};

struct EvalOptions {
  std::vector<double> thresholds{kCocoIouThresholds.begin(), kCocoIouThresholds.end()};
  Interpolation interpolation = Interpolation::k101Point;
};

/// Per-(class, threshold) AP, evaluated in parallel, reduced serially.
EvalReport evaluate(std::span<const Detection> dets, std::span<const GroundTruthBox> gts, const Vocabulary& vocab,
                    const GroupMap& groups, const EvalOptions& opts = {});

/// Same computation with the work units run one after another.
EvalReport evaluate_serial(std::span<const Detection> dets, std::span<const GroundTruthBox> gts,
                           const Vocabulary& vocab, const GroupMap& groups, const EvalOptions& opts = {});

struct VocabQuality {
  double precision = 1.0;
  double recall = 1.0;
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  bool precision_defaulted = false;  // adapted set was empty; precision set to 1.0 by convention
};

VocabQuality vocab_quality(const AdaptedVocabulary& adapted, const std::set<ClassId>& gt_classes,
                           const Vocabulary& vocab);

/// Unweighted per-image mean of precision and recall.
std::pair<double, double> mean_vocab_quality(std::span<const VocabQuality> per_image);

}  // namespace vocada
