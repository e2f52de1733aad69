#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "vocada/class_selector.hpp"
#include "vocada/domain.hpp"
#include "vocada/embedding.hpp"

namespace vocada {

enum class ScoreMode { kCosine, kSoftmax };

std::string_view to_string(ScoreMode mode);
std::optional<ScoreMode> parse_score_mode(std::string_view s);

struct RescoreConfig {
  ScoreMode score_mode = ScoreMode::kCosine;
  double softmax_temperature = 0.01;
  // Applied by the rescore stage when writing detections; 0 disables filtering.
  double score_threshold = 0.0;
  bool fuse_objectness = false;

  void validate() const;
};

/// Softmax of `scores / temperature`, max-shifted.
std::vector<double> softmax(std::span<const double> scores, double temperature);

/// Restricted argmax over the adapted classes; ties go to the lower class id.
Detection classify_proposal(const Proposal& p, const AdaptedVocabulary& adapted, const EmbeddingMatrix& proposal_emb,
                            const ClassEmbeddings& class_emb, const RescoreConfig& cfg);

/// One detection per proposal, input order. Proposals are scored in parallel.
std::vector<Detection> rescore_image(const std::vector<Proposal>& proposals, const AdaptedVocabulary& adapted,
                                     const EmbeddingMatrix& proposal_emb, const ClassEmbeddings& class_emb,
                                     const RescoreConfig& cfg);

/// Serial reference: classify_proposal applied one proposal at a time.
std::vector<Detection> rescore_image_serial(const std::vector<Proposal>& proposals, const AdaptedVocabulary& adapted,
                                            const EmbeddingMatrix& proposal_emb, const ClassEmbeddings& class_emb,
                                            const RescoreConfig& cfg);

}  // namespace vocada
