#include "vocada/rescorer.hpp"

#include <algorithm>
#include <cmath>

#include "vocada/error.hpp"
#include "vocada/kernels.hpp"

namespace vocada {

namespace {

// Adapted class rows in ascending id order, so that column order is the tie-break order.
struct AdaptedClasses {
  std::vector<ClassId> ids;
  std::vector<float> values;
};

AdaptedClasses gather_classes(const AdaptedVocabulary& adapted, const ClassEmbeddings& class_emb) {
  if (adapted.class_ids.empty()) {
    throw DataError("image '" + adapted.image_id + "': adapted vocabulary is empty; apply the selector fallback first");
  }
  AdaptedClasses out;
  const std::size_t dim = class_emb.matrix().dim();
  out.values.reserve(adapted.class_ids.size() * dim);
  for (ClassId id : adapted.class_ids) {
    const auto row = class_emb.matrix().row(class_emb.row_of(id));
    out.ids.push_back(id);
    out.values.insert(out.values.end(), row.begin(), row.end());
  }
  return out;
}

std::span<const float> proposal_row(const Proposal& p, const EmbeddingMatrix& proposal_emb) {
  const auto r = proposal_emb.find(p.embedding_key);
  if (!r) {
    throw DataError("image '" + p.image_id + "': dangling proposal embedding key '" + p.embedding_key + "'");
  }
  return proposal_emb.row(*r);
}

double final_score(std::span<const double> row, std::size_t label, double objectness, const RescoreConfig& cfg) {
  double score = row[label];
  if (cfg.score_mode == ScoreMode::kSoftmax) {
    score = softmax(row, cfg.softmax_temperature)[label];
  }
  if (cfg.fuse_objectness) {
    score *= objectness;
  }
  return score;
}

void check_dims(const EmbeddingMatrix& proposal_emb, const ClassEmbeddings& class_emb) {
  if (proposal_emb.rows() > 0 && proposal_emb.dim() != class_emb.matrix().dim()) {
    throw DataError("proposal embeddings have dim " + std::to_string(proposal_emb.dim()) +
                    " but class embeddings have dim " + std::to_string(class_emb.matrix().dim()));
  }
}

}  // namespace

std::string_view to_string(ScoreMode mode) {
  return mode == ScoreMode::kSoftmax ? "softmax" : "cosine";
}

std::optional<ScoreMode> parse_score_mode(std::string_view s) {
  if (s == "cosine") {
    return ScoreMode::kCosine;
  }
  if (s == "softmax") {
    return ScoreMode::kSoftmax;
  }
  return std::nullopt;
}

void RescoreConfig::validate() const {
  if (!(softmax_temperature > 0.0)) {
    throw DataError("softmax_temperature must be > 0");
  }
  if (!(score_threshold >= 0.0 && score_threshold <= 1.0)) {
    throw DataError("score_threshold must lie in [0, 1]");
  }
}

std::vector<double> softmax(std::span<const double> scores, double temperature) {
  std::vector<double> out(scores.size());
  if (scores.empty()) {
    return out;
  }
  const double peak = *std::max_element(scores.begin(), scores.end());
  double total = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    out[i] = std::exp((scores[i] - peak) / temperature);
    total += out[i];
  }
  for (double& v : out) {
    v /= total;
  }
  return out;
}

Detection classify_proposal(const Proposal& p, const AdaptedVocabulary& adapted, const EmbeddingMatrix& proposal_emb,
                            const ClassEmbeddings& class_emb, const RescoreConfig& cfg) {
  check_dims(proposal_emb, class_emb);
  const AdaptedClasses classes = gather_classes(adapted, class_emb);
  const auto z = proposal_row(p, proposal_emb);
  std::vector<double> row(classes.ids.size());
  kernels::similarity_serial(z, classes.values, z.size(), row);
  const std::size_t label = kernels::argmax_rows_serial(row, row.size()).front();
  return {p.image_id, p.box, classes.ids[label], final_score(row, label, p.objectness, cfg)};
}

std::vector<Detection> rescore_image(const std::vector<Proposal>& proposals, const AdaptedVocabulary& adapted,
                                     const EmbeddingMatrix& proposal_emb, const ClassEmbeddings& class_emb,
                                     const RescoreConfig& cfg) {
  if (proposals.empty()) {
    return {};
  }
  check_dims(proposal_emb, class_emb);
  const AdaptedClasses classes = gather_classes(adapted, class_emb);
  const std::size_t dim = class_emb.matrix().dim();
  const std::size_t n_cls = classes.ids.size();

  std::vector<float> queries;
  queries.reserve(proposals.size() * dim);
  for (const Proposal& p : proposals) {
    const auto z = proposal_row(p, proposal_emb);
    queries.insert(queries.end(), z.begin(), z.end());
  }
  std::vector<double> scores(proposals.size() * n_cls);
  kernels::similarity(queries, classes.values, dim, scores);
  const auto labels = kernels::argmax_rows(scores, n_cls);

  std::vector<Detection> out;
  out.reserve(proposals.size());
  for (std::size_t i = 0; i < proposals.size(); ++i) {
    const auto row = std::span<const double>(scores).subspan(i * n_cls, n_cls);
    out.push_back({proposals[i].image_id, proposals[i].box, classes.ids[labels[i]],
                   final_score(row, labels[i], proposals[i].objectness, cfg)});
  }
  return out;
}

std::vector<Detection> rescore_image_serial(const std::vector<Proposal>& proposals, const AdaptedVocabulary& adapted,
                                            const EmbeddingMatrix& proposal_emb, const ClassEmbeddings& class_emb,
                                            const RescoreConfig& cfg) {
  std::vector<Detection> out;
  out.reserve(proposals.size());
  for (const Proposal& p : proposals) {
    out.push_back(classify_proposal(p, adapted, proposal_emb, class_emb, cfg));
  }
  return out;
}

}  // namespace vocada
