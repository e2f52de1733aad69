#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "vocada/domain.hpp"
#include "vocada/embedding.hpp"

namespace vocada {

struct SelectorConfig {
  SelectorKind kind = SelectorKind::kEmbedTopK;
  std::size_t k = 1;
  bool fallback_on_empty = true;
  std::string prompt_template = "a {}";

  /// Throws DataError when k == 0 or the template does not hold exactly one "{}".
  void validate() const;
};

/// Class embeddings aligned with vocabulary order. Row i belongs to vocab.classes[i].
/// Each class resolves by its id string ("17"), then by the templated canonical name ("a tv").
class ClassEmbeddings {
 public:
  ClassEmbeddings(const Vocabulary& vocab, const EmbeddingMatrix& source, std::string_view prompt_template);

  const EmbeddingMatrix& matrix() const { return matrix_; }
  ClassId id_at(std::size_t row) const { return ids_[row]; }
  std::size_t row_of(ClassId id) const;
  std::size_t size() const { return ids_.size(); }

 private:
  EmbeddingMatrix matrix_;
  std::vector<ClassId> ids_;
};

/// Key under which a phrase embedding is looked up: the normalized phrase, else
/// the templated phrase. Returns the first key present in `m`, or nothing.
std::optional<std::size_t> find_phrase_row(const EmbeddingMatrix& m, std::string_view phrase,
                                           std::string_view prompt_template);

/// Cosine top-k of one query row against every candidate row.
std::vector<std::pair<std::string, double>> cosine_topk(std::string_view query_key, const EmbeddingMatrix& queries,
                                                        const EmbeddingMatrix& candidates, std::size_t k);

AdaptedVocabulary select_baseline(const std::string& image_id, const Vocabulary& vocab);

/// Distinct ground-truth classes; never falls back.
AdaptedVocabulary select_oracle(const std::string& image_id, const std::vector<GroundTruthBox>& gt,
                                const Vocabulary& vocab);

/// Union over phrases of each phrase's top-k classes.
AdaptedVocabulary select_embed_topk(const NounPhraseSet& phrases, const EmbeddingMatrix& phrase_emb,
                                    const ClassEmbeddings& class_emb, const Vocabulary& vocab,
                                    const SelectorConfig& cfg);

std::string build_llm_system_prompt(const Vocabulary& vocab);

/// The per-image message: the description followed by the extracted noun phrases.
std::string build_llm_user_message(std::string_view caption, const std::vector<std::string>& phrases);

struct LlmParse {
  AdaptedVocabulary adapted;
  std::size_t candidates = 0;  // asterisk lines seen
  std::size_t unmatched = 0;   // candidates that mapped to no class
};

LlmParse parse_llm_selection(const std::string& image_id, std::string_view raw, const Vocabulary& vocab,
                             const SelectorConfig& cfg);

}  // namespace vocada
