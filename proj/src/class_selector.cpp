#include "vocada/class_selector.hpp"

#include <sstream>

#include "vocada/error.hpp"
#include "vocada/kernels.hpp"
#include "vocada/text.hpp"

namespace vocada {

namespace {

constexpr std::string_view kSelectorInstruction =
    "You select object categories for an object detector.\n"
    "Each request gives you a description of one image and the noun phrases extracted from it.\n"
    "Choose every category from the list below that is likely to be visible in that image.\n"
    "Take the listed synonyms into account: the description may name an object differently "
    "from its category.\n"
    "Only choose categories that appear in the list and spell them exactly as listed.\n"
    "Output format: one chosen category per line, each line starting with an asterisk and a space, "
    "for example:\n"
    "* category name\n"
    "Do not output anything else.\n";

AdaptedVocabulary apply_fallback(AdaptedVocabulary adapted, const Vocabulary& vocab, const SelectorConfig& cfg) {
  if (adapted.class_ids.empty() && cfg.fallback_on_empty) {
    const auto ids = vocab.ids();
    adapted.class_ids.insert(ids.begin(), ids.end());
    adapted.fallback_used = true;
  }
  return adapted;
}

bool is_blank(char c) { return c == ' ' || c == '\t'; }

std::string_view trim(std::string_view s) {
  while (!s.empty() && (is_blank(s.front()) || s.front() == '\r')) {
    s.remove_prefix(1);
  }
  while (!s.empty() && (is_blank(s.back()) || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

}  // namespace

void SelectorConfig::validate() const {
  if (k == 0) {
    throw DataError("selector k must be >= 1");
  }
  if (count_placeholders(prompt_template) != 1) {
    throw DataError("prompt_template must contain exactly one '{}' placeholder: '" + prompt_template + "'");
  }
}

ClassEmbeddings::ClassEmbeddings(const Vocabulary& vocab, const EmbeddingMatrix& source,
                                 std::string_view prompt_template) {
  std::vector<std::string> keys;
  std::vector<std::string> missing;
  for (const ClassEntry& c : vocab.classes) {
    const std::string by_id = std::to_string(c.id);
    if (source.contains(by_id)) {
      keys.push_back(by_id);
    } else if (const std::string by_prompt = apply_template(prompt_template, c.name); source.contains(by_prompt)) {
      keys.push_back(by_prompt);
    } else {
      missing.push_back(by_id + " (" + c.name + ")");
    }
    ids_.push_back(c.id);
  }
  if (!missing.empty()) {
    std::string msg = "class embeddings missing for:";
    for (const auto& m : missing) {
      msg += " " + m;
    }
    throw DataError(msg);
  }
  matrix_ = source.select(keys);
}

std::size_t ClassEmbeddings::row_of(ClassId id) const {
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    if (ids_[i] == id) {
      return i;
    }
  }
  throw DataError("class " + std::to_string(id) + " has no embedding row");
}

std::optional<std::size_t> find_phrase_row(const EmbeddingMatrix& m, std::string_view phrase,
                                           std::string_view prompt_template) {
  const std::string norm = normalize_name(phrase);
  if (auto r = m.find(norm)) {
    return r;
  }
  return m.find(apply_template(prompt_template, norm));
}

std::vector<std::pair<std::string, double>> cosine_topk(std::string_view query_key, const EmbeddingMatrix& queries,
                                                        const EmbeddingMatrix& candidates, std::size_t k) {
  if (k == 0) {
    throw DataError("cosine_topk: k must be >= 1");
  }
  if (queries.dim() != candidates.dim()) {
    throw DataError("cosine_topk: dimension mismatch (" + std::to_string(queries.dim()) + " vs " +
                    std::to_string(candidates.dim()) + ")");
  }
  const auto row = queries.find(query_key);
  if (!row) {
    throw DataError("cosine_topk: unknown query key '" + std::string(query_key) + "'");
  }
  std::vector<double> scores(candidates.rows());
  kernels::similarity_serial(queries.row(*row), candidates.values(), candidates.dim(), scores);
  std::vector<std::pair<std::string, double>> out;
  for (const auto& [idx, score] : kernels::topk(scores, k)) {
    out.emplace_back(candidates.keys()[idx], score);
  }
  return out;
}

AdaptedVocabulary select_baseline(const std::string& image_id, const Vocabulary& vocab) {
  AdaptedVocabulary out{image_id, {}, SelectorKind::kBaseline, false};
  const auto ids = vocab.ids();
  out.class_ids.insert(ids.begin(), ids.end());
  return out;
}

AdaptedVocabulary select_oracle(const std::string& image_id, const std::vector<GroundTruthBox>& gt,
                                const Vocabulary& vocab) {
  AdaptedVocabulary out{image_id, {}, SelectorKind::kOracle, false};
  for (const auto& g : gt) {
    if (!vocab.contains(g.class_id)) {
      throw DataError("ground truth for image '" + image_id + "' uses class " + std::to_string(g.class_id) +
                      " which is not in the vocabulary");
    }
    out.class_ids.insert(g.class_id);
  }
  return out;
}

AdaptedVocabulary select_embed_topk(const NounPhraseSet& phrases, const EmbeddingMatrix& phrase_emb,
                                    const ClassEmbeddings& class_emb, const Vocabulary& vocab,
                                    const SelectorConfig& cfg) {
  cfg.validate();
  AdaptedVocabulary out{phrases.image_id, {}, SelectorKind::kEmbedTopK, false};
  if (!phrases.phrases.empty()) {
    if (phrase_emb.dim() != class_emb.matrix().dim()) {
      throw DataError("phrase embeddings have dim " + std::to_string(phrase_emb.dim()) +
                      " but class embeddings have dim " + std::to_string(class_emb.matrix().dim()));
    }
    std::vector<std::string> keys;
    std::vector<std::string> missing;
    for (const auto& p : phrases.phrases) {
      if (auto r = find_phrase_row(phrase_emb, p, cfg.prompt_template)) {
        keys.push_back(phrase_emb.keys()[*r]);
      } else {
        missing.push_back(p);
      }
    }
    if (!missing.empty()) {
      std::string msg = "image '" + phrases.image_id + "': no phrase embedding for";
      for (const auto& m : missing) {
        msg += " '" + m + "'";
      }
      throw DataError(msg);
    }
    std::vector<float> queries;
    queries.reserve(keys.size() * phrase_emb.dim());
    for (const auto& key : keys) {
      const auto row = phrase_emb.row(*phrase_emb.find(key));
      queries.insert(queries.end(), row.begin(), row.end());
    }
    const std::size_t n_cls = class_emb.size();
    std::vector<double> scores(keys.size() * n_cls);
    kernels::similarity(queries, class_emb.matrix().values(), phrase_emb.dim(), scores);
    for (std::size_t q = 0; q < keys.size(); ++q) {
      for (const auto& [idx, score] : kernels::topk(std::span(scores).subspan(q * n_cls, n_cls), cfg.k)) {
        out.class_ids.insert(class_emb.id_at(idx));
      }
    }
  }
  return apply_fallback(std::move(out), vocab, cfg);
}

std::string build_llm_system_prompt(const Vocabulary& vocab) {
  std::string out(kSelectorInstruction);
  out += "\nCategories:\n";
  for (const ClassEntry& c : vocab.classes) {
    out += "- " + c.name;
    if (!c.synonyms.empty()) {
      out += " (synonyms: ";
      for (std::size_t i = 0; i < c.synonyms.size(); ++i) {
        if (i > 0) {
          out += ", ";
        }
        out += c.synonyms[i];
      }
      out += ")";
    }
    out += "\n";
  }
  return out;
}

std::string build_llm_user_message(std::string_view caption, const std::vector<std::string>& phrases) {
  std::string out = "Image description:\n";
  out += caption;
  out += "\n\nNoun phrases: ";
  if (phrases.empty()) {
    out += "(none)";
  }
  for (std::size_t i = 0; i < phrases.size(); ++i) {
    if (i > 0) {
      out += ", ";
    }
    out += phrases[i];
  }
  out += "\n";
  return out;
}

LlmParse parse_llm_selection(const std::string& image_id, std::string_view raw, const Vocabulary& vocab,
                             const SelectorConfig& cfg) {
  const SurfaceIndex index(vocab);
  LlmParse out;
  out.adapted = {image_id, {}, SelectorKind::kLlm, false};

  std::size_t pos = 0;
  while (pos <= raw.size()) {
    const std::size_t nl = raw.find('\n', pos);
    std::string_view line = raw.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = (nl == std::string_view::npos) ? raw.size() + 1 : nl + 1;

    while (!line.empty() && is_blank(line.front())) {
      line.remove_prefix(1);
    }
    if (line.size() < 2 || line.front() != '*' || !is_blank(line[1])) {
      continue;
    }
    const std::string_view text = trim(line.substr(1));
    if (text.empty()) {
      continue;
    }
    ++out.candidates;
    if (auto id = index.lookup(text)) {
      out.adapted.class_ids.insert(*id);
    } else {
      ++out.unmatched;
    }
  }
  out.adapted = apply_fallback(std::move(out.adapted), vocab, cfg);
  return out;
}

}  // namespace vocada
