#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "vocada/domain.hpp"
#include "vocada/metrics.hpp"

namespace vocada {

// vocabulary.json: {"name": str, "classes": [{"id": int, "name": str, "synonyms": [str]}]}
Vocabulary parse_vocabulary(const nlohmann::json& doc);
/// Loads and validates; every violation is reported in one DataError.
Vocabulary load_vocabulary(const std::filesystem::path& path);
nlohmann::json to_json(const Vocabulary& v);

nlohmann::json to_json(const CaptionRecord& r);
nlohmann::json to_json(const NounPhraseSet& r);
nlohmann::json to_json(const AdaptedVocabulary& r);
nlohmann::json to_json(const Detection& r);

CaptionRecord caption_from_json(const nlohmann::json& j);
NounPhraseSet nouns_from_json(const nlohmann::json& j);
AdaptedVocabulary adapted_from_json(const nlohmann::json& j);
Detection detection_from_json(const nlohmann::json& j);

/// Calls `fn(json, line_number)` for each non-empty line. Parse failures and
/// exceptions thrown by `fn` are rethrown as DataError prefixed with path:line.
void for_each_jsonl(const std::filesystem::path& path,
                    const std::function<void(const nlohmann::json&, std::size_t)>& fn);

std::vector<CaptionRecord> load_captions(const std::filesystem::path& path);
std::vector<NounPhraseSet> load_nouns(const std::filesystem::path& path);
std::vector<AdaptedVocabulary> load_adapted(const std::filesystem::path& path);
std::vector<Detection> load_detections(const std::filesystem::path& path);

/// Writes one compact JSON object per line, '\n' terminated.
void write_jsonl(const std::filesystem::path& path, const std::vector<nlohmann::json>& lines);

/// Writes `content` verbatim (binary mode, no newline translation).
void write_text(const std::filesystem::path& path, const std::string& content);

struct GroundTruth {
  std::vector<ImageRecord> images;
  std::vector<GroundTruthBox> boxes;
  std::map<ClassId, std::string> categories;

  const ImageRecord* find_image(const std::string& image_id) const;
  std::vector<GroundTruthBox> boxes_for(const std::string& image_id) const;
};

/// COCO-style {images, annotations, categories}; bbox (x, y, w, h) becomes corners.
GroundTruth load_groundtruth(const std::filesystem::path& path);

struct ImageProposals {
  std::string image_id;
  std::vector<Proposal> proposals;
};

struct ProposalSet {
  std::vector<ImageProposals> images;
  std::size_t clamped = 0;  // boxes pulled back inside their image bounds
};

/// proposals.jsonl lines: {"image_id", "boxes": [[x1,y1,x2,y2]...], "objectness": [...], "embedding_keys": [...]}.
/// When `images` is given, boxes are clamped to each image's bounds.
ProposalSet load_proposals(const std::filesystem::path& path, const GroundTruth* images = nullptr);

/// {"<class id>": "base" | "novel", ...}
GroupMap parse_groups(const nlohmann::json& doc);
GroupMap load_groups(const std::filesystem::path& path);

nlohmann::json report_to_json(const EvalReport& report, const Vocabulary& vocab, const GroupMap& groups);
std::string report_to_markdown(const EvalReport& report, const std::string& title);

}  // namespace vocada
