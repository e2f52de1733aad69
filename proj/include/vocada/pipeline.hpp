#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "vocada/class_selector.hpp"
#include "vocada/gateway.hpp"
#include "vocada/metrics.hpp"
#include "vocada/noun_extractor.hpp"
#include "vocada/rescorer.hpp"

namespace vocada {

using Path = std::filesystem::path;

struct RunPaths {
  Path vocabulary;
  Path captions;      // empty: caption images through the captioner gateway
  Path image_root;    // joined with groundtruth file_name when captioning
  Path lexicon;       // empty: the bundled lexicon
  Path class_embeddings;
  Path phrase_embeddings;
  Path proposals;
  Path proposal_embeddings;
  Path groundtruth;
  Path groups;
  Path captioner_prompt;  // empty: the bundled prompt
  Path output_dir;
};

struct RunConfig {
  RunPaths paths;
  SelectorConfig selector;
  RescoreConfig rescore;
  std::optional<GatewayConfig> captioner;
  std::optional<GatewayConfig> llm;
  GroupMap groups;
  int concurrency = 1;
};

/// Parses the JSON config. Relative paths resolve against `base_dir`.
RunConfig parse_run_config(const nlohmann::json& doc, const Path& base_dir);
RunConfig load_run_config(const Path& path);
GatewayConfig parse_gateway_config(const nlohmann::json& doc, const Path& base_dir);
SelectorConfig parse_selector_config(const nlohmann::json& doc);
RescoreConfig parse_rescore_config(const nlohmann::json& doc);

TagLexicon load_lexicon_or_default(const Path& path);

// ---- extract-nouns ----

std::vector<NounPhraseSet> extract_all(const std::vector<CaptionRecord>& captions, const TagLexicon& lexicon,
                                       int concurrency);
void cmd_extract_nouns(const Path& captions, const Path& lexicon, const Path& out, int concurrency);

// ---- adapt ----

struct AdaptInputs {
  Path vocabulary;
  Path nouns;
  Path captions;
  Path class_embeddings;
  Path phrase_embeddings;
  Path groundtruth;
  SelectorConfig selector;
  std::optional<GatewayConfig> llm;
  int concurrency = 1;
};

struct AdaptSummary {
  SelectorKind selector = SelectorKind::kBaseline;
  std::size_t images = 0;
  std::size_t fallbacks = 0;
  double mean_size = 0.0;
  std::size_t llm_candidates = 0;
  std::size_t llm_unmatched = 0;
};

nlohmann::json to_json(const AdaptSummary& s);

struct AdaptResult {
  std::vector<AdaptedVocabulary> adapted;
  AdaptSummary summary;
};

/// Checks every selector dependency before any per-image work, then adapts each image.
AdaptResult adapt_all(const AdaptInputs& in);
/// Writes `out` and `<out>.summary.json`.
AdaptSummary cmd_adapt(const AdaptInputs& in, const Path& out);

// ---- rescore ----

struct RescoreInputs {
  Path vocabulary;
  Path proposals;
  Path proposal_embeddings;
  Path adapted;      // empty: every image uses the full vocabulary
  Path class_embeddings;
  Path groundtruth;  // optional; supplies image bounds for clamping
  RescoreConfig rescore;
  bool fallback_on_empty = true;  // an image with no adapted line falls back to the full vocabulary
  std::string prompt_template = "a {}";
  int concurrency = 1;
};

struct RescoreResult {
  std::vector<Detection> detections;
  std::size_t clamped = 0;
};

RescoreResult rescore_all(const RescoreInputs& in);
RescoreResult cmd_rescore(const RescoreInputs& in, const Path& out);

// ---- eval ----

struct EvalInputs {
  Path detections;
  Path groundtruth;
  Path vocabulary;
  Path groups;
  Path adapted;  // optional; adds vocab_precision / vocab_recall
  std::string title = "vocada";
};

EvalReport evaluate_files(const EvalInputs& in, GroupMap* groups_out = nullptr, Vocabulary* vocab_out = nullptr);
/// Writes metrics.json and report.md into `out_dir`.
EvalReport cmd_eval(const EvalInputs& in, const Path& out_dir);

// ---- run ----

/// Captions, nouns, adapt, rescore, eval. Every stage output lands in output_dir with
/// MANIFEST.json tracking completion; a failing stage leaves complete=false and the stage name.
void cmd_run(const RunConfig& cfg);

}  // namespace vocada
