// vocada: per-image vocabulary adaptation for open-vocabulary detection.
//
//   vocada extract-nouns --captions captions.jsonl --out nouns.jsonl
//   vocada adapt --selector embed-topk --topk 1 --nouns nouns.jsonl ... --out adapted.jsonl
//   vocada rescore --proposals proposals.jsonl --adapted adapted.jsonl ... --out detections.jsonl
//   vocada eval --detections detections.jsonl --groundtruth gt.json --vocabulary vocab.json --out-dir report/
//   vocada run --config run.json
//
// Exit codes: 0 success, 1 data error, 2 gateway error.

#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "vocada/error.hpp"
#include "vocada/pipeline.hpp"

namespace {

using vocada::Path;

struct Overrides {
  std::string config;
  std::string selector;
  std::optional<std::size_t> topk;
  bool no_fallback = false;
  std::string prompt_template;
  std::string score_mode;
  std::optional<double> temperature;
  std::optional<double> score_threshold;
  bool fuse_objectness = false;
  std::optional<int> concurrency;
  std::string cache_dir;

  std::string vocabulary, captions, nouns, lexicon, class_embeddings, phrase_embeddings, proposals,
      proposal_embeddings, adapted, groundtruth, groups, detections, image_root, output_dir;
  std::string llm_url, llm_model;
  std::string out, out_dir, title;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config, "JSON run configuration; flags override its values");
  cmd->add_option("--concurrency", o.concurrency, "Worker threads")->check(CLI::PositiveNumber);
}

void add_selector_flags(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--selector", o.selector, "baseline | oracle | embed-topk | llm")
      ->check(CLI::IsMember({"baseline", "oracle", "embed-topk", "llm"}));
  cmd->add_option("--topk", o.topk, "Classes kept per noun phrase (embed-topk)")->check(CLI::PositiveNumber);
  cmd->add_flag("--no-fallback", o.no_fallback, "Keep empty selections instead of reverting to the full vocabulary");
  cmd->add_option("--prompt-template", o.prompt_template, "Embedding key template, e.g. 'a {}'");
  cmd->add_option("--cache-dir", o.cache_dir, "Gateway response cache directory");
}

void add_rescore_flags(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--score-mode", o.score_mode, "cosine | softmax")->check(CLI::IsMember({"cosine", "softmax"}));
  cmd->add_option("--temperature", o.temperature, "Softmax temperature");
  cmd->add_option("--score-threshold", o.score_threshold, "Drop detections scoring below this (0 keeps all)");
  cmd->add_flag("--fuse-objectness", o.fuse_objectness, "Multiply scores by proposal objectness");
}

vocada::RunConfig base_config(const Overrides& o) {
  vocada::RunConfig cfg;
  if (!o.config.empty()) {
    cfg = vocada::load_run_config(o.config);
  }
  auto set = [](Path& dst, const std::string& src) {
    if (!src.empty()) {
      dst = src;
    }
  };
  set(cfg.paths.vocabulary, o.vocabulary);
  set(cfg.paths.captions, o.captions);
  set(cfg.paths.lexicon, o.lexicon);
  set(cfg.paths.class_embeddings, o.class_embeddings);
  set(cfg.paths.phrase_embeddings, o.phrase_embeddings);
  set(cfg.paths.proposals, o.proposals);
  set(cfg.paths.proposal_embeddings, o.proposal_embeddings);
  set(cfg.paths.groundtruth, o.groundtruth);
  set(cfg.paths.groups, o.groups);
  set(cfg.paths.image_root, o.image_root);
  set(cfg.paths.output_dir, o.output_dir);

  if (!o.selector.empty()) {
    cfg.selector.kind = *vocada::parse_selector_kind(o.selector);
  }
  if (o.topk) {
    cfg.selector.k = *o.topk;
  }
  if (o.no_fallback) {
    cfg.selector.fallback_on_empty = false;
  }
  if (!o.prompt_template.empty()) {
    cfg.selector.prompt_template = o.prompt_template;
  }
  if (!o.score_mode.empty()) {
    cfg.rescore.score_mode = *vocada::parse_score_mode(o.score_mode);
  }
  if (o.temperature) {
    cfg.rescore.softmax_temperature = *o.temperature;
  }
  if (o.score_threshold) {
    cfg.rescore.score_threshold = *o.score_threshold;
  }
  if (o.fuse_objectness) {
    cfg.rescore.fuse_objectness = true;
  }
  if (o.concurrency) {
    cfg.concurrency = *o.concurrency;
  }
  if (!o.llm_url.empty() || !o.llm_model.empty()) {
    vocada::GatewayConfig g = cfg.llm.value_or(vocada::GatewayConfig{});
    if (!o.llm_url.empty()) {
      g.base_url = o.llm_url;
    }
    if (!o.llm_model.empty()) {
      g.model = o.llm_model;
    }
    cfg.llm = g;
  }
  if (!o.cache_dir.empty()) {
    if (cfg.llm) {
      cfg.llm->cache_dir = Path(o.cache_dir);
    }
    if (cfg.captioner) {
      cfg.captioner->cache_dir = Path(o.cache_dir);
    }
  }
  cfg.selector.validate();
  cfg.rescore.validate();
  if (cfg.llm) {
    cfg.llm->validate();
  }
  return cfg;
}

Path output_path(const std::string& flag, const vocada::RunConfig& cfg, const char* default_name) {
  if (!flag.empty()) {
    return flag;
  }
  if (!cfg.paths.output_dir.empty()) {
    return cfg.paths.output_dir / default_name;
  }
  throw vocada::DataError(std::string("--out is required (or set paths.output_dir in the config)"));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Per-image vocabulary adaptation for open-vocabulary object detection"};
  app.require_subcommand(1);
  Overrides o;

  auto* extract = app.add_subcommand("extract-nouns", "Extract noun phrases from captions");
  add_common(extract, o);
  extract->add_option("--captions", o.captions, "captions.jsonl");
  extract->add_option("--lexicon", o.lexicon, "Tag lexicon (token<TAB>TAG); defaults to the bundled one");
  extract->add_option("--out", o.out, "nouns.jsonl to write");

  auto* adapt = app.add_subcommand("adapt", "Select a per-image vocabulary subset");
  add_common(adapt, o);
  add_selector_flags(adapt, o);
  adapt->add_option("--vocabulary", o.vocabulary, "vocabulary.json");
  adapt->add_option("--nouns", o.nouns, "nouns.jsonl");
  adapt->add_option("--captions", o.captions, "captions.jsonl (llm selector)");
  adapt->add_option("--class-embeddings", o.class_embeddings, "Class embedding file (VEMB or JSON)");
  adapt->add_option("--phrase-embeddings", o.phrase_embeddings, "Phrase embedding file (VEMB or JSON)");
  adapt->add_option("--groundtruth", o.groundtruth, "COCO-style ground truth (oracle selector)");
  adapt->add_option("--llm-url", o.llm_url, "Chat-completions base URL (llm selector)");
  adapt->add_option("--llm-model", o.llm_model, "Model name (llm selector)");
  adapt->add_option("--out", o.out, "adapted.jsonl to write");

  auto* rescore = app.add_subcommand("rescore", "Classify proposals within each adapted vocabulary");
  add_common(rescore, o);
  add_rescore_flags(rescore, o);
  rescore->add_flag("--no-fallback", o.no_fallback, "Fail on images without an adapted vocabulary");
  rescore->add_option("--prompt-template", o.prompt_template, "Class embedding key template");
  rescore->add_option("--vocabulary", o.vocabulary, "vocabulary.json");
  rescore->add_option("--proposals", o.proposals, "proposals.jsonl");
  rescore->add_option("--proposal-embeddings", o.proposal_embeddings, "Proposal embedding file");
  rescore->add_option("--adapted", o.adapted, "adapted.jsonl (omit for the full vocabulary)");
  rescore->add_option("--class-embeddings", o.class_embeddings, "Class embedding file");
  rescore->add_option("--groundtruth", o.groundtruth, "Ground truth supplying image bounds for clamping");
  rescore->add_option("--out", o.out, "detections.jsonl to write");

  auto* eval = app.add_subcommand("eval", "Evaluate detections (AP50, mAP) and vocabulary quality");
  add_common(eval, o);
  eval->add_option("--detections", o.detections, "detections.jsonl");
  eval->add_option("--groundtruth", o.groundtruth, "COCO-style ground truth");
  eval->add_option("--vocabulary", o.vocabulary, "vocabulary.json");
  eval->add_option("--groups", o.groups, "Class groups {\"<id>\": \"base\"|\"novel\"}");
  eval->add_option("--adapted", o.adapted, "adapted.jsonl for vocabulary precision/recall");
  eval->add_option("--out-dir", o.out_dir, "Directory for metrics.json and report.md");
  eval->add_option("--title", o.title, "Row label in report.md");

  auto* run = app.add_subcommand("run", "Run captions -> nouns -> adapt -> rescore -> eval");
  add_common(run, o);
  add_selector_flags(run, o);
  add_rescore_flags(run, o);
  run->add_option("--output-dir", o.output_dir, "Run output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    vocada::RunConfig cfg = base_config(o);
    const int workers = cfg.concurrency;

    if (extract->parsed()) {
      vocada::cmd_extract_nouns(cfg.paths.captions, cfg.paths.lexicon, output_path(o.out, cfg, "nouns.jsonl"),
                                workers);
    } else if (adapt->parsed()) {
      vocada::AdaptInputs in;
      in.vocabulary = cfg.paths.vocabulary;
      in.nouns = o.nouns;
      in.captions = cfg.paths.captions;
      in.class_embeddings = cfg.paths.class_embeddings;
      in.phrase_embeddings = cfg.paths.phrase_embeddings;
      in.groundtruth = cfg.paths.groundtruth;
      in.selector = cfg.selector;
      in.llm = cfg.llm;
      in.concurrency = workers;
      const auto summary = vocada::cmd_adapt(in, output_path(o.out, cfg, "adapted.jsonl"));
      std::cout << vocada::to_json(summary).dump() << "\n";
    } else if (rescore->parsed()) {
      vocada::RescoreInputs in;
      in.vocabulary = cfg.paths.vocabulary;
      in.proposals = cfg.paths.proposals;
      in.proposal_embeddings = cfg.paths.proposal_embeddings;
      in.adapted = o.adapted;
      in.class_embeddings = cfg.paths.class_embeddings;
      in.groundtruth = cfg.paths.groundtruth;
      in.rescore = cfg.rescore;
      in.fallback_on_empty = !o.no_fallback;
      in.prompt_template = cfg.selector.prompt_template;
      in.concurrency = workers;
      const auto r = vocada::cmd_rescore(in, output_path(o.out, cfg, "detections.jsonl"));
      std::cout << "{\"detections\":" << r.detections.size() << ",\"clamped\":" << r.clamped << "}\n";
    } else if (eval->parsed()) {
      vocada::EvalInputs in;
      in.detections = o.detections;
      in.groundtruth = cfg.paths.groundtruth;
      in.vocabulary = cfg.paths.vocabulary;
      in.groups = cfg.paths.groups;
      in.adapted = o.adapted;
      if (!o.title.empty()) {
        in.title = o.title;
      }
      const Path dir = o.out_dir.empty() ? cfg.paths.output_dir : Path(o.out_dir);
      if (dir.empty()) {
        throw vocada::DataError("--out-dir is required");
      }
      vocada::cmd_eval(in, dir);
      std::cout << (dir / "metrics.json").string() << "\n";
    } else if (run->parsed()) {
      if (o.config.empty()) {
        throw vocada::DataError("run requires --config");
      }
      vocada::cmd_run(cfg);
      std::cout << cfg.paths.output_dir.string() << "\n";
    }
  } catch (const vocada::GatewayError& e) {
    std::cerr << "gateway error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
