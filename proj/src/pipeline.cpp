#include "vocada/pipeline.hpp"

#include <fstream>
#include <map>
#include <memory>
#include <set>

#include "vocada/error.hpp"
#include "vocada/io.hpp"
#include "vocada/parallel.hpp"
#include "vocada/resources.hpp"

namespace vocada {

using nlohmann::json;

namespace {

Path resolve(const json& doc, const char* key, const Path& base) {
  if (!doc.contains(key) || doc.at(key).is_null()) {
    return {};
  }
  Path p = doc.at(key).get<std::string>();
  return p.is_relative() ? base / p : p;
}

void require(const Path& p, const std::string& what) {
  if (p.empty()) {
    throw DataError(what + " is required");
  }
  if (!std::filesystem::exists(p)) {
    throw DataError(what + " not found: " + p.string());
  }
}

template <typename T>
std::map<std::string, const T*> index_by_image(const std::vector<T>& items) {
  std::map<std::string, const T*> out;
  for (const auto& it : items) {
    out.emplace(it.image_id, &it);
  }
  return out;
}

void check_ids(const AdaptedVocabulary& a, const Vocabulary& vocab) {
  for (ClassId id : a.class_ids) {
    if (!vocab.contains(id)) {
      throw DataError("adapted vocabulary of image '" + a.image_id + "' contains unknown class " + std::to_string(id));
    }
  }
}

// Stage outputs inside a run directory.
constexpr const char* kCaptionsFile = "captions.jsonl";
constexpr const char* kNounsFile = "nouns.jsonl";
constexpr const char* kAdaptedFile = "adapted.jsonl";
constexpr const char* kDetectionsFile = "detections.jsonl";
constexpr const char* kManifestFile = "MANIFEST.json";

}  // namespace

GatewayConfig parse_gateway_config(const json& doc, const Path& base_dir) {
  GatewayConfig g;
  g.base_url = doc.value("base_url", "");
  g.api_key_env = doc.value("api_key_env", g.api_key_env);
  g.model = doc.value("model", "");
  g.timeout_seconds = doc.value("timeout", g.timeout_seconds);
  g.max_retries = doc.value("max_retries", g.max_retries);
  g.backoff_initial = std::chrono::milliseconds(doc.value("backoff_initial_ms", g.backoff_initial.count()));
  g.max_in_flight = doc.value("max_in_flight", g.max_in_flight);
  g.temperature = doc.value("temperature", g.temperature);
  g.max_tokens = doc.value("max_tokens", g.max_tokens);
  if (Path cache = resolve(doc, "cache_dir", base_dir); !cache.empty()) {
    g.cache_dir = cache;
  }
  g.validate();
  return g;
}

SelectorConfig parse_selector_config(const json& doc) {
  SelectorConfig s;
  if (doc.contains("kind")) {
    const auto kind = parse_selector_kind(doc.at("kind").get<std::string>());
    if (!kind) {
      throw DataError("unknown selector kind '" + doc.at("kind").get<std::string>() + "'");
    }
    s.kind = *kind;
  }
  const auto k = doc.value("k", std::int64_t{1});
  if (k < 1) {
    throw DataError("selector k must be >= 1");
  }
  s.k = static_cast<std::size_t>(k);
  s.fallback_on_empty = doc.value("fallback_on_empty", s.fallback_on_empty);
  s.prompt_template = doc.value("prompt_template", s.prompt_template);
  s.validate();
  return s;
}

RescoreConfig parse_rescore_config(const json& doc) {
  RescoreConfig r;
  if (doc.contains("score_mode")) {
    const auto mode = parse_score_mode(doc.at("score_mode").get<std::string>());
    if (!mode) {
      throw DataError("unknown score_mode '" + doc.at("score_mode").get<std::string>() + "'");
    }
    r.score_mode = *mode;
  }
  r.softmax_temperature = doc.value("softmax_temperature", r.softmax_temperature);
  r.score_threshold = doc.value("score_threshold", r.score_threshold);
  r.fuse_objectness = doc.value("fuse_objectness", r.fuse_objectness);
  r.validate();
  return r;
}

RunConfig parse_run_config(const json& doc, const Path& base_dir) {
  RunConfig cfg;
  try {
    const json paths = doc.value("paths", json::object());
    cfg.paths.vocabulary = resolve(paths, "vocabulary", base_dir);
    cfg.paths.captions = resolve(paths, "captions", base_dir);
    cfg.paths.image_root = resolve(paths, "image_root", base_dir);
    cfg.paths.lexicon = resolve(paths, "lexicon", base_dir);
    cfg.paths.class_embeddings = resolve(paths, "class_embeddings", base_dir);
    cfg.paths.phrase_embeddings = resolve(paths, "phrase_embeddings", base_dir);
    cfg.paths.proposals = resolve(paths, "proposals", base_dir);
    cfg.paths.proposal_embeddings = resolve(paths, "proposal_embeddings", base_dir);
    cfg.paths.groundtruth = resolve(paths, "groundtruth", base_dir);
    cfg.paths.captioner_prompt = resolve(paths, "captioner_prompt", base_dir);
    cfg.paths.output_dir = resolve(paths, "output_dir", base_dir);
    if (doc.contains("groups")) {
      if (doc.at("groups").is_string()) {
        cfg.paths.groups = resolve(doc, "groups", base_dir);
      } else {
        cfg.groups = parse_groups(doc.at("groups"));
      }
    }
    cfg.selector = parse_selector_config(doc.value("selector", json::object()));
    cfg.rescore = parse_rescore_config(doc.value("rescore", json::object()));
    if (doc.contains("captioner")) {
      cfg.captioner = parse_gateway_config(doc.at("captioner"), base_dir);
    }
    if (doc.contains("llm")) {
      cfg.llm = parse_gateway_config(doc.at("llm"), base_dir);
    }
    cfg.concurrency = doc.value("concurrency", 1);
  } catch (const json::exception& e) {
    throw DataError(std::string("config: ") + e.what());
  }
  if (cfg.concurrency < 1) {
    throw DataError("concurrency must be >= 1");
  }
  return cfg;
}

RunConfig load_run_config(const Path& path) {
  std::ifstream in(path);
  if (!in) {
    throw DataError("cannot open config " + path.string());
  }
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  return parse_run_config(doc, path.parent_path());
}

TagLexicon load_lexicon_or_default(const Path& path) {
  return TagLexicon::load(path.empty() ? Path(std::string(resources::kDefaultLexicon)) : path);
}

// ---- extract-nouns ----

std::vector<NounPhraseSet> extract_all(const std::vector<CaptionRecord>& captions, const TagLexicon& lexicon,
                                       int concurrency) {
  return ordered_map(captions, concurrency, [&](const CaptionRecord& c) { return extract(c, lexicon); });
}

void cmd_extract_nouns(const Path& captions, const Path& lexicon, const Path& out, int concurrency) {
  require(captions, "captions file");
  const TagLexicon lex = load_lexicon_or_default(lexicon);
  const auto records = load_captions(captions);
  std::vector<json> lines;
  for (const auto& n : extract_all(records, lex, concurrency)) {
    lines.push_back(to_json(n));
  }
  write_jsonl(out, lines);
}

// ---- adapt ----

json to_json(const AdaptSummary& s) {
  json j = {{"selector", std::string(to_string(s.selector))},
            {"images", s.images},
            {"fallbacks", s.fallbacks},
            {"mean_size", s.mean_size}};
  if (s.selector == SelectorKind::kLlm) {
    j["llm_candidates"] = s.llm_candidates;
    j["llm_unmatched"] = s.llm_unmatched;
  }
  return j;
}

AdaptResult adapt_all(const AdaptInputs& in) {
  in.selector.validate();
  require(in.vocabulary, "vocabulary");
  const Vocabulary vocab = load_vocabulary(in.vocabulary);
  const int workers = in.concurrency;
  AdaptResult result;
  result.summary.selector = in.selector.kind;

  switch (in.selector.kind) {
    case SelectorKind::kBaseline: {
      std::vector<std::string> images;
      if (!in.nouns.empty()) {
        for (const auto& n : load_nouns(in.nouns)) images.push_back(n.image_id);
      } else if (!in.captions.empty()) {
        for (const auto& c : load_captions(in.captions)) images.push_back(c.image_id);
      } else if (!in.groundtruth.empty()) {
        for (const auto& im : load_groundtruth(in.groundtruth).images) images.push_back(im.image_id);
      } else {
        throw DataError("selector 'baseline' needs an image list: nouns, captions or groundtruth");
      }
      for (const auto& id : images) {
        result.adapted.push_back(select_baseline(id, vocab));
      }
      break;
    }
    case SelectorKind::kOracle: {
      require(in.groundtruth, "selector 'oracle': groundtruth");
      const GroundTruth gt = load_groundtruth(in.groundtruth);
      std::vector<std::string> images;
      if (!in.nouns.empty()) {
        for (const auto& n : load_nouns(in.nouns)) images.push_back(n.image_id);
      } else {
        for (const auto& im : gt.images) images.push_back(im.image_id);
      }
      for (const auto& id : images) {
        result.adapted.push_back(select_oracle(id, gt.boxes_for(id), vocab));
      }
      break;
    }
    case SelectorKind::kEmbedTopK: {
      require(in.nouns, "selector 'embed-topk': nouns");
      require(in.phrase_embeddings, "selector 'embed-topk': phrase embeddings");
      require(in.class_embeddings, "selector 'embed-topk': class embeddings");
      const auto nouns = load_nouns(in.nouns);
      const EmbeddingMatrix phrase_emb = load_embeddings(in.phrase_embeddings);
      const ClassEmbeddings class_emb(vocab, load_embeddings(in.class_embeddings), in.selector.prompt_template);
      result.adapted = ordered_map(nouns, workers, [&](const NounPhraseSet& n) {
        return select_embed_topk(n, phrase_emb, class_emb, vocab, in.selector);
      });
      break;
    }
    case SelectorKind::kLlm: {
      require(in.captions, "selector 'llm': captions");
      require(in.nouns, "selector 'llm': nouns");
      if (!in.llm) {
        throw DataError("selector 'llm' requires an llm gateway configuration");
      }
      const auto captions = load_captions(in.captions);
      const auto nouns = load_nouns(in.nouns);
      const auto by_image = index_by_image(captions);
      for (const auto& n : nouns) {
        if (!by_image.contains(n.image_id)) {
          throw DataError("selector 'llm': no caption for image '" + n.image_id + "'");
        }
      }
      ChatClient client(*in.llm);
      const std::string system_prompt = build_llm_system_prompt(vocab);
      const auto parses = ordered_map(nouns, workers, [&](const NounPhraseSet& n) {
        const std::string raw = client.chat_select(
            system_prompt, build_llm_user_message(by_image.at(n.image_id)->caption, n.phrases), n.image_id);
        return parse_llm_selection(n.image_id, raw, vocab, in.selector);
      });
      for (const auto& p : parses) {
        result.summary.llm_candidates += p.candidates;
        result.summary.llm_unmatched += p.unmatched;
        result.adapted.push_back(p.adapted);
      }
      break;
    }
  }

  std::size_t total = 0;
  for (const auto& a : result.adapted) {
    check_ids(a, vocab);
    total += a.class_ids.size();
    if (a.fallback_used) {
      ++result.summary.fallbacks;
    }
  }
  result.summary.images = result.adapted.size();
  result.summary.mean_size =
      result.adapted.empty() ? 0.0 : static_cast<double>(total) / static_cast<double>(result.adapted.size());
  return result;
}

AdaptSummary cmd_adapt(const AdaptInputs& in, const Path& out) {
  const AdaptResult r = adapt_all(in);
  std::vector<json> lines;
  for (const auto& a : r.adapted) {
    lines.push_back(to_json(a));
  }
  write_jsonl(out, lines);
  write_text(Path(out.string() + ".summary.json"), to_json(r.summary).dump(2) + "\n");
  return r.summary;
}

// ---- rescore ----

RescoreResult rescore_all(const RescoreInputs& in) {
  in.rescore.validate();
  require(in.vocabulary, "vocabulary");
  require(in.proposals, "proposals");
  require(in.class_embeddings, "class embeddings");
  const Vocabulary vocab = load_vocabulary(in.vocabulary);
  std::optional<GroundTruth> gt;
  if (!in.groundtruth.empty()) {
    gt = load_groundtruth(in.groundtruth);
  }
  const ProposalSet proposals = load_proposals(in.proposals, gt ? &*gt : nullptr);
  bool any_proposals = false;
  for (const auto& ip : proposals.images) {
    any_proposals = any_proposals || !ip.proposals.empty();
  }
  EmbeddingMatrix proposal_emb;
  if (any_proposals) {
    require(in.proposal_embeddings, "proposal embeddings");
    proposal_emb = load_embeddings(in.proposal_embeddings);
  }
  const ClassEmbeddings class_emb(vocab, load_embeddings(in.class_embeddings), in.prompt_template);

  std::map<std::string, AdaptedVocabulary> adapted;
  if (!in.adapted.empty()) {
    for (auto& a : load_adapted(in.adapted)) {
      check_ids(a, vocab);
      adapted.emplace(a.image_id, std::move(a));
    }
  }

  const auto per_image = ordered_map(proposals.images, in.concurrency, [&](const ImageProposals& ip) {
    AdaptedVocabulary av;
    if (in.adapted.empty()) {
      av = select_baseline(ip.image_id, vocab);
    } else if (auto it = adapted.find(ip.image_id); it != adapted.end()) {
      av = it->second;
    } else if (in.fallback_on_empty) {
      av = select_baseline(ip.image_id, vocab);
    } else {
      throw DataError("no adapted vocabulary for image '" + ip.image_id + "'");
    }
    if (ip.proposals.empty()) {
      return std::vector<Detection>{};
    }
    return rescore_image(ip.proposals, av, proposal_emb, class_emb, in.rescore);
  });

  RescoreResult out;
  out.clamped = proposals.clamped;
  for (const auto& dets : per_image) {
    for (const auto& d : dets) {
      if (in.rescore.score_threshold > 0.0 && d.score < in.rescore.score_threshold) {
        continue;
      }
      out.detections.push_back(d);
    }
  }
  return out;
}

RescoreResult cmd_rescore(const RescoreInputs& in, const Path& out) {
  RescoreResult r = rescore_all(in);
  std::vector<json> lines;
  lines.reserve(r.detections.size());
  for (const auto& d : r.detections) {
    lines.push_back(to_json(d));
  }
  write_jsonl(out, lines);
  return r;
}

// ---- eval ----

EvalReport evaluate_files(const EvalInputs& in, GroupMap* groups_out, Vocabulary* vocab_out) {
  require(in.detections, "detections");
  require(in.groundtruth, "groundtruth");
  require(in.vocabulary, "vocabulary");
  const Vocabulary vocab = load_vocabulary(in.vocabulary);
  const GroundTruth gt = load_groundtruth(in.groundtruth);
  const auto dets = load_detections(in.detections);
  GroupMap groups;
  if (!in.groups.empty()) {
    groups = load_groups(in.groups);
  }
  EvalReport report = evaluate(dets, gt.boxes, vocab, groups);
  report.counts.images = gt.images.size();

  if (!in.adapted.empty()) {
    const auto adapted = load_adapted(in.adapted);
    std::vector<VocabQuality> qualities;
    for (const auto& a : adapted) {
      check_ids(a, vocab);
      if (gt.find_image(a.image_id) == nullptr) {
        throw DataError("adapted vocabulary for image '" + a.image_id + "' which has no groundtruth record");
      }
      std::set<ClassId> gt_classes;
      for (const auto& b : gt.boxes_for(a.image_id)) {
        gt_classes.insert(b.class_id);
      }
      qualities.push_back(vocab_quality(a, gt_classes, vocab));
      if (a.fallback_used) {
        ++report.counts.fallbacks;
      }
    }
    const auto [p, r] = mean_vocab_quality(qualities);
    report.vocab_precision = p;
    report.vocab_recall = r;
  }
  if (groups_out) {
    *groups_out = groups;
  }
  if (vocab_out) {
    *vocab_out = vocab;
  }
  return report;
}

EvalReport cmd_eval(const EvalInputs& in, const Path& out_dir) {
  GroupMap groups;
  Vocabulary vocab;
  EvalReport report = evaluate_files(in, &groups, &vocab);
  write_text(out_dir / "metrics.json", report_to_json(report, vocab, groups).dump(2) + "\n");
  write_text(out_dir / "report.md", report_to_markdown(report, in.title));
  return report;
}

// ---- run ----

namespace {

class Manifest {
 public:
  explicit Manifest(Path dir) : dir_(std::move(dir)) { flush(); }

  void done(const std::string& stage, const std::vector<std::string>& outputs) {
    stages_.push_back({{"stage", stage}, {"outputs", outputs}, {"status", "done"}});
    flush();
  }
  void failed(const std::string& stage, const std::string& error) {
    stages_.push_back({{"stage", stage}, {"status", "failed"}, {"error", error}});
    failed_stage_ = stage;
    flush();
  }
  void complete() {
    complete_ = true;
    flush();
  }

 private:
  void flush() const {
    json j = {{"complete", complete_}, {"stages", stages_}};
    if (!failed_stage_.empty()) {
      j["failed_stage"] = failed_stage_;
    }
    write_text(dir_ / kManifestFile, j.dump(2) + "\n");
  }

  Path dir_;
  json stages_ = json::array();
  std::string failed_stage_;
  bool complete_ = false;
};

template <typename Fn>
void run_stage(Manifest& manifest, const std::string& name, const std::vector<std::string>& outputs, Fn&& fn) {
  try {
    fn();
  } catch (const GatewayError& e) {
    manifest.failed(name, e.what());
    throw GatewayError("stage '" + name + "': " + e.what());
  } catch (const std::exception& e) {
    manifest.failed(name, e.what());
    throw DataError("stage '" + name + "': " + e.what());
  }
  manifest.done(name, outputs);
}

}  // namespace

void cmd_run(const RunConfig& cfg) {
  if (cfg.paths.output_dir.empty()) {
    throw DataError("output_dir is required");
  }
  require(cfg.paths.vocabulary, "vocabulary");
  require(cfg.paths.proposals, "proposals");
  require(cfg.paths.groundtruth, "groundtruth");
  require(cfg.paths.class_embeddings, "class embeddings");
  if (cfg.paths.captions.empty() && !cfg.captioner) {
    throw DataError("either paths.captions or a captioner gateway is required");
  }
  if (cfg.selector.kind == SelectorKind::kLlm && !cfg.llm) {
    throw DataError("selector 'llm' requires an llm gateway configuration");
  }
  if (cfg.selector.kind == SelectorKind::kEmbedTopK) {
    require(cfg.paths.phrase_embeddings, "selector 'embed-topk': phrase embeddings");
  }
  cfg.selector.validate();
  cfg.rescore.validate();

  const Path out = cfg.paths.output_dir;
  std::filesystem::create_directories(out);
  Manifest manifest(out);

  run_stage(manifest, "captions", {kCaptionsFile}, [&] {
    if (!cfg.paths.captions.empty()) {
      std::vector<json> lines;
      for (const auto& c : load_captions(cfg.paths.captions)) {
        lines.push_back(to_json(c));
      }
      write_jsonl(out / kCaptionsFile, lines);
      return;
    }
    const GroundTruth gt = load_groundtruth(cfg.paths.groundtruth);
    const CaptionerPrompt prompt = cfg.paths.captioner_prompt.empty()
                                       ? CaptionerPrompt::builtin()
                                       : CaptionerPrompt::load(cfg.paths.captioner_prompt);
    ChatClient client(*cfg.captioner);
    const auto records = ordered_map(gt.images, cfg.concurrency, [&](const ImageRecord& im) {
      if (im.file_name.empty()) {
        throw DataError("image '" + im.image_id + "' has no file_name to caption");
      }
      const bool remote = im.file_name.starts_with("http://") || im.file_name.starts_with("https://");
      const std::string ref = remote ? im.file_name : (cfg.paths.image_root / im.file_name).string();
      return client.caption_image(im.image_id, ref, prompt);
    });
    std::vector<json> lines;
    for (const auto& r : records) {
      lines.push_back(to_json(r));
    }
    write_jsonl(out / kCaptionsFile, lines);
  });

  run_stage(manifest, "extract-nouns", {kNounsFile}, [&] {
    cmd_extract_nouns(out / kCaptionsFile, cfg.paths.lexicon, out / kNounsFile, cfg.concurrency);
  });

  run_stage(manifest, "adapt", {kAdaptedFile, std::string(kAdaptedFile) + ".summary.json"}, [&] {
    AdaptInputs in;
    in.vocabulary = cfg.paths.vocabulary;
    in.nouns = out / kNounsFile;
    in.captions = out / kCaptionsFile;
    in.class_embeddings = cfg.paths.class_embeddings;
    in.phrase_embeddings = cfg.paths.phrase_embeddings;
    in.groundtruth = cfg.paths.groundtruth;
    in.selector = cfg.selector;
    in.llm = cfg.llm;
    in.concurrency = cfg.concurrency;
    cmd_adapt(in, out / kAdaptedFile);
  });

  run_stage(manifest, "rescore", {kDetectionsFile}, [&] {
    RescoreInputs in;
    in.vocabulary = cfg.paths.vocabulary;
    in.proposals = cfg.paths.proposals;
    in.proposal_embeddings = cfg.paths.proposal_embeddings;
    in.adapted = out / kAdaptedFile;
    in.class_embeddings = cfg.paths.class_embeddings;
    in.groundtruth = cfg.paths.groundtruth;
    in.rescore = cfg.rescore;
    in.fallback_on_empty = cfg.selector.fallback_on_empty;
    in.prompt_template = cfg.selector.prompt_template;
    in.concurrency = cfg.concurrency;
    cmd_rescore(in, out / kDetectionsFile);
  });

  run_stage(manifest, "eval", {"metrics.json", "report.md"}, [&] {
    EvalInputs in;
    in.detections = out / kDetectionsFile;
    in.groundtruth = cfg.paths.groundtruth;
    in.vocabulary = cfg.paths.vocabulary;
    in.adapted = out / kAdaptedFile;
    in.title = std::string(to_string(cfg.selector.kind));
    Path groups_file = cfg.paths.groups;
    if (groups_file.empty() && !cfg.groups.empty()) {
      json g = json::object();
      for (const auto& [id, grp] : cfg.groups) {
        g[std::to_string(id)] = std::string(to_string(grp));
      }
      groups_file = out / "groups.json";
      write_text(groups_file, g.dump(2) + "\n");
    }
    in.groups = groups_file;
    cmd_eval(in, out);
  });

  manifest.complete();
}

}  // namespace vocada
