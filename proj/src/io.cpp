#include "vocada/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "vocada/error.hpp"
#include "vocada/text.hpp"

namespace vocada {

using nlohmann::json;

namespace {

std::string image_key(const json& v) {
  if (v.is_string()) {
    return v.get<std::string>();
  }
  if (v.is_number_integer()) {
    return std::to_string(v.get<std::int64_t>());
  }
  throw DataError("image id must be a string or an integer");
}

Box parse_box(const json& j) {
  const auto v = j.get<std::vector<double>>();
  if (v.size() != 4) {
    throw DataError("box must have 4 coordinates");
  }
  return {v[0], v[1], v[2], v[3]};
}

json box_json(const Box& b) { return json::array({b.x1, b.y1, b.x2, b.y2}); }

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw DataError("cannot open " + path.string());
  }
  return in;
}

json parse_file(const std::filesystem::path& path) {
  auto in = open_in(path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::string fmt_pct(const std::optional<double>& v) {
  if (!v) {
    return "-";
  }
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", *v * 100.0);
  return buf;
}

json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

Vocabulary parse_vocabulary(const json& doc) {
  Vocabulary v;
  v.name = doc.value("name", "");
  for (const auto& c : doc.at("classes")) {
    ClassEntry e;
    e.id = c.at("id").get<ClassId>();
    e.name = c.at("name").get<std::string>();
    if (c.contains("synonyms")) {
      e.synonyms = c.at("synonyms").get<std::vector<std::string>>();
    }
    v.classes.push_back(std::move(e));
  }
  return v;
}

Vocabulary load_vocabulary(const std::filesystem::path& path) {
  Vocabulary v;
  try {
    v = parse_vocabulary(parse_file(path));
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  const auto violations = validate_vocabulary(v);
  if (!violations.empty()) {
    std::string msg = path.string() + ": invalid vocabulary";
    for (const auto& viol : violations) {
      msg += "\n  " + viol.message;
    }
    throw DataError(msg);
  }
  return v;
}

json to_json(const Vocabulary& v) {
  json classes = json::array();
  for (const auto& c : v.classes) {
    classes.push_back({{"id", c.id}, {"name", c.name}, {"synonyms", c.synonyms}});
  }
  return {{"name", v.name}, {"classes", classes}};
}

json to_json(const CaptionRecord& r) {
  return {{"image_id", r.image_id}, {"caption", r.caption}, {"source", r.source}};
}

json to_json(const NounPhraseSet& r) { return {{"image_id", r.image_id}, {"phrases", r.phrases}}; }

json to_json(const AdaptedVocabulary& r) {
  return {{"image_id", r.image_id},
          {"class_ids", std::vector<ClassId>(r.class_ids.begin(), r.class_ids.end())},
          {"selector", std::string(to_string(r.selector))},
          {"fallback_used", r.fallback_used}};
}

json to_json(const Detection& r) {
  return {{"image_id", r.image_id}, {"box", box_json(r.box)}, {"class_id", r.class_id}, {"score", r.score}};
}

CaptionRecord caption_from_json(const json& j) {
  return {image_key(j.at("image_id")), j.at("caption").get<std::string>(), j.value("source", "file")};
}

NounPhraseSet nouns_from_json(const json& j) {
  NounPhraseSet out{image_key(j.at("image_id")), j.at("phrases").get<std::vector<std::string>>()};
  std::set<std::string> seen;
  for (const auto& p : out.phrases) {
    if (p.empty() || normalize_name(p) != p) {
      throw DataError("phrase '" + p + "' is empty or not normalized");
    }
    if (!seen.insert(p).second) {
      throw DataError("duplicate phrase '" + p + "'");
    }
  }
  return out;
}

AdaptedVocabulary adapted_from_json(const json& j) {
  AdaptedVocabulary out;
  out.image_id = image_key(j.at("image_id"));
  const auto ids = j.at("class_ids").get<std::vector<ClassId>>();
  out.class_ids.insert(ids.begin(), ids.end());
  const auto kind = parse_selector_kind(j.at("selector").get<std::string>());
  if (!kind) {
    throw DataError("unknown selector '" + j.at("selector").get<std::string>() + "'");
  }
  out.selector = *kind;
  out.fallback_used = j.value("fallback_used", false);
  return out;
}

Detection detection_from_json(const json& j) {
  Detection d{image_key(j.at("image_id")), parse_box(j.at("box")), j.at("class_id").get<ClassId>(),
              j.at("score").get<double>()};
  if (!std::isfinite(d.score)) {
    throw DataError("detection score is not finite");
  }
  return d;
}

void for_each_jsonl(const std::filesystem::path& path, const std::function<void(const json&, std::size_t)>& fn) {
  auto in = open_in(path);
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
    if (line.find_first_not_of(" \t") == std::string::npos) {
      continue;
    }
    try {
      fn(json::parse(line), lineno);
    } catch (const json::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    } catch (const DataError& e) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

namespace {

template <typename T, typename Parse>
std::vector<T> load_keyed(const std::filesystem::path& path, Parse parse) {
  std::vector<T> out;
  std::set<std::string> ids;
  for_each_jsonl(path, [&](const json& j, std::size_t) {
    T rec = parse(j);
    if (!ids.insert(rec.image_id).second) {
      throw DataError("duplicate image_id '" + rec.image_id + "'");
    }
    out.push_back(std::move(rec));
  });
  return out;
}

}  // namespace

std::vector<CaptionRecord> load_captions(const std::filesystem::path& path) {
  return load_keyed<CaptionRecord>(path, caption_from_json);
}

std::vector<NounPhraseSet> load_nouns(const std::filesystem::path& path) {
  return load_keyed<NounPhraseSet>(path, nouns_from_json);
}

std::vector<AdaptedVocabulary> load_adapted(const std::filesystem::path& path) {
  return load_keyed<AdaptedVocabulary>(path, adapted_from_json);
}

std::vector<Detection> load_detections(const std::filesystem::path& path) {
  std::vector<Detection> out;
  for_each_jsonl(path, [&](const json& j, std::size_t) { out.push_back(detection_from_json(j)); });
  return out;
}

void write_jsonl(const std::filesystem::path& path, const std::vector<json>& lines) {
  std::string content;
  for (const auto& j : lines) {
    content += j.dump();
    content.push_back('\n');
  }
  write_text(path, content);
}

void write_text(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw DataError("cannot write " + path.string());
  }
  out << content;
}

const ImageRecord* GroundTruth::find_image(const std::string& image_id) const {
  auto it = std::find_if(images.begin(), images.end(), [&](const ImageRecord& r) { return r.image_id == image_id; });
  return it == images.end() ? nullptr : &*it;
}

std::vector<GroundTruthBox> GroundTruth::boxes_for(const std::string& image_id) const {
  std::vector<GroundTruthBox> out;
  for (const auto& b : boxes) {
    if (b.image_id == image_id) {
      out.push_back(b);
    }
  }
  return out;
}

GroundTruth load_groundtruth(const std::filesystem::path& path) {
  const json doc = parse_file(path);
  GroundTruth gt;
  try {
    std::set<std::string> ids;
    for (const auto& im : doc.at("images")) {
      ImageRecord r{image_key(im.at("id")), im.at("width").get<double>(), im.at("height").get<double>(),
                    im.value("file_name", "")};
      if (!(r.width > 0.0 && r.height > 0.0)) {
        throw DataError("image '" + r.image_id + "' has non-positive size");
      }
      if (!ids.insert(r.image_id).second) {
        throw DataError("duplicate image id '" + r.image_id + "'");
      }
      gt.images.push_back(std::move(r));
    }
    for (const auto& cat : doc.value("categories", json::array())) {
      gt.categories.emplace(cat.at("id").get<ClassId>(), cat.value("name", ""));
    }
    for (const auto& ann : doc.at("annotations")) {
      const auto bbox = ann.at("bbox").get<std::vector<double>>();
      if (bbox.size() != 4) {
        throw DataError("annotation bbox must be [x, y, w, h]");
      }
      GroundTruthBox g{image_key(ann.at("image_id")), Box::from_xywh(bbox[0], bbox[1], bbox[2], bbox[3]),
                       ann.at("category_id").get<ClassId>()};
      if (!ids.contains(g.image_id)) {
        throw DataError("annotation references unknown image '" + g.image_id + "'");
      }
      if (!g.box.valid()) {
        throw DataError("annotation in image '" + g.image_id + "' has a degenerate box");
      }
      gt.boxes.push_back(std::move(g));
    }
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  return gt;
}

ProposalSet load_proposals(const std::filesystem::path& path, const GroundTruth* images) {
  ProposalSet out;
  std::set<std::string> ids;
  for_each_jsonl(path, [&](const json& j, std::size_t) {
    ImageProposals ip{image_key(j.at("image_id")), {}};
    if (!ids.insert(ip.image_id).second) {
      throw DataError("duplicate image_id '" + ip.image_id + "'");
    }
    const auto& boxes = j.at("boxes");
    const auto keys = j.at("embedding_keys").get<std::vector<std::string>>();
    std::vector<double> objectness(boxes.size(), 1.0);
    if (j.contains("objectness")) {
      objectness = j.at("objectness").get<std::vector<double>>();
    }
    if (keys.size() != boxes.size() || objectness.size() != boxes.size()) {
      throw DataError("image '" + ip.image_id + "': boxes, objectness and embedding_keys differ in length");
    }
    const ImageRecord* rec = images ? images->find_image(ip.image_id) : nullptr;
    for (std::size_t i = 0; i < boxes.size(); ++i) {
      Box b = parse_box(boxes[i]);
      if (rec) {
        const Box clamped{std::clamp(b.x1, 0.0, rec->width), std::clamp(b.y1, 0.0, rec->height),
                          std::clamp(b.x2, 0.0, rec->width), std::clamp(b.y2, 0.0, rec->height)};
        if (!(clamped == b)) {
          ++out.clamped;
          b = clamped;
        }
      }
      if (!b.valid()) {
        throw DataError("image '" + ip.image_id + "': proposal " + std::to_string(i) + " has a degenerate box");
      }
      if (!(objectness[i] >= 0.0 && objectness[i] <= 1.0)) {
        throw DataError("image '" + ip.image_id + "': objectness outside [0, 1]");
      }
      ip.proposals.push_back({ip.image_id, b, keys[i], objectness[i]});
    }
    out.images.push_back(std::move(ip));
  });
  return out;
}

GroupMap parse_groups(const json& doc) {
  GroupMap out;
  for (const auto& [key, value] : doc.items()) {
    const auto g = parse_class_group(value.get<std::string>());
    if (!g) {
      throw DataError("class " + key + ": group must be 'base' or 'novel'");
    }
    try {
      out.emplace(std::stoll(key), *g);
    } catch (const std::exception&) {
      throw DataError("group key '" + key + "' is not a class id");
    }
  }
  return out;
}

GroupMap load_groups(const std::filesystem::path& path) {
  try {
    return parse_groups(parse_file(path));
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

json report_to_json(const EvalReport& report, const Vocabulary& vocab, const GroupMap& groups) {
  json j;
  j["ap50_all"] = opt_json(report.ap50_all);
  j["ap50_base"] = opt_json(report.ap50_base);
  j["ap50_novel"] = opt_json(report.ap50_novel);
  j["map_all"] = opt_json(report.map_all);
  j["map_base"] = opt_json(report.map_base);
  j["map_novel"] = opt_json(report.map_novel);
  if (report.vocab_precision) {
    j["vocab_precision"] = *report.vocab_precision;
  }
  if (report.vocab_recall) {
    j["vocab_recall"] = *report.vocab_recall;
  }
  j["counts"] = {{"images", report.counts.images},
                 {"detections", report.counts.detections},
                 {"gts", report.counts.gts},
                 {"fallbacks", report.counts.fallbacks}};
  j["thresholds"] = report.thresholds;
  json per_class = json::array();
  for (const auto& [id, aps] : report.ap_per_class) {
    json entry = {{"class_id", id}, {"ap", aps}};
    if (const ClassEntry* c = vocab.find(id)) {
      entry["name"] = c->name;
    }
    if (auto it = groups.find(id); it != groups.end()) {
      entry["group"] = std::string(to_string(it->second));
    }
    per_class.push_back(std::move(entry));
  }
  j["per_class"] = std::move(per_class);
  return j;
}

std::string report_to_markdown(const EvalReport& report, const std::string& title) {
  std::ostringstream os;
  os << "# Evaluation: " << title << "\n\n";
  os << "| Method | AP50 novel | AP50 base | AP50 all | mAP novel | mAP base | mAP all |";
  const bool vocab = report.vocab_precision.has_value();
  if (vocab) {
    os << " Vocab precision | Vocab recall |";
  }
  os << "\n|---|---|---|---|---|---|---|";
  if (vocab) {
    os << "---|---|";
  }
  os << "\n| " << title << " | " << fmt_pct(report.ap50_novel) << " | " << fmt_pct(report.ap50_base) << " | "
     << fmt_pct(report.ap50_all) << " | " << fmt_pct(report.map_novel) << " | " << fmt_pct(report.map_base) << " | "
     << fmt_pct(report.map_all) << " |";
  if (vocab) {
    os << " " << fmt_pct(report.vocab_precision) << " | " << fmt_pct(report.vocab_recall) << " |";
  }
  os << "\n\nImages: " << report.counts.images << ", detections: " << report.counts.detections
     << ", ground-truth boxes: " << report.counts.gts << ", selector fallbacks: " << report.counts.fallbacks << "\n";
  return os.str();
}

}  // namespace vocada
