#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace vocada {

using ClassId = std::int64_t;

/// Axis-aligned box in corner form, pixels.
struct Box {
  double x1 = 0.0;
  double y1 = 0.0;
  double x2 = 0.0;
  double y2 = 0.0;

  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  double area() const;
  bool valid() const { return x1 < x2 && y1 < y2; }

  static Box from_xywh(double x, double y, double w, double h) { return {x, y, x + w, y + h}; }

  friend bool operator==(const Box&, const Box&) = default;
};

struct ClassEntry {
  ClassId id = 0;
  std::string name;
  std::vector<std::string> synonyms;
};

struct Vocabulary {
  std::string name;
  std::vector<ClassEntry> classes;

  const ClassEntry* find(ClassId id) const;
  bool contains(ClassId id) const { return find(id) != nullptr; }
  std::vector<ClassId> ids() const;
};

struct ImageRecord {
  std::string image_id;
  double width = 0.0;
  double height = 0.0;
  std::string file_name;
};

struct CaptionRecord {
  std::string image_id;
  std::string caption;
  std::string source;
};

struct NounPhraseSet {
  std::string image_id;
  std::vector<std::string> phrases;
};

struct Proposal {
  std::string image_id;
  Box box;
  std::string embedding_key;
  double objectness = 1.0;
};

enum class SelectorKind { kBaseline, kOracle, kEmbedTopK, kLlm };

std::string_view to_string(SelectorKind kind);
std::optional<SelectorKind> parse_selector_kind(std::string_view s);

struct AdaptedVocabulary {
  std::string image_id;
  std::set<ClassId> class_ids;
  SelectorKind selector = SelectorKind::kBaseline;
  bool fallback_used = false;
};

struct Detection {
  std::string image_id;
  Box box;
  ClassId class_id = 0;
  double score = 0.0;
};

struct GroundTruthBox {
  std::string image_id;
  Box box;
  ClassId class_id = 0;
};

enum class ViolationKind { kDuplicateId, kEmptyName, kNameCollision, kSynonymCollision, kIntraEntryCollision, kEmptyVocabulary };

struct Violation {
  ViolationKind kind;
  std::string message;
};

/// Every invariant violation of `v`; empty means valid.
std::vector<Violation> validate_vocabulary(const Vocabulary& v);

/// Injective map from normalized name/synonym to class id for a validated vocabulary.
/// Names are consulted before synonyms.
class SurfaceIndex {
 public:
  explicit SurfaceIndex(const Vocabulary& v);

  std::optional<ClassId> lookup(std::string_view surface) const;
  std::size_t size() const { return names_.size() + synonyms_.size(); }

 private:
  std::map<std::string, ClassId, std::less<>> names_;
  std::map<std::string, ClassId, std::less<>> synonyms_;
};

}  // namespace vocada
