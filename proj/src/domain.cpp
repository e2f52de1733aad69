#include "vocada/domain.hpp"

#include <algorithm>
#include <unordered_map>

#include "vocada/text.hpp"

namespace vocada {

double Box::area() const {
  return valid() ? width() * height() : 0.0;
}

const ClassEntry* Vocabulary::find(ClassId id) const {
  auto it = std::find_if(classes.begin(), classes.end(), [id](const ClassEntry& c) { return c.id == id; });
  return it == classes.end() ? nullptr : &*it;
}

std::vector<ClassId> Vocabulary::ids() const {
  std::vector<ClassId> out;
  out.reserve(classes.size());
  for (const auto& c : classes) {
    out.push_back(c.id);
  }
  return out;
}

std::string_view to_string(SelectorKind kind) {
  switch (kind) {
    case SelectorKind::kBaseline:
      return "baseline";
    case SelectorKind::kOracle:
      return "oracle";
    case SelectorKind::kEmbedTopK:
      return "embed-topk";
    case SelectorKind::kLlm:
      return "llm";
  }
  return "baseline";
}

std::optional<SelectorKind> parse_selector_kind(std::string_view s) {
  for (auto k : {SelectorKind::kBaseline, SelectorKind::kOracle, SelectorKind::kEmbedTopK, SelectorKind::kLlm}) {
    if (to_string(k) == s) {
      return k;
    }
  }
  return std::nullopt;
}

std::vector<Violation> validate_vocabulary(const Vocabulary& v) {
  std::vector<Violation> out;
  if (v.classes.empty()) {
    out.push_back({ViolationKind::kEmptyVocabulary, "vocabulary has no classes"});
    return out;
  }

  std::unordered_map<ClassId, std::size_t> seen_ids;
  std::unordered_map<std::string, ClassId> names;
  for (std::size_t i = 0; i < v.classes.size(); ++i) {
    const ClassEntry& c = v.classes[i];
    if (auto [it, inserted] = seen_ids.emplace(c.id, i); !inserted) {
      out.push_back({ViolationKind::kDuplicateId, "duplicate class id " + std::to_string(c.id)});
    }
    const std::string norm = normalize_name(c.name);
    if (norm.empty()) {
      out.push_back({ViolationKind::kEmptyName, "class " + std::to_string(c.id) + " has an empty name"});
      continue;
    }
    if (auto [it, inserted] = names.emplace(norm, c.id); !inserted) {
      out.push_back({ViolationKind::kNameCollision, "name '" + norm + "' used by classes " +
                                                        std::to_string(it->second) + " and " + std::to_string(c.id)});
    }
  }

  for (const ClassEntry& c : v.classes) {
    std::vector<std::string> forms{normalize_name(c.name)};
    for (const auto& syn : c.synonyms) {
      const std::string norm = normalize_name(syn);
      if (norm.empty()) {
        out.push_back({ViolationKind::kEmptyName, "class " + std::to_string(c.id) + " has an empty synonym"});
        continue;
      }
      if (std::find(forms.begin(), forms.end(), norm) != forms.end()) {
        out.push_back({ViolationKind::kIntraEntryCollision,
                       "class " + std::to_string(c.id) + " repeats surface form '" + norm + "'"});
      }
      forms.push_back(norm);
      if (auto it = names.find(norm); it != names.end() && it->second != c.id) {
        out.push_back({ViolationKind::kSynonymCollision, "synonym '" + norm + "' of class " + std::to_string(c.id) +
                                                             " collides with the name of class " +
                                                             std::to_string(it->second)});
      }
    }
  }

  // Same synonym on two different entries is equally ambiguous.
  std::unordered_map<std::string, ClassId> synonyms;
  for (const ClassEntry& c : v.classes) {
    for (const auto& syn : c.synonyms) {
      const std::string norm = normalize_name(syn);
      if (norm.empty()) {
        continue;
      }
      if (auto [it, inserted] = synonyms.emplace(norm, c.id); !inserted && it->second != c.id) {
        out.push_back({ViolationKind::kSynonymCollision, "synonym '" + norm + "' shared by classes " +
                                                             std::to_string(it->second) + " and " +
                                                             std::to_string(c.id)});
      }
    }
  }
  return out;
}

SurfaceIndex::SurfaceIndex(const Vocabulary& v) {
  for (const ClassEntry& c : v.classes) {
    names_.emplace(normalize_name(c.name), c.id);
  }
  for (const ClassEntry& c : v.classes) {
    for (const auto& syn : c.synonyms) {
      const std::string norm = normalize_name(syn);
      if (!names_.contains(norm)) {
        synonyms_.emplace(norm, c.id);
      }
    }
  }
}

std::optional<ClassId> SurfaceIndex::lookup(std::string_view surface) const {
  const std::string norm = normalize_name(surface);
  if (auto it = names_.find(norm); it != names_.end()) {
    return it->second;
  }
  if (auto it = synonyms_.find(norm); it != synonyms_.end()) {
    return it->second;
  }
  return std::nullopt;
}

}  // namespace vocada
