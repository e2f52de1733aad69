#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "vocada/domain.hpp"

namespace vocada {

enum class PosTag { kDet, kAdj, kNoun, kVerb, kPrep, kConj, kPron, kNum, kOther };

std::string_view to_string(PosTag tag);
std::optional<PosTag> parse_pos_tag(std::string_view s);

/// Token -> tag table. Keys are normalize_name fixed points.
class TagLexicon {
 public:
  TagLexicon() = default;
  TagLexicon(std::string name, std::string version, std::map<std::string, PosTag, std::less<>> entries);

  /// Reads `token<TAB>TAG` lines (UTF-8). Blank lines are skipped; lines starting with
  /// '#' are comments, and "# name: X" / "# version: Y" set the metadata.
  static TagLexicon load(const std::filesystem::path& path);

  std::optional<PosTag> lookup(std::string_view normalized_token) const;
  std::size_t size() const { return entries_.size(); }
  const std::string& name() const { return name_; }
  const std::string& version() const { return version_; }

 private:
  std::string name_;
  std::string version_;
  std::map<std::string, PosTag, std::less<>> entries_;
};

struct Token {
  std::string text;
  std::size_t start = 0;  // byte offsets into the caption
  std::size_t end = 0;
  bool breaks_before = false;  // punctuation was stripped between this token and the previous one
};

struct TaggedToken {
  std::string text;
  PosTag tag = PosTag::kOther;
  std::size_t start = 0;
  std::size_t end = 0;
  bool breaks_before = false;
};

inline constexpr std::size_t kMaxPhraseTokens = 4;

/// Whitespace split; leading/trailing punctuation is peeled off and dropped,
/// intra-word hyphens and apostrophes stay.
std::vector<Token> tokenize(std::string_view caption);

/// Lexicon lookup on the normalized token, then: digits -> NUM, -ing/-ed -> VERB,
/// -ly -> OTHER, -ous/-ful/-ish/-al -> ADJ, otherwise NOUN.
PosTag tag_token(std::string_view token, const TagLexicon& lexicon);
std::vector<TaggedToken> tag(const std::vector<Token>& tokens, const TagLexicon& lexicon);

/// Maximal ADJ* NOUN+ runs, never crossing stripped punctuation, capped to the
/// last kMaxPhraseTokens tokens, normalized. Text order; duplicates kept.
std::vector<std::string> chunk_noun_phrases(const std::vector<TaggedToken>& tagged);

NounPhraseSet extract(const CaptionRecord& caption, const TagLexicon& lexicon);

}  // namespace vocada
