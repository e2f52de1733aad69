#include "vocada/noun_extractor.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <set>

#include <unicode/uchar.h>
#include <unicode/utf8.h>

#include "vocada/error.hpp"
#include "vocada/text.hpp"

namespace vocada {

namespace {

constexpr std::array<std::pair<PosTag, std::string_view>, 9> kTagNames{{
    {PosTag::kDet, "DET"},
    {PosTag::kAdj, "ADJ"},
    {PosTag::kNoun, "NOUN"},
    {PosTag::kVerb, "VERB"},
    {PosTag::kPrep, "PREP"},
    {PosTag::kConj, "CONJ"},
    {PosTag::kPron, "PRON"},
    {PosTag::kNum, "NUM"},
    {PosTag::kOther, "OTHER"},
}};

bool is_punct(UChar32 c) {
  const auto mask = U_GET_GC_MASK(c);
  return (mask & (U_GC_P_MASK | U_GC_S_MASK)) != 0;
}

struct CodePoint {
  UChar32 value;
  std::size_t start;
  std::size_t end;
};

std::vector<CodePoint> decode(std::string_view s) {
  std::vector<CodePoint> out;
  out.reserve(s.size());
  const auto* p = reinterpret_cast<const uint8_t*>(s.data());
  const auto len = static_cast<int32_t>(s.size());
  int32_t i = 0;
  while (i < len) {
    const int32_t start = i;
    UChar32 c = 0;
    U8_NEXT(p, i, len, c);
    if (c < 0) {
      c = 0xFFFD;
    }
    out.push_back({c, static_cast<std::size_t>(start), static_cast<std::size_t>(i)});
  }
  return out;
}

bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

bool is_numeral(std::string_view s) {
  bool digit = false;
  for (char c : s) {
    if (c >= '0' && c <= '9') {
      digit = true;
    } else if (c != ',' && c != '.') {
      return false;
    }
  }
  return digit;
}

bool in_phrase(PosTag t) { return t == PosTag::kAdj || t == PosTag::kNoun; }

}  // namespace

std::string_view to_string(PosTag tag) {
  for (const auto& [t, name] : kTagNames) {
    if (t == tag) {
      return name;
    }
  }
  return "OTHER";
}

std::optional<PosTag> parse_pos_tag(std::string_view s) {
  for (const auto& [t, name] : kTagNames) {
    if (name == s) {
      return t;
    }
  }
  return std::nullopt;
}

TagLexicon::TagLexicon(std::string name, std::string version, std::map<std::string, PosTag, std::less<>> entries)
    : name_(std::move(name)), version_(std::move(version)), entries_(std::move(entries)) {
  if (entries_.empty()) {
    throw DataError("tag lexicon '" + name_ + "' is empty");
  }
  for (const auto& [key, tag] : entries_) {
    if (normalize_name(key) != key) {
      throw DataError("lexicon key '" + key + "' is not in normalized form");
    }
  }
}

TagLexicon TagLexicon::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw DataError("cannot open lexicon " + path.string());
  }
  std::string name = path.stem().string();
  std::string version;
  std::map<std::string, PosTag, std::less<>> entries;
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
    if (line.empty()) {
      continue;
    }
    if (line.front() == '#') {
      std::string_view body(line);
      body.remove_prefix(1);
      while (!body.empty() && body.front() == ' ') {
        body.remove_prefix(1);
      }
      if (body.starts_with("name:")) {
        name = normalize_name(body.substr(5));
      } else if (body.starts_with("version:")) {
        version = normalize_name(body.substr(8));
      }
      continue;
    }
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": expected token<TAB>TAG");
    }
    const std::string token = line.substr(0, tab);
    const auto tag = parse_pos_tag(std::string_view(line).substr(tab + 1));
    if (!tag) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": unknown tag '" + line.substr(tab + 1) + "'");
    }
    if (normalize_name(token) != token || token.empty()) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": token '" + token + "' is not normalized");
    }
    if (!entries.emplace(token, *tag).second) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": duplicate token '" + token + "'");
    }
  }
  return TagLexicon(std::move(name), std::move(version), std::move(entries));
}

std::optional<PosTag> TagLexicon::lookup(std::string_view normalized_token) const {
  if (auto it = entries_.find(normalized_token); it != entries_.end()) {
    return it->second;
  }
  return std::nullopt;
}

std::vector<Token> tokenize(std::string_view caption) {
  const auto cps = decode(caption);
  std::vector<Token> out;
  bool pending_break = false;

  std::size_t i = 0;
  while (i < cps.size()) {
    if (u_isUWhiteSpace(cps[i].value)) {
      ++i;
      continue;
    }
    std::size_t seg_end = i;
    while (seg_end < cps.size() && !u_isUWhiteSpace(cps[seg_end].value)) {
      ++seg_end;
    }
    std::size_t lo = i;
    std::size_t hi = seg_end;
    while (lo < hi && is_punct(cps[lo].value)) {
      ++lo;
    }
    while (hi > lo && is_punct(cps[hi - 1].value)) {
      --hi;
    }
    if (lo > i) {
      pending_break = true;
    }
    if (lo < hi) {
      const std::size_t start = cps[lo].start;
      const std::size_t end = cps[hi - 1].end;
      out.push_back({std::string(caption.substr(start, end - start)), start, end, pending_break && !out.empty()});
      pending_break = false;
    }
    if (hi < seg_end) {
      pending_break = true;
    }
    i = seg_end;
  }
  return out;
}

PosTag tag_token(std::string_view token, const TagLexicon& lexicon) {
  const std::string norm = normalize_name(token);
  if (auto t = lexicon.lookup(norm)) {
    return *t;
  }
  if (is_numeral(norm)) {
    return PosTag::kNum;
  }
  if (ends_with(norm, "ing") || ends_with(norm, "ed")) {
    return PosTag::kVerb;
  }
  if (ends_with(norm, "ly")) {
    return PosTag::kOther;
  }
  for (std::string_view suffix : {"ous", "ful", "ish", "al"}) {
    if (ends_with(norm, suffix)) {
      return PosTag::kAdj;
    }
  }
  return PosTag::kNoun;
}

std::vector<TaggedToken> tag(const std::vector<Token>& tokens, const TagLexicon& lexicon) {
  std::vector<TaggedToken> out;
  out.reserve(tokens.size());
  for (const Token& t : tokens) {
    out.push_back({t.text, tag_token(t.text, lexicon), t.start, t.end, t.breaks_before});
  }
  return out;
}

std::vector<std::string> chunk_noun_phrases(const std::vector<TaggedToken>& tagged) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < tagged.size()) {
    if (!in_phrase(tagged[i].tag)) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < tagged.size() && tagged[j].tag == PosTag::kAdj && (j == i || !tagged[j].breaks_before)) {
      ++j;
    }
    const std::size_t noun_start = j;
    while (j < tagged.size() && tagged[j].tag == PosTag::kNoun && (j == i || !tagged[j].breaks_before)) {
      ++j;
    }
    if (j == noun_start) {
      // Adjectives not followed by a noun: resume at the token that stopped the run.
      i = std::max(j, i + 1);
      continue;
    }
    const std::size_t first = (j - i > kMaxPhraseTokens) ? j - kMaxPhraseTokens : i;
    std::string phrase;
    for (std::size_t t = first; t < j; ++t) {
      if (!phrase.empty()) {
        phrase.push_back(' ');
      }
      phrase += tagged[t].text;
    }
    out.push_back(normalize_name(phrase));
    i = j;
  }
  return out;
}

NounPhraseSet extract(const CaptionRecord& caption, const TagLexicon& lexicon) {
  NounPhraseSet out{caption.image_id, {}};
  std::set<std::string, std::less<>> seen;
  for (auto& phrase : chunk_noun_phrases(tag(tokenize(caption.caption), lexicon))) {
    if (phrase.empty() || seen.contains(phrase)) {
      continue;
    }
    seen.insert(phrase);
    out.phrases.push_back(std::move(phrase));
  }
  return out;
}

}  // namespace vocada
