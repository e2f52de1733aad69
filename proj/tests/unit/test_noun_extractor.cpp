#include <doctest.h>

#include <algorithm>
#include <random>

#include "test_util.hpp"
#include "vocada/error.hpp"
#include "vocada/noun_extractor.hpp"
#include "vocada/resources.hpp"
#include "vocada/text.hpp"

using namespace vocada;

namespace {

TagLexicon small_lexicon() {
  return TagLexicon("test", "1",
                    {{"a", PosTag::kDet},
                     {"the", PosTag::kDet},
                     {"cluster", PosTag::kNoun},
                     {"of", PosTag::kPrep},
                     {"red", PosTag::kAdj},
                     {"apples", PosTag::kNoun},
                     {"plastic", PosTag::kAdj},
                     {"near", PosTag::kPrep},
                     {"man", PosTag::kNoun},
                     {"and", PosTag::kConj}});
}

const TagLexicon& bundled() {
  static const TagLexicon lex = TagLexicon::load(std::string(resources::kDefaultLexicon));
  return lex;
}

std::vector<std::string> texts(const std::vector<Token>& toks) {
  std::vector<std::string> out;
  for (const auto& t : toks) {
    out.push_back(t.text);
  }
  return out;
}

std::vector<std::string> phrases_of(const std::string& caption, const TagLexicon& lex) {
  return extract({"x", caption, ""}, lex).phrases;
}

}  // namespace

TEST_CASE("tokenize strips edge punctuation") {
  CHECK(texts(tokenize("A man, riding a bicycle.")) ==
        std::vector<std::string>{"A", "man", "riding", "a", "bicycle"});
  CHECK(tokenize("").empty());
  CHECK(tokenize("  ...  ").empty());
}

TEST_CASE("tokenize keeps intra-word hyphens and apostrophes") {
  CHECK(texts(tokenize("red-striped umbrella")) == std::vector<std::string>{"red-striped", "umbrella"});
  CHECK(texts(tokenize("the chef's (sharp) knife!")) ==
        std::vector<std::string>{"the", "chef's", "sharp", "knife"});
}

TEST_CASE("tokenize records offsets and punctuation breaks") {
  const auto toks = tokenize("A man, riding \xE2\x80\x9C" "fast\xE2\x80\x9D");
  REQUIRE(toks.size() == 4);
  CHECK(toks[1].start == 2);
  CHECK(toks[1].end == 5);
  CHECK_FALSE(toks[0].breaks_before);
  CHECK_FALSE(toks[1].breaks_before);
  CHECK(toks[2].breaks_before);
  CHECK(toks[3].breaks_before);
  CHECK(toks[3].text == "fast");
}

TEST_CASE("tag: lexicon first, then suffix rules") {
  const auto lex = small_lexicon();
  const auto tagged = tag(tokenize("plastic containers"), lex);
  REQUIRE(tagged.size() == 2);
  CHECK(tagged[0].tag == PosTag::kAdj);
  CHECK(tagged[1].tag == PosTag::kNoun);
  CHECK(tag_token("riding", lex) == PosTag::kVerb);
  CHECK(tag_token("parked", lex) == PosTag::kVerb);
  CHECK(tag_token("quickly", lex) == PosTag::kOther);
  CHECK(tag_token("famous", lex) == PosTag::kAdj);
  CHECK(tag_token("colorful", lex) == PosTag::kAdj);
  CHECK(tag_token("reddish", lex) == PosTag::kAdj);
  CHECK(tag_token("tropical", lex) == PosTag::kAdj);
  CHECK(tag_token("giraffe", lex) == PosTag::kNoun);
  CHECK(tag_token("the", lex) == PosTag::kDet);
  CHECK(tag_token("The", lex) == PosTag::kDet);
  CHECK(tag_token("12", lex) == PosTag::kNum);
  CHECK(tag_token("1,000", lex) == PosTag::kNum);
}

TEST_CASE("suffix rules apply in order") {
  const auto lex = small_lexicon();
  // "-ing" wins over everything after it; "-ed" likewise.
  CHECK(tag_token("thing", lex) == PosTag::kVerb);
  CHECK(tag_token("sled", lex) == PosTag::kVerb);
  // "-ly" is checked before "-al".
  CHECK(tag_token("ally", lex) == PosTag::kOther);
}

TEST_CASE("bundled lexicon covers nouns the suffix rules would mis-tag") {
  const auto& lex = bundled();
  CHECK(lex.size() > 2000);
  CHECK(lex.name() == "en_core");
  for (std::string w : {"bed", "ring", "ceiling", "building", "animal", "pedal", "curling", "bus", "fish"}) {
    CAPTURE(w);
    CHECK(tag_token(w, lex) == PosTag::kNoun);
  }
  CHECK(tag_token("red", lex) == PosTag::kAdj);
  CHECK(tag_token("plastic", lex) == PosTag::kAdj);
}

TEST_CASE("chunking examples") {
  const auto lex = small_lexicon();
  CHECK(chunk_noun_phrases(tag(tokenize("A man riding a bicycle"), lex)) ==
        std::vector<std::string>{"man", "bicycle"});
  CHECK(chunk_noun_phrases(tag(tokenize("plastic containers"), lex)) ==
        std::vector<std::string>{"plastic containers"});
  CHECK(chunk_noun_phrases({}).empty());
}

TEST_CASE("extract examples") {
  const auto lex = small_lexicon();
  CHECK(phrases_of("A man riding a bicycle. A man near a bicycle.", lex) ==
        std::vector<std::string>{"man", "bicycle"});
  CHECK(phrases_of("", lex).empty());
  CHECK(phrases_of("a cluster of red apples", lex) == std::vector<std::string>{"cluster", "red apples"});
  CHECK(extract({"img7", "a man", ""}, lex).image_id == "img7");
}

TEST_CASE("phrases are capped at four tokens from the right") {
  const auto lex = TagLexicon("t", "1",
                              {{"big", PosTag::kAdj}, {"old", PosTag::kAdj}, {"rusty", PosTag::kAdj},
                               {"red", PosTag::kAdj}, {"metal", PosTag::kAdj}, {"hydrant", PosTag::kNoun}});
  CHECK(phrases_of("big old rusty red metal hydrant", lex) == std::vector<std::string>{"rusty red metal hydrant"});
}

TEST_CASE("adjectives without a noun form no phrase") {
  const auto lex = small_lexicon();
  CHECK(phrases_of("red and plastic", lex).empty());
  CHECK(phrases_of("red, apples", lex) == std::vector<std::string>{"apples"});
}

TEST_CASE("chunks never cross stripped punctuation") {
  const auto lex = small_lexicon();
  CHECK(phrases_of("cluster. apples", lex) == std::vector<std::string>{"cluster", "apples"});
  CHECK(phrases_of("cluster apples", lex) == std::vector<std::string>{"cluster apples"});
}

TEST_CASE("phrases are normalized") {
  const auto lex = small_lexicon();
  CHECK(phrases_of("A RED Apples", lex) == std::vector<std::string>{"red apples"});
  CHECK(phrases_of("Te\xCC\x81le\xCC\x81vision", lex) == std::vector<std::string>{"t\xC3\xA9l\xC3\xA9vision"});
}

TEST_CASE("lexicon loading") {
  testutil::TempDir dir;
  testutil::write_file(dir / "ok.tsv", "# name: mini\n# version: 3\n\nthe\tDET\nred\tADJ\n");
  const auto lex = TagLexicon::load(dir / "ok.tsv");
  CHECK(lex.name() == "mini");
  CHECK(lex.version() == "3");
  CHECK(lex.size() == 2);

  testutil::write_file(dir / "dup.tsv", "the\tDET\nthe\tNOUN\n");
  CHECK_THROWS_AS(TagLexicon::load(dir / "dup.tsv"), DataError);
  testutil::write_file(dir / "tag.tsv", "the\tARTICLE\n");
  CHECK_THROWS_AS(TagLexicon::load(dir / "tag.tsv"), DataError);
  testutil::write_file(dir / "case.tsv", "The\tDET\n");
  CHECK_THROWS_AS(TagLexicon::load(dir / "case.tsv"), DataError);
  testutil::write_file(dir / "empty.tsv", "# nothing\n");
  CHECK_THROWS_AS(TagLexicon::load(dir / "empty.tsv"), DataError);
  CHECK_THROWS_AS(TagLexicon::load(dir / "absent.tsv"), DataError);
}

TEST_CASE("property: phrases are ADJ/NOUN runs ending in a noun, contiguous in the caption") {
  const auto& lex = bundled();
  const std::vector<std::string> words{"a", "the", "red", "big", "wooden", "dog", "cat", "table", "on", "near",
                                       "riding", "sits", "and", "two", "bicycle", "man", "plastic", "glass",
                                       "bottles", "quickly", "famous", "kites", "of", "cluster", "apples"};
  const std::vector<std::string> puncts{"", "", "", ",", ".", "!", ";"};
  std::mt19937 rng(42);
  for (int trial = 0; trial < 500; ++trial) {
    std::string caption;
    std::vector<std::string> norm_tokens;
    const int n = std::uniform_int_distribution<int>(0, 14)(rng);
    for (int i = 0; i < n; ++i) {
      const auto& w = words[std::uniform_int_distribution<std::size_t>(0, words.size() - 1)(rng)];
      caption += (i ? " " : "") + w + puncts[std::uniform_int_distribution<std::size_t>(0, puncts.size() - 1)(rng)];
      norm_tokens.push_back(normalize_name(w));
    }
    CAPTURE(caption);
    const auto set = extract({"x", caption, ""}, lex);
    const auto again = extract({"x", caption, ""}, lex);
    CHECK(set.phrases == again.phrases);

    std::vector<std::string> sorted = set.phrases;
    std::sort(sorted.begin(), sorted.end());
    CHECK(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end());

    for (const auto& p : set.phrases) {
      REQUIRE_FALSE(p.empty());
      CHECK(p.front() != ' ');
      CHECK(p.back() != ' ');
      std::vector<std::string> parts;
      for (std::size_t s = 0, e; s <= p.size(); s = e + 1) {
        e = p.find(' ', s);
        if (e == std::string::npos) e = p.size();
        parts.push_back(p.substr(s, e - s));
      }
      CHECK(parts.size() <= kMaxPhraseTokens);
      for (const auto& part : parts) {
        const auto t = tag_token(part, lex);
        CHECK((t == PosTag::kAdj || t == PosTag::kNoun));
      }
      CHECK(tag_token(parts.back(), lex) == PosTag::kNoun);
      const auto it = std::search(norm_tokens.begin(), norm_tokens.end(), parts.begin(), parts.end());
      CHECK(it != norm_tokens.end());
    }
  }
}

TEST_CASE("property: monotone under sentence concatenation") {
  const auto& lex = bundled();
  const std::vector<std::string> sentences{
      "A man riding a red bicycle.", "Plastic containers on a shelf!", "A cluster of red apples.",
      "Two big dogs near the wooden table.", "The cat sleeps on a soft pillow?", "Glass bottles and cans.",
      "Kites over the sandy beach."};
  for (const auto& a : sentences) {
    for (const auto& b : sentences) {
      const auto pa = phrases_of(a, lex);
      for (const auto& joined : {a + " " + b, a + ". " + b}) {
        const auto pab = phrases_of(joined, lex);
        for (const auto& p : pa) {
          CAPTURE(joined);
          CHECK(std::find(pab.begin(), pab.end(), p) != pab.end());
        }
      }
    }
  }
}
