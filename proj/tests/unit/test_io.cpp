#include <doctest.h>

#include "test_util.hpp"
#include "vocada/error.hpp"
#include "vocada/io.hpp"

using namespace vocada;
using nlohmann::json;

TEST_CASE("vocabulary file round trip") {
  testutil::TempDir dir;
  Vocabulary v{"demo", {{1, "TV", {"Television"}}, {2, "Couch", {}}}};
  testutil::write_file(dir / "v.json", to_json(v).dump());
  const auto back = load_vocabulary(dir / "v.json");
  CHECK(back.name == "demo");
  REQUIRE(back.classes.size() == 2);
  CHECK(back.classes[0].synonyms == std::vector<std::string>{"Television"});
  CHECK(back.classes[1].synonyms.empty());
}

TEST_CASE("invalid vocabulary reports all violations") {
  testutil::TempDir dir;
  testutil::write_file(dir / "v.json",
                       R"({"classes":[{"id":1,"name":"TV","synonyms":["Television"]},{"id":2,"name":"Television"},)"
                       R"({"id":2,"name":"Dog"}]})");
  try {
    load_vocabulary(dir / "v.json");
    FAIL("expected DataError");
  } catch (const DataError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("television") != std::string::npos);
    CHECK(msg.find("2") != std::string::npos);
  }
  testutil::write_file(dir / "bad.json", "{\"classes\": [{\"name\": 3}]}");
  CHECK_THROWS_AS(load_vocabulary(dir / "bad.json"), DataError);
}

TEST_CASE("record serialization is compact with sorted keys") {
  CHECK(to_json(NounPhraseSet{"i", {"red apples", "cluster"}}).dump() ==
        R"({"image_id":"i","phrases":["red apples","cluster"]})");
  CHECK(to_json(AdaptedVocabulary{"i", {3, 1}, SelectorKind::kEmbedTopK, true}).dump() ==
        R"({"class_ids":[1,3],"fallback_used":true,"image_id":"i","selector":"embed-topk"})");
  CHECK(to_json(Detection{"i", {1, 2, 3, 4}, 7, 0.5}).dump() ==
        R"({"box":[1.0,2.0,3.0,4.0],"class_id":7,"image_id":"i","score":0.5})");
  CHECK(to_json(CaptionRecord{"i", "A cat.", "file"}).dump() == R"({"caption":"A cat.","image_id":"i","source":"file"})");
}

TEST_CASE("JSONL loaders") {
  testutil::TempDir dir;
  testutil::write_file(dir / "c.jsonl", "{\"image_id\": 7, \"caption\": \"a\"}\n\n{\"image_id\": \"b\", \"caption\": \"\"}\r\n");
  const auto caps = load_captions(dir / "c.jsonl");
  REQUIRE(caps.size() == 2);
  CHECK(caps[0].image_id == "7");
  CHECK(caps[1].caption.empty());

  testutil::write_file(dir / "dup.jsonl", "{\"image_id\": \"a\", \"caption\": \"x\"}\n{\"image_id\": \"a\", \"caption\": \"y\"}\n");
  try {
    load_captions(dir / "dup.jsonl");
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("'a'") != std::string::npos);
  }

  testutil::write_file(dir / "broken.jsonl", "{\"image_id\": \"a\", \"caption\": \"x\"}\n{not json\n");
  try {
    load_captions(dir / "broken.jsonl");
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find(":2:") != std::string::npos);
  }

  testutil::write_file(dir / "n.jsonl", "{\"image_id\": \"a\", \"phrases\": [\"Red Apples\"]}\n");
  CHECK_THROWS_AS(load_nouns(dir / "n.jsonl"), DataError);
  testutil::write_file(dir / "n2.jsonl", "{\"image_id\": \"a\", \"phrases\": [\"x\", \"x\"]}\n");
  CHECK_THROWS_AS(load_nouns(dir / "n2.jsonl"), DataError);

  testutil::write_file(dir / "a.jsonl", "{\"image_id\": \"a\", \"class_ids\": [2, 1], \"selector\": \"oracle\"}\n");
  const auto ad = load_adapted(dir / "a.jsonl");
  CHECK(ad.at(0).class_ids == std::set<ClassId>{1, 2});
  CHECK(ad.at(0).selector == SelectorKind::kOracle);
  testutil::write_file(dir / "a2.jsonl", "{\"image_id\": \"a\", \"class_ids\": [1], \"selector\": \"magic\"}\n");
  CHECK_THROWS_AS(load_adapted(dir / "a2.jsonl"), DataError);

  testutil::write_file(dir / "d.jsonl", "{\"image_id\":\"a\",\"box\":[0,0,1,1],\"class_id\":1,\"score\":0.5}\n");
  CHECK(load_detections(dir / "d.jsonl").at(0).box == Box{0, 0, 1, 1});
  testutil::write_file(dir / "empty.jsonl", "");
  CHECK(load_detections(dir / "empty.jsonl").empty());
  CHECK_THROWS_AS(load_detections(dir / "absent.jsonl"), DataError);
}

TEST_CASE("write_jsonl writes one object per line") {
  testutil::TempDir dir;
  write_jsonl(dir / "o.jsonl", {json{{"b", 1}, {"a", "\xC3\xA9"}}, json{{"x", nullptr}}});
  CHECK(testutil::read_file(dir / "o.jsonl") == "{\"a\":\"\xC3\xA9\",\"b\":1}\n{\"x\":null}\n");
  write_jsonl(dir / "e.jsonl", {});
  CHECK(testutil::read_file(dir / "e.jsonl").empty());
}

TEST_CASE("groundtruth loading") {
  const auto gt = load_groundtruth(testutil::fixtures() / "pipeline" / "groundtruth.json");
  CHECK(gt.images.size() == 6);
  CHECK(gt.boxes.size() == 9);
  CHECK(gt.boxes[0].box == Box{100, 100, 200, 400});
  CHECK(gt.find_image("img3")->width == 640);
  CHECK(gt.boxes_for("img3").size() == 2);
  CHECK(gt.find_image("nope") == nullptr);
  CHECK(gt.categories.at(5) == "curling");

  testutil::TempDir dir;
  testutil::write_file(dir / "g.json",
                       R"({"images":[{"id":1,"width":10,"height":10}],"annotations":[{"image_id":2,"category_id":1,"bbox":[0,0,1,1]}]})");
  CHECK_THROWS_AS(load_groundtruth(dir / "g.json"), DataError);
  testutil::write_file(dir / "g2.json",
                       R"({"images":[{"id":1,"width":10,"height":10}],"annotations":[{"image_id":1,"category_id":1,"bbox":[0,0,0,1]}]})");
  CHECK_THROWS_AS(load_groundtruth(dir / "g2.json"), DataError);
}

TEST_CASE("proposals are clamped to image bounds") {
  const auto gt = load_groundtruth(testutil::fixtures() / "pipeline" / "groundtruth.json");
  const auto set = load_proposals(testutil::fixtures() / "pipeline" / "proposals.jsonl", &gt);
  CHECK(set.images.size() == 6);
  CHECK(set.clamped == 1);
  const auto& last = set.images.back().proposals.back();
  CHECK(last.box == Box{0, 400, 200, 480});
  CHECK(last.objectness == doctest::Approx(0.1));

  const auto raw = load_proposals(testutil::fixtures() / "pipeline" / "proposals.jsonl");
  CHECK(raw.clamped == 0);
  CHECK(raw.images.back().proposals.back().box.x1 == -20);

  testutil::TempDir dir;
  testutil::write_file(dir / "p.jsonl", R"({"image_id":"a","boxes":[[0,0,1,1]],"embedding_keys":[]})" "\n");
  CHECK_THROWS_AS(load_proposals(dir / "p.jsonl"), DataError);
  testutil::write_file(dir / "p2.jsonl", R"({"image_id":"a","boxes":[[0,0,1,1]],"embedding_keys":["k"],"objectness":[2]})" "\n");
  CHECK_THROWS_AS(load_proposals(dir / "p2.jsonl"), DataError);
}

TEST_CASE("groups") {
  const auto g = parse_groups(json{{"1", "base"}, {"4", "novel"}});
  CHECK(g.at(1) == ClassGroup::kBase);
  CHECK(g.at(4) == ClassGroup::kNovel);
  CHECK_THROWS_AS(parse_groups(json{{"1", "rare"}}), DataError);
  CHECK_THROWS_AS(parse_groups(json{{"one", "base"}}), DataError);
}

TEST_CASE("report serialization") {
  EvalReport r;
  r.thresholds = {0.5, 0.75};
  r.ap_per_class = {{1, {1.0, 0.5}}};
  r.ap50_all = 1.0;
  r.map_all = 0.75;
  Vocabulary v{"v", {{1, "cat", {}}}};
  const auto j = report_to_json(r, v, {{1, ClassGroup::kBase}});
  CHECK(j.at("ap50_all") == 1.0);
  CHECK(j.at("ap50_novel").is_null());
  CHECK_FALSE(j.contains("vocab_precision"));
  CHECK_FALSE(j.contains("vocab_recall"));
  CHECK(j.at("per_class").at(0).at("name") == "cat");
  CHECK(j.at("per_class").at(0).at("group") == "base");

  r.vocab_precision = 0.5;
  r.vocab_recall = 1.0;
  const auto j2 = report_to_json(r, v, {});
  CHECK(j2.at("vocab_precision") == 0.5);
  const auto md = report_to_markdown(r, "oracle");
  CHECK(md.find("| oracle |") != std::string::npos);
  CHECK(md.find("Vocab precision") != std::string::npos);
  CHECK(md.find("100.0") != std::string::npos);
}
