// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <set>

#include "oracles/geometry.hpp"
#include "support/random_data.hpp"
#include "vprompt/core/errors.hpp"
#include "vprompt/data/answer.hpp"
#include "vprompt/data/augment.hpp"
#include "vprompt/data/coco.hpp"
#include "vprompt/data/convert.hpp"
#include "vprompt/data/record.hpp"
#include "vprompt/data/synthetic.hpp"
#include "vprompt/vision/image.hpp"

using namespace vprompt;
using namespace vprompt::data;
using nlohmann::json;

namespace {

std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "vprompt_test_data" / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

AnnotationSource detection(int w, int h, std::vector<BoxAnnotation> boxes) {
  AnnotationSource s;
  s.kind = SourceKind::Detection;
  s.image = "scene.png";
  s.width = w;
  s.height = h;
  s.boxes = std::move(boxes);
  return s;
}

Mask rect_mask(int w, int h, int x1, int y1, int x2, int y2) {
  Mask m(w, h);
  for (int y = y1; y < y2; ++y) {
    for (int x = x1; x < x2; ++x) m.set(x, y);
  }
  return m;
}

std::vector<unsigned char> bits_of(const Mask& m) { return {m.bits.begin(), m.bits.end()}; }

json coco_doc() {
  return json::parse(R"({
    "images": [{"id": 1, "file_name": "a.jpg", "width": 100, "height": 80},
               {"id": 2, "file_name": "b.jpg", "width": 8, "height": 8}],
    "categories": [{"id": 3, "name": "airplane"}, {"id": 4, "name": "storage tank"}],
    "annotations": [
      {"id": 10, "image_id": 1, "category_id": 3, "bbox": [10, 10, 40, 40],
       "segmentation": [[10, 10, 50, 10, 50, 50, 10, 50]]},
      {"id": 11, "image_id": 1, "category_id": 4, "bbox": [59.6, 0.4, 20.2, 9.5],
       "segmentation": {"counts": [5, 3, 7992], "size": [80, 100]}},
      {"id": 12, "image_id": 2, "category_id": 4, "bbox": [0, 0, 4, 4],
       "segmentation": [[0, 0, 4, 0, 0, 4]]}
    ]})");
}

std::string error_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const std::exception& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("classification and caption sources") {
  AnnotationSource s;
  s.kind = SourceKind::Classification;
  s.image = "airport.png";
  s.width = 512;
  s.height = 512;
  s.label = "airport";
  const auto records = from_classification_or_caption(s);
  REQUIRE(records.size() == 1);
  const auto& r = records[0];
  CHECK(r.task == Task::SceneClassification);
  CHECK(r.level == prompt::Level::Image);
  REQUIRE(r.prompts.size() == 1);
  CHECK(r.prompts[0].kind == prompt::PromptKind::ImageLevel);
  CHECK(r.prompts[0].coords == std::array<int, 4>{0, 0, 512, 512});
  CHECK(r.answer == "<Region 1>: airport");
  CHECK(r.instruction == "Please identify the object category of each marked region in the image");

  s.kind = SourceKind::Caption;
  s.captions = {"two planes on the apron", "an airport\nat  noon"};
  const auto caps = from_classification_or_caption(s);
  REQUIRE(caps.size() == 2);
  CHECK(caps[0].answer == "<Region 1>: two planes on the apron");
  CHECK(caps[1].answer == "<Region 1>: an airport at noon");
  CHECK(caps[0].instruction == "Please provide a detailed description of the <Region 1> in the image");

  s.captions = {""};
  CHECK_THROWS_AS(from_classification_or_caption(s), ValidationError);
  s.captions.clear();
  CHECK_THROWS_AS(from_classification_or_caption(s), ValidationError);
  s.kind = SourceKind::Classification;
  s.label = "  ";
  CHECK_THROWS_AS(from_classification_or_caption(s), ValidationError);
}

TEST_CASE("detection sources") {
  auto s = detection(100, 100, {{{10, 10, 50, 50}, "airplane"}, {{60, 60, 90, 90}, "vehicle"}});
  const auto records = from_detection(s);
  REQUIRE(records.size() == 1);
  CHECK(records[0].answer == "<Region 1>: airplane\n<Region 2>: vehicle\n'bbox':[10,10,50,50],[60,60,90,90]");
  CHECK(records[0].instruction == "Please identify the category of each marked region in the image");
  CHECK(records[0].prompts[1].mark == 2);

  const auto full = from_detection(detection(64, 64, {{{0, 0, 64, 64}, "harbor"}}));
  CHECK(full[0].level == prompt::Level::Region);
  CHECK(full[0].prompts[0].kind == prompt::PromptKind::Box);

  const auto cap = from_detection(s, Task::RegionCaption);
  CHECK(cap[0].instruction == "Please provide the brief caption of each marked region in the image");

  std::vector<BoxAnnotation> many;
  for (int i = 0; i < 33; ++i) many.push_back({{i, 0, i + 1, 1}, "x"});
  CHECK_THROWS_AS(from_detection(detection(40, 40, many)), ValidationError);
  many.pop_back();
  CHECK(from_detection(detection(40, 40, many))[0].prompts.size() == 32);
  CHECK_THROWS_AS(from_detection(detection(40, 40, {})), ValidationError);
  CHECK_THROWS_AS(from_detection(detection(40, 40, {{{0, 0, 41, 10}, "x"}})), ValidationError);
  CHECK_THROWS_AS(from_detection(detection(40, 40, {{{5, 5, 5, 10}, "x"}})), ValidationError);
  CHECK_THROWS_AS(from_detection(s, Task::ImageCaption), ValidationError);
}

TEST_CASE("representative points") {
  CHECK(representative_point(rect_mask(10, 10, 0, 0, 10, 10)) == Point{4, 4});
  CHECK(representative_point(rect_mask(12, 12, 7, 3, 8, 4)) == Point{7, 3});
  CHECK_THROWS_AS(representative_point(Mask(5, 5)), ValidationError);

  AnnotationSource s;
  s.kind = SourceKind::InstanceSeg;
  s.image = "x.png";
  s.width = 10;
  s.height = 10;
  s.masks = {{rect_mask(10, 10, 0, 0, 10, 10), "ship"}, {rect_mask(10, 10, 7, 3, 8, 4), "tank"}};
  const auto r = from_instance_seg(s);
  CHECK(r[0].answer == "<Mark 1>: ship\n<Mark 2>: tank\n'points':[4,4],[7,3]");
  CHECK(r[0].instruction == "Please identify the category of each marked point in the image");
  s.masks.push_back({Mask(10, 10), "empty"});
  CHECK_THROWS_AS(from_instance_seg(s), ValidationError);
}

TEST_CASE("distance transform matches brute force on random masks") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 150; ++trial) {
    const int w = testdata::uniform(rng, 1, 32), h = testdata::uniform(rng, 1, 32);
    const Mask m = testdata::random_mask(rng, w, h);
    const auto dist = squared_distance_to_background(m);
    const auto bits = bits_of(m);
    long long best = -1;
    Point expected;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const long long d = oracle::brute_sq_distance(bits, w, h, x, y);
        REQUIRE(dist[static_cast<std::size_t>(y) * w + x] == d);
        if (m.at(x, y) && d > best) {
          best = d;
          expected = {x, y};
        }
      }
    }
    const Point p = representative_point(m);
    CHECK(m.at(p.x, p.y));
    CHECK(p == expected);
  }
}

TEST_CASE("semantic segmentation sampling") {
  AnnotationSource s;
  s.kind = SourceKind::SemanticSeg;
  s.image = "seg.png";
  s.width = 64;
  s.height = 64;
  s.label_map.width = 64;
  s.label_map.height = 64;
  for (int i = 0; i < 64 * 64; ++i) s.label_map.labels.push_back((i % 64) / 16);

  const auto points = sample_semantic_points(s.label_map, 32, 1, 5, 255);
  REQUIRE(points.size() == 1024);
  for (std::size_t k = 0; k < points.size(); ++k) {
    const int i = static_cast<int>(k / 32), j = static_cast<int>(k % 32);
    CHECK(points[k].point.x / 2 == j);
    CHECK(points[k].point.y / 2 == i);
    CHECK(points[k].label == s.label_map.at(points[k].point.x, points[k].point.y));
  }

  const auto records = from_semantic_seg(s, 32, 1, 5);
  REQUIRE(records.size() == 32);
  std::size_t total = 0;
  for (const auto& r : records) {
    CHECK(r.prompts.size() <= 32);
    total += r.prompts.size();
    const auto parsed = parse_answer(r.answer, r.task);
    for (std::size_t i = 0; i < r.prompts.size(); ++i) {
      CHECK(parsed.labels[i].second == std::to_string(s.label_map.at(r.prompts[i].x(), r.prompts[i].y())));
    }
  }
  CHECK(total == 1024);
  CHECK(from_semantic_seg(s, 32, 1, 5) == records);
  CHECK(from_semantic_seg(s, 32, 1, 6) != records);

  // Grid larger than the map shrinks to the map size.
  vision::LabelMap small{3, 2, {1, 1, 1, 1, 1, 1}};
  const auto all = sample_semantic_points(small, 32, 4, 1, 255);
  CHECK(all.size() == 6);
  for (const auto& p : all) CHECK(p.label == 1);

  s.label_names = {{0, "road"}, {1, "water"}, {2, "building"}};
  CHECK_THROWS_AS(from_semantic_seg(s, 8, 1, 1), ValidationError);
  s.label_names[3] = "tree";
  const auto named = from_semantic_seg(s, 4, 1, 1);
  CHECK(named[0].answer.find("water") != std::string::npos);

  vision::LabelMap ignored{4, 4, std::vector<int>(16, 255)};
  s.width = s.height = 4;
  s.label_map = ignored;
  CHECK_THROWS_AS(from_semantic_seg(s, 2, 1, 1), ValidationError);
  CHECK_THROWS_AS(sample_semantic_points(ignored, 0, 1, 1, 255), ValidationError);
  CHECK_THROWS_AS(sample_semantic_points(ignored, 2, 0, 1, 255), ValidationError);

  AnnotationSource bad = s;
  bad.width = 5;
  CHECK_THROWS_AS(from_semantic_seg(bad, 2, 1, 1), ValidationError);
}

TEST_CASE("answer grammar") {
  const auto a = parse_answer("<Mark 1>: ship\n'points':[5,9]", Task::ReferringClassificationPoint);
  REQUIRE(a.labels.size() == 1);
  CHECK(a.labels[0] == std::pair<int, std::string>{1, "ship"});
  CHECK(a.coords == std::vector<std::vector<int>>{{5, 9}});

  const std::string truncated = "<Region 1>: plane\n'bbox':[1,2,3";
  try {
    parse_answer(truncated, Task::ReferringClassificationBox);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.offset() == truncated.size());
  }
  try {
    parse_answer("<Region 1>: plane\n<Mark 2>: car", Task::RegionCaption);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.offset() == 19);
  }
  CHECK_THROWS_AS(parse_answer("", Task::SceneClassification), ParseError);
  CHECK_THROWS_AS(parse_answer("<Region 33>: x", Task::SceneClassification), ParseError);
  CHECK_THROWS_AS(parse_answer("<Region 1>: x\n'bbox':[1,2,3,4]", Task::SceneClassification), ParseError);
  CHECK_THROWS_AS(parse_answer("<Region 1>: x\n'bbox':[1,2,3,4],[5,6,7,8]", Task::RegionCaption), ParseError);
  CHECK_THROWS_AS(parse_answer("<Region 1>:  x\n'bbox':[1,2,3,4]", Task::RegionCaption), ParseError);
  CHECK_THROWS_AS(parse_answer("free text", Task::Relationship), ValidationError);

  CHECK(mark_references("The <Region 2> is left of <Region 10>; <Mark 3> <Region x> <Region 4") ==
        std::vector<std::pair<std::string, int>>{{"Region", 2}, {"Region", 10}, {"Mark", 3}});

  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const auto r = testdata::random_record(rng);
    REQUIRE_NOTHROW(r.validate());
    std::vector<std::string> labels;
    for (const auto& l : parse_answer(r.answer, r.task).labels) labels.push_back(l.second);
    const Answer expected = answer_for(r.task, r.prompts, labels);
    CHECK(render_answer(parse_answer(r.answer, r.task)) == r.answer);
    CHECK(parse_answer(render_answer(expected), r.task) == expected);
    CHECK(record_from_json(json::parse(to_json(r).dump()), "t") == r);
  }
}

TEST_CASE("record invariants") {
  auto r = from_detection(detection(100, 100, {{{10, 10, 50, 50}, "airplane"}, {{60, 60, 90, 90}, "vehicle"}}))[0];
  REQUIRE_NOTHROW(r.validate());
  auto bad = r;
  bad.prompts[1].mark = 3;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = r;
  bad.level = prompt::Level::Point;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = r;
  bad.answer = "<Region 1>: airplane\n<Region 2>: vehicle\n'bbox':[10,10,50,50],[60,60,90,91]";
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = r;
  std::swap(bad.prompts[0], bad.prompts[1]);
  CHECK_THROWS_AS(bad.validate(), ValidationError);

  InstructionRecord rel = r;
  rel.task = Task::Relationship;
  rel.instruction = instruction_for(Task::Relationship);
  rel.answer = "<Region 1> is to the left of <Region 2>.";
  CHECK_NOTHROW(rel.validate());
  rel.answer = "<Region 1> is to the left of <Mark 2>.";
  CHECK_THROWS_AS(rel.validate(), ValidationError);
  rel.answer = "<Region 1> is alone.";
  CHECK_THROWS_AS(rel.validate(), ValidationError);
}

TEST_CASE("JSONL round trip and diagnostics") {
  const auto dir = temp_dir("jsonl");
  std::mt19937_64 rng(9);
  std::vector<InstructionRecord> records;
  for (int i = 0; i < 20; ++i) records.push_back(testdata::random_record(rng));
  write_jsonl(records, dir / "out.jsonl");
  CHECK(read_jsonl(dir / "out.jsonl") == records);

  {
    std::ofstream os(dir / "bad.jsonl");
    os << to_json(records[0]).dump() << "\n\n{\"image\": 3}\n";
  }
  const std::string msg = error_of([&] { read_jsonl(dir / "bad.jsonl"); });
  CHECK(msg.find("bad.jsonl:3") != std::string::npos);
  CHECK_THROWS_AS(read_jsonl(dir / "missing.jsonl"), IoError);
  {
    std::ofstream os(dir / "broken.jsonl");
    os << "{not json\n";
  }
  CHECK_THROWS_AS(read_jsonl(dir / "broken.jsonl"), ValidationError);

  auto invalid = records;
  invalid[0].answer = "nonsense";
  CHECK_THROWS_AS(write_jsonl(invalid, dir / "never.jsonl"), ValidationError);
  CHECK(resolve_image(records[0], dir / "out.jsonl") == dir / records[0].image);
}

TEST_CASE("COCO-style ingestion") {
  const auto sources = parse_coco_style(coco_doc(), SourceKind::Detection, "/data");
  REQUIRE(sources.size() == 2);
  CHECK(sources[0].image == "/data/a.jpg");
  CHECK(sources[0].boxes[0].box == std::array<int, 4>{10, 10, 50, 50});
  CHECK(sources[0].boxes[0].label == "airplane");
  CHECK(sources[0].boxes[1].box == std::array<int, 4>{60, 0, 80, 10});
  CHECK(sources[0].boxes[1].label == "storage tank");

  const auto inst = parse_coco_style(coco_doc(), SourceKind::InstanceSeg, "/data");
  REQUIRE(inst.size() == 2);
  CHECK(inst[0].masks[0].mask.count() == 40 * 40);
  // Column-major RLE: 5 background pixels, then 3 in column 0 rows 5..7.
  const Mask& rle = inst[0].masks[1].mask;
  CHECK(rle.count() == 3);
  CHECK(rle.at(0, 5));
  CHECK(rle.at(0, 7));
  CHECK(inst[1].masks[0].mask.count() == 6);

  auto doc = coco_doc();
  doc["annotations"][1]["image_id"] = 7;
  CHECK(error_of([&] { parse_coco_style(doc, SourceKind::Detection, "."); }) ==
        "$.annotations[1].image_id: unknown image id 7");
  doc = coco_doc();
  doc["annotations"][2]["bbox"] = json::array({1, 2, 3});
  CHECK(error_of([&] { parse_coco_style(doc, SourceKind::Detection, "."); }) ==
        "$.annotations[2].bbox: expected 4 numbers");
  doc = coco_doc();
  doc["annotations"][0]["category_id"] = 99;
  CHECK(error_of([&] { parse_coco_style(doc, SourceKind::Detection, "."); }).find("$.annotations[0].category_id") == 0);
  doc = coco_doc();
  doc["images"][0].erase("width");
  CHECK(error_of([&] { parse_coco_style(doc, SourceKind::Detection, "."); }) == "$.images[0]: missing field 'width'");
  doc = coco_doc();
  doc["annotations"][0]["bbox"] = json::array({90, 10, 40, 40});
  CHECK(error_of([&] { parse_coco_style(doc, SourceKind::Detection, "."); }).find("$.annotations[0].bbox") == 0);
  CHECK_THROWS_AS(parse_coco_style(json::array(), SourceKind::Detection, "."), ValidationError);
  CHECK_THROWS_AS(ingest_coco_style("/nonexistent/coco.json", SourceKind::Detection), IoError);

  json caps = json::parse(R"({"images": [{"id": 5, "file_name": "c.jpg", "width": 4, "height": 4}],
    "annotations": [{"image_id": 5, "caption": "a farm"}, {"image_id": 5, "caption": "green fields"}]})");
  const auto caption_sources = parse_coco_style(caps, SourceKind::Caption, "d");
  REQUIRE(caption_sources.size() == 1);
  CHECK(caption_sources[0].captions == std::vector<std::string>{"a farm", "green fields"});
  CHECK(from_classification_or_caption(caption_sources[0]).size() == 2);
}

TEST_CASE("semantic label maps from files") {
  const auto dir = temp_dir("coco_sem");
  vision::LabelMap map{4, 2, {0, 1, 1, 255, 2, 2, 0, 0}};
  vision::save_pgm(map, dir / "map.pgm");
  std::ofstream(dir / "coco.json") << R"({"images": [{"id": 1, "file_name": "img.ppm", "width": 4, "height": 2,
    "label_map": "map.pgm"}], "categories": [{"id": 0, "name": "road"}, {"id": 1, "name": "water"},
    {"id": 2, "name": "roof"}]})";
  const auto sources = ingest_coco_style(dir / "coco.json", SourceKind::SemanticSeg);
  REQUIRE(sources.size() == 1);
  CHECK(sources[0].label_map.labels == map.labels);
  CHECK(sources[0].label_names.at(2) == "roof");
  const auto records = convert(sources[0], 2, 4, 0);
  for (const auto& r : records) {
    const auto parsed = parse_answer(r.answer, r.task);
    for (std::size_t i = 0; i < r.prompts.size(); ++i) {
      const int label = map.at(r.prompts[i].x(), r.prompts[i].y());
      CHECK(label != 255);
      CHECK(parsed.labels[i].second == sources[0].label_names.at(label));
    }
  }
}

TEST_CASE("polygon rasterization matches point-in-polygon") {
  Mask tri(8, 8);
  rasterize_polygon({0, 0, 4, 0, 0, 4}, tri);
  CHECK(tri.count() == 6);
  for (int y = 0; y < 8; ++y) {
    for (int x = 0; x < 8; ++x) CHECK(tri.at(x, y) == oracle::pnpoly({0, 4, 0}, {0, 0, 4}, x + 0.5, y + 0.5));
  }
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> coord(-2.0, 18.0);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = testdata::uniform(rng, 3, 8);
    std::vector<double> xy, xs, ys;
    for (int i = 0; i < n; ++i) {
      xs.push_back(trial % 2 ? std::round(coord(rng)) : coord(rng));
      ys.push_back(trial % 2 ? std::round(coord(rng)) : coord(rng));
      xy.push_back(xs.back());
      xy.push_back(ys.back());
    }
    Mask m(16, 16);
    rasterize_polygon(xy, m);
    for (int y = 0; y < 16; ++y) {
      for (int x = 0; x < 16; ++x) REQUIRE(m.at(x, y) == oracle::pnpoly(xs, ys, x + 0.5, y + 0.5));
    }
  }
  Mask m(4, 4);
  CHECK_THROWS_AS(rasterize_polygon({0, 0, 1, 1}, m), ValidationError);
}

TEST_CASE("randomized conversions satisfy record invariants") {
  std::mt19937_64 rng(77);
  for (std::uint64_t id = 0; id < 200; ++id) {
    const auto src = testdata::random_source(rng, id);
    std::vector<InstructionRecord> records;
    try {
      records = convert(src, 8, 2, 1234);
    } catch (const ValidationError&) {
      // Only a semantic map whose samples are all ignored may be rejected.
      REQUIRE(src.kind == SourceKind::SemanticSeg);
      const auto pts = sample_semantic_points(src.label_map, 8, 2, splitmix64(1234 ^ id), src.ignore_label);
      CHECK(pts.empty());
      continue;
    }
    REQUIRE(!records.empty());
    for (const auto& r : records) CHECK_NOTHROW(r.validate());
    CHECK(convert(src, 8, 2, 1234) == records);
  }
}

TEST_CASE("augmentation stub") {
  StubAugmenter stub;
  CHECK(spatial_relation({0, 0, 10, 10}, {50, 0, 60, 10}) == "to the left of");
  CHECK(spatial_relation({50, 0, 60, 10}, {0, 0, 10, 10}) == "to the right of");
  CHECK(spatial_relation({0, 0, 10, 10}, {0, 50, 10, 60}) == "above");
  CHECK(spatial_relation({0, 50, 10, 60}, {0, 0, 10, 10}) == "below");

  const auto base = from_detection(detection(100, 100, {{{5, 40, 25, 60}, "airplane"}, {{70, 40, 95, 60}, "vehicle"}}));
  const auto out = augment_captions(base, stub);
  CHECK(out.errors.empty());
  REQUIRE(out.records.size() == 2);
  CHECK(out.records[0].task == Task::Relationship);
  CHECK(out.records[0].answer == "The airplane <Region 1> is to the left of the vehicle <Region 2>.");
  CHECK(out.records[1].task == Task::GroundedCaption);
  CHECK(out.records[1].answer ==
        "<Region 1> shows an airplane in the middle left of the image. <Region 2> shows a vehicle in the middle "
        "right of the image.");
  CHECK(augment_captions(base, stub).records == out.records);
  CHECK(augment_captions({}, stub).records.empty());

  // A single region cannot have a relationship; the grounded record still comes through.
  auto mixed = base;
  mixed.push_back(from_detection(detection(100, 100, {{{0, 0, 10, 10}, "ship"}}))[0]);
  const auto partial = augment_captions(mixed, stub);
  CHECK(partial.records.size() == 3);
  REQUIRE(partial.errors.size() == 1);
  CHECK(partial.errors[0].find("record 1 (relationship)") == 0);
}

TEST_CASE("synthetic corpus") {
  const auto dir = temp_dir("synthetic");
  const auto records = overfit_corpus(dir, 4);
  REQUIRE(records.size() == 8);
  std::multiset<Task> tasks;
  for (const auto& r : records) {
    tasks.insert(r.task);
    CHECK_NOTHROW(r.validate());
    const auto image = vision::load_image(dir / r.image);
    CHECK(image.width == 32);
    CHECK(r.prompts.size() == 1);
  }
  CHECK(tasks.count(Task::SceneClassification) == 2);
  CHECK(tasks.count(Task::ReferringClassificationPoint) == 2);
  CHECK(overfit_corpus(temp_dir("synthetic2"), 4) == records);

  const auto scene = synthetic_scene(32, 3, 8);
  CHECK(!scene.objects.empty());
  const auto caption = scene_caption(scene);
  CHECK(caption.find(scene.background) != std::string::npos);
  for (const auto& o : scene.objects) CHECK(caption.find(o.label) != std::string::npos);
  CHECK_THROWS_AS(synthetic_record(scene, Task::Relationship, "x.ppm"), ValidationError);
  CHECK_THROWS_AS(synthetic_scene(4, 1, 0), ValidationError);
}
