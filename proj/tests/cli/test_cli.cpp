// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <iterator>
#include <json.hpp>
#include <set>
#include <sstream>

#include "cli/cli.hpp"
#include "vprompt/autodiff/params.hpp"
#include "vprompt/data/record.hpp"
#include "vprompt/train/trainer.hpp"
#include "vprompt/vision/image.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace vprompt;

namespace {

struct Result {
  int code = 0;
  std::string out;
  std::string err;
  json j() const { return json::parse(out); }
};

Result invoke(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  Result r;
  r.code = cli::run(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path());
  std::ofstream(p, std::ios::binary) << text;
}

fs::path root() {
  static const fs::path dir = [] {
    auto d = fs::temp_directory_path() / "vprompt_test_cli";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

const char* kSmallModel =
    R"("model": {"image_size": 16, "encoder": {"token_grid": 4}, "decoder": {"width": 16, "ffn_hidden": 24}})";

// Eight single-object records in root()/corpus.
fs::path corpus() {
  static const fs::path path = [] {
    const auto p = root() / "corpus" / "train.jsonl";
    const auto r = invoke({"build-dataset", "--synthetic", "--max-objects", "1", "--out", p.string()});
    REQUIRE(r.code == 0);
    return p;
  }();
  return path;
}

fs::path train_config(const std::string& name, const std::string& stages) {
  const auto p = root() / (name + ".json");
  write(p, std::string("{\"seed\": 0, ") + kSmallModel + R"(, "train": {"datasets": [")" + corpus().generic_string() +
               R"("], "lr": 0.01, "stages": )" + stages + "}}");
  return p;
}

// Trains the overfit configuration once.
fs::path overfit_run() {
  static const fs::path dir = [] {
    const auto cfg = train_config(
        "overfit", R"([{"stage": 1, "epochs": 100}, {"stage": 2, "epochs": 150}, {"stage": 3, "epochs": 250}])");
    const auto d = root() / "overfit_run";
    const auto r = invoke({"train", "--config", cfg.string(), "--out", d.string()});
    REQUIRE(r.code == 0);
    return d;
  }();
  return dir;
}

// COCO-style detection input with two images.
fs::path coco_detection() {
  const auto dir = root() / "coco";
  fs::create_directories(dir / "img");
  vision::save_ppm(vision::synthetic_image(40, 30, 1), dir / "img" / "a.ppm");
  vision::save_ppm(vision::synthetic_image(40, 30, 2), dir / "img" / "b.ppm");
  const json doc = {{"images",
                     {{{"id", 1}, {"file_name", "img/a.ppm"}, {"width", 40}, {"height", 30}},
                      {{"id", 2}, {"file_name", "img/b.ppm"}, {"width", 40}, {"height", 30}}}},
                    {"categories", {{{"id", 1}, {"name", "airplane"}}, {{"id", 2}, {"name", "storage tank"}}}},
                    {"annotations",
                     {{{"id", 1}, {"image_id", 1}, {"category_id", 1}, {"bbox", {2, 3, 10, 8}}},
                      {{"id", 2}, {"image_id", 1}, {"category_id", 2}, {"bbox", {20, 10, 12, 12}}},
                      {{"id", 3}, {"image_id", 2}, {"category_id", 2}, {"bbox", {5, 5, 6, 6}}}}}};
  write(dir / "det.json", doc.dump());
  return dir / "det.json";
}

// COCO-style semantic segmentation input with a label map.
fs::path coco_semantic() {
  const auto dir = root() / "coco";
  fs::create_directories(dir / "img");
  vision::save_ppm(vision::synthetic_image(24, 24, 3), dir / "img" / "s.ppm");
  vision::LabelMap map;
  map.width = 24;
  map.height = 24;
  map.labels.resize(24 * 24);
  for (int y = 0; y < 24; ++y) {
    for (int x = 0; x < 24; ++x) map.labels[static_cast<std::size_t>(y) * 24 + x] = x < 12 ? 1 : (y < 12 ? 2 : 255);
  }
  vision::save_pgm(map, dir / "img" / "s_labels.pgm");
  const json doc = {
      {"images",
       {{{"id", 7}, {"file_name", "img/s.ppm"}, {"width", 24}, {"height", 24}, {"label_map", "img/s_labels.pgm"}}}},
      {"categories", {{{"id", 1}, {"name", "farmland"}}, {{"id", 2}, {"name", "river"}}}},
      {"ignore_label", 255},
      {"annotations", json::array()}};
  write(dir / "sem.json", doc.dump());
  return dir / "sem.json";
}

// Runs `args` twice, clearing `outputs` before each run, and compares stdout
// and every output file byte for byte.
void check_rerun_identical(const std::vector<std::string>& args, const std::vector<fs::path>& outputs) {
  std::vector<std::string> first;
  std::string first_out;
  for (int run = 0; run < 2; ++run) {
    for (const auto& p : outputs) fs::remove_all(p);
    const auto r = invoke(args);
    REQUIRE(r.code == 0);
    std::vector<std::string> files;
    for (const auto& p : outputs) {
      if (fs::is_directory(p)) {
        std::set<fs::path> entries{fs::recursive_directory_iterator(p), fs::recursive_directory_iterator()};
        for (const auto& e : entries) {
          if (fs::is_regular_file(e)) files.push_back(e.lexically_relative(p).string() + "\n" + slurp(e));
        }
      } else {
        files.push_back(slurp(p));
      }
    }
    if (run == 0) {
      first = files;
      first_out = r.out;
    } else {
      CHECK(r.out == first_out);
      CHECK(files.size() == first.size());
      CHECK(files == first);
    }
  }
}

}  // namespace

TEST_CASE("build-dataset converts COCO-style detection input") {
  const auto in = coco_detection();
  const auto out = root() / "built" / "det.jsonl";
  const auto r = invoke({"build-dataset", "--in", in.string(), "--kind", "detection", "--out", out.string()});
  REQUIRE(r.code == 0);
  CHECK(r.j()["records"] == 2);
  CHECK(r.j()["per_task"]["referring_classification_box"] == 2);
  CHECK(r.err.find("wrote 2 records") != std::string::npos);
  const auto records = data::read_jsonl(out);
  REQUIRE(records.size() == 2);
  CHECK(records[0].answer == "<Region 1>: airplane\n<Region 2>: storage tank\n'bbox':[2,3,12,11],[20,10,32,22]");
  // Image paths are rewritten relative to the output file.
  CHECK(records[0].image == "../coco/img/a.ppm");
  CHECK(fs::exists(data::resolve_image(records[0], out)));

  const auto caps = invoke({"build-dataset", "--in", in.string(), "--kind", "detection", "--task", "region_caption",
                            "--out", (root() / "built" / "cap.jsonl").string()});
  REQUIRE(caps.code == 0);
  CHECK(caps.j()["per_task"]["region_caption"] == 2);

  const auto aug = invoke({"build-dataset", "--in", in.string(), "--kind", "detection", "--augment", "--out",
                           (root() / "built" / "aug.jsonl").string()});
  REQUIRE(aug.code == 0);
  CHECK(aug.j()["per_task"]["relationship"] == 1);
  CHECK(aug.j()["per_task"]["grounded_caption"] == 2);
  CHECK(aug.j()["augment_errors"].size() == 1);  // the one-box image has no pair
}

TEST_CASE("build-dataset reports malformed input with a JSON path") {
  const auto p = root() / "coco" / "bad.json";
  write(p, R"({"images": [{"id": 1, "file_name": "a.ppm", "width": 40, "height": 30}],
              "categories": [{"id": 1, "name": "airplane"}],
              "annotations": [{"id": 1, "image_id": 1, "category_id": 1, "bbox": [1, 2, 3]}]})");
  const auto r = invoke(
      {"build-dataset", "--in", p.string(), "--kind", "detection", "--out", (root() / "built" / "bad.jsonl").string()});
  CHECK(r.code == 1);
  CHECK(r.j()["error"].get<std::string>().find("$.annotations[0].bbox") != std::string::npos);

  write(p, "{not json");
  CHECK(invoke({"build-dataset", "--in", p.string(), "--kind", "detection", "--out", "x.jsonl"}).code == 1);
  CHECK(invoke({"build-dataset", "--in", (root() / "missing.json").string(), "--kind", "detection", "--out", "x.jsonl"})
            .code == 2);
  CHECK(invoke({"build-dataset", "--in", p.string(), "--kind", "mosaic", "--out", "x.jsonl"}).code == 1);
  CHECK(invoke({"build-dataset", "--kind", "detection"}).code == 1);
  CHECK(invoke({"build-dataset", "--no-such-flag"}).code == 1);
  CHECK(invoke({}).code == 1);
}

TEST_CASE("build-dataset is byte-identical under a fixed seed") {
  const auto in = coco_semantic();
  const auto out = root() / "built" / "sem.jsonl";
  const std::vector<std::string> args{"build-dataset", "--in", in.string(), "--kind",    "semantic_seg", "--grid", "4",
                                      "--seed",        "11",   "--out",     out.string()};
  check_rerun_identical(args, {out});
  const auto records = data::read_jsonl(out);
  REQUIRE(!records.empty());
  // A different seed samples different points.
  const auto first = slurp(out);
  REQUIRE(invoke({"build-dataset", "--in", in.string(), "--kind", "semantic_seg", "--grid", "4", "--seed", "12",
                  "--out", out.string()})
              .code == 0);
  CHECK(slurp(out) != first);

  const auto syn = root() / "built" / "syn" / "train.jsonl";
  check_rerun_identical({"build-dataset", "--synthetic", "--seed", "5", "--out", syn.string()}, {syn.parent_path()});
}

TEST_CASE("train writes one checkpoint per stage and keeps stage sets apart") {
  const auto cfg =
      train_config("short", R"([{"stage": 1, "epochs": 2}, {"stage": 2, "epochs": 2}, {"stage": 3, "epochs": 2}])");
  const auto dir = root() / "short_run";
  const auto r = invoke({"train", "--config", cfg.string(), "--out", dir.string()});
  REQUIRE(r.code == 0);
  for (int k = 0; k <= 3; ++k) CHECK(fs::exists(dir / ("stage" + std::to_string(k) + ".ckpt")));
  CHECK(r.j()["stage_sets_respected"] == true);
  CHECK(json::parse(slurp(dir / "train_report.json")) == r.j());

  // Independent diff of consecutive checkpoints against each stage's set.
  auto model = fusion::load_model_spec(dir / "model.json");
  for (int k = 1; k <= 3; ++k) {
    const auto changed = ad::checkpoint_diff(ad::read_checkpoint(dir / ("stage" + std::to_string(k - 1) + ".ckpt")),
                                             ad::read_checkpoint(dir / ("stage" + std::to_string(k) + ".ckpt")));
    CHECK(!changed.empty());
    std::set<std::string> allowed;
    for (auto id : train::trainable_set(*model, k)) allowed.insert(model->params().at(id).name);
    for (const auto& name : changed) CHECK(allowed.count(name) == 1);
  }

  check_rerun_identical({"train", "--config", cfg.string(), "--out", dir.string()}, {dir});
}

TEST_CASE("train rejects incomplete configurations") {
  const auto two = train_config("two", R"([{"stage": 1}, {"stage": 2}])");
  const auto r = invoke({"train", "--config", two.string(), "--out", (root() / "bad_run").string()});
  CHECK(r.code == 1);
  CHECK(r.err.find("stage 3 is missing") != std::string::npos);
  CHECK(invoke({"train", "--out", (root() / "bad_run").string()}).code == 1);
  const auto unknown = root() / "unknown.json";
  write(unknown, R"({"train": {"stages": [], "momentum": 0.9}})");
  CHECK(invoke({"train", "--config", unknown.string(), "--out", (root() / "bad_run").string()}).code == 1);
  CHECK(invoke({"train", "--config", (root() / "absent.json").string(), "--out", "x"}).code == 2);
}

TEST_CASE("eval on the overfit corpus") {
  const auto run = overfit_run();
  const auto out = root() / "eval_out";
  const auto r = invoke({"eval", "--model", run.string(), "--data", corpus().string(), "--out", out.string()});
  REQUIRE(r.code == 0);
  const auto j = r.j();
  CHECK(j["records"] == 8);
  std::map<std::string, json> by_task;
  for (const auto& rep : j["reports"]) by_task[rep["task"]] = rep["scores"];
  CHECK(by_task.at("classification")["accuracy"].get<double>() == 1.0);
  CHECK(by_task.at("referring_classification")["SS"].get<double>() == doctest::Approx(1.0));
  CHECK(by_task.at("captioning")["SPICE"] == "n/a");
  CHECK(fs::exists(out / "metrics.txt"));

  check_rerun_identical({"eval", "--model", run.string(), "--data", corpus().string(), "--out", out.string()}, {out});

  // Scoring saved predictions directly.
  const auto direct = invoke({"eval", "--predictions", (out / "predictions.jsonl").string(), "--references",
                              (out / "references.jsonl").string(), "--task", "captioning"});
  REQUIRE(direct.code == 0);
  CHECK(direct.j()["reports"][0]["task"] == "captioning");
}

TEST_CASE("eval errors") {
  const auto run = overfit_run();
  const auto empty = root() / "empty.jsonl";
  write(empty, "");
  CHECK(invoke({"eval", "--model", run.string(), "--data", empty.string()}).code == 1);
  CHECK(invoke({"eval", "--model", (root() / "nowhere").string(), "--data", corpus().string()}).code == 2);
  CHECK(invoke({"eval", "--model", run.string()}).code == 1);
  CHECK(invoke({"eval", "--predictions", empty.string()}).code == 1);
}

TEST_CASE("infer answers one instruction") {
  const auto run = overfit_run();
  const auto records = data::read_jsonl(corpus());
  const auto& rec = records[4];  // box referring classification
  const std::string image = data::resolve_image(rec, corpus()).string();
  const std::string prompts = data::prompts_to_json(rec.prompts).dump();
  const std::vector<std::string> args{"infer",     "--model", run.string(),    "--image",      image,
                                      "--prompts", prompts,   "--instruction", rec.instruction};
  const auto r = invoke(args);
  REQUIRE(r.code == 0);
  const auto j = r.j();
  CHECK(j["level"] == "region");
  CHECK(j["tokens"].size() > 0);
  for (const auto& t : j["tokens"]) CHECK(t["logprob"].get<double>() <= 0.0);
  CHECK(invoke(args).out == r.out);

  auto one = args;
  one.insert(one.end(), {"--max-len", "1"});
  const auto r1 = invoke(one);
  REQUIRE(r1.code == 0);
  CHECK(r1.j()["tokens"].size() <= 1);

  const auto prompt_file = root() / "prompts.json";
  write(prompt_file, prompts);
  const auto via_task = invoke({"infer", "--model", run.string(), "--image", image, "--prompts",
                                "@" + prompt_file.string(), "--task", data::task_name(rec.task)});
  REQUIRE(via_task.code == 0);
  CHECK(via_task.j()["answer"] == j["answer"]);

  const auto out = root() / "infer_out";
  auto with_out = args;
  with_out.insert(with_out.end(), {"--out", out.string()});
  check_rerun_identical(with_out, {out});

  CHECK(invoke({"infer", "--model", run.string(), "--image", image, "--prompts", "[{]", "--instruction", "x"}).code ==
        1);
  CHECK(invoke({"infer", "--model", run.string(), "--image", image, "--prompts",
                R"([{"kind": "box", "coords": [0, 0, 99, 99], "mark": 1}])", "--instruction", "x"})
            .code == 1);
  CHECK(invoke({"infer", "--model", run.string(), "--image", (root() / "none.ppm").string(), "--prompts", prompts,
                "--instruction", "x"})
            .code == 2);
}

TEST_CASE("gradcheck") {
  const auto out = root() / "grad_out";
  const auto r = invoke({"gradcheck", "--out", out.string()});
  REQUIRE(r.code == 0);
  CHECK(r.j()["passed"] == true);
  CHECK(r.j()["max_rel_error"].get<double>() <= 1e-4);
  CHECK(json::parse(slurp(out / "gradcheck.json")) == r.j());

  CHECK(invoke({"gradcheck", "--eps", "0"}).code == 1);
  CHECK(invoke({"gradcheck", "--eps", "-1e-5"}).code == 1);

  std::string small_cfg = (root() / "grad_small.json").string();
  write(small_cfg, std::string("{") + kSmallModel + "}");
  check_rerun_identical({"gradcheck", "--config", small_cfg, "--seed", "3", "--out", out.string()}, {out});
}

TEST_CASE("gradcheck fails on a corrupted backward rule") {
  cli::GradcheckOptions opts;
  opts.model.image_size = 16;
  opts.model.encoder.token_grid = 4;
  opts.model.decoder.width = 16;
  opts.model.decoder.ffn_hidden = 24;
  opts.coords_per_tensor = 1;
  // y = x^2 whose backward claims dy/dx = 3x.
  opts.loss_hook = [](const ad::Tensor& x) {
    auto node = std::make_shared<ad::Node>();
    node->shape = x.shape();
    node->data = {x.item() * x.item()};
    node->requires_grad = true;
    node->op = "bad_square";
    node->parents = {x.node()};
    node->backward = [](ad::Node& self) {
      auto& parent = *self.parents[0];
      parent.grad_buffer()[0] += self.grad[0] * 3.0 * parent.data[0];
    };
    return ad::Tensor(node);
  };
  const auto bad = cli::end_to_end_gradcheck(opts);
  CHECK_FALSE(bad.passed);
  CHECK(bad.max_rel_error > 1e-2);

  opts.loss_hook = {};
  CHECK(cli::end_to_end_gradcheck(opts).passed);
}
