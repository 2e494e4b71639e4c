// SPDX-License-Identifier: Apache-2.0
#include "cli/cli.hpp"

#include <CLI11.hpp>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <set>

#include "vprompt/autodiff/gradcheck.hpp"
#include "vprompt/autodiff/params.hpp"
#include "vprompt/core/errors.hpp"
#include "vprompt/data/augment.hpp"
#include "vprompt/data/coco.hpp"
#include "vprompt/data/convert.hpp"
#include "vprompt/data/record.hpp"
#include "vprompt/data/synthetic.hpp"
#include "vprompt/metrics/evaluate.hpp"
#include "vprompt/train/trainer.hpp"
#include "vprompt/vision/image.hpp"

namespace vprompt::cli {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool verbose = false;
};

void add_common(CLI::App* sub, Common& c, const std::string& out_help) {
  sub->add_option("--config", c.config, "JSON config file");
  sub->add_option("--seed", c.seed, "Run seed (default 0)");
  sub->add_option("--out", c.out, out_help);
  sub->add_flag("--verbose", c.verbose, "Progress on stderr");
}

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError(path.string() + ": invalid JSON: " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
  if (!j.is_object()) throw ValidationError(where + ": expected an object");
  for (const auto& [key, _] : j.items()) {
    if (!known.count(key)) throw ValidationError(where + ": unknown key '" + key + "'");
  }
}

// Top-level config: {"seed", "model", "dataset", "train", "eval"}.
struct Config {
  json doc = json::object();
  fs::path dir;

  const json& section(const char* name) const {
    static const json empty = json::object();
    return doc.contains(name) ? doc.at(name) : empty;
  }
};

Config load_config(const Common& c) {
  Config cfg;
  if (c.config.empty()) return cfg;
  cfg.doc = read_json_file(c.config);
  reject_unknown(cfg.doc, {"seed", "model", "dataset", "train", "eval"}, "config");
  cfg.dir = fs::path(c.config).parent_path();
  return cfg;
}

std::uint64_t run_seed(const Common& c, const Config& cfg) {
  if (c.seed) return *c.seed;
  try {
    return cfg.doc.value("seed", std::uint64_t{0});
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config.seed: ") + e.what());
  }
}

template <typename T>
T get_or(const json& section, const char* key, T fallback, const std::string& where) {
  if (!section.contains(key)) return fallback;
  try {
    return section.at(key).get<T>();
  } catch (const json::exception&) {
    throw ValidationError(where + "." + key + ": wrong type");
  }
}

fusion::ModelConfig model_config(const Config& cfg, std::uint64_t seed) {
  json m = cfg.section("model");
  if (!m.contains("seed")) m["seed"] = seed;
  return fusion::model_config_from_json(m);
}

std::string dump(const ordered_json& j) { return j.dump(2) + "\n"; }

// ---------------------------------------------------------------- build-dataset

struct BuildArgs {
  std::string in;
  std::string kind;
  std::string task;
  int grid = 32;
  int samples = 1;
  bool augment = false;
  bool synthetic = false;
  int max_objects = 2;
};

fs::path relative_to(const fs::path& image, const fs::path& dir) {
  const fs::path abs_image = fs::absolute(image).lexically_normal();
  const fs::path abs_dir = fs::absolute(dir.empty() ? fs::path(".") : dir).lexically_normal();
  fs::path rel = abs_image.lexically_relative(abs_dir);
  return rel.empty() ? abs_image : rel;
}

int cmd_build_dataset(const Common& c, BuildArgs a, CLI::App* sub, std::ostream& out, std::ostream& err) {
  if (c.out.empty()) throw ValidationError("build-dataset: --out <jsonl> is required");
  const Config cfg = load_config(c);
  const json& ds = cfg.section("dataset");
  reject_unknown(ds, {"grid", "samples_per_patch", "task", "augment", "kind"}, "config.dataset");
  if (!sub->count("--grid")) a.grid = get_or(ds, "grid", a.grid, "config.dataset");
  if (!sub->count("--samples-per-patch")) a.samples = get_or(ds, "samples_per_patch", a.samples, "config.dataset");
  if (!sub->count("--task")) a.task = get_or(ds, "task", a.task, "config.dataset");
  if (!sub->count("--augment")) a.augment = get_or(ds, "augment", a.augment, "config.dataset");
  if (!sub->count("--kind")) a.kind = get_or(ds, "kind", a.kind, "config.dataset");
  const std::uint64_t seed = run_seed(c, cfg);
  if (a.grid < 1) throw ValidationError("build-dataset: --grid must be positive");
  if (a.samples < 1) throw ValidationError("build-dataset: --samples-per-patch must be positive");

  const fs::path out_path(c.out);
  const fs::path out_dir = out_path.parent_path();
  if (!out_dir.empty()) fs::create_directories(out_dir);

  std::vector<data::InstructionRecord> records;
  std::size_t sources = 0;
  if (a.synthetic) {
    if (!a.in.empty()) throw ValidationError("build-dataset: --synthetic takes no --in");
    data::SyntheticOptions opts;
    opts.seed = seed;
    opts.max_objects = a.max_objects;
    records = data::build_synthetic_corpus(out_dir.empty() ? fs::path(".") : out_dir, opts);
    sources = records.size();
  } else {
    if (a.in.empty()) throw ValidationError("build-dataset: --in is required");
    if (a.kind.empty()) throw ValidationError("build-dataset: --kind is required");
    const data::SourceKind kind = data::parse_source_kind(a.kind);
    std::optional<data::Task> det_task;
    if (!a.task.empty()) {
      if (kind != data::SourceKind::Detection) throw ValidationError("build-dataset: --task applies to detection only");
      det_task = data::parse_task(a.task);
    }
    const auto srcs = data::ingest_coco_style(a.in, kind);
    sources = srcs.size();
    for (const auto& src : srcs) {
      const auto recs = det_task ? data::from_detection(src, *det_task) : data::convert(src, a.grid, a.samples, seed);
      records.insert(records.end(), recs.begin(), recs.end());
    }
    for (auto& r : records) r.image = relative_to(r.image, out_dir).generic_string();
  }

  std::vector<std::string> augment_errors;
  if (a.augment) {
    data::StubAugmenter stub;
    auto res = data::augment_captions(records, stub);
    records.insert(records.end(), res.records.begin(), res.records.end());
    augment_errors = std::move(res.errors);
  }
  if (records.empty()) throw ValidationError("build-dataset: no records produced");
  data::write_jsonl(records, out_path);

  ordered_json per_task = ordered_json::object();
  for (auto t : data::all_tasks()) {
    std::size_t n = 0;
    for (const auto& r : records) n += r.task == t;
    if (n) per_task[data::task_name(t)] = n;
  }
  ordered_json summary{{"output", out_path.generic_string()},
                       {"sources", sources},
                       {"records", records.size()},
                       {"per_task", per_task},
                       {"augment_errors", augment_errors}};
  out << dump(summary);
  err << "wrote " << records.size() << " records to " << out_path.string() << "\n";
  for (const auto& [task, n] : per_task.items()) err << "  " << task << ": " << n.get<std::size_t>() << "\n";
  for (const auto& e : augment_errors) err << "  augment: " << e << "\n";
  return kExitOk;
}

// ------------------------------------------------------------------------ train

struct TrainArgs {
  std::optional<int> epochs;
  std::optional<double> lr;
};

int cmd_train(const Common& c, const TrainArgs& a, std::ostream& out, std::ostream& err) {
  if (c.config.empty()) throw ValidationError("train: --config is required");
  if (c.out.empty()) throw ValidationError("train: --out <dir> is required");
  const Config cfg = load_config(c);
  const std::uint64_t seed = run_seed(c, cfg);
  const json& tr = cfg.section("train");
  static const std::set<std::string> stage_keys{"datasets", "epochs",       "batch_size", "lr",  "betas",
                                                "eps",      "weight_decay", "clip_norm",  "seed"};
  std::set<std::string> known = stage_keys;
  known.insert("stages");
  reject_unknown(tr, known, "config.train");
  if (!tr.contains("stages") || !tr["stages"].is_array()) {
    throw ValidationError("config.train.stages: expected an array of stage configs");
  }

  std::vector<train::StageConfig> stages;
  for (std::size_t i = 0; i < tr["stages"].size(); ++i) {
    json merged = json::object();
    for (const auto& [k, v] : tr.items()) {
      if (k != "stages") merged[k] = v;
    }
    if (!merged.contains("seed")) merged["seed"] = seed;
    const json& st = tr["stages"][i];
    if (!st.is_object()) throw ValidationError("config.train.stages[" + std::to_string(i) + "]: expected an object");
    for (const auto& [k, v] : st.items()) merged[k] = v;
    if (c.seed) merged["seed"] = *c.seed;
    if (a.epochs) merged["epochs"] = *a.epochs;
    if (a.lr) merged["lr"] = *a.lr;
    try {
      stages.push_back(train::stage_config_from_json(merged, cfg.dir));
    } catch (const ValidationError& e) {
      throw ValidationError("config.train.stages[" + std::to_string(i) + "]: " + e.what());
    }
  }
  std::set<int> present;
  for (const auto& s : stages) present.insert(s.stage);
  for (int k = 1; k <= 3; ++k) {
    if (!present.count(k)) throw ValidationError("config.train.stages: stage " + std::to_string(k) + " is missing");
  }

  std::vector<data::InstructionRecord> all;
  std::set<fs::path> seen;
  for (const auto& s : stages) {
    for (const auto& d : s.datasets) {
      if (!seen.insert(d).second) continue;
      auto recs = data::read_jsonl(d);
      all.insert(all.end(), recs.begin(), recs.end());
    }
  }
  fusion::Model model(model_config(cfg, seed), train::build_vocab(all));

  const fs::path dir(c.out);
  fs::create_directories(dir);
  fusion::save_model_spec(model, dir / "model.json");
  ad::save_checkpoint(model.params(), dir / "stage0.ckpt");

  train::ProgressFn progress;
  if (c.verbose) {
    progress = [&err](int stage, int epoch, double loss) {
      err << "stage " << stage << " epoch " << epoch << " loss " << loss << "\n";
    };
  }
  const auto reports = train::run_pipeline(model, stages, dir, progress);

  ordered_json stage_json = ordered_json::array();
  bool disjoint = true;
  for (const auto& rep : reports) {
    const auto before = ad::read_checkpoint(dir / ("stage" + std::to_string(rep.stage - 1) + ".ckpt"));
    const auto after = ad::read_checkpoint(dir / ("stage" + std::to_string(rep.stage) + ".ckpt"));
    const auto changed = ad::checkpoint_diff(before, after);
    std::set<std::string> allowed;
    for (auto id : train::trainable_set(model, rep.stage)) allowed.insert(model.params().at(id).name);
    std::vector<std::string> outside;
    for (const auto& name : changed) {
      if (!allowed.count(name)) outside.push_back(name);
    }
    disjoint = disjoint && outside.empty();
    ordered_json j = train::to_json(rep, model.params());
    j["checkpoint"] = "stage" + std::to_string(rep.stage) + ".ckpt";
    j["changed_parameters"] = changed.size();
    j["changed_outside_stage_set"] = outside;
    stage_json.push_back(j);
    err << "stage " << rep.stage << ": " << rep.records << " records, final loss "
        << (rep.epoch_loss.empty() ? 0.0 : rep.epoch_loss.back()) << ", masked-token accuracy " << rep.final_accuracy
        << ", " << changed.size() << " tensors changed\n";
  }
  ordered_json report{{"model", fusion::to_json(model.config())},
                      {"vocab_size", model.vocab().size()},
                      {"stages", stage_json},
                      {"stage_sets_respected", disjoint}};
  write_text(dir / "train_report.json", dump(report));
  out << dump(report);
  if (!disjoint) throw NumericError("train: a stage changed parameters outside its set");
  return kExitOk;
}

// ---------------------------------------------------------------- eval / infer

std::unique_ptr<fusion::Model> load_trained(const std::string& model_dir, const std::string& checkpoint) {
  if (model_dir.empty()) throw ValidationError("--model <dir> is required");
  auto model = fusion::load_model_spec(fs::path(model_dir) / "model.json");
  const fs::path ckpt = checkpoint.empty() ? fs::path(model_dir) / "stage3.ckpt" : fs::path(checkpoint);
  ad::load_checkpoint(model->params(), ckpt);
  return model;
}

struct EvalArgs {
  std::string model;
  std::string checkpoint;
  std::string data;
  std::string predictions;
  std::string references;
  std::string task;
  std::optional<int> max_len;
};

int max_len_of(const std::optional<int>& flag, const Config& cfg) {
  const json& ev = cfg.section("eval");
  reject_unknown(ev, {"max_len"}, "config.eval");
  const int n = flag ? *flag : get_or(ev, "max_len", 128, "config.eval");
  if (n < 1) throw ValidationError("--max-len must be positive");
  return n;
}

int cmd_eval(const Common& c, const EvalArgs& a, std::ostream& out, std::ostream& err) {
  const Config cfg = load_config(c);
  std::vector<metrics::MetricReport> reports;
  ordered_json summary;
  if (!a.predictions.empty() || !a.references.empty()) {
    if (a.predictions.empty() || a.references.empty() || a.task.empty()) {
      throw ValidationError("eval: --predictions, --references and --task go together");
    }
    reports.push_back(metrics::evaluate_run(a.predictions, a.references, a.task));
  } else {
    if (a.data.empty()) throw ValidationError("eval: --data <jsonl> is required");
    const int max_len = max_len_of(a.max_len, cfg);
    auto model = load_trained(a.model, a.checkpoint);
    const auto records = data::read_jsonl(a.data);
    if (records.empty()) throw ValidationError("eval: empty test set " + a.data);
    std::map<metrics::TaskFamily, std::pair<std::vector<metrics::TextEntry>, std::vector<metrics::TextEntry>>> groups;
    std::vector<metrics::TextEntry> all_preds, all_refs;
    std::size_t exact = 0;
    for (std::size_t i = 0; i < records.size(); ++i) {
      const auto& r = records[i];
      const auto image = vision::load_image(data::resolve_image(r, a.data));
      const auto res = model->generate(image, r.prompts, r.instruction, max_len);
      const std::string id = std::to_string(i);
      auto& g = groups[metrics::family_of(r.task)];
      g.first.push_back({id, res.text});
      g.second.push_back({id, r.answer});
      all_preds.push_back({id, res.text});
      all_refs.push_back({id, r.answer});
      exact += res.text == r.answer;
      if (c.verbose) err << "record " << i << (res.text == r.answer ? ": exact" : ": differs") << "\n";
    }
    for (const auto& [family, g] : groups) reports.push_back(metrics::evaluate(family, g.first, g.second));
    summary["records"] = records.size();
    summary["exact_answers"] = exact;
    if (!c.out.empty()) {
      fs::create_directories(c.out);
      metrics::write_text_jsonl(all_preds, fs::path(c.out) / "predictions.jsonl");
      metrics::write_text_jsonl(all_refs, fs::path(c.out) / "references.jsonl");
    }
  }
  ordered_json arr = ordered_json::array();
  std::string tables;
  for (const auto& r : reports) {
    arr.push_back(metrics::to_json(r));
    tables += metrics::format_table(r) + "\n";
  }
  summary["reports"] = arr;
  if (!c.out.empty()) {
    write_text(fs::path(c.out) / "metrics.json", dump(summary));
    write_text(fs::path(c.out) / "metrics.txt", tables);
  }
  out << dump(summary);
  err << tables;
  return kExitOk;
}

struct InferArgs {
  std::string model;
  std::string checkpoint;
  std::string image;
  std::string prompts;
  std::string instruction;
  std::string task;
  std::optional<int> max_len;
};

int cmd_infer(const Common& c, const InferArgs& a, std::ostream& out, std::ostream& err) {
  const Config cfg = load_config(c);
  if (a.image.empty()) throw ValidationError("infer: --image is required");
  if (a.prompts.empty()) throw ValidationError("infer: --prompts is required");
  if (a.instruction.empty() == a.task.empty())
    throw ValidationError("infer: give exactly one of --instruction, --task");
  const int max_len = max_len_of(a.max_len, cfg);
  json pj;
  try {
    if (a.prompts.front() == '@') {
      pj = read_json_file(a.prompts.substr(1));
    } else {
      pj = json::parse(a.prompts);
    }
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("infer: --prompts: invalid JSON: ") + e.what());
  }
  const auto prompts = data::prompts_from_json(pj, "prompts");
  const std::string instruction = a.task.empty() ? a.instruction : data::instruction_for(data::parse_task(a.task));
  auto model = load_trained(a.model, a.checkpoint);
  const auto image = vision::load_image(a.image);
  prompt::validate_prompts(prompts, image.width, image.height);
  const auto res = model->generate(image, prompts, instruction, max_len);

  ordered_json tokens = ordered_json::array();
  for (std::size_t i = 0; i < res.ids.size(); ++i) {
    tokens.push_back({{"id", res.ids[i]}, {"token", model->vocab().token(res.ids[i])}, {"logprob", res.logprobs[i]}});
  }
  ordered_json j{{"answer", res.text},         {"level", prompt::level_name(res.level)},
                 {"instruction", instruction}, {"stopped_on_eos", res.stopped_on_eos},
                 {"truncated", res.truncated}, {"tokens", tokens}};
  if (res.logprobs.size() > res.ids.size()) j["eos_logprob"] = res.logprobs.back();
  if (!c.out.empty()) write_text(fs::path(c.out) / "infer.json", dump(j));
  out << dump(j);
  err << res.text << "\n";
  return kExitOk;
}

// -------------------------------------------------------------------- gradcheck

struct GradArgs {
  double eps = 1e-4;
  std::size_t coords = 3;
  double floor = 1e-6;
};

int cmd_gradcheck(const Common& c, const GradArgs& a, std::ostream& out, std::ostream& err) {
  if (!(a.eps > 0) || !std::isfinite(a.eps)) throw ValidationError("gradcheck: --eps must be a positive number");
  const Config cfg = load_config(c);
  GradcheckOptions opts;
  opts.seed = run_seed(c, cfg);
  opts.model = model_config(cfg, opts.seed);
  opts.eps = a.eps;
  opts.coords_per_tensor = a.coords;
  opts.denominator_floor = a.floor;
  const auto rep = end_to_end_gradcheck(opts);
  ordered_json j{{"max_rel_error", rep.max_rel_error},          {"tolerance", opts.tolerance},
                 {"coords_checked", rep.coords_checked},        {"tensors", rep.tensors},
                 {"worst_parameter", rep.worst_param},          {"eps", opts.eps},
                 {"denominator_floor", opts.denominator_floor}, {"passed", rep.passed}};
  if (!c.out.empty()) write_text(fs::path(c.out) / "gradcheck.json", dump(j));
  out << dump(j);
  err << "max relative error " << rep.max_rel_error << " over " << rep.coords_checked << " coordinates ("
      << (rep.passed ? "pass" : "FAIL") << ")\n";
  if (c.verbose) err << "took " << rep.seconds << " s\n";
  return rep.passed ? kExitOk : kExitNumeric;
}

int fail(std::ostream& out, std::ostream& err, int code, const std::string& msg) {
  err << "error: " << msg << "\n";
  out << dump(ordered_json{{"error", msg}, {"exit_code", code}});
  return code;
}

}  // namespace

GradcheckReport end_to_end_gradcheck(const GradcheckOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  const data::Task task = data::Task::ReferringClassificationBox;
  const auto scene = data::synthetic_scene(options.model.image_size, 2, options.seed);
  const auto record = data::synthetic_record(scene, task, "scene.ppm");
  fusion::Model model(options.model, train::build_vocab({record}));

  // Zero-initialized LoRA factors would leave half of the adapter gradients
  // at exactly zero; give them random values so every path is exercised.
  std::mt19937_64 rng(options.seed ^ 0x9e3779b97f4a7c15ULL);
  std::normal_distribution<double> normal(0.0, 0.2);
  for (const auto& p : model.params().all()) {
    if (p.name.find("lora") != std::string::npos && p.name.back() == 'b') {
      ad::Tensor t = p.value;
      for (auto& x : t.mutable_data()) x = normal(rng);
    }
  }
  const auto seq = train::make_example(model, scene.image, record).sequence;
  std::vector<ad::Tensor> params;
  for (const auto& p : model.params().all()) params.push_back(p.value);
  auto loss = [&] {
    ad::Tensor l = model.forward_loss(model.encode_visual(scene.image, record.prompts), seq).loss;
    return options.loss_hook ? options.loss_hook(l) : l;
  };
  const auto res = ad::finite_diff_check(loss, params,
                                         {.eps = options.eps,
                                          .max_coords_per_tensor = options.coords_per_tensor,
                                          .seed = options.seed,
                                          .denominator_floor = options.denominator_floor});
  GradcheckReport rep;
  rep.max_rel_error = res.max_rel_error;
  rep.coords_checked = res.coords_checked;
  rep.tensors = params.size();
  rep.worst_param = model.params().all()[res.worst_tensor].name;
  rep.passed = std::isfinite(res.max_rel_error) && res.max_rel_error <= options.tolerance;
  rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rep;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Visual-prompt instruction tuning toolkit", "vprompt"};
  app.require_subcommand(1);

  Common common;
  BuildArgs build;
  auto* b = app.add_subcommand("build-dataset", "Convert annotations into instruction records (JSONL)");
  add_common(b, common, "Output JSONL file");
  b->add_option("--in", build.in, "COCO-style annotation JSON");
  b->add_option("--kind", build.kind, "detection | instance_seg | semantic_seg | classification | caption");
  b->add_option("--task", build.task, "Detection target: referring_classification_box or region_caption");
  b->add_option("--grid", build.grid, "Semantic sampling grid (default 32)");
  b->add_option("--samples-per-patch", build.samples, "Semantic points per patch (default 1)");
  b->add_flag("--augment", build.augment, "Add relationship and grounded-caption records");
  b->add_flag("--synthetic", build.synthetic, "Generate a synthetic corpus instead of reading --in");
  b->add_option("--max-objects", build.max_objects, "Objects per synthetic scene (default 2)");

  TrainArgs targs;
  auto* t = app.add_subcommand("train", "Run the three training stages");
  add_common(t, common, "Output directory for checkpoints and reports");
  t->add_option("--epochs", targs.epochs, "Override epochs of every stage");
  t->add_option("--lr", targs.lr, "Override the learning rate of every stage");

  EvalArgs eargs;
  auto* e = app.add_subcommand("eval", "Generate on a test set and score it");
  add_common(e, common, "Output directory for predictions and metrics");
  e->add_option("--model", eargs.model, "Training output directory (model.json)");
  e->add_option("--checkpoint", eargs.checkpoint, "Checkpoint (default <model>/stage3.ckpt)");
  e->add_option("--data", eargs.data, "Test records (JSONL)");
  e->add_option("--max-len", eargs.max_len, "Generation limit in tokens (default 128)");
  e->add_option("--predictions", eargs.predictions, "Score an existing {id, text} JSONL instead");
  e->add_option("--references", eargs.references, "References {id, text} JSONL");
  e->add_option("--task", eargs.task, "Task or task family of --predictions");

  InferArgs iargs;
  auto* i = app.add_subcommand("infer", "Answer one instruction about one image");
  add_common(i, common, "Optional directory for infer.json");
  i->add_option("--model", iargs.model, "Training output directory (model.json)");
  i->add_option("--checkpoint", iargs.checkpoint, "Checkpoint (default <model>/stage3.ckpt)");
  i->add_option("--image", iargs.image, "PNG or PPM image");
  i->add_option("--prompts", iargs.prompts, "JSON prompt array, or @file");
  i->add_option("--instruction", iargs.instruction, "Instruction text");
  i->add_option("--task", iargs.task, "Use the fixed instruction of this task");
  i->add_option("--max-len", iargs.max_len, "Generation limit in tokens (default 128)");

  GradArgs gargs;
  auto* g = app.add_subcommand("gradcheck", "Finite-difference check of the full model");
  add_common(g, common, "Optional directory for gradcheck.json");
  g->add_option("--eps", gargs.eps, "Central-difference step (default 1e-4)");
  g->add_option("--coords", gargs.coords, "Coordinates probed per tensor, 0 = all (default 3)");
  g->add_option("--floor", gargs.floor, "Lower bound of the relative-error denominator (default 1e-6)");

  std::vector<const char*> argv{"vprompt"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& ex) {
    if (ex.get_exit_code() == 0) {
      out << app.help();
      return kExitOk;
    }
    return fail(out, err, kExitValidation, ex.what());
  }

  try {
    if (b->parsed()) return cmd_build_dataset(common, build, b, out, err);
    if (t->parsed()) return cmd_train(common, targs, out, err);
    if (e->parsed()) return cmd_eval(common, eargs, out, err);
    if (i->parsed()) return cmd_infer(common, iargs, out, err);
    return cmd_gradcheck(common, gargs, out, err);
  } catch (const IoError& ex) {
    return fail(out, err, kExitIo, ex.what());
  } catch (const fs::filesystem_error& ex) {
    return fail(out, err, kExitIo, ex.what());
  } catch (const NumericError& ex) {
    return fail(out, err, kExitNumeric, ex.what());
  } catch (const ValidationError& ex) {
    return fail(out, err, kExitValidation, ex.what());
  } catch (const std::exception& ex) {
    return fail(out, err, kExitValidation, ex.what());
  }
}

}  // namespace vprompt::cli
