// SPDX-License-Identifier: Apache-2.0
#include "vprompt/train/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <numeric>
#include <random>

#include "vprompt/autodiff/ops.hpp"
#include "vprompt/core/errors.hpp"

namespace vprompt::train {

using nlohmann::json;
using nlohmann::ordered_json;

const std::vector<std::string>& stage_patterns(int stage) {
  static const std::vector<std::vector<std::string>> patterns{
      {"phi.*"},
      {"decoder.layer*.head*.wq", "decoder.layer*.head*.wk", "decoder.layer*.head*.wv", "decoder.layer*.head*.bq",
       "decoder.layer*.head*.bk", "decoder.layer*.head*.bv"},
      {"decoder.layer*.head*.lora_*"},
  };
  if (stage < 1 || stage > 3) throw ValidationError("unknown stage " + std::to_string(stage) + " (expected 1, 2 or 3)");
  return patterns[static_cast<std::size_t>(stage - 1)];
}

std::set<ad::ParamId> trainable_set(const fusion::Model& model, int stage) {
  const auto& patterns = stage_patterns(stage);
  const std::set<ad::ParamId> encoder = model.encoder().param_ids();
  std::set<ad::ParamId> out;
  for (const auto& p : model.params().all()) {
    if (encoder.count(p.id)) continue;
    if (std::any_of(patterns.begin(), patterns.end(),
                    [&](const std::string& g) { return ad::glob_match(g, p.name); })) {
      out.insert(p.id);
    }
  }
  return out;
}

void AdamWConfig::validate() const {
  if (!(lr > 0) || !std::isfinite(lr)) throw ValidationError("optimizer: lr must be positive");
  if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1))
    throw ValidationError("optimizer: betas must be in [0, 1)");
  if (!(eps > 0)) throw ValidationError("optimizer: eps must be positive");
  if (!(weight_decay >= 0)) throw ValidationError("optimizer: weight_decay must be >= 0");
}

void adamw_step(ad::ParameterStore& store, const std::set<ad::ParamId>& ids, AdamState& state,
                const AdamWConfig& config) {
  config.validate();
  for (ad::ParamId id : ids) {
    if (!store.at(id).value.has_grad()) throw ValidationError("adamw: no gradient for " + store.at(id).name);
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(config.beta1, t);
  const double c2 = 1.0 - std::pow(config.beta2, t);
  for (ad::ParamId id : ids) {
    ad::Tensor value = store.at(id).value;
    const auto g = value.grad();
    auto& m = state.m[id];
    auto& v = state.v[id];
    m.resize(g.size(), 0.0);
    v.resize(g.size(), 0.0);
    auto w = value.mutable_data();
    for (std::size_t i = 0; i < g.size(); ++i) {
      m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g[i];
      v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g[i] * g[i];
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      const double update = mhat / (std::sqrt(vhat) + config.eps) + config.weight_decay * w[i];
      w[i] -= config.lr * update;
    }
  }
}

double clip_grad_norm(ad::ParameterStore& store, const std::set<ad::ParamId>& ids, double max_norm) {
  if (!(max_norm > 0)) throw ValidationError("clip_norm must be positive");
  double sq = 0.0;
  for (ad::ParamId id : ids) {
    for (double g : store.at(id).value.grad()) sq += g * g;
  }
  const double norm = std::sqrt(sq);
  if (!std::isfinite(norm)) throw NumericError("gradient norm is not finite");
  if (norm > max_norm) {
    const double factor = max_norm / norm;
    for (ad::ParamId id : ids) {
      ad::Tensor value = store.at(id).value;
      for (double& g : value.mutable_grad()) g *= factor;
    }
  }
  return norm;
}

void StageConfig::validate() const {
  stage_patterns(stage);
  if (epochs < 1) throw ValidationError("stage " + std::to_string(stage) + ": epochs must be >= 1");
  if (batch_size < 1) throw ValidationError("stage " + std::to_string(stage) + ": batch_size must be >= 1");
  if (!(clip_norm > 0)) throw ValidationError("stage " + std::to_string(stage) + ": clip_norm must be positive");
  optimizer.validate();
}

StageConfig stage_config_from_json(const json& j, const std::filesystem::path& base_dir) {
  if (!j.is_object()) throw ValidationError("stage config must be an object");
  static const std::set<std::string> known{"stage", "datasets", "epochs",       "batch_size", "lr",
                                           "betas", "eps",      "weight_decay", "clip_norm",  "seed"};
  for (const auto& [key, _] : j.items()) {
    if (!known.count(key)) throw ValidationError("stage config: unknown key '" + key + "'");
  }
  StageConfig c;
  try {
    c.stage = j.at("stage").get<int>();
    for (const auto& d : j.at("datasets")) {
      std::filesystem::path p(d.get<std::string>());
      c.datasets.push_back(p.is_absolute() || base_dir.empty() ? p : base_dir / p);
    }
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.optimizer.lr = j.value("lr", c.optimizer.lr);
    if (j.contains("betas")) {
      const auto betas = j.at("betas").get<std::vector<double>>();
      if (betas.size() != 2) throw ValidationError("stage config: betas must have two entries");
      c.optimizer.beta1 = betas[0];
      c.optimizer.beta2 = betas[1];
    }
    c.optimizer.eps = j.value("eps", c.optimizer.eps);
    c.optimizer.weight_decay = j.value("weight_decay", c.optimizer.weight_decay);
    c.clip_norm = j.value("clip_norm", c.clip_norm);
    c.seed = j.value("seed", c.seed);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("stage config: ") + e.what());
  }
  c.validate();
  return c;
}

ordered_json to_json(const StageConfig& c) {
  ordered_json datasets = ordered_json::array();
  for (const auto& d : c.datasets) datasets.push_back(d.string());
  return {{"stage", c.stage},         {"datasets", datasets},
          {"epochs", c.epochs},       {"batch_size", c.batch_size},
          {"lr", c.optimizer.lr},     {"betas", {c.optimizer.beta1, c.optimizer.beta2}},
          {"eps", c.optimizer.eps},   {"weight_decay", c.optimizer.weight_decay},
          {"clip_norm", c.clip_norm}, {"seed", c.seed}};
}

ordered_json to_json(const TrainReport& r, const ad::ParameterStore& store) {
  ordered_json updated = ordered_json::array();
  for (ad::ParamId id : r.updated) updated.push_back(store.at(id).name);
  return {{"stage", r.stage},
          {"records", r.records},
          {"epoch_loss", r.epoch_loss},
          {"final_accuracy", r.final_accuracy},
          {"correct_tokens", r.correct_tokens},
          {"total_tokens", r.total_tokens},
          {"updated", updated}};
}

namespace {

ad::Tensor constant_copy(const ad::Tensor& t) {
  return ad::Tensor(t.shape(), std::vector<double>(t.data().begin(), t.data().end()));
}

std::vector<std::vector<double>> snapshot(const ad::ParameterStore& store) {
  std::vector<std::vector<double>> out;
  for (const auto& p : store.all()) out.emplace_back(p.value.data().begin(), p.value.data().end());
  return out;
}

}  // namespace

fusion::Vocab build_vocab(const std::vector<data::InstructionRecord>& records) {
  std::vector<std::string> texts;
  for (data::Task task : data::all_tasks()) texts.push_back(data::instruction_for(task));
  for (const auto& r : records) texts.push_back(r.answer);
  return fusion::Vocab::build(texts);
}

Example make_example(const fusion::Model& model, const vision::Image& image, const data::InstructionRecord& record) {
  record.validate();
  Example e;
  const auto visual = model.encode_visual(image, record.prompts);
  e.visual.image = constant_copy(visual.image);
  e.visual.prompt = constant_copy(visual.prompt);
  e.visual.level = visual.level;
  const auto instruction = fusion::tokenize(record.instruction, model.vocab());
  const auto answer = fusion::tokenize(record.answer, model.vocab());
  e.sequence = fusion::assemble_sequence(e.visual.image.dim(0), instruction, answer);
  e.answer = record.answer;
  return e;
}

std::vector<Example> load_examples(const fusion::Model& model, const std::vector<std::filesystem::path>& jsonl) {
  std::vector<Example> out;
  for (const auto& path : jsonl) {
    for (const auto& record : data::read_jsonl(path)) {
      const auto image = vision::load_image(data::resolve_image(record, path));
      if (image.width != record.width || image.height != record.height) {
        throw ValidationError(path.string() + ": " + record.image + " is " + std::to_string(image.width) + "x" +
                              std::to_string(image.height) + ", record says " + std::to_string(record.width) + "x" +
                              std::to_string(record.height));
      }
      out.push_back(make_example(model, image, record));
    }
  }
  return out;
}

std::pair<std::size_t, std::size_t> masked_accuracy(const fusion::Model& model, const std::vector<Example>& examples) {
  std::size_t correct = 0, total = 0;
  for (const auto& e : examples) {
    const auto r = model.forward_loss(e.visual, e.sequence);
    correct += r.correct;
    total += r.total;
  }
  return {correct, total};
}

TrainReport train_stage(fusion::Model& model, const StageConfig& config, const std::vector<Example>& examples,
                        const ProgressFn& progress) {
  config.validate();
  const std::string ctx = "stage " + std::to_string(config.stage);
  if (examples.empty()) throw ValidationError(ctx + ": empty dataset");
  const auto start = std::chrono::steady_clock::now();
  auto& store = model.params();
  const std::set<ad::ParamId> ids = trainable_set(model, config.stage);
  const auto before = snapshot(store);
  store.set_trainable(ids);

  TrainReport report;
  report.stage = config.stage;
  report.records = examples.size();
  AdamState state;
  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t batch = static_cast<std::size_t>(config.batch_size);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += batch) {
      const std::size_t end = std::min(order.size(), begin + batch);
      store.zero_grads();
      for (std::size_t i = begin; i < end; ++i) {
        const std::string where = ctx + ", epoch " + std::to_string(epoch + 1) + ", record " + std::to_string(order[i]);
        try {
          const auto r = model.forward_loss(examples[order[i]].visual, examples[order[i]].sequence);
          const double loss = r.loss.item();
          if (!std::isfinite(loss)) throw NumericError("loss is not finite");
          loss_sum += loss;
          ad::backward(ad::scale(r.loss, 1.0 / static_cast<double>(end - begin)));
        } catch (const NumericError& e) {
          store.set_trainable({});
          throw NumericError(where + ": " + e.what());
        }
      }
      try {
        clip_grad_norm(store, ids, config.clip_norm);
      } catch (const NumericError& e) {
        store.set_trainable({});
        throw NumericError(ctx + ", epoch " + std::to_string(epoch + 1) + ": " + e.what());
      }
      adamw_step(store, ids, state, config.optimizer);
    }
    report.epoch_loss.push_back(loss_sum / static_cast<double>(examples.size()));
    if (progress) progress(config.stage, epoch + 1, report.epoch_loss.back());
  }
  store.set_trainable({});

  const auto [correct, total] = masked_accuracy(model, examples);
  report.correct_tokens = correct;
  report.total_tokens = total;
  report.final_accuracy = total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
  const auto& params = store.all();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto now = params[i].value.data();
    if (std::memcmp(now.data(), before[i].data(), now.size() * sizeof(double)) != 0)
      report.updated.insert(params[i].id);
  }
  for (ad::ParamId id : report.updated) {
    if (!ids.count(id)) throw NumericError(ctx + ": parameter outside the stage set changed: " + store.at(id).name);
  }
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

TrainReport train_stage(fusion::Model& model, const StageConfig& config, const ProgressFn& progress) {
  config.validate();
  if (config.datasets.empty()) throw ValidationError("stage " + std::to_string(config.stage) + ": no datasets");
  return train_stage(model, config, load_examples(model, config.datasets), progress);
}

std::vector<TrainReport> run_pipeline(fusion::Model& model, const std::vector<StageConfig>& stages,
                                      const std::filesystem::path& out_dir, const ProgressFn& progress) {
  if (stages.size() != 3) {
    throw ValidationError("pipeline needs exactly three stage configs (got " + std::to_string(stages.size()) + ")");
  }
  for (std::size_t i = 0; i < stages.size(); ++i) {
    if (stages[i].stage != static_cast<int>(i + 1)) {
      throw ValidationError("pipeline stages must be ordered 1, 2, 3 (position " + std::to_string(i + 1) +
                            " is stage " + std::to_string(stages[i].stage) + ")");
    }
    stages[i].validate();
  }
  std::filesystem::create_directories(out_dir);
  std::vector<TrainReport> reports;
  for (const auto& config : stages) {
    if (config.stage > 1) {
      ad::load_checkpoint(model.params(), out_dir / ("stage" + std::to_string(config.stage - 1) + ".ckpt"));
    }
    reports.push_back(train_stage(model, config, progress));
    ad::save_checkpoint(model.params(), out_dir / ("stage" + std::to_string(config.stage) + ".ckpt"));
  }
  return reports;
}

}  // namespace vprompt::train
