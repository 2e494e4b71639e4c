// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <functional>
#include <json.hpp>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "vprompt/autodiff/params.hpp"
#include "vprompt/data/record.hpp"
#include "vprompt/fusion/model.hpp"

namespace vprompt::train {

/// Name patterns (glob) of the parameters each stage updates.
///   1: projection layer
///   2: decoder attention query/key/value weights and biases
///   3: LoRA factors
const std::vector<std::string>& stage_patterns(int stage);

/// Parameters trained in `stage`. Encoder parameters are never included.
std::set<ad::ParamId> trainable_set(const fusion::Model& model, int stage);

struct AdamWConfig {
  double lr = 2e-5;
  double beta1 = 0.9;
  double beta2 = 0.95;
  double eps = 1e-8;
  double weight_decay = 0.0;

  void validate() const;
};

struct AdamState {
  std::size_t step = 0;
  std::map<ad::ParamId, std::vector<double>> m;
  std::map<ad::ParamId, std::vector<double>> v;
};

/// One decoupled-weight-decay Adam update with bias correction on `ids`.
/// Throws ValidationError when a selected parameter has no gradient.
void adamw_step(ad::ParameterStore& store, const std::set<ad::ParamId>& ids, AdamState& state,
                const AdamWConfig& config);

/// Scales the gradients of `ids` so their joint L2 norm is at most
/// `max_norm`; returns the norm before scaling.
double clip_grad_norm(ad::ParameterStore& store, const std::set<ad::ParamId>& ids, double max_norm);

struct StageConfig {
  int stage = 1;
  std::vector<std::filesystem::path> datasets;
  int epochs = 1;
  int batch_size = 4;
  AdamWConfig optimizer;
  double clip_norm = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Keys: stage, datasets, epochs, batch_size, lr, betas, eps, weight_decay,
/// clip_norm, seed. Relative dataset paths are resolved against `base_dir`.
StageConfig stage_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
nlohmann::ordered_json to_json(const StageConfig& config);

struct TrainReport {
  int stage = 0;
  std::size_t records = 0;
  std::vector<double> epoch_loss;  // mean record loss per epoch
  double final_accuracy = 0.0;     // teacher-forced masked-token accuracy after training
  std::size_t correct_tokens = 0;
  std::size_t total_tokens = 0;
  std::set<ad::ParamId> updated;  // parameters whose bits changed
  double wall_seconds = 0.0;
};

/// Wall time is left out so reports of identical runs compare equal.
nlohmann::ordered_json to_json(const TrainReport& report, const ad::ParameterStore& store);

/// Vocabulary over every task instruction and the answers of `records`.
fusion::Vocab build_vocab(const std::vector<data::InstructionRecord>& records);

/// A record with its cached visual features and token sequence.
struct Example {
  fusion::VisualFeatures visual;
  fusion::TokenSequence sequence;
  std::string answer;
};

Example make_example(const fusion::Model& model, const vision::Image& image, const data::InstructionRecord& record);
/// Loads every record (and its image) of the given JSONL files.
std::vector<Example> load_examples(const fusion::Model& model, const std::vector<std::filesystem::path>& jsonl);

/// Per-epoch progress: (stage, epoch, mean loss).
using ProgressFn = std::function<void(int, int, double)>;

/// Trains the stage's parameter set on `examples`; everything else stays
/// bitwise identical. Throws ValidationError for an empty dataset and
/// NumericError when a loss or gradient is not finite.
TrainReport train_stage(fusion::Model& model, const StageConfig& config, const std::vector<Example>& examples,
                        const ProgressFn& progress = {});
/// Loads config.datasets first.
TrainReport train_stage(fusion::Model& model, const StageConfig& config, const ProgressFn& progress = {});

/// Teacher-forced accuracy over masked positions.
std::pair<std::size_t, std::size_t> masked_accuracy(const fusion::Model& model, const std::vector<Example>& examples);

/// Runs stages 1, 2, 3 in order. After stage k the weights go to
/// out_dir/stage{k}.ckpt, and stage k starts from stage{k-1}.ckpt.
std::vector<TrainReport> run_pipeline(fusion::Model& model, const std::vector<StageConfig>& stages,
                                      const std::filesystem::path& out_dir, const ProgressFn& progress = {});

}  // namespace vprompt::train
