// SPDX-License-Identifier: Apache-2.0
//
// Training loop, evaluation, the ablation and task grids, and the gradient
// check over the full pipeline.

#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mmsair/checkpoint.hpp"
#include "mmsair/dataset.hpp"
#include "mmsair/gradcheck.hpp"
#include "mmsair/metrics.hpp"
#include "mmsair/model.hpp"

namespace mmsair {

struct EpochLog {
  std::size_t epoch = 0;  // 1-based
  double loss = 0.0;
  double sentiment_loss = 0.0;
  double intent_loss = 0.0;
  double train_sentiment_accuracy = 0.0;
  double train_intent_accuracy = 0.0;
  std::optional<double> eval_sentiment_accuracy;
  std::optional<double> eval_intent_accuracy;

  /// One JSON object, doubles printed with round-trip precision.
  std::string to_json_line() const;
};

struct MetricsReport {
  std::string name;
  TaskMode task_mode = TaskMode::joint;
  std::optional<ClassificationMetrics> sentiment;
  std::optional<ClassificationMetrics> intent;
  nlohmann::json config;
  double runtime_seconds = 0.0;

  nlohmann::json to_json() const;
};

struct StepInfo {
  std::size_t epoch = 0;
  std::size_t step = 0;  // global, 1-based
  const MmsairModel& model;
};

/// Called after backward and before the optimizer update of every step.
using StepObserver = std::function<void(const StepInfo&)>;

struct TrainOptions {
  /// When set, evaluated after every epoch to find the best epoch.
  const Dataset* eval_set = nullptr;
  StepObserver on_step;
  /// Continue a run: parameters (and Adam state, when stored) are restored
  /// and training resumes after the checkpoint's last completed epoch, up to
  /// config.epochs. The checkpoint's config must describe the same model.
  const Checkpoint* resume_from = nullptr;
};

struct TrainResult {
  MmsairModel model;
  AdamState adam;
  std::vector<EpochLog> log;
  /// Epoch (1-based) with the highest mean accuracy over active tasks on the
  /// eval set; 0 when no eval set was given.
  std::size_t best_epoch = 0;
  std::optional<MetricsReport> best_eval;
  double runtime_seconds = 0.0;
  /// Epochs finished in total, including any before a resume.
  std::size_t epochs_completed = 0;

  Checkpoint checkpoint(bool include_adam = false) const;
};

/// Throws MissingEmbeddingError (naming every unresolved id) before the first
/// epoch if any record cannot be encoded.
TrainResult train(const TrainConfig& config, const Dataset& train_set, const Providers& providers,
                  const TrainOptions& options = {});

/// Argmax predictions of each head over `dataset`, in batches of
/// config.eval_batch. Heads inactive under the task mode are omitted.
MetricsReport evaluate(const MmsairModel& model, const Dataset& dataset, std::string name = "eval");

/// Rebuilds the model from the checkpoint's config echo.
MetricsReport evaluate(const Checkpoint& checkpoint, const Dataset& dataset, const Providers& providers);

/// Restores a model from a checkpoint; CheckpointError on any mismatch.
MmsairModel load_model(const Checkpoint& checkpoint, const Providers& providers);

struct ExperimentRow {
  std::string name;
  TrainConfig config;
  MetricsReport final_eval;
  std::optional<MetricsReport> best_eval;
  std::size_t best_epoch = 0;
  std::vector<EpochLog> log;
};

struct ExperimentTable {
  std::string title;
  std::vector<ExperimentRow> rows;

  const ExperimentRow& row(std::string_view name) const;
  nlohmann::json to_json() const;
  /// Fixed-width text table of final and best metrics, in percent.
  std::string to_text() const;
};

/// Observer receiving the configuration of the row being trained.
using RowStepObserver = std::function<void(const TrainConfig&, const StepInfo&)>;

/// The six ablation configurations of the results table, all with the base
/// seed.
std::vector<AblationFlags> ablation_rows();

ExperimentTable run_ablation(const TrainConfig& base, const Dataset& train_set, const Dataset& test_set,
                             const Providers& providers, const RowStepObserver& on_step = {});

/// SA (sentiment only), IR (intent only) and MSAIRS (joint, alpha = beta = 1).
ExperimentTable run_task_grid(const TrainConfig& base, const Dataset& train_set, const Dataset& test_set,
                              const Providers& providers, const RowStepObserver& on_step = {});

struct GradcheckOptions {
  std::size_t d_model = 8;
  std::size_t num_heads = 2;
  std::size_t batch = 4;
  std::size_t vocab_size = 64;
  std::size_t image_side = 4;
  std::size_t conv_kernel = 3;
  std::vector<std::uint64_t> seeds;
  Real eps = static_cast<Real>(1e-3);
  Stencil stencil = Stencil::central4;
  TaskMode task_mode = TaskMode::joint;
  AblationFlags ablation;
};

struct GradcheckRun {
  std::uint64_t seed = 0;
  GradCheckResult result;
  double seconds = 0.0;
};

/// Full pipeline (toy encoders -> fusion -> heads -> joint loss) on a
/// synthetic batch with randomised parameters, once per seed.
std::vector<GradcheckRun> run_gradcheck(const GradcheckOptions& options);

}  // namespace mmsair
