// SPDX-License-Identifier: Apache-2.0
//
// The full network: encoders -> fusion -> heads -> joint loss, plus the
// configuration that parameterises it.

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "mmsair/dataset.hpp"
#include "mmsair/encoders.hpp"
#include "mmsair/fusion.hpp"
#include "mmsair/optimizer.hpp"
#include "mmsair/parameters.hpp"
#include "mmsair/prediction.hpp"

namespace mmsair {

/// Modalities replaced by a frozen zero vector at the encoder output.
struct AblationFlags {
  bool drop_context = false;
  bool drop_sticker_image = false;
  bool drop_sticker_text = false;

  bool any() const noexcept { return drop_context || drop_sticker_image || drop_sticker_text; }
  /// Throws ConfigError when every modality is dropped.
  void validate() const;
  /// Row name used in ablation tables, e.g. "w/o C_F".
  std::string label() const;

  bool operator==(const AblationFlags&) const = default;
};

enum class TaskMode { joint, sentiment_only, intent_only };

std::string_view to_string(TaskMode mode);
TaskMode parse_task_mode(std::string_view text);

struct TrainConfig {
  std::size_t epochs = 50;
  std::size_t train_batch = 16;
  std::size_t eval_batch = 2;
  OptimConfig optimizer;
  LossWeights loss_weights;
  EncoderConfig encoder;
  std::size_t num_heads = 4;
  /// 0 means d_model.
  std::size_t d_comb = 0;
  AblationFlags ablation;
  TaskMode task_mode = TaskMode::joint;
  std::uint64_t seed = 42;

  void validate() const;
  /// Loss weights after applying the task mode: sentiment_only zeroes beta,
  /// intent_only zeroes alpha.
  LossWeights effective_loss_weights() const;
  FusionConfig fusion_config() const;

  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

struct BatchOutput {
  PredictionOutput prediction;
  std::vector<std::size_t> sentiment_pred;
  std::vector<std::size_t> intent_pred;
};

class MmsairModel {
 public:
  MmsairModel(const TrainConfig& config, Providers providers);

  MmsairModel(MmsairModel&&) = default;
  MmsairModel& operator=(MmsairModel&&) = default;
  MmsairModel(const MmsairModel&) = delete;
  MmsairModel& operator=(const MmsairModel&) = delete;

  /// Embeddings of one record with ablated modalities zeroed.
  EmbeddingTriple embed(const ChatRecord& record) const;

  /// Forward pass over a batch, including losses under the effective loss
  /// weights. Records a graph unless a NoGradGuard is active.
  BatchOutput forward(std::span<const ChatRecord> batch) const;

  const TrainConfig& config() const noexcept { return config_; }
  const ParameterSet& parameters() const noexcept { return params_; }
  const ModalityEncoders& encoders() const noexcept { return encoders_; }
  const FusionParams& fusion() const noexcept { return fusion_; }
  const HeadParams& heads() const noexcept { return heads_; }

 private:
  MmsairModel(const TrainConfig& config, Providers providers, Rng rng);

  TrainConfig config_;
  ParameterSet params_;
  ModalityEncoders encoders_;
  FusionParams fusion_;
  HeadParams heads_;
};

/// Index of the largest entry of each row of a [n, c] tensor.
std::vector<std::size_t> argmax_rows(const Tensor& probs);

}  // namespace mmsair
