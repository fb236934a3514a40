// SPDX-License-Identifier: Apache-2.0

#include "mmsair/model.hpp"

#include <algorithm>

#include "mmsair/errors.hpp"

namespace mmsair {

void AblationFlags::validate() const {
  if (drop_context && drop_sticker_image && drop_sticker_text) {
    throw ConfigError("ablation cannot drop context, sticker image and sticker text at once");
  }
}

std::string AblationFlags::label() const {
  if (!any()) return "MMSAIR";
  if (drop_sticker_image && drop_sticker_text && !drop_context) return "w/o S_F&ST_F (Context-only)";
  if (drop_context && drop_sticker_text && !drop_sticker_image) return "w/o C_F&ST_F (Image-only)";
  std::vector<std::string> parts;
  if (drop_context) parts.emplace_back("C_F");
  if (drop_sticker_image) parts.emplace_back("S_F");
  if (drop_sticker_text) parts.emplace_back("ST_F");
  std::string out = "w/o ";
  for (std::size_t i = 0; i < parts.size(); ++i) out += (i ? "&" : "") + parts[i];
  return out;
}

std::string_view to_string(TaskMode mode) {
  switch (mode) {
    case TaskMode::joint:
      return "joint";
    case TaskMode::sentiment_only:
      return "sentiment_only";
    case TaskMode::intent_only:
      return "intent_only";
  }
  return "joint";
}

TaskMode parse_task_mode(std::string_view text) {
  if (text == "joint") return TaskMode::joint;
  if (text == "sentiment_only") return TaskMode::sentiment_only;
  if (text == "intent_only") return TaskMode::intent_only;
  throw ConfigError("unknown task mode '" + std::string(text) + "'");
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be at least 1");
  if (train_batch < 1 || eval_batch < 1) throw ConfigError("batch sizes must be at least 1");
  optimizer.validate();
  effective_loss_weights().validate();
  encoder.validate(num_heads);
  fusion_config().validate();
  ablation.validate();
}

LossWeights TrainConfig::effective_loss_weights() const {
  LossWeights w = loss_weights;
  if (task_mode == TaskMode::sentiment_only) w.beta = 0;
  if (task_mode == TaskMode::intent_only) w.alpha = 0;
  return w;
}

FusionConfig TrainConfig::fusion_config() const { return {encoder.d_model, num_heads, d_comb}; }

nlohmann::json TrainConfig::to_json() const {
  nlohmann::ordered_json j;
  j["epochs"] = epochs;
  j["train_batch"] = train_batch;
  j["eval_batch"] = eval_batch;
  j["lr"] = optimizer.learning_rate;
  j["beta1"] = optimizer.beta1;
  j["beta2"] = optimizer.beta2;
  j["adam_eps"] = optimizer.epsilon;
  j["alpha"] = loss_weights.alpha;
  j["beta"] = loss_weights.beta;
  j["d_model"] = encoder.d_model;
  j["vocab_size"] = encoder.vocab_size;
  j["image_input_dim"] = encoder.image_input_dim;
  j["conv_kernel"] = encoder.conv_kernel;
  j["context_provider"] = to_string(encoder.context_provider);
  j["sticker_text_provider"] = to_string(encoder.sticker_text_provider);
  j["image_provider"] = to_string(encoder.image_provider);
  j["num_heads"] = num_heads;
  j["d_comb"] = d_comb;
  j["drop_context"] = ablation.drop_context;
  j["drop_sticker_image"] = ablation.drop_sticker_image;
  j["drop_sticker_text"] = ablation.drop_sticker_text;
  j["task_mode"] = to_string(task_mode);
  j["seed"] = seed;
  return nlohmann::json::parse(j.dump());
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  try {
    auto get = [&j](const char* key, auto& target) {
      if (j.contains(key)) target = j.at(key).get<std::decay_t<decltype(target)>>();
    };
    get("epochs", c.epochs);
    get("train_batch", c.train_batch);
    get("eval_batch", c.eval_batch);
    get("lr", c.optimizer.learning_rate);
    get("beta1", c.optimizer.beta1);
    get("beta2", c.optimizer.beta2);
    get("adam_eps", c.optimizer.epsilon);
    get("alpha", c.loss_weights.alpha);
    get("beta", c.loss_weights.beta);
    get("d_model", c.encoder.d_model);
    get("vocab_size", c.encoder.vocab_size);
    get("image_input_dim", c.encoder.image_input_dim);
    get("conv_kernel", c.encoder.conv_kernel);
    get("num_heads", c.num_heads);
    get("d_comb", c.d_comb);
    get("drop_context", c.ablation.drop_context);
    get("drop_sticker_image", c.ablation.drop_sticker_image);
    get("drop_sticker_text", c.ablation.drop_sticker_text);
    get("seed", c.seed);
    if (j.contains("context_provider")) {
      c.encoder.context_provider = parse_provider_kind(j.at("context_provider").get<std::string>());
    }
    if (j.contains("sticker_text_provider")) {
      c.encoder.sticker_text_provider = parse_provider_kind(j.at("sticker_text_provider").get<std::string>());
    }
    if (j.contains("image_provider")) {
      c.encoder.image_provider = parse_provider_kind(j.at("image_provider").get<std::string>());
    }
    if (j.contains("task_mode")) c.task_mode = parse_task_mode(j.at("task_mode").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid configuration: ") + e.what());
  }
  c.validate();
  return c;
}

// ---- model -------------------------------------------------------------------

MmsairModel::MmsairModel(const TrainConfig& config, Providers providers)
    : MmsairModel(config, std::move(providers), Rng(config.seed)) {}

MmsairModel::MmsairModel(const TrainConfig& config, Providers providers, Rng rng)
    : config_((config.validate(), config)),
      params_(),
      encoders_(config.encoder, std::move(providers), rng, params_),
      fusion_(FusionParams::create(config.fusion_config(), rng, params_)),
      heads_(HeadParams::create(config.fusion_config().combined_width(), rng, params_)) {}

EmbeddingTriple MmsairModel::embed(const ChatRecord& record) const {
  const std::size_t d = config_.encoder.d_model;
  const AblationFlags& drop = config_.ablation;
  EmbeddingTriple t;
  t.e_x = drop.drop_context ? Tensor::zeros({1, d}) : encoders_.encode_context(record);
  t.e_s = drop.drop_sticker_text ? Tensor::zeros({1, d}) : encoders_.encode_sticker_text(record);
  t.e_i = drop.drop_sticker_image ? Tensor::zeros({1, d}) : encoders_.encode_sticker_image(record);
  return t;
}

BatchOutput MmsairModel::forward(std::span<const ChatRecord> batch) const {
  if (batch.empty()) throw ContractError("forward: empty batch");
  std::vector<Tensor> rows;
  std::vector<std::size_t> sentiment_gold, intent_gold;
  rows.reserve(batch.size());
  for (const ChatRecord& r : batch) {
    const EmbeddingTriple e = embed(r);
    rows.push_back(fuse(e.e_x, e.e_s, e.e_i, fusion_).e_combined);
    sentiment_gold.push_back(static_cast<std::size_t>(r.multimodal_sentiment));
    intent_gold.push_back(static_cast<std::size_t>(r.multimodal_intent));
  }
  const Tensor combined = rows.size() == 1 ? rows.front() : concat(rows, 0);
  BatchOutput out;
  out.prediction = predict_with_loss(combined, heads_, sentiment_gold, intent_gold, config_.effective_loss_weights());
  out.sentiment_pred = argmax_rows(out.prediction.p_sentiment);
  out.intent_pred = argmax_rows(out.prediction.p_intent);
  return out;
}

std::vector<std::size_t> argmax_rows(const Tensor& probs) {
  if (probs.rank() != 2) throw DimensionError("argmax_rows: expected a matrix, got " + shape_to_string(probs.shape()));
  const std::size_t n = probs.dim(0), c = probs.dim(1);
  const auto P = probs.data();
  std::vector<std::size_t> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = P.subspan(i * c, c);
    out[i] = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return out;
}

}  // namespace mmsair
