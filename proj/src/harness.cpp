// SPDX-License-Identifier: Apache-2.0

#include "mmsair/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <numeric>
#include <random>
#include <sstream>

#include "mmsair/errors.hpp"
#include "mmsair/synthetic.hpp"

namespace mmsair {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> sentiment_names() {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < kNumSentiments; ++i) out.emplace_back(to_string(static_cast<SentimentLabel>(i)));
  return out;
}

std::vector<std::string> intent_names() {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < kNumIntents; ++i) out.emplace_back(to_string(static_cast<IntentLabel>(i)));
  return out;
}

nlohmann::json metrics_json(const ClassificationMetrics& m) {
  nlohmann::ordered_json j;
  j["accuracy"] = m.accuracy;
  j["weighted_f1"] = m.weighted_f1;
  j["samples"] = m.samples;
  nlohmann::ordered_json classes = nlohmann::ordered_json::array();
  for (const auto& c : m.per_class) {
    nlohmann::ordered_json e;
    e["label"] = c.label;
    e["precision"] = c.precision;
    e["recall"] = c.recall;
    e["f1"] = c.f1;
    e["support"] = c.support;
    classes.push_back(std::move(e));
  }
  j["per_class"] = std::move(classes);
  return nlohmann::json::parse(j.dump());
}

double mean_active_accuracy(const MetricsReport& r) {
  double total = 0.0;
  int n = 0;
  if (r.sentiment) total += r.sentiment->accuracy, ++n;
  if (r.intent) total += r.intent->accuracy, ++n;
  return n ? total / n : 0.0;
}

std::string checkpoint_echo(const TrainConfig& config, std::size_t epochs_completed) {
  nlohmann::ordered_json echo;
  echo["config"] = config.to_json();
  echo["epochs_completed"] = epochs_completed;
  return echo.dump();
}

nlohmann::json parse_echo(const Checkpoint& checkpoint) {
  nlohmann::json echo;
  try {
    echo = nlohmann::json::parse(checkpoint.config_json);
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("config echo is not valid JSON: ") + e.what());
  }
  if (!echo.is_object() || !echo.contains("config")) throw CheckpointError("checkpoint has no config echo");
  return echo;
}

void fail_on_unresolvable(const Dataset& records, const TrainConfig& config, const Providers& providers) {
  const auto missing = find_unresolvable(records, config.encoder, providers);
  if (missing.empty()) return;
  std::string list;
  for (std::size_t i = 0; i < missing.size(); ++i) list += (i ? ", " : "") + missing[i];
  throw MissingEmbeddingError(missing.front(),
                              std::to_string(missing.size()) + " record(s) cannot be encoded: " + list);
}

}  // namespace

// ---- reports -----------------------------------------------------------------

std::string EpochLog::to_json_line() const {
  std::string out = "{\"epoch\":" + std::to_string(epoch) + ",\"loss\":" + fmt_double(loss) +
                    ",\"sentiment_loss\":" + fmt_double(sentiment_loss) + ",\"intent_loss\":" +
                    fmt_double(intent_loss) + ",\"train_sentiment_accuracy\":" + fmt_double(train_sentiment_accuracy) +
                    ",\"train_intent_accuracy\":" + fmt_double(train_intent_accuracy);
  if (eval_sentiment_accuracy) out += ",\"eval_sentiment_accuracy\":" + fmt_double(*eval_sentiment_accuracy);
  if (eval_intent_accuracy) out += ",\"eval_intent_accuracy\":" + fmt_double(*eval_intent_accuracy);
  return out + "}";
}

nlohmann::json MetricsReport::to_json() const {
  nlohmann::ordered_json j;
  j["name"] = name;
  j["task_mode"] = to_string(task_mode);
  if (sentiment) j["sentiment"] = metrics_json(*sentiment);
  if (intent) j["intent"] = metrics_json(*intent);
  j["config"] = config;
  j["runtime_seconds"] = runtime_seconds;
  return nlohmann::json::parse(j.dump());
}

// ---- train / evaluate ----------------------------------------------------------

Checkpoint TrainResult::checkpoint(bool include_adam) const {
  return make_checkpoint(model.parameters(), checkpoint_echo(model.config(), epochs_completed),
                         include_adam ? &adam : nullptr);
}

TrainResult train(const TrainConfig& config, const Dataset& train_set, const Providers& providers,
                  const TrainOptions& options) {
  const auto start = Clock::now();
  config.validate();
  if (train_set.empty()) throw ContractError("train: empty training set");
  fail_on_unresolvable(train_set, config, providers);
  if (options.eval_set) fail_on_unresolvable(*options.eval_set, config, providers);

  TrainResult result{MmsairModel(config, providers), {}, {}, 0, std::nullopt, 0.0};
  const ParameterSet& params = result.model.parameters();
  Adam adam(params, config.optimizer);

  std::size_t first_epoch = 1;
  if (options.resume_from) {
    const nlohmann::json echo = parse_echo(*options.resume_from);
    const TrainConfig stored = TrainConfig::from_json(echo.at("config"));
    if (MmsairModel(stored, providers).parameters().total_elements() != params.total_elements()) {
      throw CheckpointError("resume checkpoint describes a different model");
    }
    load_parameters(*options.resume_from, params);
    load_adam_state(*options.resume_from, params, adam.state());
    first_epoch = echo.value("epochs_completed", std::size_t{0}) + 1;
  }
  result.epochs_completed = first_epoch - 1;

  std::vector<std::size_t> order(train_set.size());
  std::size_t global_step = adam.state().step;
  double best_score = -1.0;
  for (std::size_t epoch = first_epoch; epoch <= config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::seed_seq seq{static_cast<std::uint32_t>(config.seed), static_cast<std::uint32_t>(config.seed >> 32),
                      static_cast<std::uint32_t>(epoch)};
    Rng rng(seq);
    std::shuffle(order.begin(), order.end(), rng);

    EpochLog entry;
    entry.epoch = epoch;
    std::size_t sentiment_correct = 0, intent_correct = 0;
    Dataset batch;
    for (std::size_t begin = 0; begin < order.size(); begin += config.train_batch) {
      const std::size_t end = std::min(order.size(), begin + config.train_batch);
      batch.clear();
      for (std::size_t i = begin; i < end; ++i) batch.push_back(train_set[order[i]]);

      adam.zero_grad();
      const BatchOutput out = result.model.forward(batch);
      backward(out.prediction.l);
      ++global_step;
      if (options.on_step) options.on_step(StepInfo{epoch, global_step, result.model});
      adam.step();

      const double n = static_cast<double>(batch.size());
      entry.loss += out.prediction.l.item() * n;
      entry.sentiment_loss += out.prediction.l1.item() * n;
      entry.intent_loss += out.prediction.l2.item() * n;
      for (std::size_t i = 0; i < batch.size(); ++i) {
        sentiment_correct += out.sentiment_pred[i] == static_cast<std::size_t>(batch[i].multimodal_sentiment);
        intent_correct += out.intent_pred[i] == static_cast<std::size_t>(batch[i].multimodal_intent);
      }
    }
    const double total = static_cast<double>(train_set.size());
    entry.loss /= total;
    entry.sentiment_loss /= total;
    entry.intent_loss /= total;
    entry.train_sentiment_accuracy = static_cast<double>(sentiment_correct) / total;
    entry.train_intent_accuracy = static_cast<double>(intent_correct) / total;

    if (options.eval_set && !options.eval_set->empty()) {
      MetricsReport report = evaluate(result.model, *options.eval_set, "epoch " + std::to_string(epoch));
      if (report.sentiment) entry.eval_sentiment_accuracy = report.sentiment->accuracy;
      if (report.intent) entry.eval_intent_accuracy = report.intent->accuracy;
      const double score = mean_active_accuracy(report);
      if (score > best_score) {
        best_score = score;
        result.best_epoch = epoch;
        report.name = "best";
        result.best_eval = std::move(report);
      }
    }
    result.log.push_back(entry);
    result.epochs_completed = epoch;
  }
  result.adam = adam.state();
  result.runtime_seconds = seconds_since(start);
  return result;
}

MetricsReport evaluate(const MmsairModel& model, const Dataset& dataset, std::string name) {
  const auto start = Clock::now();
  if (dataset.empty()) throw ContractError("evaluate: empty dataset");
  NoGradGuard no_grad;
  const TrainConfig& config = model.config();
  ConfusionMatrix sentiment(kNumSentiments), intent(kNumIntents);
  for (std::size_t begin = 0; begin < dataset.size(); begin += config.eval_batch) {
    const std::size_t end = std::min(dataset.size(), begin + config.eval_batch);
    const std::span<const ChatRecord> batch(dataset.data() + begin, end - begin);
    const BatchOutput out = model.forward(batch);
    for (std::size_t i = 0; i < batch.size(); ++i) {
      sentiment.add(static_cast<std::size_t>(batch[i].multimodal_sentiment), out.sentiment_pred[i]);
      intent.add(static_cast<std::size_t>(batch[i].multimodal_intent), out.intent_pred[i]);
    }
  }
  MetricsReport report;
  report.name = std::move(name);
  report.task_mode = config.task_mode;
  report.config = config.to_json();
  if (config.task_mode != TaskMode::intent_only) report.sentiment = sentiment.summarize(sentiment_names());
  if (config.task_mode != TaskMode::sentiment_only) report.intent = intent.summarize(intent_names());
  report.runtime_seconds = seconds_since(start);
  return report;
}

MmsairModel load_model(const Checkpoint& checkpoint, const Providers& providers) {
  MmsairModel model(TrainConfig::from_json(parse_echo(checkpoint).at("config")), providers);
  load_parameters(checkpoint, model.parameters());
  return model;
}

MetricsReport evaluate(const Checkpoint& checkpoint, const Dataset& dataset, const Providers& providers) {
  const MmsairModel model = load_model(checkpoint, providers);
  fail_on_unresolvable(dataset, model.config(), providers);
  return evaluate(model, dataset, "eval");
}

// ---- experiment grids ----------------------------------------------------------

const ExperimentRow& ExperimentTable::row(std::string_view name) const {
  for (const auto& r : rows) {
    if (r.name == name) return r;
  }
  throw ContractError("no row '" + std::string(name) + "' in " + title);
}

nlohmann::json ExperimentTable::to_json() const {
  nlohmann::ordered_json j;
  j["title"] = title;
  nlohmann::ordered_json rows_json = nlohmann::ordered_json::array();
  for (const auto& r : rows) {
    nlohmann::ordered_json row;
    row["name"] = r.name;
    row["final"] = r.final_eval.to_json();
    if (r.best_eval) {
      row["best"] = r.best_eval->to_json();
      row["best_epoch"] = r.best_epoch;
    }
    row["epochs"] = r.log.size();
    rows_json.push_back(std::move(row));
  }
  j["rows"] = std::move(rows_json);
  return nlohmann::json::parse(j.dump());
}

std::string ExperimentTable::to_text() const {
  std::ostringstream out;
  char line[256];
  std::snprintf(line, sizeof line, "%-30s | %-6s | %8s %8s | %8s %8s\n", title.c_str(), "epoch", "Sent-Acc", "Sent-F1",
                "Int-Acc", "Int-F1");
  out << line;
  auto cell = [](const std::optional<ClassificationMetrics>& m, bool acc) -> std::string {
    if (!m) return "-";
    char buf[16];
    std::snprintf(buf, sizeof buf, "%.2f", 100.0 * (acc ? m->accuracy : m->weighted_f1));
    return buf;
  };
  auto emit = [&](const std::string& name, const std::string& which, const MetricsReport& r) {
    std::snprintf(line, sizeof line, "%-30s | %-6s | %8s %8s | %8s %8s\n", name.c_str(), which.c_str(),
                  cell(r.sentiment, true).c_str(), cell(r.sentiment, false).c_str(), cell(r.intent, true).c_str(),
                  cell(r.intent, false).c_str());
    out << line;
  };
  for (const auto& r : rows) {
    emit(r.name, "final", r.final_eval);
    if (r.best_eval) emit("", "best@" + std::to_string(r.best_epoch), *r.best_eval);
  }
  return out.str();
}

namespace {

ExperimentRow run_row(std::string name, const TrainConfig& config, const Dataset& train_set, const Dataset& test_set,
                      const Providers& providers, const RowStepObserver& on_step) {
  TrainOptions options;
  options.eval_set = &test_set;
  if (on_step) options.on_step = [&](const StepInfo& info) { on_step(config, info); };
  TrainResult result = train(config, train_set, providers, options);
  ExperimentRow row{std::move(name), config, evaluate(result.model, test_set, "final"), std::move(result.best_eval),
                    result.best_epoch, std::move(result.log)};
  row.final_eval.runtime_seconds = result.runtime_seconds;
  return row;
}

}  // namespace

std::vector<AblationFlags> ablation_rows() {
  return {
      {false, false, false},  // full model
      {true, false, false},   // w/o C_F
      {false, true, false},   // w/o S_F
      {false, false, true},   // w/o ST_F
      {false, true, true},    // w/o S_F&ST_F (Context-only)
      {true, false, true},    // w/o C_F&ST_F (Image-only)
  };
}

ExperimentTable run_ablation(const TrainConfig& base, const Dataset& train_set, const Dataset& test_set,
                             const Providers& providers, const RowStepObserver& on_step) {
  ExperimentTable table{"Ablation", {}};
  for (const AblationFlags& flags : ablation_rows()) {
    TrainConfig config = base;
    config.ablation = flags;
    table.rows.push_back(run_row(flags.label(), config, train_set, test_set, providers, on_step));
  }
  return table;
}

ExperimentTable run_task_grid(const TrainConfig& base, const Dataset& train_set, const Dataset& test_set,
                              const Providers& providers, const RowStepObserver& on_step) {
  ExperimentTable table{"Task", {}};
  const std::pair<const char*, TaskMode> grid[] = {
      {"SA", TaskMode::sentiment_only},
      {"IR", TaskMode::intent_only},
      {"MSAIRS", TaskMode::joint},
  };
  for (const auto& [name, mode] : grid) {
    TrainConfig config = base;
    config.task_mode = mode;
    config.loss_weights = {1, 1};
    table.rows.push_back(run_row(name, config, train_set, test_set, providers, on_step));
  }
  return table;
}

// ---- gradient check ------------------------------------------------------------

std::vector<GradcheckRun> run_gradcheck(const GradcheckOptions& options) {
  std::vector<GradcheckRun> runs;
  for (std::uint64_t seed : options.seeds) {
    const auto start = Clock::now();
    TrainConfig config;
    config.encoder.d_model = options.d_model;
    config.encoder.vocab_size = options.vocab_size;
    config.encoder.image_input_dim = options.image_side * options.image_side;
    config.encoder.conv_kernel = options.conv_kernel;
    config.num_heads = options.num_heads;
    config.task_mode = options.task_mode;
    config.ablation = options.ablation;
    config.seed = seed;

    const SyntheticData data = make_synthetic_dataset(options.batch, seed, options.image_side);
    MmsairModel model(config, data.providers());

    // Biases start at zero; move every parameter off that special point.
    Rng rng(seed ^ 0x9E3779B97F4A7C15ULL);
    std::uniform_real_distribution<double> jitter(-0.1, 0.1);
    for (const auto& p : model.parameters()) {
      Tensor t = p.tensor;
      for (Real& v : t.mutable_data()) v += static_cast<Real>(jitter(rng));
    }

    std::vector<NamedTensor> params(model.parameters().begin(), model.parameters().end());
    const auto loss_fn = [&]() { return model.forward(data.records).prediction.l; };
    GradcheckRun run;
    run.seed = seed;
    run.result = finite_difference_check(loss_fn, params, options.eps, options.stencil);
    run.seconds = seconds_since(start);
    runs.push_back(std::move(run));
  }
  return runs;
}

}  // namespace mmsair
