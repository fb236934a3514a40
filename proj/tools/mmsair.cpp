// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end: train, eval, ablate, task-grid, stats, gradcheck.
// Model and data options live on the top-level command so that a --config
// file can set them for every subcommand; flags given on the command line
// override values read from the file.

#include <CLI11.hpp>

#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "mmsair/checkpoint.hpp"
#include "mmsair/dataset.hpp"
#include "mmsair/embedding_store.hpp"
#include "mmsair/errors.hpp"
#include "mmsair/harness.hpp"

namespace fs = std::filesystem;
using namespace mmsair;

namespace {

struct DataOptions {
  std::string dataset;
  std::string test_dataset;
  std::string field_map;
  std::string image_root;
  double train_fraction = kDefaultTrainFraction;
  std::uint64_t split_seed = kDefaultSplitSeed;
  std::string context_store;
  std::string sticker_text_store;
  std::string image_store;
};

struct OutputOptions {
  std::string report;
  std::string epoch_log;
  std::string checkpoint;
  bool save_optimizer = false;
  std::string resume;
};

struct ConfigFlags {
  std::string context_provider = "toy";
  std::string sticker_text_provider = "toy";
  std::string image_provider = "toy";
  std::string task_mode = "joint";
};

void add_config_options(CLI::App& app, TrainConfig& c, ConfigFlags& f) {
  app.add_option("--epochs", c.epochs, "Training epochs")->capture_default_str();
  app.add_option("--train-batch", c.train_batch, "Training batch size")->capture_default_str();
  app.add_option("--eval-batch", c.eval_batch, "Evaluation batch size")->capture_default_str();
  app.add_option("--learning-rate", c.optimizer.learning_rate, "Adam learning rate")->capture_default_str();
  app.add_option("--beta1", c.optimizer.beta1, "Adam beta1")->capture_default_str();
  app.add_option("--beta2", c.optimizer.beta2, "Adam beta2")->capture_default_str();
  app.add_option("--adam-epsilon", c.optimizer.epsilon, "Adam epsilon")->capture_default_str();
  app.add_option("--alpha", c.loss_weights.alpha, "Sentiment loss weight")->capture_default_str();
  app.add_option("--beta", c.loss_weights.beta, "Intent loss weight")->capture_default_str();
  app.add_option("--d-model", c.encoder.d_model, "Embedding width")->capture_default_str();
  app.add_option("--vocab-size", c.encoder.vocab_size, "Hashed vocabulary size")->capture_default_str();
  app.add_option("--image-input-dim", c.encoder.image_input_dim, "Thumbnail pixel count")->capture_default_str();
  app.add_option("--conv-kernel", c.encoder.conv_kernel, "Image convolution kernel width")->capture_default_str();
  app.add_option("--context-provider", f.context_provider, "toy or precomputed")
      ->check(CLI::IsMember({"toy", "precomputed"}))
      ->capture_default_str();
  app.add_option("--sticker-text-provider", f.sticker_text_provider, "toy or precomputed")
      ->check(CLI::IsMember({"toy", "precomputed"}))
      ->capture_default_str();
  app.add_option("--image-provider", f.image_provider, "toy or precomputed")
      ->check(CLI::IsMember({"toy", "precomputed"}))
      ->capture_default_str();
  app.add_option("--num-heads", c.num_heads, "Attention heads")->capture_default_str();
  app.add_option("--d-comb", c.d_comb, "Combined embedding width, 0 for d-model")->capture_default_str();
  app.add_flag("--drop-context", c.ablation.drop_context, "Replace the context embedding with zeros");
  app.add_flag("--drop-sticker-image", c.ablation.drop_sticker_image, "Replace the image embedding with zeros");
  app.add_flag("--drop-sticker-text", c.ablation.drop_sticker_text, "Replace the sticker-text embedding with zeros");
  app.add_option("--task-mode", f.task_mode, "joint, sentiment_only or intent_only")
      ->check(CLI::IsMember({"joint", "sentiment_only", "intent_only"}))
      ->capture_default_str();
  app.add_option("--seed", c.seed, "Model and shuffle seed")->capture_default_str();
}

void add_data_options(CLI::App& app, DataOptions& d) {
  app.add_option("--data", d.dataset, "Dataset JSONL file");
  app.add_option("--test-data", d.test_dataset, "Held-out JSONL file; disables the random split");
  app.add_option("--field-map", d.field_map, "JSON object mapping canonical field names to dataset keys");
  app.add_option("--image-root", d.image_root, "Directory that sticker_image_ref paths are relative to");
  app.add_option("--train-fraction", d.train_fraction, "Train share of the random split")->capture_default_str();
  app.add_option("--split-seed", d.split_seed, "Seed of the random split")->capture_default_str();
  app.add_option("--context-store", d.context_store, "Embedding store for the precomputed context provider");
  app.add_option("--sticker-text-store", d.sticker_text_store,
                 "Embedding store for the precomputed sticker-text provider");
  app.add_option("--image-store", d.image_store, "Embedding store for the precomputed image provider");
}

void apply_flags(TrainConfig& c, const ConfigFlags& f) {
  c.encoder.context_provider = parse_provider_kind(f.context_provider);
  c.encoder.sticker_text_provider = parse_provider_kind(f.sticker_text_provider);
  c.encoder.image_provider = parse_provider_kind(f.image_provider);
  c.task_mode = parse_task_mode(f.task_mode);
}

Dataset load(const std::string& path, const DataOptions& d) {
  const FieldMapping mapping = d.field_map.empty() ? FieldMapping{} : FieldMapping::from_json_file(d.field_map);
  return load_dataset(path, mapping);
}

Dataset require_dataset(const DataOptions& d) {
  if (d.dataset.empty()) throw ConfigError("--data is required");
  return load(d.dataset, d);
}

DatasetSplit load_split(const DataOptions& d) {
  Dataset all = require_dataset(d);
  if (!d.test_dataset.empty()) return DatasetSplit{std::move(all), load(d.test_dataset, d)};
  return split_dataset(all, d.train_fraction, d.split_seed);
}

std::shared_ptr<const EmbeddingStore> open_store(const std::string& path, const char* flag) {
  if (path.empty()) throw ConfigError(std::string("precomputed provider needs ") + flag);
  return std::make_shared<const EmbeddingStore>(EmbeddingStore::open(path));
}

/// Loads whatever the configured providers need for the given records.
Providers build_providers(const EncoderConfig& c, const DataOptions& d, const Dataset& records) {
  Providers p;
  if (c.context_provider == ProviderKind::precomputed) {
    p.context_store = open_store(d.context_store, "--context-store");
  }
  if (c.sticker_text_provider == ProviderKind::precomputed) {
    p.sticker_text_store = open_store(d.sticker_text_store, "--sticker-text-store");
  }
  if (c.image_provider == ProviderKind::precomputed) {
    p.image_store = open_store(d.image_store, "--image-store");
  } else {
    const fs::path root = !d.image_root.empty() ? fs::path(d.image_root) : fs::path(d.dataset).parent_path();
    p.thumbnails = std::make_shared<const ThumbnailSet>(ThumbnailSet::load_directory(root, records, c.image_input_dim));
  }
  return p;
}

Dataset concat(const DatasetSplit& s) {
  Dataset all = s.train;
  all.insert(all.end(), s.test.begin(), s.test.end());
  return all;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

void emit_report(const nlohmann::json& report, const OutputOptions& o) {
  const std::string text = report.dump(2) + "\n";
  std::cout << text;
  if (!o.report.empty()) write_text(o.report, text);
}

int cmd_train(const TrainConfig& config, const DataOptions& d, const OutputOptions& o) {
  const DatasetSplit split = load_split(d);
  const Providers providers = build_providers(config.encoder, d, concat(split));
  std::optional<Checkpoint> resume;
  if (!o.resume.empty()) resume = Checkpoint::read(o.resume);

  TrainOptions options;
  if (!split.test.empty()) options.eval_set = &split.test;
  if (resume) options.resume_from = &*resume;
  const TrainResult result = train(config, split.train, providers, options);

  if (!o.epoch_log.empty()) {
    std::string lines;
    for (const auto& e : result.log) lines += e.to_json_line() + "\n";
    write_text(o.epoch_log, lines);
  }
  if (!o.checkpoint.empty()) result.checkpoint(o.save_optimizer).write(o.checkpoint);

  nlohmann::ordered_json report;
  report["train_size"] = split.train.size();
  report["test_size"] = split.test.size();
  report["epochs_completed"] = result.epochs_completed;
  report["runtime_seconds"] = result.runtime_seconds;
  report["final"] = evaluate(result.model, split.test.empty() ? split.train : split.test, "final").to_json();
  if (result.best_eval) {
    report["best_epoch"] = result.best_epoch;
    report["best"] = result.best_eval->to_json();
  }
  emit_report(nlohmann::json::parse(report.dump()), o);
  return 0;
}

int cmd_eval(const DataOptions& d, const OutputOptions& o, bool whole_dataset) {
  if (o.checkpoint.empty()) throw ConfigError("eval needs --checkpoint");
  const Checkpoint ck = Checkpoint::read(o.checkpoint);
  const Dataset records = whole_dataset ? require_dataset(d) : load_split(d).test;
  const TrainConfig stored = TrainConfig::from_json(nlohmann::json::parse(ck.config_json).at("config"));
  const Providers providers = build_providers(stored.encoder, d, records);
  emit_report(evaluate(ck, records, providers).to_json(), o);
  return 0;
}

template <typename Runner>
int cmd_table(const TrainConfig& config, const DataOptions& d, const OutputOptions& o, Runner run) {
  const DatasetSplit split = load_split(d);
  const Providers providers = build_providers(config.encoder, d, concat(split));
  const ExperimentTable table = run(config, split.train, split.test, providers);
  std::cerr << table.to_text();
  emit_report(table.to_json(), o);
  return 0;
}

int cmd_stats(const DataOptions& d, const OutputOptions& o) {
  const std::string text = label_statistics(require_dataset(d)).to_json();
  std::cout << text << "\n";
  if (!o.report.empty()) write_text(o.report, text + "\n");
  return 0;
}

int cmd_gradcheck(GradcheckOptions options, std::size_t seed_count, std::uint64_t first_seed,
                  const std::string& stencil, double tolerance) {
  options.stencil = stencil == "central2" ? Stencil::central2 : Stencil::central4;
  for (std::size_t i = 0; i < seed_count; ++i) options.seeds.push_back(first_seed + i);
  bool ok = true;
  for (const auto& run : run_gradcheck(options)) {
    const auto& r = run.result;
    std::printf("seed %llu: entries %zu, max relative error %.3e (%s[%zu]), max absolute error %.3e, %.2fs\n",
                static_cast<unsigned long long>(run.seed), r.entries_checked, r.max_relative_error,
                r.worst_parameter.c_str(), r.worst_index, r.max_absolute_error, run.seconds);
    if (r.failure) std::printf("  failure: %s\n", r.failure->c_str());
    ok = ok && r.passed(tolerance);
  }
  std::printf("%s (tolerance %.1e)\n", ok ? "PASS" : "FAIL", tolerance);
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multimodal sentiment and intent recognition for sticker chats"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Key-value configuration file; command-line flags take precedence");

  TrainConfig config;
  ConfigFlags flags;
  DataOptions data;
  OutputOptions out;
  add_config_options(app, config, flags);
  add_data_options(app, data);
  app.add_option("--report", out.report, "Also write the JSON report to this file");

  auto* train_cmd = app.add_subcommand("train", "Train on the split and report test metrics");
  train_cmd->add_option("--checkpoint", out.checkpoint, "Write the trained model here");
  train_cmd->add_flag("--save-optimizer", out.save_optimizer, "Store Adam state in the checkpoint");
  train_cmd->add_option("--resume", out.resume, "Continue training from this checkpoint");
  train_cmd->add_option("--epoch-log", out.epoch_log, "Write one JSON line per epoch here");

  bool whole_dataset = false;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint");
  eval_cmd->add_option("--checkpoint", out.checkpoint, "Checkpoint to evaluate")->required();
  eval_cmd->add_flag("--all", whole_dataset, "Evaluate every record instead of the test split");

  auto* ablate_cmd = app.add_subcommand("ablate", "Train the six modality ablation rows");
  auto* grid_cmd = app.add_subcommand("task-grid", "Train sentiment-only, intent-only and joint rows");
  auto* stats_cmd = app.add_subcommand("stats", "Print label statistics of the dataset");

  GradcheckOptions gc;
  std::size_t seed_count = 20;
  std::uint64_t first_seed = 1;
  std::string stencil = "central4";
  double tolerance = 1e-4;
  double eps = static_cast<double>(gc.eps);
  auto* gc_cmd = app.add_subcommand("gradcheck", "Compare analytic and finite-difference gradients");
  gc_cmd->add_option("--seeds", seed_count, "Number of seeds")->capture_default_str();
  gc_cmd->add_option("--first-seed", first_seed, "First seed")->capture_default_str();
  gc_cmd->add_option("--step", eps, "Finite-difference step")->capture_default_str();
  gc_cmd->add_option("--stencil", stencil, "central2 or central4")
      ->check(CLI::IsMember({"central2", "central4"}))
      ->capture_default_str();
  gc_cmd->add_option("--tolerance", tolerance, "Maximum relative error")->capture_default_str();
  gc_cmd->add_option("--batch", gc.batch, "Synthetic batch size")->capture_default_str();

  for (auto* sub : {train_cmd, eval_cmd, ablate_cmd, grid_cmd, stats_cmd, gc_cmd}) sub->fallthrough();

  CLI11_PARSE(app, argc, argv);

  try {
    apply_flags(config, flags);
    if (*train_cmd) return cmd_train(config, data, out);
    if (*eval_cmd) return cmd_eval(data, out, whole_dataset);
    if (*ablate_cmd)
      return cmd_table(config, data, out, [](const auto&... args) { return run_ablation(args...); });
    if (*grid_cmd)
      return cmd_table(config, data, out, [](const auto&... args) { return run_task_grid(args...); });
    if (*stats_cmd) return cmd_stats(data, out);
    if (*gc_cmd) {
      gc.eps = static_cast<Real>(eps);
      gc.task_mode = config.task_mode;
      gc.ablation = config.ablation;
      return cmd_gradcheck(gc, seed_count, first_seed, stencil, tolerance);
    }
  } catch (const MissingEmbeddingError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
