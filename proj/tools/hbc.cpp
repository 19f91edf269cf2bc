// Command-line front end for the heartbeat classification pipeline.

#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hbc/error.hpp"
#include "hbc/kernels.hpp"
#include "hbc/pipeline.hpp"

namespace {

struct Flags {
  std::optional<std::string> config, data, out, split, features, preset, optimizer, scheme, rr;
  std::optional<std::vector<std::string>> records, presets;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads, epochs;
  std::optional<std::size_t> batch, calib, lead;
  std::optional<double> lr, dropout, threshold;
  bool class_weights = false;
  bool ablation = false;
};

void add_common(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config, "Key-value config file; flags override it");
  cmd->add_option("--data", f.data, "WFDB data directory (default: $HBC_DATA_DIR)");
  cmd->add_option("--out", f.out, "Output directory (default: out)");
  cmd->add_option("--records,--record", f.records, "Records to process (default: all)")
      ->delimiter(',');
  cmd->add_option("--seed", f.seed, "Seed for split, initialization and shuffling");
  cmd->add_option("--split", f.split, "stratified-beat | by-record");
  cmd->add_option("--threads", f.threads, "Worker threads (default 1)");
  cmd->add_option("--lead", f.lead, "Signal index to analyse (default 0)");
}

void add_detector(CLI::App* cmd, Flags& f) {
  cmd->add_option("--threshold", f.threshold, "R gate as a fraction of the envelope percentile");
}

void add_model(CLI::App* cmd, Flags& f) {
  cmd->add_option("--preset", f.preset, "T | S | M | L");
  cmd->add_option("--features", f.features, "six | eight | ten");
}

void add_training(CLI::App* cmd, Flags& f) {
  cmd->add_option("--epochs", f.epochs, "Training epochs");
  cmd->add_option("--batch", f.batch, "Mini-batch size");
  cmd->add_option("--optimizer", f.optimizer, "adam | sgd");
  cmd->add_option("--lr", f.lr, "Learning rate");
  cmd->add_option("--dropout", f.dropout, "Dropout rate before the dense layer");
  cmd->add_flag("--class-weights", f.class_weights, "Inverse-frequency loss weights");
}

hbc::PipelineConfig build_config(const Flags& f, const std::string& command) {
  hbc::PipelineConfig c;
  if (f.config) c = hbc::load_config(*f.config, c);
  if (c.data_dir.empty())
    if (const char* env = std::getenv("HBC_DATA_DIR")) c.data_dir = env;
  if (f.data) c.data_dir = *f.data;
  if (f.out) c.out_dir = *f.out;
  if (f.records) c.records = *f.records;
  if (f.seed) c.seed = *f.seed;
  if (f.split) c.split = hbc::split_strategy_from_name(*f.split);
  if (f.threads) c.threads = *f.threads;
  if (f.lead) c.lead = *f.lead;
  if (f.threshold) c.detector.r_threshold = *f.threshold;
  if (f.features) c.features = hbc::feature_mode_from_name(*f.features);
  if (f.rr) c.rr = hbc::rr_reference_from_name(*f.rr);
  if (f.preset) c.preset = *f.preset;
  if (f.presets) c.presets = *f.presets;
  if (f.epochs) c.train.epochs = *f.epochs;
  if (f.batch) c.train.batch_size = *f.batch;
  if (f.optimizer) c.train.optimizer = hbc::optimizer_from_name(*f.optimizer);
  if (f.lr) c.train.learning_rate = *f.lr;
  if (f.dropout) c.dropout = *f.dropout;
  if (f.class_weights) c.train.class_weights = true;
  if (f.calib) c.calib_size = *f.calib;
  if (f.ablation) c.ablation = true;
  if (f.scheme) {
    if (command == "eval") c.eval_scheme = hbc::scheme_from_name(*f.scheme);
    else c.scheme = hbc::scheme_from_name(*f.scheme);
  }
  if (c.threads < 1) throw hbc::InputError("--threads must be >= 1");
  if (c.train.batch_size == 0) throw hbc::InputError("--batch must be >= 1");
  if (c.train.epochs < 1) throw hbc::InputError("--epochs must be >= 1");
  if (command == "quantize" && c.scheme == hbc::QuantScheme::Fp32)
    throw hbc::InputError("quantize: choose --scheme fp16, int8 or drq");
  return c;
}

constexpr int kRuntimeFailure = 1;
constexpr int kUsageFailure = 2;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Heartbeat classification pipeline: WFDB ingestion, wavelet denoising, fiducial "
               "detection, feature fusion, Bi-LSTM training and post-training quantization."};
  app.require_subcommand(1);
  Flags f;

  auto* ingest = app.add_subcommand("ingest", "Parse records, build the beat inventory and split");
  add_common(ingest, f);
  auto* denoise = app.add_subcommand("denoise", "Wavelet-denoise the selected lead of each record");
  add_common(denoise, f);
  auto* detect = app.add_subcommand("detect", "Detect PQRST fiducials and score R/P against annotations");
  add_common(detect, f);
  add_detector(detect, f);
  auto* features = app.add_subcommand("features", "Assemble per-beat time and area features");
  add_common(features, f);
  features->add_option("--mode,--features", f.features, "six | eight | ten (recorded for training)");
  features->add_option("--rr", f.rr, "RR interval between consecutive r (default) or t peaks");
  auto* train = app.add_subcommand("train", "Train a preset on the fused features");
  add_common(train, f);
  add_model(train, f);
  add_training(train, f);
  auto* quantize = app.add_subcommand("quantize", "Quantize a trained model");
  add_common(quantize, f);
  add_model(quantize, f);
  quantize->add_option("--scheme", f.scheme, "fp16 | int8 | drq");
  quantize->add_option("--calib-size", f.calib, "Training beats used for INT8 calibration (default 512)");
  auto* eval = app.add_subcommand("eval", "Evaluate a model on the test split");
  add_common(eval, f);
  add_model(eval, f);
  eval->add_option("--scheme", f.scheme, "fp32 | fp16 | int8 | drq (default fp32)");
  auto* bench = app.add_subcommand("benchmark", "Every trained preset under every scheme");
  add_common(bench, f);
  bench->add_option("--presets", f.presets, "Presets to include")->delimiter(',');
  bench->add_option("--features", f.features, "six | eight | ten");
  bench->add_option("--calib-size", f.calib, "Training beats used for INT8 calibration");
  auto* ablation = app.add_subcommand("ablation", "Feature-fusion and LSTM/Bi-LSTM comparisons");
  add_common(ablation, f);
  add_training(ablation, f);
  auto* repro = app.add_subcommand("reproduce", "Run every stage and write the benchmark grid");
  add_common(repro, f);
  add_detector(repro, f);
  add_training(repro, f);
  repro->add_option("--features", f.features, "six | eight | ten");
  repro->add_option("--presets", f.presets, "Presets to train (default T,S,M,L)")->delimiter(',');
  repro->add_option("--calib-size", f.calib, "Training beats used for INT8 calibration");
  repro->add_flag("--ablation", f.ablation, "Also run the ablation stage");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return kUsageFailure;
  }

  const CLI::App* cmd = app.get_subcommands().front();
  const std::string name = cmd->get_name();
  try {
    const hbc::PipelineConfig c = build_config(f, name);
    hbc::kernels::set_threads(c.threads);
    if (name == "ingest") hbc::run_ingest(c);
    else if (name == "denoise") hbc::run_denoise(c);
    else if (name == "detect") hbc::run_detect(c);
    else if (name == "features") hbc::run_features(c);
    else if (name == "train") hbc::run_train(c);
    else if (name == "quantize") hbc::run_quantize(c);
    else if (name == "eval") hbc::run_eval(c);
    else if (name == "benchmark") hbc::run_benchmark(c);
    else if (name == "ablation") hbc::run_ablation(c);
    else if (name == "reproduce") hbc::run_reproduce(c);
  } catch (const hbc::MissingArtifact& e) {
    std::cerr << "error: " << e.what() << "\n";
    if (e.stage() == "data")
      std::cerr << "hint: point --data or HBC_DATA_DIR at a WFDB record directory\n";
    else
      std::cerr << "hint: run `hbc " << e.stage() << "` first\n";
    return kRuntimeFailure;
  } catch (const hbc::ParseError& e) {
    std::cerr << "parse error: " << e.what() << " (at " << e.position() << ")\n";
    return kRuntimeFailure;
  } catch (const hbc::InputError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kRuntimeFailure;
  } catch (const hbc::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kRuntimeFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntimeFailure;
  }
  return 0;
}
