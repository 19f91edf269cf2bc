#pragma once

// Stage drivers behind the command-line tool. Each stage reads the artifacts
// of earlier stages from the output directory, writes its own under
// `<out>/<stage>/`, and leaves the effective configuration beside them as
// `config.txt`.
//
//   ingest     records.txt, beats.csv, split.json, inventory.csv
//   denoise    <record>.f64 (little-endian doubles, selected lead)
//   detect     <record>.csv fiducials, scores.json
//   features   dataset.csv, stats.json, assembly.json
//   train      <model>/model.bin, <model>/metrics.json
//   quantize   <model>/<scheme>.bin, <model>/summary.json
//   eval       <model>/<scheme>/metrics.json
//   benchmark  grid.csv, grid.json, memory_plot.csv, accuracy_plot.csv
//   ablation   ablation.csv, ablation.json, architectures.json

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "hbc/evaluate.hpp"
#include "hbc/features.hpp"
#include "hbc/fiducials.hpp"
#include "hbc/nn.hpp"
#include "hbc/quantize.hpp"
#include "hbc/wfdb.hpp"

namespace hbc {

struct PipelineConfig {
  std::string data_dir;
  std::string out_dir = "out";
  std::vector<std::string> records;  // empty: every record in data_dir
  std::size_t lead = 0;
  std::uint64_t seed = 1;
  SplitStrategy split = SplitStrategy::StratifiedBeat;
  int threads = 1;
  DetectorConfig detector;
  FeatureMode features = FeatureMode::Ten;
  RrReference rr = RrReference::RPeaks;
  std::string preset = "T";
  std::vector<std::string> presets = {"T", "S", "M", "L"};
  double dropout = 0.25;
  TrainSpec train;  // train.seed is ignored; `seed` drives every stage
  QuantScheme scheme = QuantScheme::Drq;        // quantize stage
  QuantScheme eval_scheme = QuantScheme::Fp32;  // eval stage
  std::size_t calib_size = 512;
  bool ablation = false;  // reproduce also runs the ablation stage
  double ablation_dropout = 0.5;
};

// Key-value text, one `key = value` per line; '#' starts a comment.
std::string config_to_text(const PipelineConfig& config);
// Keys absent from `text` keep the value in `base`. Unknown keys and bad
// values raise ParseError with the line number.
PipelineConfig config_from_text(std::string_view text, PipelineConfig base = {});
PipelineConfig load_config(const std::filesystem::path& path, PipelineConfig base = {});

// Directory under out_dir for the model trained with this config:
// the preset name, suffixed with the feature mode when it is not ten.
std::string model_tag(const PipelineConfig& config);

void run_ingest(const PipelineConfig& config);
void run_denoise(const PipelineConfig& config);
void run_detect(const PipelineConfig& config);
void run_features(const PipelineConfig& config);
void run_train(const PipelineConfig& config);
void run_quantize(const PipelineConfig& config);
void run_eval(const PipelineConfig& config);
void run_benchmark(const PipelineConfig& config);
void run_ablation(const PipelineConfig& config);
// ingest → denoise → detect → features → train (every preset) → benchmark,
// then ablation when enabled.
void run_reproduce(const PipelineConfig& config);

// Model inputs built from dataset rows: z-scored features in the mode's
// order, one row per beat.
struct SplitData {
  TrainingData train;
  EvalSet test;
};
SplitData make_split_data(std::span<const DatasetRow> rows, const NormalizationStats& stats,
                          FeatureMode mode);

// `count` training rows drawn without replacement (all of them if fewer).
TrainingData calibration_subset(const TrainingData& train, std::size_t count, std::uint64_t seed);

// Denoised signal files.
void write_f64(const std::filesystem::path& path, std::span<const double> values);
std::vector<double> read_f64(const std::filesystem::path& path);

}  // namespace hbc
