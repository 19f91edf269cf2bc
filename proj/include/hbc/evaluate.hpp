#pragma once

// Classification metrics, the preset × scheme benchmark grid and the feature
// fusion ablation table.

#include <array>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hbc/features.hpp"
#include "hbc/nn.hpp"
#include "hbc/quantize.hpp"

namespace hbc {

struct ConfusionMatrix {
  // counts[true][predicted]
  std::array<std::array<std::size_t, kNumClasses>, kNumClasses> counts{};

  std::size_t total() const;
  std::size_t row_total(int c) const;
  std::size_t column_total(int c) const;
  // Row-normalized view; rows with no beats are all zero.
  std::array<std::array<double, kNumClasses>, kNumClasses> row_normalized() const;
  bool operator==(const ConfusionMatrix&) const = default;
};

// Throws InputError on length mismatch or labels outside 0..4.
ConfusionMatrix confusion(std::span<const int> predictions, std::span<const int> labels);

struct ClassMetric {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  bool precision_defined = true;  // false when the class was never predicted
  bool recall_defined = true;     // false when the class has no beats
  bool f1_defined = true;         // false when precision + recall = 0
  std::size_t support = 0;
};

struct ClassMetrics {
  std::array<ClassMetric, kNumClasses> per_class{};
  double accuracy = 0.0;
  std::size_t total = 0;
};

// Fractions in [0, 1]. Throws InputError on an empty matrix.
ClassMetrics metrics(const ConfusionMatrix& cm);

// Percent rounded half-up to one decimal: 0.9605 -> 96.1.
double percent_1dp(double fraction);

std::string confusion_to_json(const ConfusionMatrix& cm);
ConfusionMatrix confusion_from_json(const std::string& text);
std::string metrics_to_json(const ClassMetrics& m, const ConfusionMatrix& cm);

// Reference values from the published tables, kept for side-by-side reports.
namespace published {

struct ModelRow {
  const char* preset;
  double accuracy;                       // percent
  std::array<double, kNumClasses> f1;    // N, PB, LBBB, RBBB, PVC
  std::size_t params;
  const char* memory;
  std::size_t flops;
};
inline constexpr std::array<ModelRow, 4> kModels = {{
    {"T", 94.7, {96.9, 96.6, 88.8, 85.1, 89.1}, 83973, "328 kB", 71584},
    {"S", 95.1, {97.2, 97.2, 89.4, 87.2, 89.0}, 149765, "585 kB", 121472},
    {"M", 95.5, {97.1, 97.6, 91.4, 84.8, 89.6}, 478469, "1.83 MB", 351872},
    {"L", 96.1, {97.6, 98.0, 90.8, 89.1, 90.4}, 1250053, "4.77 MB", 996992},
}};

struct SchemeRow {
  const char* preset;
  const char* scheme;
  std::optional<double> memory_kb;
  std::optional<double> accuracy;
  std::array<double, kNumClasses> f1;
};
// Memory and accuracy are only listed where the text states them.
inline const std::array<SchemeRow, 16> kSchemes = {{
    {"T", "fp32", 328.0, 94.7, {96.8, 96.9, 88.9, 80.4, 89.4}},
    {"T", "fp16", 203.0, 94.6, {89.3, 83.8, 66.1, 27.3, 76.1}},
    {"T", "int8", 159.0, std::nullopt, {86.9, 73.2, 50.2, 12.7, 74.9}},
    {"T", "drq", 139.0, 94.6, {96.8, 96.9, 88.9, 80.5, 89.4}},
    {"S", "fp32", 585.0, 95.1, {97.4, 97.6, 91.9, 88.5, 90.4}},
    {"S", "fp16", 331.0, 89.4, {95.1, 94.4, 84.6, 75.3, 85.5}},
    {"S", "int8", 229.0, std::nullopt, {89.5, 87.6, 62.2, 27.0, 74.6}},
    {"S", "drq", std::nullopt, std::nullopt, {97.4, 97.5, 91.9, 88.5, 90.4}},
    {"M", "fp32", 1874.0, 95.5, {97.8, 98.0, 93.1, 90.3, 90.8}},
    {"M", "fp16", 991.0, 91.2, {97.5, 97.4, 91.6, 87.8, 90.8}},
    {"M", "int8", 601.0, std::nullopt, {86.4, 61.6, 48.6, 36.4, 69.5}},
    {"M", "drq", std::nullopt, std::nullopt, {97.8, 98.0, 93.1, 90.3, 90.9}},
    {"L", "fp32", 4884.0, 96.1, {97.7, 98.0, 92.8, 90.0, 91.3}},
    {"L", "fp16", 2481.0, 95.7, {97.6, 97.6, 92.2, 88.3, 91.1}},
    {"L", "int8", 1352.0, 88.4, {92.6, 91.3, 77.2, 51.5, 83.4}},
    {"L", "drq", 1362.0, 96.4, {97.8, 98.0, 92.6, 89.6, 91.3}},
}};

// RBBB / LBBB recall (percent) by feature mode, Bi-LSTM(64,64), p = 0.5.
inline constexpr double kRbbbRecallSix = 31.40;
inline constexpr double kRbbbRecallEight = 68.27;
inline constexpr double kRbbbRecallTen = 84.30;
inline constexpr double kLbbbRecallSix = 69.58;
inline constexpr double kLbbbRecallEight = 86.01;

// Stated epoch length (floor of 73180 / 64).
inline constexpr std::size_t kTrainSamples = 73180;
inline constexpr std::size_t kIterationsPerEpoch = 1143;

// Fiducial detection scores (percent).
inline constexpr double kRSensitivity = 99.8;
inline constexpr double kRPrecision = 99.95;
inline constexpr double kPSensitivity = 84.0;
inline constexpr double kPPrecision = 84.6;

const ModelRow* model_row(const std::string& preset);
const SchemeRow* scheme_row(const std::string& preset, const std::string& scheme);

}  // namespace published

// Test split in model-input form, with the features kept for ablations.
struct EvalSet {
  std::vector<float> inputs;  // n × sequence_length
  std::vector<int> labels;
  std::size_t size() const { return labels.size(); }
};

struct BenchmarkRow {
  std::string preset;
  QuantScheme scheme = QuantScheme::Fp32;
  std::size_t params = 0;
  double accuracy = 0.0;
  std::array<double, kNumClasses> f1{};
  std::size_t file_size = 0;
  std::size_t weights_only = 0;
  ConfusionMatrix confusion;
};

struct BenchmarkGrid {
  std::vector<BenchmarkRow> rows;
  std::vector<std::string> warnings;
};

// Evaluates every available preset under every scheme on the same split.
// `calibration` supplies INT8 activation ranges (training beats). Missing
// presets are skipped with a warning.
BenchmarkGrid run_benchmark(const std::map<std::string, ModelParameters>& models,
                            std::span<const QuantScheme> schemes, const EvalSet& test,
                            const EvalSet& calibration);

// Measured values next to the published ones.
std::string benchmark_csv(const BenchmarkGrid& grid);
std::string benchmark_json(const BenchmarkGrid& grid);
// Per-figure plot data: memory (kB) and accuracy (%) per preset and scheme.
std::string memory_plot_csv(const BenchmarkGrid& grid);
std::string accuracy_plot_csv(const BenchmarkGrid& grid);

struct AblationEntry {
  FeatureMode mode = FeatureMode::Ten;
  ClassMetrics metrics;
  ConfusionMatrix confusion;
};

struct AblationReport {
  std::vector<AblationEntry> entries;
  // RBBB recall (percent points) of the ten-feature model minus the
  // six-feature model; empty when either is missing.
  std::optional<double> rbbb_gain;
};

AblationReport ablation_report(std::vector<AblationEntry> entries);
std::string ablation_csv(const AblationReport& report);

}  // namespace hbc
