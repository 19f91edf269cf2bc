#include "hbc/evaluate.hpp"

#include <cmath>
#include <sstream>

#include <json.hpp>

#include "hbc/error.hpp"
#include "hbc/textio.hpp"
#include "hbc/wfdb.hpp"

namespace hbc {

std::size_t ConfusionMatrix::total() const {
  std::size_t t = 0;
  for (const auto& row : counts)
    for (std::size_t v : row) t += v;
  return t;
}

std::size_t ConfusionMatrix::row_total(int c) const {
  std::size_t t = 0;
  for (std::size_t v : counts[static_cast<std::size_t>(c)]) t += v;
  return t;
}

std::size_t ConfusionMatrix::column_total(int c) const {
  std::size_t t = 0;
  for (const auto& row : counts) t += row[static_cast<std::size_t>(c)];
  return t;
}

std::array<std::array<double, kNumClasses>, kNumClasses> ConfusionMatrix::row_normalized() const {
  std::array<std::array<double, kNumClasses>, kNumClasses> out{};
  for (int r = 0; r < kNumClasses; ++r) {
    const std::size_t n = row_total(r);
    if (n == 0) continue;
    for (int c = 0; c < kNumClasses; ++c)
      out[r][c] = static_cast<double>(counts[r][c]) / static_cast<double>(n);
  }
  return out;
}

ConfusionMatrix confusion(std::span<const int> predictions, std::span<const int> labels) {
  if (predictions.size() != labels.size())
    throw InputError("confusion: " + std::to_string(predictions.size()) + " predictions for " +
                     std::to_string(labels.size()) + " labels");
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int t = labels[i], p = predictions[i];
    if (t < 0 || t >= kNumClasses || p < 0 || p >= kNumClasses)
      throw InputError("confusion: class index outside 0..4 at position " + std::to_string(i));
    ++cm.counts[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)];
  }
  return cm;
}

ClassMetrics metrics(const ConfusionMatrix& cm) {
  ClassMetrics m;
  m.total = cm.total();
  if (m.total == 0) throw InputError("metrics: empty confusion matrix");
  std::size_t trace = 0;
  for (int c = 0; c < kNumClasses; ++c) {
    ClassMetric& k = m.per_class[static_cast<std::size_t>(c)];
    const auto tp = cm.counts[c][c];
    trace += tp;
    const std::size_t actual = cm.row_total(c);
    const std::size_t predicted = cm.column_total(c);
    k.support = actual;
    k.recall_defined = actual > 0;
    k.precision_defined = predicted > 0;
    k.recall = actual ? static_cast<double>(tp) / static_cast<double>(actual) : 0.0;
    k.precision = predicted ? static_cast<double>(tp) / static_cast<double>(predicted) : 0.0;
    k.f1_defined = k.precision + k.recall > 0.0;
    k.f1 = k.f1_defined ? 2.0 * k.precision * k.recall / (k.precision + k.recall) : 0.0;
  }
  m.accuracy = static_cast<double>(trace) / static_cast<double>(m.total);
  return m;
}

double percent_1dp(double fraction) {
  // The small offset absorbs binary representation error at exact halves.
  return std::floor(fraction * 1000.0 + 0.5 + 1e-9) / 10.0;
}

std::string confusion_to_json(const ConfusionMatrix& cm) {
  nlohmann::ordered_json j;
  j["rows"] = "true class";
  j["columns"] = "predicted class";
  for (int c = 0; c < kNumClasses; ++c)
    j["classes"].push_back(std::string(class_name(static_cast<HeartbeatClass>(c))));
  for (const auto& row : cm.counts) j["counts"].push_back(row);
  return j.dump(2);
}

ConfusionMatrix confusion_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  ConfusionMatrix cm;
  const auto& rows = j.at("counts");
  if (rows.size() != kNumClasses) throw ParseError("confusion matrix must have 5 rows", 0);
  for (std::size_t r = 0; r < kNumClasses; ++r) {
    if (rows[r].size() != kNumClasses) throw ParseError("confusion matrix must have 5 columns", 0);
    for (std::size_t c = 0; c < kNumClasses; ++c) cm.counts[r][c] = rows[r][c].get<std::size_t>();
  }
  return cm;
}

namespace {

nlohmann::ordered_json metrics_json(const ClassMetrics& m) {
  nlohmann::ordered_json j;
  j["total"] = m.total;
  j["accuracy"] = m.accuracy;
  j["accuracy_pct"] = percent_1dp(m.accuracy);
  for (int c = 0; c < kNumClasses; ++c) {
    const ClassMetric& k = m.per_class[static_cast<std::size_t>(c)];
    nlohmann::ordered_json e;
    e["class"] = std::string(class_name(static_cast<HeartbeatClass>(c)));
    e["support"] = k.support;
    e["precision"] = k.precision;
    e["recall"] = k.recall;
    e["f1"] = k.f1;
    e["f1_pct"] = percent_1dp(k.f1);
    e["recall_pct"] = percent_1dp(k.recall);
    if (!k.precision_defined) e["precision_undefined"] = true;
    if (!k.recall_defined) e["recall_undefined"] = true;
    if (!k.f1_defined) e["f1_undefined"] = true;
    j["classes"].push_back(e);
  }
  return j;
}

}  // namespace

std::string metrics_to_json(const ClassMetrics& m, const ConfusionMatrix& cm) {
  nlohmann::ordered_json j = metrics_json(m);
  j["confusion"] = nlohmann::ordered_json::parse(confusion_to_json(cm));
  return j.dump(2);
}

namespace published {

const ModelRow* model_row(const std::string& preset) {
  for (const ModelRow& r : kModels)
    if (preset == r.preset) return &r;
  return nullptr;
}

const SchemeRow* scheme_row(const std::string& preset, const std::string& scheme) {
  for (const SchemeRow& r : kSchemes)
    if (preset == r.preset && scheme == r.scheme) return &r;
  return nullptr;
}

}  // namespace published

BenchmarkGrid run_benchmark(const std::map<std::string, ModelParameters>& models,
                            std::span<const QuantScheme> schemes, const EvalSet& test,
                            const EvalSet& calibration) {
  BenchmarkGrid grid;
  if (test.size() == 0) throw InputError("benchmark: empty test split");
  for (const std::string& name : preset_names()) {
    const auto it = models.find(name);
    if (it == models.end()) {
      grid.warnings.push_back("preset " + name + " not trained; rows skipped");
      continue;
    }
    const ModelParameters& model = it->second;
    std::optional<Calibration> calib;
    for (QuantScheme s : schemes) {
      if (s == QuantScheme::Int8Full && !calib)
        calib = calibrate_activations(model, calibration.inputs, calibration.size());
      const QuantizedModel qm = quantize(model, s, calib ? &*calib : nullptr);
      for (const std::string& w : qm.warnings) grid.warnings.push_back(name + " " + w);
      const auto probs = quantized_infer(qm, test.inputs, test.size());
      BenchmarkRow row;
      row.preset = name;
      row.scheme = s;
      row.params = count_params(model.config);
      row.confusion = confusion(argmax_rows(probs), test.labels);
      const ClassMetrics m = metrics(row.confusion);
      row.accuracy = m.accuracy;
      for (std::size_t c = 0; c < kNumClasses; ++c) row.f1[c] = m.per_class[c].f1;
      row.file_size = model_size_bytes(qm, SizeConvention::FileSize);
      row.weights_only = model_size_bytes(qm, SizeConvention::WeightsOnly);
      grid.rows.push_back(std::move(row));
    }
  }
  return grid;
}

namespace {

std::string opt(const std::optional<double>& v, int decimals) {
  return v ? format_fixed(*v, decimals) : "";
}

}  // namespace

std::string benchmark_csv(const BenchmarkGrid& grid) {
  std::ostringstream out;
  out << "preset,scheme,params,accuracy_pct";
  for (int c = 0; c < kNumClasses; ++c)
    out << ",f1_" << class_name(static_cast<HeartbeatClass>(c)) << "_pct";
  out << ",file_bytes,file_kb,weights_only_bytes,weights_only,published_accuracy_pct,published_memory_kb";
  for (int c = 0; c < kNumClasses; ++c)
    out << ",published_f1_" << class_name(static_cast<HeartbeatClass>(c)) << "_pct";
  out << '\n';
  for (const BenchmarkRow& r : grid.rows) {
    const std::string scheme(scheme_name(r.scheme));
    out << r.preset << ',' << scheme << ',' << r.params << ','
        << format_fixed(percent_1dp(r.accuracy), 1);
    for (double f : r.f1) out << ',' << format_fixed(percent_1dp(f), 1);
    out << ',' << r.file_size << ',' << format_fixed(kib(r.file_size), 2) << ',' << r.weights_only
        << ',' << format_size(r.weights_only);
    const published::SchemeRow* ref = published::scheme_row(r.preset, scheme);
    out << ',' << (ref ? opt(ref->accuracy, 1) : "") << ',' << (ref ? opt(ref->memory_kb, 0) : "");
    for (int c = 0; c < kNumClasses; ++c)
      out << ',' << (ref ? format_fixed(ref->f1[static_cast<std::size_t>(c)], 1) : "");
    out << '\n';
  }
  return out.str();
}

std::string benchmark_json(const BenchmarkGrid& grid) {
  nlohmann::ordered_json j;
  j["size_base"] = 1024;
  j["rows"] = nlohmann::ordered_json::array();
  for (const BenchmarkRow& r : grid.rows) {
    const std::string scheme(scheme_name(r.scheme));
    nlohmann::ordered_json e;
    e["preset"] = r.preset;
    e["scheme"] = scheme;
    e["params"] = r.params;
    e["accuracy"] = r.accuracy;
    e["accuracy_pct"] = percent_1dp(r.accuracy);
    for (int c = 0; c < kNumClasses; ++c)
      e["f1_pct"][std::string(class_name(static_cast<HeartbeatClass>(c)))] =
          percent_1dp(r.f1[static_cast<std::size_t>(c)]);
    e["file_bytes"] = r.file_size;
    e["weights_only_bytes"] = r.weights_only;
    e["weights_only"] = format_size(r.weights_only);
    e["confusion"] = r.confusion.counts;
    if (const published::SchemeRow* ref = published::scheme_row(r.preset, scheme)) {
      nlohmann::ordered_json p;
      if (ref->accuracy) p["accuracy_pct"] = *ref->accuracy;
      if (ref->memory_kb) p["memory_kb"] = *ref->memory_kb;
      for (int c = 0; c < kNumClasses; ++c)
        p["f1_pct"][std::string(class_name(static_cast<HeartbeatClass>(c)))] =
            ref->f1[static_cast<std::size_t>(c)];
      e["published"] = p;
    }
    j["rows"].push_back(e);
  }
  j["warnings"] = grid.warnings;
  return j.dump(2) + "\n";
}

std::string memory_plot_csv(const BenchmarkGrid& grid) {
  std::ostringstream out;
  out << "preset,scheme,file_kb,published_kb\n";
  for (const BenchmarkRow& r : grid.rows) {
    const std::string scheme(scheme_name(r.scheme));
    const published::SchemeRow* ref = published::scheme_row(r.preset, scheme);
    out << r.preset << ',' << scheme << ',' << format_fixed(kib(r.file_size), 2) << ','
        << (ref ? opt(ref->memory_kb, 0) : "") << '\n';
  }
  return out.str();
}

std::string accuracy_plot_csv(const BenchmarkGrid& grid) {
  std::ostringstream out;
  out << "preset,scheme,accuracy_pct,published_accuracy_pct\n";
  for (const BenchmarkRow& r : grid.rows) {
    const std::string scheme(scheme_name(r.scheme));
    const published::SchemeRow* ref = published::scheme_row(r.preset, scheme);
    out << r.preset << ',' << scheme << ',' << format_fixed(percent_1dp(r.accuracy), 1) << ','
        << (ref ? opt(ref->accuracy, 1) : "") << '\n';
  }
  return out.str();
}

AblationReport ablation_report(std::vector<AblationEntry> entries) {
  AblationReport rep;
  rep.entries = std::move(entries);
  const AblationEntry* six = nullptr;
  const AblationEntry* ten = nullptr;
  for (const AblationEntry& e : rep.entries) {
    if (e.mode == FeatureMode::Six) six = &e;
    if (e.mode == FeatureMode::Ten) ten = &e;
  }
  const auto rbbb = static_cast<std::size_t>(label_of(HeartbeatClass::RBBB));
  if (six && ten)
    rep.rbbb_gain = 100.0 * (ten->metrics.per_class[rbbb].recall - six->metrics.per_class[rbbb].recall);
  return rep;
}

std::string ablation_csv(const AblationReport& report) {
  std::ostringstream out;
  out << "mode,accuracy_pct";
  for (int c = 0; c < kNumClasses; ++c)
    out << ",recall_" << class_name(static_cast<HeartbeatClass>(c)) << "_pct";
  out << ",published_rbbb_recall_pct,published_lbbb_recall_pct\n";
  for (const AblationEntry& e : report.entries) {
    out << feature_mode_name(e.mode) << ',' << format_fixed(percent_1dp(e.metrics.accuracy), 1);
    for (const ClassMetric& k : e.metrics.per_class) out << ',' << format_fixed(100.0 * k.recall, 2);
    switch (e.mode) {
      case FeatureMode::Six:
        out << ',' << format_fixed(published::kRbbbRecallSix, 2) << ','
            << format_fixed(published::kLbbbRecallSix, 2);
        break;
      case FeatureMode::Eight:
        out << ',' << format_fixed(published::kRbbbRecallEight, 2) << ','
            << format_fixed(published::kLbbbRecallEight, 2);
        break;
      case FeatureMode::Ten:
        out << ',' << format_fixed(published::kRbbbRecallTen, 2) << ',';
        break;
    }
    out << '\n';
  }
  if (report.rbbb_gain) out << "# rbbb_recall_gain_pct," << format_fixed(*report.rbbb_gain, 2) << '\n';
  return out.str();
}

}  // namespace hbc
