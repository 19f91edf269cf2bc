#include "hbc/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>

#include <json.hpp>

#include "hbc/bytes.hpp"
#include "hbc/error.hpp"
#include "hbc/kernels.hpp"
#include "hbc/rng.hpp"
#include "hbc/textio.hpp"
#include "hbc/wavelet.hpp"

namespace hbc {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

// ---------------------------------------------------------------- config

namespace {

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) out += (i ? "," : "") + items[i];
  return out;
}

std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  for (const std::string& f : split_csv(s)) {
    const std::string_view t = trim(f);
    if (!t.empty()) out.emplace_back(t);
  }
  return out;
}

bool parse_bool(std::string_view s, std::size_t line) {
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw ParseError("expected a boolean, got '" + std::string(s) + "'", line);
}

template <class F>
auto rethrow_at(std::size_t line, F&& f) {
  try {
    return f();
  } catch (const ParseError&) {
    throw;
  } catch (const Error& e) {
    throw ParseError(e.what(), line);
  }
}

}  // namespace

std::string config_to_text(const PipelineConfig& c) {
  std::ostringstream out;
  const DetectorConfig& d = c.detector;
  out << "data_dir = " << c.data_dir << '\n'
      << "out_dir = " << c.out_dir << '\n'
      << "records = " << join(c.records) << '\n'
      << "lead = " << c.lead << '\n'
      << "seed = " << c.seed << '\n'
      << "split = " << split_strategy_name(c.split) << '\n'
      << "threads = " << c.threads << '\n'
      << "detector.r_peak_window = " << d.r_peak_window << '\n'
      << "detector.r_wave_window = " << d.r_wave_window << '\n'
      << "detector.r_threshold = " << format_double(d.r_threshold) << '\n'
      << "detector.gate_percentile = " << format_double(d.gate_percentile) << '\n'
      << "detector.r_min_block = " << d.r_min_block << '\n'
      << "detector.pt_peak_window = " << d.pt_peak_window << '\n'
      << "detector.pt_wave_window = " << d.pt_wave_window << '\n'
      << "detector.match_tolerance = " << d.match_tolerance << '\n'
      << "features = " << feature_mode_name(c.features) << '\n'
      << "features.rr = " << (c.rr == RrReference::RPeaks ? "r" : "t") << '\n'
      << "preset = " << c.preset << '\n'
      << "presets = " << join(c.presets) << '\n'
      << "dropout = " << format_double(c.dropout) << '\n'
      << "train.batch = " << c.train.batch_size << '\n'
      << "train.epochs = " << c.train.epochs << '\n'
      << "train.optimizer = " << optimizer_name(c.train.optimizer) << '\n'
      << "train.lr = " << format_double(c.train.learning_rate) << '\n'
      << "train.class_weights = " << (c.train.class_weights ? "true" : "false") << '\n'
      << "quant.scheme = " << scheme_name(c.scheme) << '\n'
      << "quant.calib_size = " << c.calib_size << '\n'
      << "eval.scheme = " << scheme_name(c.eval_scheme) << '\n'
      << "ablation = " << (c.ablation ? "true" : "false") << '\n'
      << "ablation.dropout = " << format_double(c.ablation_dropout) << '\n';
  return out.str();
}

PipelineConfig config_from_text(std::string_view text, PipelineConfig c) {
  std::istringstream in{std::string(text)};
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    std::string_view s = raw;
    if (const auto hash = s.find('#'); hash != std::string_view::npos) s = s.substr(0, hash);
    s = trim(s);
    if (s.empty()) continue;
    const auto eq = s.find('=');
    if (eq == std::string_view::npos) throw ParseError("expected key = value", line);
    const std::string key(trim(s.substr(0, eq)));
    const std::string_view v = trim(s.substr(eq + 1));
    DetectorConfig& d = c.detector;
    rethrow_at(line, [&] {
      if (key == "data_dir") c.data_dir = v;
      else if (key == "out_dir") c.out_dir = v;
      else if (key == "records") c.records = split_list(v);
      else if (key == "lead") c.lead = parse_size(v, line);
      else if (key == "seed") c.seed = parse_size(v, line);
      else if (key == "split") c.split = split_strategy_from_name(v);
      else if (key == "threads") c.threads = static_cast<int>(parse_int(v, line));
      else if (key == "detector.r_peak_window") d.r_peak_window = parse_size(v, line);
      else if (key == "detector.r_wave_window") d.r_wave_window = parse_size(v, line);
      else if (key == "detector.r_threshold") d.r_threshold = parse_double(v, line);
      else if (key == "detector.gate_percentile") d.gate_percentile = parse_double(v, line);
      else if (key == "detector.r_min_block") d.r_min_block = parse_size(v, line);
      else if (key == "detector.pt_peak_window") d.pt_peak_window = parse_size(v, line);
      else if (key == "detector.pt_wave_window") d.pt_wave_window = parse_size(v, line);
      else if (key == "detector.match_tolerance") d.match_tolerance = parse_size(v, line);
      else if (key == "features") c.features = feature_mode_from_name(v);
      else if (key == "features.rr") c.rr = rr_reference_from_name(v);
      else if (key == "preset") c.preset = v;
      else if (key == "presets") c.presets = split_list(v);
      else if (key == "dropout") c.dropout = parse_double(v, line);
      else if (key == "train.batch") c.train.batch_size = parse_size(v, line);
      else if (key == "train.epochs") c.train.epochs = static_cast<int>(parse_int(v, line));
      else if (key == "train.optimizer") c.train.optimizer = optimizer_from_name(v);
      else if (key == "train.lr") c.train.learning_rate = parse_double(v, line);
      else if (key == "train.class_weights") c.train.class_weights = parse_bool(v, line);
      else if (key == "quant.scheme") c.scheme = scheme_from_name(v);
      else if (key == "quant.calib_size") c.calib_size = parse_size(v, line);
      else if (key == "eval.scheme") c.eval_scheme = scheme_from_name(v);
      else if (key == "ablation") c.ablation = parse_bool(v, line);
      else if (key == "ablation.dropout") c.ablation_dropout = parse_double(v, line);
      else throw ParseError("unknown config key '" + key + "'", line);
      return 0;
    });
  }
  return c;
}

PipelineConfig load_config(const fs::path& path, PipelineConfig base) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return config_from_text(ss.str(), std::move(base));
}

std::string model_tag(const PipelineConfig& c) {
  return c.features == FeatureMode::Ten ? c.preset
                                        : c.preset + "-" + std::string(feature_mode_name(c.features));
}

// ---------------------------------------------------------------- files

namespace {

fs::path stage_dir(const PipelineConfig& c, const std::string& stage) {
  const fs::path dir = fs::path(c.out_dir) / stage;
  fs::create_directories(dir);
  return dir;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

void write_config(const fs::path& dir, const PipelineConfig& c) {
  write_text(dir / "config.txt", config_to_text(c));
}

void write_json(const fs::path& path, const Json& j) { write_text(path, j.dump(2) + "\n"); }

std::string read_artifact(const fs::path& path, const std::string& stage) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingArtifact("missing " + path.string(), stage);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line))
    if (!trim(line).empty()) out.emplace_back(trim(line));
  return out;
}

void require_data_dir(const PipelineConfig& c) {
  if (c.data_dir.empty())
    throw InputError("no data directory: pass --data or set HBC_DATA_DIR");
}

std::vector<std::string> ingested_records(const PipelineConfig& c) {
  return lines_of(read_artifact(fs::path(c.out_dir) / "ingest" / "records.txt", "ingest"));
}

// Runs body(i) for every record index on `threads` threads. The first error
// (lowest index) is rethrown after the loop.
void for_each_record(std::size_t n, int threads, const std::function<void(std::size_t)>& body) {
  std::vector<std::exception_ptr> errors(n);
#pragma omp parallel for schedule(dynamic) num_threads(std::max(1, threads))
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
    try {
      body(static_cast<std::size_t>(i));
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
}

Json score_json(const DetectionScore& s) {
  Json j;
  j["true_positives"] = s.true_positives;
  j["false_positives"] = s.false_positives;
  j["false_negatives"] = s.false_negatives;
  j["sensitivity"] = s.sensitivity;
  j["precision"] = s.precision;
  j["sensitivity_defined"] = s.sensitivity_defined;
  j["precision_defined"] = s.precision_defined;
  j["match_tolerance"] = s.match_tolerance;
  return j;
}

std::string opt_index(const std::optional<std::size_t>& v) {
  return v ? std::to_string(*v) : std::string();
}

void write_fiducials_csv(const fs::path& path, const std::string& record,
                         std::span<const BeatFiducials> beats) {
  std::ostringstream out;
  out << "record,beat,p,q,r,s,t\n";
  for (std::size_t i = 0; i < beats.size(); ++i) {
    const BeatFiducials& b = beats[i];
    out << record << ',' << i << ',' << opt_index(b.p) << ',' << opt_index(b.q) << ',' << b.r << ','
        << opt_index(b.s) << ',' << opt_index(b.t) << '\n';
  }
  write_text(path, out.str());
}

std::vector<BeatFiducials> read_fiducials_csv(const fs::path& path) {
  const auto rows = lines_of(read_artifact(path, "detect"));
  std::vector<BeatFiducials> out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto f = split_csv(rows[i]);
    const std::size_t line = i + 1;
    if (f.size() != 7) throw ParseError("fiducials row needs 7 fields", line);
    auto opt = [&](const std::string& s) -> std::optional<std::size_t> {
      if (s.empty()) return std::nullopt;
      return parse_size(s, line);
    };
    BeatFiducials b;
    b.p = opt(f[2]);
    b.q = opt(f[3]);
    b.r = parse_size(f[4], line);
    b.s = opt(f[5]);
    b.t = opt(f[6]);
    out.push_back(b);
  }
  return out;
}

struct InventoryBeat {
  BeatRef ref;
  bool train = false;
};

std::vector<InventoryBeat> read_beats_csv(const PipelineConfig& c) {
  const auto rows = lines_of(read_artifact(fs::path(c.out_dir) / "ingest" / "beats.csv", "ingest"));
  std::vector<InventoryBeat> out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto f = split_csv(rows[i]);
    if (f.size() != 4) throw ParseError("beat row needs 4 fields", i + 1);
    InventoryBeat b;
    b.ref.record = f[0];
    b.ref.sample_index = parse_size(f[1], i + 1);
    b.ref.label = class_from_name(f[2]);
    b.train = f[3] == "train";
    out.push_back(std::move(b));
  }
  return out;
}

struct Dataset {
  std::vector<DatasetRow> rows;
  NormalizationStats stats;
};

Dataset load_dataset(const PipelineConfig& c) {
  const fs::path dir = fs::path(c.out_dir) / "features";
  Dataset d;
  d.rows = read_dataset_csv((dir / "dataset.csv").string());
  d.stats = read_stats_json((dir / "stats.json").string());
  return d;
}

fs::path model_path(const PipelineConfig& c) {
  return fs::path(c.out_dir) / "train" / model_tag(c) / "model.bin";
}

std::map<std::string, std::size_t> class_counts(std::span<const int> labels) {
  std::map<std::string, std::size_t> out;
  for (HeartbeatClass k : kAllClasses) out[std::string(class_name(k))] = 0;
  for (int l : labels) ++out[std::string(class_name(class_from_label(l)))];
  return out;
}

TrainSpec train_spec(const PipelineConfig& c) {
  TrainSpec spec = c.train;
  spec.seed = c.seed;
  return spec;
}

TrainingData as_training(const EvalSet& e) { return {e.inputs, e.labels}; }

TrainResult fit(const ModelConfig& model, const SplitData& data, const PipelineConfig& c,
                const std::string& label) {
  const TrainingData eval = as_training(data.test);
  return train(model, data.train, train_spec(c), &eval, [&](const EpochMetrics& m) {
    std::printf("  %s epoch %d/%d: loss %.4f, train acc %.4f, test acc %.4f\n", label.c_str(),
                m.epoch, c.train.epochs, m.train_loss, m.train_accuracy,
                m.eval_accuracy.value_or(0.0));
    std::fflush(stdout);
  });
}

ClassMetrics evaluate_fp32(const ModelParameters& params, const EvalSet& test, ConfusionMatrix* cm) {
  *cm = confusion(argmax_rows(predict(params, test.inputs, test.size())), test.labels);
  return metrics(*cm);
}

}  // namespace

void write_f64(const fs::path& path, std::span<const double> values) {
  ByteWriter w;
  for (double v : values) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    w.u32(static_cast<std::uint32_t>(bits));
    w.u32(static_cast<std::uint32_t>(bits >> 32));
  }
  const auto bytes = w.take();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

std::vector<double> read_f64(const fs::path& path) {
  const std::string raw = read_artifact(path, "denoise");
  if (raw.size() % 8 != 0)
    throw ParseError("signal file " + path.string() + " is not a whole number of doubles", raw.size());
  ByteReader r(std::span(reinterpret_cast<const std::uint8_t*>(raw.data()), raw.size()));
  std::vector<double> out(raw.size() / 8);
  for (double& v : out) {
    const std::uint64_t lo = r.u32("sample");
    const std::uint64_t hi = r.u32("sample");
    const std::uint64_t bits = lo | (hi << 32);
    std::memcpy(&v, &bits, sizeof v);
  }
  return out;
}

SplitData make_split_data(std::span<const DatasetRow> rows, const NormalizationStats& stats,
                          FeatureMode mode) {
  SplitData d;
  for (const DatasetRow& r : rows) {
    const auto fused = fuse_and_normalize(r.features, stats, mode);
    auto& inputs = r.train ? d.train.inputs : d.test.inputs;
    auto& labels = r.train ? d.train.labels : d.test.labels;
    for (double v : fused) inputs.push_back(static_cast<float>(v));
    labels.push_back(label_of(r.features.label));
  }
  return d;
}

TrainingData calibration_subset(const TrainingData& train, std::size_t count, std::uint64_t seed) {
  const std::size_t n = train.size();
  if (n == 0) return {};
  const std::size_t width = train.inputs.size() / n;
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(std::span(order));
  order.resize(std::min(count, n));
  std::sort(order.begin(), order.end());
  TrainingData out;
  for (std::size_t i : order) {
    out.inputs.insert(out.inputs.end(), train.inputs.begin() + static_cast<std::ptrdiff_t>(i * width),
                      train.inputs.begin() + static_cast<std::ptrdiff_t>((i + 1) * width));
    out.labels.push_back(train.labels[i]);
  }
  return out;
}

// ---------------------------------------------------------------- stages

void run_ingest(const PipelineConfig& c) {
  require_data_dir(c);
  const std::vector<std::string> records = c.records.empty() ? list_records(c.data_dir) : c.records;
  if (records.empty()) throw MissingArtifact("no WFDB records in " + c.data_dir, "data");

  std::vector<AnnotationList> annotations(records.size());
  for_each_record(records.size(), c.threads,
                  [&](std::size_t i) { annotations[i] = load_annotations(c.data_dir, records[i]); });
  std::vector<BeatRef> beats;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto b = labeled_beats(records[i], annotations[i]);
    beats.insert(beats.end(), b.begin(), b.end());
  }
  const DatasetSplit split = split_dataset(beats, c.split, c.seed);
  std::vector<char> is_train(beats.size(), 0);
  for (std::size_t i : split.train) is_train[i] = 1;

  const fs::path dir = stage_dir(c, "ingest");
  std::string list;
  for (const std::string& r : records) list += r + "\n";
  write_text(dir / "records.txt", list);

  std::ostringstream csv;
  csv << "record,sample_index,class,split\n";
  for (std::size_t i = 0; i < beats.size(); ++i)
    csv << beats[i].record << ',' << beats[i].sample_index << ',' << class_name(beats[i].label) << ','
        << (is_train[i] ? "train" : "test") << '\n';
  write_text(dir / "beats.csv", csv.str());

  Json j;
  j["strategy"] = split_strategy_name(split.strategy);
  j["seed"] = split.seed;
  j["beats"] = beats.size();
  j["train_count"] = split.train.size();
  j["test_count"] = split.test.size();
  j["reference_train_count"] = published::kTrainSamples;
  for (HeartbeatClass k : kAllClasses) {
    std::size_t tr = 0, te = 0;
    for (std::size_t i = 0; i < beats.size(); ++i)
      if (beats[i].label == k) ++(is_train[i] ? tr : te);
    j["per_class"][std::string(class_name(k))] = {{"train", tr}, {"test", te}};
  }
  j["train"] = split.train;
  j["test"] = split.test;
  write_json(dir / "split.json", j);

  std::ostringstream inv;
  inv << "symbol,code,count,is_beat,selected\n";
  for (const SymbolCount& s : class_distribution(annotations))
    inv << s.symbol << ',' << s.code << ',' << s.count << ',' << (s.is_beat ? 1 : 0) << ','
        << (s.selected ? 1 : 0) << '\n';
  write_text(dir / "inventory.csv", inv.str());
  write_config(dir, c);
  std::printf("ingest: %zu records, %zu beats (%zu train / %zu test)\n", records.size(), beats.size(),
              split.train.size(), split.test.size());
}

void run_denoise(const PipelineConfig& c) {
  require_data_dir(c);
  const auto records = ingested_records(c);
  const fs::path dir = stage_dir(c, "denoise");
  for_each_record(records.size(), c.threads, [&](std::size_t i) {
    SignalRecord sig = load_signal(c.data_dir, records[i], c.lead);
    hold_invalid_samples(sig.samples);
    write_f64(dir / (records[i] + ".f64"), denoise_ecg(sig.samples));
  });
  write_config(dir, c);
  std::printf("denoise: %zu records\n", records.size());
}

void run_detect(const PipelineConfig& c) {
  require_data_dir(c);
  const auto records = ingested_records(c);
  const fs::path dir = stage_dir(c, "detect");
  const fs::path denoised = fs::path(c.out_dir) / "denoise";
  std::vector<DetectionScore> r_scores(records.size());
  std::vector<std::optional<DetectionScore>> p_scores(records.size());
  std::vector<std::size_t> counts(records.size());
  for_each_record(records.size(), c.threads, [&](std::size_t i) {
    const std::string& rec = records[i];
    const auto signal = read_f64(denoised / (rec + ".f64"));
    const auto fid = detect_fiducials(signal, c.detector);
    counts[i] = fid.size();
    write_fiducials_csv(dir / (rec + ".csv"), rec, fid);

    std::vector<std::size_t> r, truth, p, p_truth;
    for (const BeatFiducials& b : fid) {
      r.push_back(b.r);
      if (b.p) p.push_back(*b.p);
    }
    for (const Annotation& a : load_annotations(c.data_dir, rec).entries)
      if (a.chan == 0 && is_beat_code(a.code)) truth.push_back(a.sample_index);
    r_scores[i] = score_detection(r, truth, c.detector.match_tolerance);
    if (fs::exists(fs::path(c.data_dir) / (rec + ".pwave"))) {
      for (const Annotation& a : load_annotations(c.data_dir, rec, "pwave").entries)
        if (a.code == anncode::kPWave) p_truth.push_back(a.sample_index);
      p_scores[i] = score_detection(p, p_truth, c.detector.match_tolerance);
    }
  });

  Json j;
  std::vector<DetectionScore> p_present;
  Json per = Json::object();
  for (std::size_t i = 0; i < records.size(); ++i) {
    Json e;
    e["beats_detected"] = counts[i];
    e["r"] = score_json(r_scores[i]);
    if (p_scores[i]) {
      e["p"] = score_json(*p_scores[i]);
      p_present.push_back(*p_scores[i]);
    }
    per[records[i]] = e;
  }
  j["r"] = score_json(aggregate_scores(r_scores));
  if (!p_present.empty()) j["p"] = score_json(aggregate_scores(p_present));
  j["p_records"] = p_present.size();
  j["reference"] = {{"r_sensitivity_pct", published::kRSensitivity},
                    {"r_precision_pct", published::kRPrecision},
                    {"p_sensitivity_pct", published::kPSensitivity},
                    {"p_precision_pct", published::kPPrecision}};
  j["records"] = per;
  write_json(dir / "scores.json", j);
  write_config(dir, c);
  const DetectionScore agg = aggregate_scores(r_scores);
  std::printf("detect: %zu records, R sensitivity %.4f, precision %.4f\n", records.size(),
              agg.sensitivity, agg.precision);
}

void run_features(const PipelineConfig& c) {
  require_data_dir(c);
  const auto records = ingested_records(c);
  const auto inventory = read_beats_csv(c);
  std::map<std::string, std::vector<const InventoryBeat*>> by_record;
  for (const InventoryBeat& b : inventory) by_record[b.ref.record].push_back(&b);

  std::vector<std::vector<DatasetRow>> per_record(records.size());
  std::vector<AssemblyStats> stats(records.size());
  const fs::path detect_dir = fs::path(c.out_dir) / "detect";
  const fs::path denoise_dir = fs::path(c.out_dir) / "denoise";
  for_each_record(records.size(), c.threads, [&](std::size_t i) {
    const std::string& rec = records[i];
    const auto fid = read_fiducials_csv(detect_dir / (rec + ".csv"));
    const auto signal = read_f64(denoise_dir / (rec + ".f64"));
    const double fs_hz = load_header(c.data_dir, rec).sampling_rate_hz;
    std::vector<BeatRef> refs;
    std::map<std::size_t, bool> split_of;
    if (const auto it = by_record.find(rec); it != by_record.end())
      for (const InventoryBeat* b : it->second) {
        refs.push_back(b->ref);
        split_of[b->ref.sample_index] = b->train;
      }
    const auto linked = assemble_beats(fid, refs, c.detector.match_tolerance, &stats[i], c.rr);
    for (const LinkedBeat& lb : linked) {
      DatasetRow row;
      row.record = rec;
      row.beat = lb.beat_index;
      row.sample = lb.annotation_sample;
      row.train = split_of.at(lb.annotation_sample);
      row.features = beat_features(signal, fid, lb, fs_hz, c.rr);
      per_record[i].push_back(std::move(row));
    }
  });

  std::vector<DatasetRow> rows;
  for (auto& v : per_record) rows.insert(rows.end(), v.begin(), v.end());
  std::vector<FeatureVector> train_features;
  for (const DatasetRow& r : rows)
    if (r.train) train_features.push_back(r.features);
  if (train_features.empty()) throw InputError("features: no training beat survived assembly");
  const NormalizationStats ns = compute_stats(train_features);

  const fs::path dir = stage_dir(c, "features");
  write_dataset_csv((dir / "dataset.csv").string(), rows);
  write_stats_json((dir / "stats.json").string(), ns);
  Json j;
  AssemblyStats total;
  Json per = Json::object();
  for (std::size_t i = 0; i < records.size(); ++i) {
    const AssemblyStats& s = stats[i];
    per[records[i]] = {{"annotations", s.annotations},
                       {"linked", s.linked},
                       {"unlinked", s.unlinked},
                       {"missing_fiducial", s.missing_fiducial},
                       {"missing_neighbor", s.missing_neighbor}};
    total.annotations += s.annotations;
    total.linked += s.linked;
    total.unlinked += s.unlinked;
    total.missing_fiducial += s.missing_fiducial;
    total.missing_neighbor += s.missing_neighbor;
  }
  j["annotations"] = total.annotations;
  j["linked"] = total.linked;
  j["unlinked"] = total.unlinked;
  j["missing_fiducial"] = total.missing_fiducial;
  j["missing_neighbor"] = total.missing_neighbor;
  j["rows"] = rows.size();
  j["train_rows"] = train_features.size();
  j["test_rows"] = rows.size() - train_features.size();
  j["records"] = per;
  write_json(dir / "assembly.json", j);
  write_config(dir, c);
  std::printf("features: %zu beats (%zu train), %zu dropped\n", rows.size(), train_features.size(),
              total.annotations - rows.size());
}

void run_train(const PipelineConfig& c) {
  const Dataset ds = load_dataset(c);
  const SplitData data = make_split_data(ds.rows, ds.stats, c.features);
  if (data.train.size() == 0) throw InputError("train: empty training split");
  ModelConfig model = preset(c.preset, sequence_length(c.features), c.dropout);
  const std::string tag = model_tag(c);
  std::printf("train %s: %zu params, %zu train / %zu test beats\n", tag.c_str(), count_params(model),
              data.train.size(), data.test.size());
  const TrainResult result = fit(model, data, c, tag);

  const fs::path dir = stage_dir(c, "train/" + tag);
  save_model((dir / "model.bin").string(), result.params);
  ConfusionMatrix cm;
  const ClassMetrics m = data.test.size() ? evaluate_fp32(result.params, data.test, &cm) : ClassMetrics{};

  Json j;
  j["model"] = tag;
  j["preset"] = c.preset;
  j["features"] = feature_mode_name(c.features);
  j["params"] = count_params(model);
  j["n_train"] = data.train.size();
  j["n_test"] = data.test.size();
  j["batch_size"] = c.train.batch_size;
  j["optimizer"] = optimizer_name(c.train.optimizer);
  j["learning_rate"] = c.train.learning_rate;
  j["dropout"] = c.dropout;
  j["class_weights"] = c.train.class_weights;
  j["seed"] = c.seed;
  j["iterations_per_epoch"] = iterations_per_epoch(data.train.size(), c.train.batch_size);
  j["reference"] = {{"train_samples", published::kTrainSamples},
                    {"iterations_per_epoch", published::kIterationsPerEpoch}};
  j["train_class_counts"] = class_counts(data.train.labels);
  Json epochs = Json::array();
  for (const EpochMetrics& e : result.epochs) {
    Json x;
    x["epoch"] = e.epoch;
    x["iterations"] = e.iterations;
    x["train_loss"] = e.train_loss;
    x["train_accuracy"] = e.train_accuracy;
    if (e.eval_accuracy) x["test_accuracy"] = *e.eval_accuracy;
    epochs.push_back(x);
  }
  j["epochs"] = epochs;
  if (data.test.size()) j["test"] = Json::parse(metrics_to_json(m, cm));
  write_json(dir / "metrics.json", j);
  write_config(dir, c);
}

void run_quantize(const PipelineConfig& c) {
  const ModelParameters model = load_model(model_path(c).string());
  std::optional<Calibration> calib;
  if (c.scheme == QuantScheme::Int8Full) {
    const Dataset ds = load_dataset(c);
    const SplitData data = make_split_data(ds.rows, ds.stats, c.features);
    const TrainingData sub = calibration_subset(data.train, c.calib_size, mix_seed(c.seed, 2000));
    if (sub.size() == 0) throw InputError("quantize: no calibration beats");
    calib = calibrate_activations(model, sub.inputs, sub.size());
  }
  const QuantizedModel qm = quantize(model, c.scheme, calib ? &*calib : nullptr);
  const std::string tag = model_tag(c);
  const std::string scheme(scheme_name(c.scheme));
  const fs::path dir = stage_dir(c, "quantize/" + tag);
  save_quantized((dir / (scheme + ".bin")).string(), qm);

  Json j;
  const std::size_t fp32_file = model_size_bytes(model, SizeConvention::FileSize);
  const std::size_t file = model_size_bytes(qm, SizeConvention::FileSize);
  j["model"] = tag;
  j["scheme"] = scheme;
  j["file_bytes"] = file;
  j["weights_only_bytes"] = model_size_bytes(qm, SizeConvention::WeightsOnly);
  j["weights_only"] = format_size(model_size_bytes(qm, SizeConvention::WeightsOnly));
  j["fp32_file_bytes"] = fp32_file;
  j["ratio_to_fp32"] = static_cast<double>(file) / static_cast<double>(fp32_file);
  if (calib) j["calibration_samples"] = calib->samples;
  j["warnings"] = qm.warnings;
  write_json(dir / (scheme + ".json"), j);
  write_config(dir, c);
  std::printf("quantize %s %s: %zu bytes (%.3f x fp32)\n", tag.c_str(), scheme.c_str(), file,
              static_cast<double>(file) / static_cast<double>(fp32_file));
}

void run_eval(const PipelineConfig& c) {
  const Dataset ds = load_dataset(c);
  const SplitData data = make_split_data(ds.rows, ds.stats, c.features);
  if (data.test.size() == 0) throw InputError("eval: empty test split");
  const std::string tag = model_tag(c);
  const std::string scheme(scheme_name(c.eval_scheme));
  std::vector<float> probs;
  if (c.eval_scheme == QuantScheme::Fp32) {
    probs = predict(load_model(model_path(c).string()), data.test.inputs, data.test.size());
  } else {
    const fs::path qpath = fs::path(c.out_dir) / "quantize" / tag / (scheme + ".bin");
    if (!fs::exists(qpath)) throw MissingArtifact("missing " + qpath.string(), "quantize");
    probs = quantized_infer(load_quantized(qpath.string()), data.test.inputs, data.test.size());
  }
  const ConfusionMatrix cm = confusion(argmax_rows(probs), data.test.labels);
  const ClassMetrics m = metrics(cm);
  const fs::path dir = stage_dir(c, "eval/" + tag + "/" + scheme);
  write_text(dir / "metrics.json", metrics_to_json(m, cm));
  write_text(dir / "confusion.json", confusion_to_json(cm));
  write_config(dir, c);
  std::printf("eval %s %s: accuracy %.1f%% on %zu beats\n", tag.c_str(), scheme.c_str(),
              percent_1dp(m.accuracy), data.test.size());
}

void run_benchmark(const PipelineConfig& c) {
  const Dataset ds = load_dataset(c);
  const SplitData data = make_split_data(ds.rows, ds.stats, c.features);
  std::map<std::string, ModelParameters> models;
  for (const std::string& p : c.presets) {
    PipelineConfig pc = c;
    pc.preset = p;
    const fs::path path = model_path(pc);
    if (fs::exists(path)) models.emplace(p, load_model(path.string()));
  }
  if (models.empty()) throw MissingArtifact("no trained model under " + c.out_dir + "/train", "train");
  const TrainingData sub = calibration_subset(data.train, c.calib_size, mix_seed(c.seed, 2000));
  EvalSet calib{sub.inputs, sub.labels};
  const auto schemes = all_schemes();
  const BenchmarkGrid grid = hbc::run_benchmark(models, schemes, data.test, calib);
  const fs::path dir = stage_dir(c, "benchmark");
  write_text(dir / "grid.csv", benchmark_csv(grid));
  write_text(dir / "grid.json", benchmark_json(grid));
  write_text(dir / "memory_plot.csv", memory_plot_csv(grid));
  write_text(dir / "accuracy_plot.csv", accuracy_plot_csv(grid));
  write_config(dir, c);
  for (const std::string& w : grid.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
  std::printf("benchmark: %zu rows\n", grid.rows.size());
}

void run_ablation(const PipelineConfig& c) {
  const Dataset ds = load_dataset(c);
  std::vector<AblationEntry> entries;
  for (FeatureMode mode : {FeatureMode::Six, FeatureMode::Eight, FeatureMode::Ten}) {
    const SplitData data = make_split_data(ds.rows, ds.stats, mode);
    const ModelConfig model = bilstm_template(64, 64, 128, c.ablation_dropout, sequence_length(mode));
    const TrainResult r = fit(model, data, c, "ablation-" + std::string(feature_mode_name(mode)));
    AblationEntry e;
    e.mode = mode;
    e.metrics = evaluate_fp32(r.params, data.test, &e.confusion);
    entries.push_back(e);
  }
  const AblationReport rep = ablation_report(entries);

  const SplitData ten = make_split_data(ds.rows, ds.stats, FeatureMode::Ten);
  Json arch = Json::array();
  const auto rbbb = static_cast<std::size_t>(label_of(HeartbeatClass::RBBB));
  for (const auto& [name, model] :
       {std::pair{std::string("lstm-64-64"), lstm_template(64, 64, 128, c.dropout)},
        std::pair{std::string("bilstm-32-32"), bilstm_template(32, 32, 128, c.dropout)}}) {
    const TrainResult r = fit(model, ten, c, name);
    ConfusionMatrix cm;
    const ClassMetrics m = evaluate_fp32(r.params, ten.test, &cm);
    arch.push_back({{"model", name},
                    {"params", count_params(model)},
                    {"accuracy", m.accuracy},
                    {"rbbb_f1", m.per_class[rbbb].f1},
                    {"rbbb_recall", m.per_class[rbbb].recall}});
  }

  const fs::path dir = stage_dir(c, "ablation");
  write_text(dir / "ablation.csv", ablation_csv(rep));
  Json j;
  j["entries"] = Json::array();
  for (const AblationEntry& e : rep.entries)
    j["entries"].push_back({{"mode", feature_mode_name(e.mode)},
                            {"metrics", Json::parse(metrics_to_json(e.metrics, e.confusion))}});
  if (rep.rbbb_gain) j["rbbb_recall_gain_points"] = *rep.rbbb_gain;
  write_json(dir / "ablation.json", j);
  write_json(dir / "architectures.json", arch);
  write_config(dir, c);
}

void run_reproduce(const PipelineConfig& c) {
  run_ingest(c);
  run_denoise(c);
  run_detect(c);
  run_features(c);
  for (const std::string& p : c.presets) {
    PipelineConfig pc = c;
    pc.preset = p;
    run_train(pc);
  }
  run_benchmark(c);
  if (c.ablation) run_ablation(c);
  write_config(stage_dir(c, "."), c);
}

}  // namespace hbc
