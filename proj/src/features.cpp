#include "hbc/features.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "hbc/error.hpp"
#include "hbc/textio.hpp"

namespace hbc {

std::string_view feature_mode_name(FeatureMode m) {
  switch (m) {
    case FeatureMode::Six: return "six";
    case FeatureMode::Eight: return "eight";
    case FeatureMode::Ten: return "ten";
  }
  return "?";
}

FeatureMode feature_mode_from_name(std::string_view name) {
  if (name == "six") return FeatureMode::Six;
  if (name == "eight") return FeatureMode::Eight;
  if (name == "ten") return FeatureMode::Ten;
  throw InputError("unknown feature mode '" + std::string(name) + "' (six|eight|ten)");
}

RrReference rr_reference_from_name(std::string_view name) {
  if (name == "r") return RrReference::RPeaks;
  if (name == "t") return RrReference::TPeaks;
  throw InputError("unknown RR reference '" + std::string(name) + "' (r|t)");
}

std::vector<int> feature_indices(FeatureMode m) {
  switch (m) {
    case FeatureMode::Six: return {0, 1, 2, 3, 4, 5};
    case FeatureMode::Eight: return {0, 1, 2, 3, 4, 5, 8, 9};
    case FeatureMode::Ten: return {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  }
  return {};
}

std::size_t rr_interval(std::span<const BeatFiducials> fiducials, std::size_t index,
                        RrReference rr) {
  auto anchor = [&](std::size_t i) -> std::optional<std::size_t> {
    if (rr == RrReference::RPeaks) return fiducials[i].r;
    return fiducials[i].t;
  };
  const auto here = anchor(index);
  if (!here) return 0;
  if (index > 0) {
    const auto prev = anchor(index - 1);
    if (prev && *prev < *here) return *here - *prev;
  }
  if (index + 1 < fiducials.size()) {
    const auto next = anchor(index + 1);
    if (next && *next > *here) return *next - *here;
  }
  return 0;
}

std::vector<LinkedBeat> assemble_beats(std::span<const BeatFiducials> fiducials,
                                       std::span<const BeatRef> annotations, std::size_t tolerance,
                                       AssemblyStats* stats, RrReference rr) {
  AssemblyStats local;
  AssemblyStats& st = stats ? *stats : local;
  std::vector<std::size_t> r(fiducials.size());
  for (std::size_t i = 0; i < fiducials.size(); ++i) r[i] = fiducials[i].r;
  std::vector<std::size_t> ann(annotations.size());
  for (std::size_t i = 0; i < annotations.size(); ++i) ann[i] = annotations[i].sample_index;

  st.annotations += annotations.size();
  const auto pairs = match_events(r, ann, tolerance);
  st.unlinked += annotations.size() - pairs.size();
  std::vector<LinkedBeat> out;
  for (const MatchPair& m : pairs) {
    const BeatFiducials& b = fiducials[m.predicted];
    if (!b.complete()) {
      ++st.missing_fiducial;
      continue;
    }
    if (rr_interval(fiducials, m.predicted, rr) == 0) {
      ++st.missing_neighbor;
      continue;
    }
    out.push_back({m.predicted, annotations[m.truth].sample_index, annotations[m.truth].label});
  }
  st.linked += out.size();
  return out;
}

std::array<double, 6> time_features(const BeatFiducials& beat, std::size_t rr_samples,
                                    double sampling_rate_hz) {
  if (!beat.complete()) throw InputError("time features need P, Q, S and T");
  const auto sec = [&](std::size_t a, std::size_t b) {
    return (static_cast<double>(b) - static_cast<double>(a)) / sampling_rate_hz;
  };
  return {static_cast<double>(rr_samples) / sampling_rate_hz,
          sec(*beat.p, beat.r),
          sec(beat.r, *beat.t),
          sec(*beat.q, beat.r),
          sec(beat.r, *beat.s),
          sec(*beat.p, *beat.t)};
}

double area_between(std::span<const double> signal, std::size_t from, std::size_t to) {
  if (from > to)
    throw InputError("area bounds out of order: " + std::to_string(from) + " > " +
                     std::to_string(to));
  if (to >= signal.size()) throw InputError("area bound beyond the record end");
  double sum = 0.0;
  for (std::size_t k = from; k <= to; ++k) sum += std::abs(signal[k]);
  return sum;
}

std::array<double, 4> area_features(std::span<const double> signal, const BeatFiducials& beat) {
  if (!beat.complete()) throw InputError("area features need P, Q, S and T");
  return {area_between(signal, *beat.p, *beat.q), area_between(signal, *beat.s, *beat.t),
          area_between(signal, *beat.q, beat.r), area_between(signal, beat.r, *beat.s)};
}

FeatureVector beat_features(std::span<const double> signal,
                            std::span<const BeatFiducials> fiducials, const LinkedBeat& beat,
                            double sampling_rate_hz, RrReference rr) {
  const BeatFiducials& f = fiducials[beat.beat_index];
  FeatureVector v;
  v.label = beat.label;
  const auto t = time_features(f, rr_interval(fiducials, beat.beat_index, rr), sampling_rate_hz);
  const auto a = area_features(signal, f);
  for (std::size_t i = 0; i < t.size(); ++i) v.values[i] = t[i];
  for (std::size_t i = 0; i < a.size(); ++i) v.values[6 + i] = a[i];
  return v;
}

NormalizationStats compute_stats(std::span<const FeatureVector> train) {
  if (train.empty()) throw InputError("normalization needs at least one training beat");
  NormalizationStats st;
  const double n = static_cast<double>(train.size());
  for (std::size_t f = 0; f < kNumFeatures; ++f) {
    double sum = 0.0;
    for (const FeatureVector& v : train) sum += v.values[f];
    const double mean = sum / n;
    double ss = 0.0;
    for (const FeatureVector& v : train) ss += (v.values[f] - mean) * (v.values[f] - mean);
    st.mean[f] = mean;
    st.stddev[f] = std::sqrt(ss / n);
    if (!(st.stddev[f] > 0.0))
      throw InputError("feature " + std::string(kFeatureNames[f]) +
                       " has zero standard deviation on the training split");
  }
  return st;
}

std::vector<double> fuse_and_normalize(const FeatureVector& features,
                                       const NormalizationStats& stats, FeatureMode mode) {
  std::vector<double> out;
  for (int idx : feature_indices(mode)) {
    const auto f = static_cast<std::size_t>(idx);
    if (!(stats.stddev[f] > 0.0))
      throw InputError("feature " + std::string(kFeatureNames[f]) + " has zero standard deviation");
    out.push_back((features.values[f] - stats.mean[f]) / stats.stddev[f]);
  }
  return out;
}

void write_dataset_csv(const std::string& path, std::span<const DatasetRow> rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out << "record,beat,sample,split";
  for (auto name : kFeatureNames) out << ',' << name;
  out << ",label\n";
  for (const DatasetRow& r : rows) {
    out << r.record << ',' << r.beat << ',' << r.sample << ',' << (r.train ? "train" : "test");
    for (double v : r.features.values) out << ',' << format_double(v);
    out << ',' << label_of(r.features.label) << '\n';
  }
}

std::vector<DatasetRow> read_dataset_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingArtifact("cannot open dataset " + path, "features");
  std::string line;
  std::getline(in, line);
  std::vector<DatasetRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != 5 + kNumFeatures)
      throw ParseError("dataset row has " + std::to_string(f.size()) + " fields", line_no);
    DatasetRow r;
    r.record = f[0];
    r.beat = parse_size(f[1], line_no);
    r.sample = parse_size(f[2], line_no);
    r.train = f[3] == "train";
    for (std::size_t i = 0; i < kNumFeatures; ++i) r.features.values[i] = parse_double(f[4 + i], line_no);
    r.features.label = class_from_label(static_cast<int>(parse_size(f[4 + kNumFeatures], line_no)));
    rows.push_back(std::move(r));
  }
  return rows;
}

void write_stats_json(const std::string& path, const NormalizationStats& stats) {
  nlohmann::ordered_json j;
  for (std::size_t f = 0; f < kNumFeatures; ++f) {
    j["features"].push_back(
        {{"name", kFeatureNames[f]}, {"mean", stats.mean[f]}, {"std", stats.stddev[f]}});
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out << j.dump(2) << '\n';
}

NormalizationStats read_stats_json(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingArtifact("cannot open stats " + path, "features");
  const auto j = nlohmann::json::parse(in);
  NormalizationStats st;
  const auto& feats = j.at("features");
  if (feats.size() != kNumFeatures) throw ParseError("stats file must list 10 features", 0);
  for (std::size_t f = 0; f < kNumFeatures; ++f) {
    st.mean[f] = feats[f].at("mean").get<double>();
    st.stddev[f] = feats[f].at("std").get<double>();
  }
  return st;
}

}  // namespace hbc
