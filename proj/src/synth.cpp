#include "hbc/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "hbc/error.hpp"
#include "hbc/rng.hpp"

namespace hbc {

namespace {

struct Wave {
  double offset_s;  // relative to the R peak
  double amp_mv;
  double width_s;   // Gaussian sigma
};

struct Morphology {
  std::vector<Wave> waves;
  std::optional<double> p_offset;  // P peak, if the beat has one
};

Morphology morphology(HeartbeatClass c) {
  switch (c) {
    case HeartbeatClass::N:
      return {{{-0.20, 0.15, 0.025}, {-0.035, -0.12, 0.010}, {0.0, 1.10, 0.011},
               {0.035, -0.25, 0.011}, {0.28, 0.16, 0.065}},
              -0.20};
    case HeartbeatClass::LBBB:
      return {{{-0.22, 0.09, 0.025}, {-0.05, -0.05, 0.010}, {0.0, 1.10, 0.020},
               {0.04, 0.90, 0.020}, {0.09, -0.15, 0.015}, {0.34, -0.14, 0.070}},
              -0.22};
    case HeartbeatClass::RBBB:
      return {{{-0.20, 0.09, 0.025}, {-0.03, -0.08, 0.010}, {0.0, 1.00, 0.011},
               {0.04, -0.35, 0.013}, {0.08, 0.70, 0.016}, {0.32, 0.10, 0.070}},
              -0.20};
    case HeartbeatClass::PVC:
      return {{{-0.16, 0.06, 0.030}, {-0.05, -0.10, 0.015}, {0.0, 1.60, 0.030},
               {0.07, -0.40, 0.025}, {0.36, -0.22, 0.090}},
              -0.16};
    case HeartbeatClass::PB:
      return {{{-0.20, 0.10, 0.025}, {-0.045, 0.80, 0.0015}, {-0.03, -0.10, 0.010},
               {0.0, 0.90, 0.028}, {0.06, -0.30, 0.020}, {0.34, -0.15, 0.070}},
              -0.20};
  }
  return {};
}

int code_of(HeartbeatClass c) {
  switch (c) {
    case HeartbeatClass::N: return anncode::kNormal;
    case HeartbeatClass::PB: return anncode::kPace;
    case HeartbeatClass::LBBB: return anncode::kLbbb;
    case HeartbeatClass::RBBB: return anncode::kRbbb;
    case HeartbeatClass::PVC: return anncode::kPvc;
  }
  return anncode::kNormal;
}

constexpr int kRhythmCode = 28;

void write_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

SynthRecord synthesize_record(const SynthSpec& spec) {
  if (spec.duration_s <= 2.0) throw InputError("synthetic record must be longer than 2 s");
  const double fs = spec.sampling_rate_hz;
  const auto n = static_cast<std::size_t>(std::llround(spec.duration_s * fs));
  Rng rng(spec.seed);
  std::vector<double> lead0(n, 0.0), lead1(n, 0.0);

  SynthRecord rec;
  Annotation rhythm;
  rhythm.sample_index = 0;
  rhythm.code = kRhythmCode;
  rhythm.aux = spec.rhythm == HeartbeatClass::PB ? "(P" : "(N";
  rec.beats.entries.push_back(rhythm);

  const double base_rr = 60.0 / spec.heart_rate_bpm;
  double t = 0.6;
  HeartbeatClass cls = spec.rhythm;
  while (t < spec.duration_s - 0.8) {
    const Morphology m = morphology(cls);
    const double gain = 1.0 + 0.05 * rng.normal();
    const auto r_idx = static_cast<std::size_t>(std::llround(t * fs));
    const auto lo = static_cast<std::size_t>(std::max(0.0, (t - 0.6) * fs));
    const auto hi = std::min(n, static_cast<std::size_t>((t + 0.7) * fs));
    for (std::size_t i = lo; i < hi; ++i) {
      const double dt = static_cast<double>(i) / fs - t;
      double v = 0.0;
      for (const Wave& w : m.waves) {
        const double z = (dt - w.offset_s) / w.width_s;
        v += w.amp_mv * std::exp(-0.5 * z * z);
      }
      lead0[i] += gain * v;
      lead1[i] += 0.6 * gain * v;
    }
    Annotation a;
    a.sample_index = r_idx;
    a.code = code_of(cls);
    a.beat_class = cls;
    rec.beats.entries.push_back(a);
    if (m.p_offset) {
      Annotation p;
      p.sample_index = static_cast<std::size_t>(std::llround((t + *m.p_offset) * fs));
      p.code = anncode::kPWave;
      rec.pwaves.entries.push_back(p);
    }
    // Ectopic beats come early and are followed by a compensatory pause.
    const HeartbeatClass next = cls != HeartbeatClass::PVC && rng.uniform() < spec.ectopic_fraction
                                    ? HeartbeatClass::PVC
                                    : spec.rhythm;
    double rr = base_rr * (1.0 + 0.04 * rng.normal());
    if (next == HeartbeatClass::PVC) rr *= 0.7;
    if (cls == HeartbeatClass::PVC) rr *= 1.3;
    t += std::max(0.35, rr);
    cls = next;
  }

  const double phase0 = 2.0 * M_PI * rng.uniform();
  const double phase1 = 2.0 * M_PI * rng.uniform();
  for (std::size_t i = 0; i < n; ++i) {
    const double ts = static_cast<double>(i) / fs;
    const double drift = spec.drift_mv * (std::sin(2.0 * M_PI * 0.15 * ts + phase0) +
                                          0.5 * std::sin(2.0 * M_PI * 0.05 * ts + phase1));
    const double mains = spec.mains_mv * std::sin(2.0 * M_PI * 60.0 * ts);
    lead0[i] += drift + mains + spec.noise_mv * rng.normal();
    lead1[i] += 0.8 * drift + mains + spec.noise_mv * rng.normal();
  }

  RecordHeader& h = rec.header;
  h.record_name = spec.name;
  h.n_signals = 2;
  h.sampling_rate_hz = fs;
  h.n_samples = n;
  const char* desc[2] = {"MLII", "V1"};
  for (int s = 0; s < 2; ++s) {
    SignalSpec sig;
    sig.file_name = spec.name + ".dat";
    sig.storage_format = 212;
    sig.adc_gain = 200.0;
    sig.adc_baseline = 1024;
    sig.adc_resolution = 11;
    sig.adc_zero = 1024;
    sig.description = desc[s];
    h.signals.push_back(sig);
  }
  rec.adc.resize(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    rec.adc[2 * i] = std::clamp(static_cast<int>(std::lround(lead0[i] * 200.0)) + 1024, -2048, 2047);
    rec.adc[2 * i + 1] = std::clamp(static_cast<int>(std::lround(lead1[i] * 200.0)) + 1024, -2048, 2047);
  }
  h.signals[0].initial_value = rec.adc[0];
  h.signals[1].initial_value = rec.adc[1];
  return rec;
}

void write_synth_record(const std::filesystem::path& dir, const SynthRecord& record) {
  std::filesystem::create_directories(dir);
  const std::string name = record.header.record_name;
  {
    std::ofstream out(dir / (name + ".hea"), std::ios::binary);
    if (!out) throw Error("cannot write header for " + name);
    out << format_header(record.header);
  }
  write_bytes(dir / (name + ".dat"), pack_212(record.adc));
  write_bytes(dir / (name + ".atr"), encode_annotations(record.beats));
  write_bytes(dir / (name + ".pwave"), encode_annotations(record.pwaves));
}

std::vector<SynthSpec> synth_corpus(std::size_t count, double duration_s, std::uint64_t seed) {
  const HeartbeatClass rhythms[4] = {HeartbeatClass::N, HeartbeatClass::PB, HeartbeatClass::LBBB,
                                     HeartbeatClass::RBBB};
  std::vector<SynthSpec> out;
  for (std::size_t i = 0; i < count; ++i) {
    SynthSpec s;
    s.name = "s" + std::string(i < 10 ? "0" : "") + std::to_string(i);
    s.duration_s = duration_s;
    s.rhythm = rhythms[i % 4];
    s.heart_rate_bpm = 60.0 + static_cast<double>((i * 7) % 36);
    s.seed = mix_seed(seed, i);
    out.push_back(s);
  }
  return out;
}

}  // namespace hbc
