#pragma once

// Synthetic two-lead ECG records written as real WFDB files (.hea, format
// 212 .dat, .atr beat annotations and .pwave P-peak annotations). Each beat
// is a sum of Gaussian waves whose shape depends on the beat class; records
// have a dominant rhythm class plus interspersed ectopic beats. Used for
// pipeline smoke tests when the MIT-BIH database is not at hand.

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "hbc/wfdb.hpp"

namespace hbc {

struct SynthSpec {
  std::string name = "s00";
  double duration_s = 60.0;
  double sampling_rate_hz = 360.0;
  double heart_rate_bpm = 75.0;
  HeartbeatClass rhythm = HeartbeatClass::N;
  double ectopic_fraction = 0.12;  // PVCs replacing rhythm beats
  double noise_mv = 0.01;
  double drift_mv = 0.04;
  double mains_mv = 0.01;
  std::uint64_t seed = 1;
};

struct SynthRecord {
  RecordHeader header;
  std::vector<int> adc;  // interleaved, two leads
  AnnotationList beats;
  AnnotationList pwaves;
};

SynthRecord synthesize_record(const SynthSpec& spec);

// Writes <dir>/<name>.hea, .dat, .atr, .pwave.
void write_synth_record(const std::filesystem::path& dir, const SynthRecord& record);

// `count` records cycling the rhythm class through N, PB, LBBB, RBBB with
// heart rates between 60 and 95 bpm.
std::vector<SynthSpec> synth_corpus(std::size_t count, double duration_s, std::uint64_t seed);

}  // namespace hbc
