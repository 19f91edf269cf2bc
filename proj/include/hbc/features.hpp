#pragma once

// Per-beat time-interval and under-the-curve area features, their z-score
// normalization and the fused input sequence fed to the classifier.

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hbc/fiducials.hpp"
#include "hbc/wfdb.hpp"

namespace hbc {

inline constexpr int kNumFeatures = 10;
// Fixed order: six intervals (seconds), then four areas (mV·sample).
inline constexpr std::array<std::string_view, kNumFeatures> kFeatureNames = {
    "t_rr", "t_pr", "t_rt", "t_qr", "t_rs", "t_pt", "a_pq", "a_st", "a_qr", "a_rs"};

struct FeatureVector {
  std::array<double, kNumFeatures> values{};
  HeartbeatClass label = HeartbeatClass::N;

  double t_rr() const { return values[0]; }
  double t_pr() const { return values[1]; }
  double t_rt() const { return values[2]; }
  double t_qr() const { return values[3]; }
  double t_rs() const { return values[4]; }
  double t_pt() const { return values[5]; }
  double a_pq() const { return values[6]; }
  double a_st() const { return values[7]; }
  double a_qr() const { return values[8]; }
  double a_rs() const { return values[9]; }
};

// Which features form the fused sequence. Eight = six intervals plus the
// QRS-adjacent areas A_QR and A_RS.
enum class FeatureMode { Six, Eight, Ten };
std::string_view feature_mode_name(FeatureMode m);
FeatureMode feature_mode_from_name(std::string_view name);
std::vector<int> feature_indices(FeatureMode m);
inline int sequence_length(FeatureMode m) { return static_cast<int>(feature_indices(m).size()); }

enum class RrReference { RPeaks, TPeaks };
// "r" or "t".
RrReference rr_reference_from_name(std::string_view name);

struct LinkedBeat {
  std::size_t beat_index = 0;      // position in the record's fiducial list
  std::size_t annotation_sample = 0;
  HeartbeatClass label = HeartbeatClass::N;
};

struct AssemblyStats {
  std::size_t annotations = 0;
  std::size_t linked = 0;
  std::size_t unlinked = 0;           // no detected R within tolerance
  std::size_t missing_fiducial = 0;   // P, Q, S or T absent
  std::size_t missing_neighbor = 0;   // no adjacent beat for t_rr
};

// Links each selected-class channel-0 annotation to the nearest detected R
// within `tolerance` (one-to-one; the nearer annotation wins a contested R).
// Beats lacking a fiducial or an RR neighbor are dropped and counted.
std::vector<LinkedBeat> assemble_beats(std::span<const BeatFiducials> fiducials,
                                       std::span<const BeatRef> annotations, std::size_t tolerance,
                                       AssemblyStats* stats = nullptr,
                                       RrReference rr = RrReference::RPeaks);

// Six intervals in seconds from a complete beat. `rr_samples` is the
// adjacent-beat interval already resolved by rr_interval().
std::array<double, 6> time_features(const BeatFiducials& beat, std::size_t rr_samples,
                                    double sampling_rate_hz);

// Preceding interval when available, else the following one; 0 if neither.
std::size_t rr_interval(std::span<const BeatFiducials> fiducials, std::size_t index,
                        RrReference rr = RrReference::RPeaks);

// Σ|x[k]| for k in [from, to] inclusive. Throws InputError if from > to.
double area_between(std::span<const double> signal, std::size_t from, std::size_t to);

// A_PQ, A_ST, A_QR, A_RS on the denoised signal.
std::array<double, 4> area_features(std::span<const double> signal, const BeatFiducials& beat);

FeatureVector beat_features(std::span<const double> signal, std::span<const BeatFiducials> fiducials,
                            const LinkedBeat& beat, double sampling_rate_hz,
                            RrReference rr = RrReference::RPeaks);

struct NormalizationStats {
  std::array<double, kNumFeatures> mean{};
  std::array<double, kNumFeatures> stddev{};
};

// Population mean and standard deviation. Throws InputError naming the
// feature whose deviation is zero.
NormalizationStats compute_stats(std::span<const FeatureVector> train);

// Z-scored features in the mode's order.
std::vector<double> fuse_and_normalize(const FeatureVector& features,
                                       const NormalizationStats& stats, FeatureMode mode);

// One row of the dataset file.
struct DatasetRow {
  std::string record;
  std::size_t beat = 0;
  std::size_t sample = 0;
  bool train = false;
  FeatureVector features;
};

void write_dataset_csv(const std::string& path, std::span<const DatasetRow> rows);
std::vector<DatasetRow> read_dataset_csv(const std::string& path);
void write_stats_json(const std::string& path, const NormalizationStats& stats);
NormalizationStats read_stats_json(const std::string& path);

}  // namespace hbc
