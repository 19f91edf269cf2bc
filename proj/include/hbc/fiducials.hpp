#pragma once

// PQRST fiducial detection with dual moving averages and blocks of interest,
// and sensitivity/precision scoring against reference annotations.

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace hbc {

struct MovingAverageSpec {
  std::size_t half_width = 1;
  // A window given as a total length of `total` samples is centered with
  // half-width floor(total / 2).
  static MovingAverageSpec from_total(std::size_t total) { return {total / 2}; }
};

std::vector<double> moving_average(std::span<const double> signal, const MovingAverageSpec& spec);

// Maximal half-open runs [start, end) of samples, sorted and disjoint.
struct Block {
  std::size_t start = 0;
  std::size_t end = 0;
  std::size_t width() const { return end - start; }
};

struct BoiMask {
  std::vector<Block> blocks;
};

// Maximal runs where peak > wave and gate[i] != 0 (empty gate = no gate).
BoiMask blocks_of_interest(std::span<const double> peak, std::span<const double> wave,
                           std::span<const unsigned char> gate = {});

struct DetectorConfig {
  std::size_t r_peak_window = 36;   // samples, ~100 ms at 360 Hz
  std::size_t r_wave_window = 120;  // ~330 ms
  double r_threshold = 0.3;         // fraction of the envelope's 95th percentile
  double gate_percentile = 95.0;
  std::size_t r_min_block = 14;     // ~40 ms
  std::size_t qrs_before = 30;      // samples zeroed before each R for P/T search
  std::size_t qrs_after = 60;
  std::size_t pt_peak_window = 20;  // ~55 ms
  std::size_t pt_wave_window = 40;  // ~110 ms
  std::size_t p_min_distance = 20;  // R − P range, samples
  std::size_t p_max_distance = 170;
  std::size_t t_min_distance = 40;  // T − R range, samples
  std::size_t t_max_distance = 210;
  std::size_t q_window = 20;        // Q searched in [r − 20, r)
  std::size_t s_window = 40;        // S searched in (r, r + 40]
  std::size_t match_tolerance = 54; // ~150 ms
};

struct RPeakResult {
  std::vector<std::size_t> r_peaks;
  BoiMask blocks;  // blocks that produced a peak (width >= r_min_block)
};

// Moving averages run on the squared signal; each block's R is the argmax
// of the signed signal.
RPeakResult detect_r_peaks(std::span<const double> denoised, const DetectorConfig& config = {});

// Copy of `signal` with [r − before, r + after] zeroed around each R.
std::vector<double> suppress_qrs(std::span<const double> signal, std::span<const std::size_t> r,
                                 std::size_t before = 30, std::size_t after = 60);

struct PtPeaks {
  // Parallel to the R list: P of the beat ending at r[i], T following r[i].
  std::vector<std::optional<std::size_t>> p;
  std::vector<std::optional<std::size_t>> t;
};

enum class PtLabel { None, P, T };

// Decides whether a candidate peak is a P (distance to the following R in
// range), a T (distance from the preceding R in range), or neither. When both
// ranges accept it, the class whose range midpoint is closer wins; an exact
// tie goes to P.
PtLabel classify_pt_candidate(std::optional<std::size_t> dist_to_next_r,
                              std::optional<std::size_t> dist_from_prev_r,
                              const DetectorConfig& config = {});

PtPeaks detect_p_t_peaks(std::span<const double> suppressed, std::span<const std::size_t> r,
                         const DetectorConfig& config = {});

struct QsDips {
  std::vector<std::optional<std::size_t>> q;
  std::vector<std::optional<std::size_t>> s;
};

QsDips detect_q_s_dips(std::span<const double> denoised, std::span<const std::size_t> r,
                       const DetectorConfig& config = {});

struct BeatFiducials {
  std::size_t r = 0;
  std::optional<std::size_t> p, q, s, t;
  bool complete() const { return p && q && s && t; }
};

// Runs the R, P/T and Q/S detectors on a denoised record. Fiducials that
// would violate p < q < r < s < t are discarded.
std::vector<BeatFiducials> detect_fiducials(std::span<const double> denoised,
                                            const DetectorConfig& config = {});

struct DetectionScore {
  std::size_t true_positives = 0;
  std::size_t false_positives = 0;
  std::size_t false_negatives = 0;
  double sensitivity = 0.0;
  double precision = 0.0;
  bool sensitivity_defined = true;  // false when truth is empty
  bool precision_defined = true;    // false when nothing was predicted
  std::size_t match_tolerance = 0;
};

struct MatchPair {
  std::size_t predicted;  // index into predicted
  std::size_t truth;      // index into truth
};

// Greedy one-to-one matching: candidate pairs within `tolerance` are taken in
// order of increasing distance. Inputs must be sorted.
std::vector<MatchPair> match_events(std::span<const std::size_t> predicted,
                                    std::span<const std::size_t> truth, std::size_t tolerance);

DetectionScore score_detection(std::span<const std::size_t> predicted,
                               std::span<const std::size_t> truth, std::size_t tolerance = 54);

// Sums counts of several scores and recomputes the ratios.
DetectionScore aggregate_scores(std::span<const DetectionScore> scores);

}  // namespace hbc
