#pragma once

// Periodized Daubechies-4 (8-tap) discrete wavelet transform used to denoise
// ECG records before fiducial detection.

#include <array>
#include <set>
#include <span>
#include <vector>

namespace hbc {

struct FilterBank {
  std::array<double, 8> lowpass_dec{};
  std::array<double, 8> highpass_dec{};
  std::array<double, 8> lowpass_rec{};
  std::array<double, 8> highpass_rec{};
};

// db4: four vanishing moments, the convention of common wavelet toolboxes.
FilterBank make_db4_filters();

struct PseudoFrequencyRule {
  double k_c = 0.7;  // normalized central frequency of db4
  double f_s = 360.0;
};

// k_c · f_s / 2^level, level >= 1.
double pseudo_frequency(int level, const PseudoFrequencyRule& rule);

struct WaveletCoeffs {
  std::vector<std::vector<double>> details;  // details[0] is D1
  std::vector<double> approximation;         // A at the deepest level
  std::vector<bool> pad_flags;               // pad_flags[n]: level-n input was odd
  std::size_t signal_length = 0;
  int levels() const { return static_cast<int>(details.size()); }
};

// Throws InputError if signal.size() < 2^levels.
WaveletCoeffs dwt_decompose(std::span<const double> signal, const FilterBank& filters,
                            int levels = 9);

// Which coefficient arrays survive reconstruction.
struct LevelSelection {
  std::set<int> details;  // 1-based detail levels
  bool approximation = true;

  static LevelSelection all(int levels);
  static LevelSelection none() { return {{}, false}; }
  // D4, D5, D6 and the level-9 approximation.
  static LevelSelection ecg_band() { return {{4, 5, 6}, true}; }
};

// Inverse cascade with the unselected arrays zeroed. Output length equals
// the decomposed signal length. Throws InputError if the selection names a
// level deeper than the decomposition.
std::vector<double> reconstruct_selective(const WaveletCoeffs& coeffs, const FilterBank& filters,
                                          const LevelSelection& keep);

// Level-9 decomposition followed by reconstruction from D4–D6 and A9.
std::vector<double> denoise_ecg(std::span<const double> signal);

}  // namespace hbc
