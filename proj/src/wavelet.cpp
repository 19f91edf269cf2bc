#include "hbc/wavelet.hpp"

#include <cmath>
#include <string>

#include "hbc/error.hpp"
#include "hbc/kernels.hpp"

namespace hbc {

FilterBank make_db4_filters() {
  FilterBank fb;
  fb.lowpass_dec = {-0.010597401785069032, 0.0328830116668852,  0.030841381835560764,
                    -0.18703481171909309,  -0.027983769416859854, 0.6308807679298589,
                    0.7148465705529157,    0.2303778133088965};
  const std::size_t n = fb.lowpass_dec.size();
  for (std::size_t k = 0; k < n; ++k) {
    // Quadrature mirror: hi[k] = (−1)^(k+1) · lo[n−1−k].
    fb.highpass_dec[k] = (k % 2 == 0 ? -1.0 : 1.0) * fb.lowpass_dec[n - 1 - k];
  }
  for (std::size_t k = 0; k < n; ++k) {
    fb.lowpass_rec[k] = fb.lowpass_dec[n - 1 - k];
    fb.highpass_rec[k] = fb.highpass_dec[n - 1 - k];
  }
  return fb;
}

double pseudo_frequency(int level, const PseudoFrequencyRule& rule) {
  if (level < 1) throw InputError("pseudo-frequency level must be >= 1");
  return rule.k_c * rule.f_s / std::ldexp(1.0, level);
}

WaveletCoeffs dwt_decompose(std::span<const double> signal, const FilterBank& filters,
                            int levels) {
  if (levels < 1) throw InputError("decomposition needs at least one level");
  if (signal.size() < (std::size_t{1} << levels))
    throw InputError("signal of length " + std::to_string(signal.size()) + " is shorter than 2^" +
                     std::to_string(levels));
  WaveletCoeffs out;
  out.signal_length = signal.size();
  std::vector<double> current(signal.begin(), signal.end());
  for (int level = 0; level < levels; ++level) {
    const bool odd = current.size() % 2 != 0;
    if (odd) current.push_back(current.back());
    out.pad_flags.push_back(odd);
    std::vector<double> approx(current.size() / 2);
    std::vector<double> detail(current.size() / 2);
    kernels::dwt_analysis_step(current, filters.lowpass_dec, filters.highpass_dec, approx,
                               detail);
    out.details.push_back(std::move(detail));
    current = std::move(approx);
  }
  out.approximation = std::move(current);
  return out;
}

LevelSelection LevelSelection::all(int levels) {
  LevelSelection s;
  for (int n = 1; n <= levels; ++n) s.details.insert(n);
  s.approximation = true;
  return s;
}

std::vector<double> reconstruct_selective(const WaveletCoeffs& coeffs, const FilterBank& filters,
                                          const LevelSelection& keep) {
  const int levels = coeffs.levels();
  for (int n : keep.details)
    if (n < 1 || n > levels)
      throw InputError("level D" + std::to_string(n) + " outside decomposition depth " +
                       std::to_string(levels));
  std::vector<double> current = keep.approximation
                                    ? coeffs.approximation
                                    : std::vector<double>(coeffs.approximation.size(), 0.0);
  for (int level = levels; level >= 1; --level) {
    const auto& stored = coeffs.details[static_cast<std::size_t>(level - 1)];
    const std::vector<double> zeros(keep.details.count(level) ? 0 : stored.size(), 0.0);
    const std::vector<double>& detail = keep.details.count(level) ? stored : zeros;
    std::vector<double> upper(2 * current.size());
    kernels::dwt_synthesis_step(current, detail, filters.lowpass_dec, filters.highpass_dec,
                                upper);
    if (coeffs.pad_flags[static_cast<std::size_t>(level - 1)]) upper.pop_back();
    current = std::move(upper);
  }
  current.resize(coeffs.signal_length);
  return current;
}

std::vector<double> denoise_ecg(std::span<const double> signal) {
  static const FilterBank filters = make_db4_filters();
  return reconstruct_selective(dwt_decompose(signal, filters, 9), filters,
                               LevelSelection::ecg_band());
}

}  // namespace hbc
