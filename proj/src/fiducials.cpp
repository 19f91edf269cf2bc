#include "hbc/fiducials.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

#include "hbc/kernels.hpp"

namespace hbc {

namespace {

double percentile(std::span<const double> values, double pct) {
  if (values.empty()) return 0.0;
  std::vector<double> v(values.begin(), values.end());
  const double rank = pct / 100.0 * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(rank));
  const std::size_t hi = std::min(v.size() - 1, lo + 1);
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(lo), v.end());
  const double at_lo = v[lo];
  if (hi == lo) return at_lo;
  const double at_hi = *std::min_element(v.begin() + static_cast<std::ptrdiff_t>(lo) + 1, v.end());
  return at_lo + (rank - static_cast<double>(lo)) * (at_hi - at_lo);
}

std::vector<double> squared(std::span<const double> x) {
  std::vector<double> e(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) e[i] = x[i] * x[i];
  return e;
}

std::size_t argmax(std::span<const double> x, std::size_t begin, std::size_t end) {
  std::size_t best = begin;
  for (std::size_t i = begin + 1; i < end; ++i)
    if (x[i] > x[best]) best = i;
  return best;
}

std::size_t argmax_abs(std::span<const double> x, std::size_t begin, std::size_t end) {
  std::size_t best = begin;
  for (std::size_t i = begin + 1; i < end; ++i)
    if (std::abs(x[i]) > std::abs(x[best])) best = i;
  return best;
}

std::optional<std::size_t> argmin(std::span<const double> x, std::size_t begin,
                                  std::size_t end) {
  if (begin >= end) return std::nullopt;
  std::size_t best = begin;
  for (std::size_t i = begin + 1; i < end; ++i)
    if (x[i] < x[best]) best = i;
  return best;
}

double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

std::vector<double> moving_average(std::span<const double> signal, const MovingAverageSpec& spec) {
  std::vector<double> out(signal.size());
  kernels::moving_average(signal, spec.half_width, out);
  return out;
}

BoiMask blocks_of_interest(std::span<const double> peak, std::span<const double> wave,
                           std::span<const unsigned char> gate) {
  BoiMask mask;
  const std::size_t n = std::min(peak.size(), wave.size());
  std::size_t i = 0;
  while (i < n) {
    auto on = [&](std::size_t k) { return peak[k] > wave[k] && (gate.empty() || gate[k] != 0); };
    if (!on(i)) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < n && on(j)) ++j;
    mask.blocks.push_back({i, j});
    i = j;
  }
  return mask;
}

RPeakResult detect_r_peaks(std::span<const double> denoised, const DetectorConfig& config) {
  RPeakResult result;
  if (denoised.empty()) return result;
  const auto energy = squared(denoised);
  const auto peak = moving_average(energy, MovingAverageSpec::from_total(config.r_peak_window));
  const auto wave = moving_average(energy, MovingAverageSpec::from_total(config.r_wave_window));
  const double threshold = config.r_threshold * percentile(peak, config.gate_percentile);
  std::vector<unsigned char> gate(peak.size());
  for (std::size_t i = 0; i < peak.size(); ++i) gate[i] = peak[i] > threshold;
  for (const Block& b : blocks_of_interest(peak, wave, gate).blocks) {
    if (b.width() < config.r_min_block) continue;
    result.blocks.blocks.push_back(b);
    result.r_peaks.push_back(argmax(denoised, b.start, b.end));
  }
  return result;
}

std::vector<double> suppress_qrs(std::span<const double> signal, std::span<const std::size_t> r,
                                 std::size_t before, std::size_t after) {
  std::vector<double> out(signal.begin(), signal.end());
  if (out.empty()) return out;
  for (std::size_t idx : r) {
    const std::size_t lo = idx > before ? idx - before : 0;
    const std::size_t hi = std::min(out.size() - 1, idx + after);
    for (std::size_t k = lo; k <= hi && k < out.size(); ++k) out[k] = 0.0;
  }
  return out;
}

PtLabel classify_pt_candidate(std::optional<std::size_t> dist_to_next_r,
                              std::optional<std::size_t> dist_from_prev_r,
                              const DetectorConfig& config) {
  const bool is_p = dist_to_next_r && *dist_to_next_r >= config.p_min_distance &&
                    *dist_to_next_r <= config.p_max_distance;
  const bool is_t = dist_from_prev_r && *dist_from_prev_r >= config.t_min_distance &&
                    *dist_from_prev_r <= config.t_max_distance;
  if (is_p && is_t) {
    const double p_mid = 0.5 * static_cast<double>(config.p_min_distance + config.p_max_distance);
    const double t_mid = 0.5 * static_cast<double>(config.t_min_distance + config.t_max_distance);
    const double dp = std::abs(static_cast<double>(*dist_to_next_r) - p_mid);
    const double dt = std::abs(static_cast<double>(*dist_from_prev_r) - t_mid);
    return dp <= dt ? PtLabel::P : PtLabel::T;
  }
  if (is_p) return PtLabel::P;
  if (is_t) return PtLabel::T;
  return PtLabel::None;
}

PtPeaks detect_p_t_peaks(std::span<const double> suppressed, std::span<const std::size_t> r,
                         const DetectorConfig& config) {
  PtPeaks out;
  out.p.assign(r.size(), std::nullopt);
  out.t.assign(r.size(), std::nullopt);
  if (suppressed.empty() || r.empty()) return out;
  const auto energy = squared(suppressed);
  const auto peak = moving_average(energy, MovingAverageSpec::from_total(config.pt_peak_window));
  const auto wave = moving_average(energy, MovingAverageSpec::from_total(config.pt_wave_window));
  for (const Block& b : blocks_of_interest(peak, wave).blocks) {
    // The candidate is the largest deflection in the block, either polarity.
    const std::size_t c = argmax_abs(suppressed, b.start, b.end);
    if (suppressed[c] == 0.0) continue;
    const auto next = std::upper_bound(r.begin(), r.end(), c);
    std::optional<std::size_t> to_next;
    std::optional<std::size_t> from_prev;
    if (next != r.end()) to_next = *next - c;
    if (next != r.begin() && *(next - 1) < c) from_prev = c - *(next - 1);
    const auto label = classify_pt_candidate(to_next, from_prev, config);
    auto keep_larger = [&](std::optional<std::size_t>& slot) {
      if (!slot || std::abs(suppressed[c]) > std::abs(suppressed[*slot])) slot = c;
    };
    if (label == PtLabel::P) {
      keep_larger(out.p[static_cast<std::size_t>(next - r.begin())]);
    } else if (label == PtLabel::T) {
      keep_larger(out.t[static_cast<std::size_t>(next - r.begin()) - 1]);
    }
  }
  return out;
}

QsDips detect_q_s_dips(std::span<const double> denoised, std::span<const std::size_t> r,
                       const DetectorConfig& config) {
  QsDips out;
  const std::size_t n = denoised.size();
  for (std::size_t idx : r) {
    const std::size_t q_lo = idx > config.q_window ? idx - config.q_window : 0;
    out.q.push_back(argmin(denoised, q_lo, std::min(idx, n)));
    const std::size_t s_end = std::min(n, idx + config.s_window + 1);
    out.s.push_back(argmin(denoised, idx + 1, s_end));
  }
  return out;
}

std::vector<BeatFiducials> detect_fiducials(std::span<const double> denoised,
                                            const DetectorConfig& config) {
  const auto r = detect_r_peaks(denoised, config).r_peaks;
  const auto suppressed = suppress_qrs(denoised, r, config.qrs_before, config.qrs_after);
  const auto pt = detect_p_t_peaks(suppressed, r, config);
  const auto qs = detect_q_s_dips(denoised, r, config);
  std::vector<BeatFiducials> beats(r.size());
  for (std::size_t i = 0; i < r.size(); ++i) {
    BeatFiducials& b = beats[i];
    b.r = r[i];
    b.q = qs.q[i];
    b.s = qs.s[i];
    b.p = pt.p[i];
    b.t = pt.t[i];
    const std::size_t q_or_r = b.q.value_or(b.r);
    const std::size_t s_or_r = b.s.value_or(b.r);
    if (b.p && *b.p >= q_or_r) b.p.reset();
    if (b.t && *b.t <= s_or_r) b.t.reset();
  }
  return beats;
}

std::vector<MatchPair> match_events(std::span<const std::size_t> predicted,
                                    std::span<const std::size_t> truth, std::size_t tolerance) {
  // (distance, smaller value, larger value, predicted idx, truth idx): the
  // ordering key depends on the pair of positions only, so swapping the two
  // lists yields the same matching.
  std::vector<std::tuple<std::size_t, std::size_t, std::size_t, std::size_t, std::size_t>> cand;
  std::size_t start = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const std::size_t p = predicted[i];
    while (start < truth.size() && truth[start] + tolerance < p) ++start;
    for (std::size_t j = start; j < truth.size() && truth[j] <= p + tolerance; ++j) {
      const std::size_t t = truth[j];
      const std::size_t d = p > t ? p - t : t - p;
      cand.emplace_back(d, std::min(p, t), std::max(p, t), i, j);
    }
  }
  std::sort(cand.begin(), cand.end());
  std::vector<char> used_p(predicted.size(), 0);
  std::vector<char> used_t(truth.size(), 0);
  std::vector<MatchPair> out;
  for (const auto& [d, lo, hi, i, j] : cand) {
    if (used_p[i] || used_t[j]) continue;
    used_p[i] = used_t[j] = 1;
    out.push_back({i, j});
  }
  std::sort(out.begin(), out.end(),
            [](const MatchPair& a, const MatchPair& b) { return a.truth < b.truth; });
  return out;
}

DetectionScore score_detection(std::span<const std::size_t> predicted,
                               std::span<const std::size_t> truth, std::size_t tolerance) {
  DetectionScore s;
  s.match_tolerance = tolerance;
  s.true_positives = match_events(predicted, truth, tolerance).size();
  s.false_positives = predicted.size() - s.true_positives;
  s.false_negatives = truth.size() - s.true_positives;
  s.sensitivity = ratio(s.true_positives, truth.size());
  s.precision = ratio(s.true_positives, predicted.size());
  s.sensitivity_defined = !truth.empty();
  s.precision_defined = !predicted.empty();
  return s;
}

DetectionScore aggregate_scores(std::span<const DetectionScore> scores) {
  DetectionScore total;
  for (const DetectionScore& s : scores) {
    total.true_positives += s.true_positives;
    total.false_positives += s.false_positives;
    total.false_negatives += s.false_negatives;
    total.match_tolerance = s.match_tolerance;
  }
  const std::size_t truth = total.true_positives + total.false_negatives;
  const std::size_t predicted = total.true_positives + total.false_positives;
  total.sensitivity = ratio(total.true_positives, truth);
  total.precision = ratio(total.true_positives, predicted);
  total.sensitivity_defined = truth > 0;
  total.precision_defined = predicted > 0;
  return total;
}

}  // namespace hbc
