#include "hbc/kernels.hpp"

#include <algorithm>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace hbc::kernels {

namespace {

constexpr std::size_t kBlockK = 128;
// Fixed chunk length for the parallel moving average; the running sum is
// restarted at every chunk boundary, independent of the thread count.
constexpr std::size_t kAverageChunk = 8192;

inline std::size_t wrap(std::ptrdiff_t i, std::size_t n) {
  const auto m = static_cast<std::ptrdiff_t>(n);
  std::ptrdiff_t r = i % m;
  return static_cast<std::size_t>(r < 0 ? r + m : r);
}

}  // namespace

void set_threads(int threads) {
#ifdef _OPENMP
  omp_set_num_threads(std::max(1, threads));
#else
  (void)threads;
#endif
}

int threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

template <class T>
void matmul_acc(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n) {
  const auto rows = static_cast<std::ptrdiff_t>(m);
  for (std::size_t kb = 0; kb < k; kb += kBlockK) {
    const std::size_t ke = std::min(k, kb + kBlockK);
#pragma omp parallel for schedule(static) if (m * n * (ke - kb) > 32768)
    for (std::ptrdiff_t i = 0; i < rows; ++i) {
      T* __restrict crow = c + static_cast<std::size_t>(i) * n;
      const T* arow = a + static_cast<std::size_t>(i) * k;
      for (std::size_t p = kb; p < ke; ++p) {
        const T av = arow[p];
        const T* __restrict brow = b + p * n;
        for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
      }
    }
  }
}

template <class T>
void matmul_tn_acc(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n) {
  const auto rows = static_cast<std::ptrdiff_t>(m);
  for (std::size_t kb = 0; kb < k; kb += kBlockK) {
    const std::size_t ke = std::min(k, kb + kBlockK);
#pragma omp parallel for schedule(static) if (m * n * (ke - kb) > 32768)
    for (std::ptrdiff_t i = 0; i < rows; ++i) {
      T* __restrict crow = c + static_cast<std::size_t>(i) * n;
      for (std::size_t p = kb; p < ke; ++p) {
        const T av = a[p * m + static_cast<std::size_t>(i)];
        const T* __restrict brow = b + p * n;
        for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
      }
    }
  }
}

template <class T>
void matmul_nt_acc(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n) {
  thread_local std::vector<T> bt;
  bt.resize(k * n);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t p = 0; p < k; ++p) bt[p * n + j] = b[j * k + p];
  matmul_acc(a, bt.data(), c, m, k, n);
}

void matmul_i8(const std::int8_t* a, std::span<const std::int32_t> zero_points,
               const std::int8_t* b, std::int32_t* c, std::size_t m, std::size_t k,
               std::size_t n) {
  const auto rows = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel for schedule(static) if (m * n * k > 32768)
  for (std::ptrdiff_t i = 0; i < rows; ++i) {
    std::int32_t* __restrict crow = c + static_cast<std::size_t>(i) * n;
    std::fill(crow, crow + n, 0);
    const std::int8_t* arow = a + static_cast<std::size_t>(i) * k;
    const std::int32_t zp = zero_points[static_cast<std::size_t>(i)];
    for (std::size_t p = 0; p < k; ++p) {
      const std::int32_t av = static_cast<std::int32_t>(arow[p]) - zp;
      const std::int8_t* __restrict brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * static_cast<std::int32_t>(brow[j]);
    }
  }
}

void moving_average(std::span<const double> x, std::size_t half_width, std::span<double> out) {
  const std::size_t n = x.size();
  const auto chunks = static_cast<std::ptrdiff_t>((n + kAverageChunk - 1) / kAverageChunk);
#pragma omp parallel for schedule(static) if (chunks > 1)
  for (std::ptrdiff_t ch = 0; ch < chunks; ++ch) {
    const std::size_t begin = static_cast<std::size_t>(ch) * kAverageChunk;
    const std::size_t end = std::min(n, begin + kAverageChunk);
    std::size_t lo = begin > half_width ? begin - half_width : 0;
    std::size_t hi = std::min(n - 1, begin + half_width);
    double sum = 0.0;
    for (std::size_t j = lo; j <= hi; ++j) sum += x[j];
    for (std::size_t i = begin; i < end; ++i) {
      out[i] = sum / static_cast<double>(hi - lo + 1);
      // Slide to i + 1.
      if (i + 1 + half_width < n) sum += x[++hi];
      if (i + 1 > half_width + lo) sum -= x[lo++];
    }
  }
}

void dwt_analysis_step(std::span<const double> x, std::span<const double> lo,
                       std::span<const double> hi, std::span<double> approx,
                       std::span<double> detail) {
  const std::size_t n = x.size();
  const std::size_t taps = lo.size();
  const auto half = static_cast<std::ptrdiff_t>(n / 2);
  const auto shift = static_cast<std::ptrdiff_t>(taps / 2);
#pragma omp parallel for schedule(static) if (n > 65536)
  for (std::ptrdiff_t i = 0; i < half; ++i) {
    double sa = 0.0;
    double sd = 0.0;
    const std::ptrdiff_t base = 2 * i + shift;
    for (std::size_t j = 0; j < taps; ++j) {
      const double v = x[wrap(base - static_cast<std::ptrdiff_t>(j), n)];
      sa += lo[j] * v;
      sd += hi[j] * v;
    }
    approx[static_cast<std::size_t>(i)] = sa;
    detail[static_cast<std::size_t>(i)] = sd;
  }
}

void dwt_synthesis_step(std::span<const double> approx, std::span<const double> detail,
                        std::span<const double> lo, std::span<const double> hi,
                        std::span<double> out) {
  const std::size_t n = 2 * approx.size();
  const std::size_t taps = lo.size();
  const auto len = static_cast<std::ptrdiff_t>(n);
  const auto shift = static_cast<std::ptrdiff_t>(taps / 2);
  // Gather form: output t receives tap j from coefficient i where
  // 2i ≡ t + j − L/2 (mod n).
#pragma omp parallel for schedule(static) if (n > 65536)
  for (std::ptrdiff_t t = 0; t < len; ++t) {
    double s = 0.0;
    for (std::size_t j = 0; j < taps; ++j) {
      const std::size_t two_i = wrap(t + static_cast<std::ptrdiff_t>(j) - shift, n);
      if (two_i % 2 != 0) continue;
      s += lo[j] * approx[two_i / 2] + hi[j] * detail[two_i / 2];
    }
    out[static_cast<std::size_t>(t)] = s;
  }
}

template void matmul_acc<float>(const float*, const float*, float*, std::size_t, std::size_t,
                                std::size_t);
template void matmul_acc<double>(const double*, const double*, double*, std::size_t,
                                 std::size_t, std::size_t);
template void matmul_tn_acc<float>(const float*, const float*, float*, std::size_t,
                                   std::size_t, std::size_t);
template void matmul_tn_acc<double>(const double*, const double*, double*, std::size_t,
                                    std::size_t, std::size_t);
template void matmul_nt_acc<float>(const float*, const float*, float*, std::size_t,
                                   std::size_t, std::size_t);
template void matmul_nt_acc<double>(const double*, const double*, double*, std::size_t,
                                    std::size_t, std::size_t);

namespace serial {

template <class T>
void matmul_acc(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p)
      for (std::size_t j = 0; j < n; ++j) c[i * n + j] += a[i * k + p] * b[p * n + j];
}

template <class T>
void matmul_tn_acc(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p)
      for (std::size_t j = 0; j < n; ++j) c[i * n + j] += a[p * m + i] * b[p * n + j];
}

template <class T>
void matmul_nt_acc(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p)
      for (std::size_t j = 0; j < n; ++j) c[i * n + j] += a[i * k + p] * b[j * k + p];
}

void matmul_i8(const std::int8_t* a, std::span<const std::int32_t> zero_points,
               const std::int8_t* b, std::int32_t* c, std::size_t m, std::size_t k,
               std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    std::fill(c + i * n, c + (i + 1) * n, 0);
    for (std::size_t p = 0; p < k; ++p) {
      const std::int32_t av = static_cast<std::int32_t>(a[i * k + p]) - zero_points[i];
      for (std::size_t j = 0; j < n; ++j) c[i * n + j] += av * static_cast<std::int32_t>(b[p * n + j]);
    }
  }
}

void moving_average(std::span<const double> x, std::size_t half_width, std::span<double> out) {
  const std::size_t n = x.size();
  for (std::size_t begin = 0; begin < n; begin += kAverageChunk) {
    const std::size_t end = std::min(n, begin + kAverageChunk);
    std::size_t lo = begin > half_width ? begin - half_width : 0;
    std::size_t hi = std::min(n - 1, begin + half_width);
    double sum = 0.0;
    for (std::size_t j = lo; j <= hi; ++j) sum += x[j];
    for (std::size_t i = begin; i < end; ++i) {
      out[i] = sum / static_cast<double>(hi - lo + 1);
      if (i + 1 + half_width < n) sum += x[++hi];
      if (i + 1 > half_width + lo) sum -= x[lo++];
    }
  }
}

void dwt_analysis_step(std::span<const double> x, std::span<const double> lo,
                       std::span<const double> hi, std::span<double> approx,
                       std::span<double> detail) {
  const std::size_t n = x.size();
  const auto shift = static_cast<std::ptrdiff_t>(lo.size() / 2);
  for (std::size_t i = 0; i < n / 2; ++i) {
    double sa = 0.0;
    double sd = 0.0;
    for (std::size_t j = 0; j < lo.size(); ++j) {
      const double v =
          x[wrap(static_cast<std::ptrdiff_t>(2 * i) + shift - static_cast<std::ptrdiff_t>(j), n)];
      sa += lo[j] * v;
      sd += hi[j] * v;
    }
    approx[i] = sa;
    detail[i] = sd;
  }
}

void dwt_synthesis_step(std::span<const double> approx, std::span<const double> detail,
                        std::span<const double> lo, std::span<const double> hi,
                        std::span<double> out) {
  const std::size_t n = 2 * approx.size();
  const std::size_t taps = lo.size();
  const auto shift = static_cast<std::ptrdiff_t>(taps / 2);
  for (std::size_t t = 0; t < n; ++t) {
    double s = 0.0;
    for (std::size_t j = 0; j < taps; ++j) {
      const std::size_t two_i =
          wrap(static_cast<std::ptrdiff_t>(t + j) - shift, n);
      if (two_i % 2 == 0) s += lo[j] * approx[two_i / 2] + hi[j] * detail[two_i / 2];
    }
    out[t] = s;
  }
}

template void matmul_acc<float>(const float*, const float*, float*, std::size_t, std::size_t,
                                std::size_t);
template void matmul_acc<double>(const double*, const double*, double*, std::size_t,
                                 std::size_t, std::size_t);
template void matmul_tn_acc<float>(const float*, const float*, float*, std::size_t,
                                   std::size_t, std::size_t);
template void matmul_tn_acc<double>(const double*, const double*, double*, std::size_t,
                                    std::size_t, std::size_t);
template void matmul_nt_acc<float>(const float*, const float*, float*, std::size_t,
                                   std::size_t, std::size_t);
template void matmul_nt_acc<double>(const double*, const double*, double*, std::size_t,
                                    std::size_t, std::size_t);

}  // namespace serial

}  // namespace hbc::kernels
