#pragma once

// Data-parallel inner loops shared by the signal and network code.
//
// Every kernel has two implementations: the one in `hbc::kernels` uses OpenMP
// and is what the library calls; the one in `hbc::kernels::serial` is a plain
// loop kept as the reference for tests and benchmarks. Work is partitioned so
// that each output element is produced by exactly one thread with a fixed
// summation order, which makes the parallel results independent of the
// thread count.

#include <cstddef>
#include <cstdint>
#include <span>

namespace hbc::kernels {

// All matrices are dense row-major.

// C[m×n] += A[m×k] · B[k×n]
template <class T>
void matmul_acc(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n);

// C[m×n] += Aᵀ · B with A stored k×m and B k×n.
template <class T>
void matmul_tn_acc(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n);

// C[m×n] += A · Bᵀ with A stored m×k and B n×k.
template <class T>
void matmul_nt_acc(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n);

// C[m×n] = Σ_k (A[i,k] − zero_point[i]) · B[k,j] in 32-bit integer arithmetic.
// One zero point per row of A (per-sample activation quantization).
void matmul_i8(const std::int8_t* a, std::span<const std::int32_t> zero_points,
               const std::int8_t* b, std::int32_t* c, std::size_t m, std::size_t k,
               std::size_t n);

// Centered mean over [i − half_width, i + half_width] clipped to the signal,
// divided by the number of in-range samples.
void moving_average(std::span<const double> x, std::size_t half_width, std::span<double> out);

// One periodized analysis step: approx/detail have length x.size()/2 and
// approx[i] = Σ_j lo[j] · x[(2i + L/2 − j) mod n]. x.size() must be even.
void dwt_analysis_step(std::span<const double> x, std::span<const double> lo,
                       std::span<const double> hi, std::span<double> approx,
                       std::span<double> detail);

// Adjoint of dwt_analysis_step; out has length 2·approx.size().
void dwt_synthesis_step(std::span<const double> approx, std::span<const double> detail,
                        std::span<const double> lo, std::span<const double> hi,
                        std::span<double> out);

namespace serial {

template <class T>
void matmul_acc(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n);
template <class T>
void matmul_tn_acc(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n);
template <class T>
void matmul_nt_acc(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n);
void matmul_i8(const std::int8_t* a, std::span<const std::int32_t> zero_points,
               const std::int8_t* b, std::int32_t* c, std::size_t m, std::size_t k,
               std::size_t n);
void moving_average(std::span<const double> x, std::size_t half_width, std::span<double> out);
void dwt_analysis_step(std::span<const double> x, std::span<const double> lo,
                       std::span<const double> hi, std::span<double> approx,
                       std::span<double> detail);
void dwt_synthesis_step(std::span<const double> approx, std::span<const double> detail,
                        std::span<const double> lo, std::span<const double> hi,
                        std::span<double> out);

}  // namespace serial

// Sets the OpenMP thread count used by the parallel kernels (>= 1).
void set_threads(int threads);
int threads();

}  // namespace hbc::kernels
