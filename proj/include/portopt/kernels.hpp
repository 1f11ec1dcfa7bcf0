#pragma once

#include <cstddef>
#include <span>
#include <string>

// Double-precision kernels behind the numeric hot loops (recurrent nets,
// actor-critic training, turnover and metric reductions). Every kernel has a
// scalar reference implementation and, on x86-64 with AVX2+FMA, a vectorized
// variant selected at runtime. The two backends are equivalence-tested; the
// scalar path is the semantic reference.
//
// Transcendentals (tanh, exp, log) are deliberately not vectorized: both
// backends call libm so backend choice only reassociates sums and products.

namespace portopt::kern {

enum class Backend { scalar, avx2 };

bool avx2_supported();
Backend active_backend();
// Throws std::runtime_error if the backend is not supported on this CPU.
void set_backend(Backend b);
std::string backend_name(Backend b);

// y . x over n elements.
double dot(const double* x, const double* y, std::size_t n);
// y += a * x
void axpy(double a, const double* x, double* y, std::size_t n);
// x *= a
void scal(double a, double* x, std::size_t n);
double sum(const double* x, std::size_t n);
double sum_sq(const double* x, std::size_t n);
// sum_i |x_i - y_i|  (portfolio turnover)
double l1_diff(const double* x, const double* y, std::size_t n);
// Row-major A (rows x cols): y = A x
void matvec(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y);
// y += A^T x   (x has `rows` elements, y has `cols`)
void matvec_t_acc(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y);
// A += x y^T   (outer-product gradient accumulation)
void ger_acc(double* a, std::size_t rows, std::size_t cols, const double* x, const double* y);

inline double dot(std::span<const double> x, std::span<const double> y) {
    return dot(x.data(), y.data(), x.size());
}
inline double sum(std::span<const double> x) { return sum(x.data(), x.size()); }
inline double sum_sq(std::span<const double> x) { return sum_sq(x.data(), x.size()); }
inline double l1_diff(std::span<const double> x, std::span<const double> y) {
    return l1_diff(x.data(), y.data(), x.size());
}

}  // namespace portopt::kern
