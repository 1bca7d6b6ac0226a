#include "icred/kernels.hpp"

#include <cstdint>

// Each output element is one independent serial accumulation, so these match
// the serial kernels bit for bit regardless of thread count.

namespace icred::kern::par {

void matvec(const double* a, const double* x, double* y, std::size_t m, std::size_t n) {
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(m); ++i) {
    const double* row = a + static_cast<std::size_t>(i) * n;
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) acc += row[j] * x[j];
    y[i] = acc;
  }
}

void matvec_t(const double* a, const double* x, double* y, std::size_t m, std::size_t n) {
#pragma omp parallel for schedule(static)
  for (std::int64_t j = 0; j < static_cast<std::int64_t>(n); ++j) {
    double acc = 0.0;
    for (std::size_t i = 0; i < m; ++i) acc += a[i * n + static_cast<std::size_t>(j)] * x[i];
    y[j] = acc;
  }
}

void ger(double* a, const double* u, const double* v, double alpha, std::size_t m,
         std::size_t n) {
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(m); ++i) {
    double* row = a + static_cast<std::size_t>(i) * n;
    const double ui = alpha * u[i];
    for (std::size_t j = 0; j < n; ++j) row[j] += ui * v[j];
  }
}

void axpy(double* y, const double* x, double alpha, std::size_t n) {
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(n); ++i) y[i] += alpha * x[i];
}

}  // namespace icred::kern::par
