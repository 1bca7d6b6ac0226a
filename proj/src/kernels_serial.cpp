#include "icred/kernels.hpp"

namespace icred::kern::serial {

void matvec(const double* a, const double* x, double* y, std::size_t m, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = a + i * n;
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) acc += row[j] * x[j];
    y[i] = acc;
  }
}

void matvec_t(const double* a, const double* x, double* y, std::size_t m, std::size_t n) {
  for (std::size_t j = 0; j < n; ++j) {
    double acc = 0.0;
    for (std::size_t i = 0; i < m; ++i) acc += a[i * n + j] * x[i];
    y[j] = acc;
  }
}

void ger(double* a, const double* u, const double* v, double alpha, std::size_t m,
         std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* row = a + i * n;
    const double ui = alpha * u[i];
    for (std::size_t j = 0; j < n; ++j) row[j] += ui * v[j];
  }
}

void axpy(double* y, const double* x, double alpha, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

}  // namespace icred::kern::serial
