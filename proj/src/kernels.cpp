#include "icred/kernels.hpp"

#include <omp.h>

#include <algorithm>
#include <atomic>

namespace icred::kern {

namespace {
std::atomic<int> g_max_threads{0};  // 0 = library default

int effective_threads() {
  int n = g_max_threads.load(std::memory_order_relaxed);
  if (n <= 0) n = omp_get_max_threads();
  // inside an outer parallel region (per-instance tapes) stay serial
  if (omp_in_parallel()) return 1;
  return std::max(1, n);
}

bool go_parallel(std::size_t work) { return work >= kParallelCutoff && effective_threads() > 1; }
}  // namespace

void set_max_threads(int n) {
  g_max_threads.store(n, std::memory_order_relaxed);
  if (n > 0) omp_set_num_threads(n);
}

int max_threads() { return effective_threads(); }

void matvec(const double* a, const double* x, double* y, std::size_t m, std::size_t n) {
  if (go_parallel(m * n)) {
    par::matvec(a, x, y, m, n);
  } else {
    serial::matvec(a, x, y, m, n);
  }
}

void matvec_t(const double* a, const double* x, double* y, std::size_t m, std::size_t n) {
  if (go_parallel(m * n)) {
    par::matvec_t(a, x, y, m, n);
  } else {
    serial::matvec_t(a, x, y, m, n);
  }
}

void ger(double* a, const double* u, const double* v, double alpha, std::size_t m,
         std::size_t n) {
  if (go_parallel(m * n)) {
    par::ger(a, u, v, alpha, m, n);
  } else {
    serial::ger(a, u, v, alpha, m, n);
  }
}

void axpy(double* y, const double* x, double alpha, std::size_t n) {
  if (go_parallel(n)) {
    par::axpy(y, x, alpha, n);
  } else {
    serial::axpy(y, x, alpha, n);
  }
}

}  // namespace icred::kern
