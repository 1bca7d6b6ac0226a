// Compares the serial reference kernels against the OpenMP variants, plus a
// whole forward/backward pass at representative model sizes.

#include <omp.h>

#include <chrono>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "icred/corpus.hpp"
#include "icred/kernels.hpp"
#include "icred/model.hpp"
#include "icred/rng.hpp"
#include "icred/synth.hpp"

using namespace icred;

namespace {

double time_ms(const std::function<void()>& fn, int reps) {
  fn();  // warm up
  auto start = std::chrono::steady_clock::now();
  for (int r = 0; r < reps; ++r) fn();
  auto end = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::milli>(end - start).count() / reps;
}

void bench_matvec(std::size_t m, std::size_t n, int reps) {
  Rng rng(7);
  std::vector<double> a(m * n), x(n), y(m);
  for (auto& v : a) v = rng.uniform(-1, 1);
  for (auto& v : x) v = rng.uniform(-1, 1);

  double serial = time_ms([&] { kern::serial::matvec(a.data(), x.data(), y.data(), m, n); }, reps);
  double par = time_ms([&] { kern::par::matvec(a.data(), x.data(), y.data(), m, n); }, reps);
  std::printf("matvec   %5zux%-5zu serial %8.4f ms   omp %8.4f ms   speedup %.2fx\n", m, n,
              serial, par, serial / par);

  double serial_t =
      time_ms([&] { kern::serial::matvec_t(a.data(), y.data(), x.data(), m, n); }, reps);
  double par_t = time_ms([&] { kern::par::matvec_t(a.data(), y.data(), x.data(), m, n); }, reps);
  std::printf("matvec_t %5zux%-5zu serial %8.4f ms   omp %8.4f ms   speedup %.2fx\n", m, n,
              serial_t, par_t, serial_t / par_t);
}

void bench_instance(std::size_t dims, int reps) {
  SynthConfig scfg;
  scfg.instances = 4;
  auto instances = synth_generate(scfg);
  Vocabulary vocab = Vocabulary::build(instances);

  ModelConfig cfg;
  cfg.word_dim = dims;
  cfg.utterance_hidden_dim = dims;
  cfg.interlocutor_dim = dims;
  cfg.vocab_size = static_cast<std::size_t>(vocab.size());
  Model model(cfg, 11);

  double fwd = time_ms([&] { model.instance_nll(instances[0], vocab); }, reps);
  double full = time_ms(
      [&] {
        Tape tape;
        Binder bind(tape, model.params());
        Value loss = model.forward_loss(bind, instances[0], vocab);
        tape.backward(loss);
      },
      reps);
  std::printf("icred dims=%-4zu forward %8.3f ms   forward+backward %8.3f ms\n", dims, fwd, full);
}

}  // namespace

int main(int argc, char** argv) {
  int threads = argc > 1 ? std::stoi(argv[1]) : omp_get_max_threads();
  kern::set_max_threads(threads);
  std::printf("threads: %d\n", threads);

  bench_matvec(256, 256, 200);
  bench_matvec(1024, 1024, 100);
  bench_matvec(1024, 2860, 50);
  bench_matvec(4096, 4096, 10);
  bench_instance(64, 10);
  bench_instance(128, 5);
  return 0;
}
