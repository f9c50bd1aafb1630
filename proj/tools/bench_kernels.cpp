// Compares the OpenMP kernels against the serial reference implementations:
// wall time per call and bitwise agreement of the results.

#include <chrono>
#include <cstdio>
#include <cstring>
#include <functional>

#include "retfuse/nn/kernels.hpp"
#include "retfuse/parallel.hpp"
#include "retfuse/rng.hpp"

using retfuse::Rng;
using retfuse::Tensor;
namespace kernels = retfuse::nn::kernels;
namespace ref = retfuse::nn::ref;

namespace {

Tensor random_tensor(std::vector<std::size_t> shape, Rng& rng) {
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.normal();
  return t;
}

double time_ms(const std::function<void()>& fn, int reps) {
  fn();  // warm-up
  const auto start = std::chrono::steady_clock::now();
  for (int i = 0; i < reps; ++i) fn();
  const auto stop = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::milli>(stop - start).count() / reps;
}

bool bit_equal(const Tensor& a, const Tensor& b) {
  return a.size() == b.size() &&
         std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

}  // namespace

int main(int argc, char** argv) {
  int threads = 0;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--jobs") == 0 && i + 1 < argc) threads = std::atoi(argv[i + 1]);
  }
  if (threads <= 0) threads = 4;
  retfuse::set_jobs(threads);

  Rng rng(20240811);
  std::printf("kernel benchmark, %d threads vs serial reference\n", threads);
  std::printf("%-28s %12s %12s %8s %s\n", "kernel", "ref ms", "omp ms", "speedup", "bitwise");

  const int reps = 5;

  {
    Tensor x = random_tensor({16, 8, 64, 64}, rng);
    Tensor w = random_tensor({16, 8, 3, 3}, rng);
    Tensor y_ref, y_omp;
    const double t_ref = time_ms([&] { ref::conv2d_forward(x, w, 1, 1, y_ref); }, reps);
    const double t_omp = time_ms([&] { kernels::conv2d_forward(x, w, 1, 1, y_omp); }, reps);
    std::printf("%-28s %12.2f %12.2f %7.2fx %s\n", "conv2d_forward 16x8->16 64p", t_ref, t_omp,
                t_ref / t_omp, bit_equal(y_ref, y_omp) ? "ok" : "MISMATCH");
  }
  {
    Tensor x = random_tensor({16, 8, 64, 64}, rng);
    Tensor w = random_tensor({16, 8, 3, 3}, rng);
    Tensor y;
    kernels::conv2d_forward(x, w, 1, 1, y);
    Tensor gx_ref(x.shape()), gx_omp(x.shape());
    const double t_ref = time_ms([&] { ref::conv2d_backward_input(w, y, 1, 1, gx_ref); }, reps);
    const double t_omp =
        time_ms([&] { kernels::conv2d_backward_input(w, y, 1, 1, gx_omp); }, reps);
    std::printf("%-28s %12.2f %12.2f %7.2fx %s\n", "conv2d_backward_input", t_ref, t_omp,
                t_ref / t_omp, bit_equal(gx_ref, gx_omp) ? "ok" : "MISMATCH");

    Tensor gw_ref(w.shape()), gw_omp(w.shape());
    const double t2_ref = time_ms([&] { ref::conv2d_backward_weight(x, y, 1, 1, gw_ref); }, reps);
    const double t2_omp =
        time_ms([&] { kernels::conv2d_backward_weight(x, y, 1, 1, gw_omp); }, reps);
    std::printf("%-28s %12.2f %12.2f %7.2fx %s\n", "conv2d_backward_weight", t2_ref, t2_omp,
                t2_ref / t2_omp, bit_equal(gw_ref, gw_omp) ? "ok" : "MISMATCH");
  }
  {
    Tensor x = random_tensor({256, 512}, rng);
    Tensor w = random_tensor({512, 256}, rng);
    Tensor b = random_tensor({256}, rng);
    Tensor y_ref, y_omp;
    const double t_ref = time_ms([&] { ref::dense_forward(x, w, b, y_ref); }, reps);
    const double t_omp = time_ms([&] { kernels::dense_forward(x, w, b, y_omp); }, reps);
    std::printf("%-28s %12.2f %12.2f %7.2fx %s\n", "dense_forward 256x512x256", t_ref, t_omp,
                t_ref / t_omp, bit_equal(y_ref, y_omp) ? "ok" : "MISMATCH");
  }
  {
    Tensor x = random_tensor({32, 64, 16, 16}, rng);
    Tensor mean_ref({64}), var_ref({64}), mean_omp({64}), var_omp({64});
    const double t_ref = time_ms([&] { ref::bn_stats(x, 32, 64, 256, mean_ref, var_ref); }, reps);
    const double t_omp =
        time_ms([&] { kernels::bn_stats(x, 32, 64, 256, mean_omp, var_omp); }, reps);
    std::printf("%-28s %12.2f %12.2f %7.2fx %s\n", "bn_stats 32x64x16x16", t_ref, t_omp,
                t_ref / t_omp,
                bit_equal(mean_ref, mean_omp) && bit_equal(var_ref, var_omp) ? "ok" : "MISMATCH");
  }
  return 0;
}
