// Times the OpenMP kernels against their serial reference implementations
// and checks that both produce identical bits.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "taxo/kernels.hpp"
#include "taxo/util.hpp"

using taxo::kernels::Exec;

namespace {

double now_ms() {
  return std::chrono::duration<double, std::milli>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

template <typename Fn>
double time_best_of(int reps, Fn&& fn) {
  double best = 1e18;
  for (int r = 0; r < reps; ++r) {
    const double t0 = now_ms();
    fn();
    best = std::min(best, now_ms() - t0);
  }
  return best;
}

void report(const char* name, double serial_ms, double parallel_ms, bool identical) {
  std::printf("%-18s serial %9.2f ms   omp %9.2f ms   speedup %5.2fx   %s\n", name,
              serial_ms, parallel_ms, serial_ms / parallel_ms,
              identical ? "bit-identical" : "MISMATCH");
}

}  // namespace

int main() {
  const std::size_t n = 1500;
  const std::size_t dim = 48;
  const std::size_t k = 8;

  uint64_t state = 42;
  std::vector<double> points(n * dim);
  for (double& x : points) x = taxo::next_unit(state) * 2.0 - 1.0;
  std::vector<double> centroids(k * dim);
  for (double& x : centroids) x = taxo::next_unit(state) * 2.0 - 1.0;
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i)
    labels[i] = static_cast<int>(taxo::splitmix64(state) % k);

#ifdef _OPENMP
  std::printf("OpenMP threads: %d\n\n", omp_get_max_threads());
#else
  std::printf("built without OpenMP; both paths run serially\n\n");
#endif

  bool all_ok = true;

  {
    std::vector<double> a, b;
    const double ts = time_best_of(3, [&] {
      a = taxo::kernels::pairwise_sq_dist(points, n, dim, Exec::serial);
    });
    const double tp = time_best_of(3, [&] {
      b = taxo::kernels::pairwise_sq_dist(points, n, dim, Exec::parallel);
    });
    const bool ok = a == b;
    all_ok &= ok;
    report("pairwise_sq_dist", ts, tp, ok);

    std::vector<double> sil_dist = a;
    double sa = 0, sb = 0;
    const double ss = time_best_of(3, [&] {
      sa = taxo::kernels::mean_silhouette(sil_dist, n, labels, k, Exec::serial);
    });
    const double sp = time_best_of(3, [&] {
      sb = taxo::kernels::mean_silhouette(sil_dist, n, labels, k, Exec::parallel);
    });
    const bool sok = sa == sb;
    all_ok &= sok;
    report("mean_silhouette", ss, sp, sok);
  }

  {
    std::vector<int> a, b;
    const double ts = time_best_of(5, [&] {
      a = taxo::kernels::assign_nearest(points, n, centroids, k, dim, Exec::serial);
    });
    const double tp = time_best_of(5, [&] {
      b = taxo::kernels::assign_nearest(points, n, centroids, k, dim, Exec::parallel);
    });
    const bool ok = a == b;
    all_ok &= ok;
    report("assign_nearest", ts, tp, ok);
  }

  {
    std::vector<std::size_t> ca, cb;
    std::vector<double> a, b;
    const double ts = time_best_of(5, [&] {
      a = taxo::kernels::cluster_means(points, n, labels, k, dim, ca, Exec::serial);
    });
    const double tp = time_best_of(5, [&] {
      b = taxo::kernels::cluster_means(points, n, labels, k, dim, cb, Exec::parallel);
    });
    const bool ok = a == b && ca == cb;
    all_ok &= ok;
    report("cluster_means", ts, tp, ok);
  }

  {
    std::vector<double> a, b;
    const double ts = time_best_of(3, [&] {
      a = taxo::kernels::gram_matrix(points, n, dim, Exec::serial);
    });
    const double tp = time_best_of(3, [&] {
      b = taxo::kernels::gram_matrix(points, n, dim, Exec::parallel);
    });
    const bool ok = a == b;
    all_ok &= ok;
    report("gram_matrix", ts, tp, ok);
  }

  {
    std::vector<double> ratios(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) ratios[i * n + j] = taxo::next_unit(state);
    double a = 0, b = 0;
    const double ts =
        time_best_of(5, [&] { a = taxo::kernels::pair_mean(ratios, n, Exec::serial); });
    const double tp =
        time_best_of(5, [&] { b = taxo::kernels::pair_mean(ratios, n, Exec::parallel); });
    const bool ok = a == b;
    all_ok &= ok;
    report("pair_mean", ts, tp, ok);
  }

  return all_ok ? 0 : 1;
}
