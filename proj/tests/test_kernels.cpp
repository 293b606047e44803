#include <doctest.h>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "taxo/kernels.hpp"
#include "taxo/util.hpp"

using namespace taxo;
using kernels::Exec;

namespace {

std::vector<double> random_points(uint64_t seed, std::size_t n, std::size_t dim) {
  std::vector<double> pts(n * dim);
  uint64_t state = seed;
  for (double& x : pts) x = next_unit(state) * 4.0 - 2.0;
  return pts;
}

}  // namespace

TEST_CASE("kernels: parallel results match the serial reference bit for bit") {
  const std::size_t n = 97, dim = 7, k = 4;
  const std::vector<double> pts = random_points(11, n, dim);
  const std::vector<double> cents = random_points(12, k, dim);
  uint64_t state = 13;
  std::vector<int> labels(n);
  for (auto& l : labels) l = static_cast<int>(splitmix64(state) % k);

  for (int threads : {1, 2, 4}) {
#ifdef _OPENMP
    omp_set_num_threads(threads);
#else
    (void)threads;
#endif
    const auto d_s = kernels::pairwise_sq_dist(pts, n, dim, Exec::serial);
    const auto d_p = kernels::pairwise_sq_dist(pts, n, dim, Exec::parallel);
    CHECK(d_s == d_p);

    CHECK(kernels::assign_nearest(pts, n, cents, k, dim, Exec::serial) ==
          kernels::assign_nearest(pts, n, cents, k, dim, Exec::parallel));

    std::vector<std::size_t> cs, cp;
    CHECK(kernels::cluster_means(pts, n, labels, k, dim, cs, Exec::serial) ==
          kernels::cluster_means(pts, n, labels, k, dim, cp, Exec::parallel));
    CHECK(cs == cp);

    CHECK(kernels::mean_silhouette(d_s, n, labels, k, Exec::serial) ==
          kernels::mean_silhouette(d_s, n, labels, k, Exec::parallel));

    CHECK(kernels::gram_matrix(pts, n, dim, Exec::serial) ==
          kernels::gram_matrix(pts, n, dim, Exec::parallel));

    std::vector<double> ratios(n * n, 0.0);
    uint64_t rs = 17;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) ratios[i * n + j] = next_unit(rs);
    CHECK(kernels::pair_mean(ratios, n, Exec::serial) ==
          kernels::pair_mean(ratios, n, Exec::parallel));
  }
#ifdef _OPENMP
  omp_set_num_threads(omp_get_num_procs());
#endif
}

TEST_CASE("kernels: silhouette prefers the true grouping of two tight blobs") {
  // Two blobs around (0,0) and (10,10).
  std::size_t n = 12;
  std::vector<double> pts;
  uint64_t state = 5;
  for (std::size_t i = 0; i < n; ++i) {
    const double base = i < 6 ? 0.0 : 10.0;
    pts.push_back(base + next_unit(state) * 0.2);
    pts.push_back(base + next_unit(state) * 0.2);
  }
  const auto dist = kernels::pairwise_sq_dist(pts, n, 2);
  std::vector<int> good(n), bad(n);
  for (std::size_t i = 0; i < n; ++i) {
    good[i] = i < 6 ? 0 : 1;
    bad[i] = static_cast<int>(i % 2);
  }
  const double s_good = kernels::mean_silhouette(dist, n, good, 2);
  const double s_bad = kernels::mean_silhouette(dist, n, bad, 2);
  CHECK(s_good > 0.9);
  CHECK(s_good > s_bad);
}

TEST_CASE("kernels: cluster means and assignment agree with direct computation") {
  const std::vector<double> pts = {0, 0, 1, 0, 10, 0, 11, 0};
  const std::vector<int> labels = {0, 0, 1, 1};
  std::vector<std::size_t> counts;
  const auto means = kernels::cluster_means(pts, 4, labels, 2, 2, counts);
  CHECK(means[0] == doctest::Approx(0.5));
  CHECK(means[2] == doctest::Approx(10.5));
  CHECK(counts == std::vector<std::size_t>{2, 2});

  const auto assigned = kernels::assign_nearest(pts, 4, means, 2, 2);
  CHECK(assigned == labels);
}

TEST_CASE("kernels: nearest-centroid ties resolve to the lowest index") {
  const std::vector<double> pts = {5.0};
  const std::vector<double> cents = {4.0, 6.0};  // equidistant
  const auto labels = kernels::assign_nearest(pts, 1, cents, 2, 1);
  CHECK(labels[0] == 0);
}

TEST_CASE("kernels: singleton clusters contribute zero silhouette") {
  const std::vector<double> pts = {0, 0, 0.1, 0, 9, 0};
  const auto dist = kernels::pairwise_sq_dist(pts, 3, 2);
  const std::vector<int> labels = {0, 0, 1};
  const double s = kernels::mean_silhouette(dist, 3, labels, 2);
  // Point 2 is a singleton (contributes 0); the blob points score high.
  CHECK(s > 0.5);
  CHECK(s < 1.0);
}
