#include "taxo/kernels.hpp"

#include <cmath>
#include <cstdint>
#include <limits>

#include "taxo/util.hpp"

namespace taxo::kernels {

namespace {

inline double sq_dist_row(const double* a, const double* b, std::size_t dim) {
  double acc = 0.0;
  for (std::size_t d = 0; d < dim; ++d) {
    const double diff = a[d] - b[d];
    acc += diff * diff;
  }
  return acc;
}

}  // namespace

std::vector<double> pairwise_sq_dist(const std::vector<double>& points,
                                     std::size_t n, std::size_t dim, Exec mode) {
  if (points.size() != n * dim) fail("pairwise_sq_dist: bad shape");
  std::vector<double> out(n * n, 0.0);
  const std::int64_t sn = static_cast<std::int64_t>(n);
  if (mode == Exec::serial) {
    for (std::int64_t i = 0; i < sn; ++i)
      for (std::int64_t j = 0; j < sn; ++j)
        out[i * sn + j] = sq_dist_row(&points[i * dim], &points[j * dim], dim);
    return out;
  }
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < sn; ++i)
    for (std::int64_t j = 0; j < sn; ++j)
      out[i * sn + j] = sq_dist_row(&points[i * dim], &points[j * dim], dim);
  return out;
}

std::vector<int> assign_nearest(const std::vector<double>& points, std::size_t n,
                                const std::vector<double>& centroids, std::size_t k,
                                std::size_t dim, Exec mode) {
  if (points.size() != n * dim || centroids.size() != k * dim || k == 0)
    fail("assign_nearest: bad shape");
  std::vector<int> labels(n, 0);
  const std::int64_t sn = static_cast<std::int64_t>(n);
  auto nearest = [&](std::int64_t i) {
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < k; ++c) {
      const double d = sq_dist_row(&points[i * dim], &centroids[c * dim], dim);
      if (d < best_d) {
        best_d = d;
        best = static_cast<int>(c);
      }
    }
    return best;
  };
  if (mode == Exec::serial) {
    for (std::int64_t i = 0; i < sn; ++i) labels[i] = nearest(i);
    return labels;
  }
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < sn; ++i) labels[i] = nearest(i);
  return labels;
}

std::vector<double> cluster_means(const std::vector<double>& points, std::size_t n,
                                  const std::vector<int>& labels, std::size_t k,
                                  std::size_t dim, std::vector<std::size_t>& counts,
                                  Exec mode) {
  if (points.size() != n * dim || labels.size() != n) fail("cluster_means: bad shape");
  std::vector<double> means(k * dim, 0.0);
  counts.assign(k, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const int l = labels[i];
    if (l < 0 || static_cast<std::size_t>(l) >= k) fail("cluster_means: bad label");
    ++counts[l];
  }
  const std::int64_t sk = static_cast<std::int64_t>(k);
  // Each cluster sums its members in point-index order, so the serial and
  // parallel paths add the same values in the same order.
  auto fill = [&](std::int64_t c) {
    if (counts[c] == 0) return;
    double* row = &means[c * dim];
    for (std::size_t i = 0; i < n; ++i) {
      if (labels[i] != static_cast<int>(c)) continue;
      const double* p = &points[i * dim];
      for (std::size_t d = 0; d < dim; ++d) row[d] += p[d];
    }
    const double inv = 1.0 / static_cast<double>(counts[c]);
    for (std::size_t d = 0; d < dim; ++d) row[d] *= inv;
  };
  if (mode == Exec::serial) {
    for (std::int64_t c = 0; c < sk; ++c) fill(c);
    return means;
  }
#pragma omp parallel for schedule(static)
  for (std::int64_t c = 0; c < sk; ++c) fill(c);
  return means;
}

double mean_silhouette(const std::vector<double>& sq_dist, std::size_t n,
                       const std::vector<int>& labels, std::size_t k, Exec mode) {
  if (sq_dist.size() != n * n || labels.size() != n || n == 0 || k == 0)
    fail("mean_silhouette: bad shape");
  std::vector<std::size_t> sizes(k, 0);
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= k)
      fail("mean_silhouette: bad label");
    ++sizes[labels[i]];
  }
  std::vector<double> s(n, 0.0);
  const std::int64_t sn = static_cast<std::int64_t>(n);
  auto one = [&](std::int64_t i) {
    const int li = labels[i];
    if (sizes[li] <= 1) {
      s[i] = 0.0;
      return;
    }
    std::vector<double> sums(k, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      if (j == static_cast<std::size_t>(i)) continue;
      sums[labels[j]] += std::sqrt(sq_dist[i * sn + j]);
    }
    const double a = sums[li] / static_cast<double>(sizes[li] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < k; ++c) {
      if (static_cast<int>(c) == li || sizes[c] == 0) continue;
      b = std::min(b, sums[c] / static_cast<double>(sizes[c]));
    }
    if (!std::isfinite(b)) {
      s[i] = 0.0;  // single non-empty cluster
      return;
    }
    const double m = std::max(a, b);
    s[i] = m > 0 ? (b - a) / m : 0.0;
  };
  if (mode == Exec::serial) {
    for (std::int64_t i = 0; i < sn; ++i) one(i);
  } else {
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < sn; ++i) one(i);
  }
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) total += s[i];
  return total / static_cast<double>(n);
}

std::vector<double> gram_matrix(const std::vector<double>& x, std::size_t n,
                                std::size_t dim, Exec mode) {
  if (x.size() != n * dim) fail("gram_matrix: bad shape");
  std::vector<double> g(n * n, 0.0);
  const std::int64_t sn = static_cast<std::int64_t>(n);
  auto row = [&](std::int64_t i) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      const double* a = &x[i * dim];
      const double* b = &x[j * dim];
      for (std::size_t d = 0; d < dim; ++d) acc += a[d] * b[d];
      g[i * sn + j] = acc;
    }
  };
  if (mode == Exec::serial) {
    for (std::int64_t i = 0; i < sn; ++i) row(i);
    return g;
  }
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < sn; ++i) row(i);
  return g;
}

double pair_mean(const std::vector<double>& ratios, std::size_t n, Exec mode) {
  if (n < 2) return 0.0;
  if (ratios.size() != n * n) fail("pair_mean: bad shape");
  std::vector<double> partial(n, 0.0);
  const std::int64_t sn = static_cast<std::int64_t>(n);
  auto row = [&](std::int64_t i) {
    double acc = 0.0;
    for (std::size_t j = static_cast<std::size_t>(i) + 1; j < n; ++j)
      acc += ratios[i * sn + j];
    partial[i] = acc;
  };
  if (mode == Exec::serial) {
    for (std::int64_t i = 0; i < sn; ++i) row(i);
  } else {
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < sn; ++i) row(i);
  }
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) total += partial[i];
  const double pairs = static_cast<double>(n) * static_cast<double>(n - 1) / 2.0;
  return total / pairs;
}

}  // namespace taxo::kernels
