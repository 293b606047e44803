#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace taxo::kernels {

/// Execution mode for the data-parallel kernels. Every kernel has a plain
/// serial implementation and an OpenMP one; both produce bit-identical
/// results because each output element is computed independently with a
/// fixed inner summation order. The serial path is kept as the reference
/// the tests compare against; `taxo-bench` times the two side by side.
enum class Exec { serial, parallel };

/// Row-major points, n x dim. Returns the full n x n matrix of squared
/// Euclidean distances.
std::vector<double> pairwise_sq_dist(const std::vector<double>& points,
                                     std::size_t n, std::size_t dim,
                                     Exec mode = Exec::parallel);

/// Nearest-centroid labels; distance ties resolve to the lowest centroid
/// index.
std::vector<int> assign_nearest(const std::vector<double>& points, std::size_t n,
                                const std::vector<double>& centroids, std::size_t k,
                                std::size_t dim, Exec mode = Exec::parallel);

/// Per-cluster means, k x dim row-major. Empty clusters yield zero rows and
/// are reported through `counts`.
std::vector<double> cluster_means(const std::vector<double>& points, std::size_t n,
                                  const std::vector<int>& labels, std::size_t k,
                                  std::size_t dim, std::vector<std::size_t>& counts,
                                  Exec mode = Exec::parallel);

/// Mean silhouette over all points given a precomputed squared-distance
/// matrix (Euclidean distances are used, i.e. sqrt of the entries).
/// Points in singleton clusters contribute 0.
double mean_silhouette(const std::vector<double>& sq_dist, std::size_t n,
                       const std::vector<int>& labels, std::size_t k,
                       Exec mode = Exec::parallel);

/// Gram matrix X * X^T of a row-major n x dim matrix (n x n output).
std::vector<double> gram_matrix(const std::vector<double>& x, std::size_t n,
                                std::size_t dim, Exec mode = Exec::parallel);

/// Mean of ratio values produced per index pair (i < j) by a caller-supplied
/// table: ratios[i * n + j]. Entries with i >= j are ignored. Returns 0 for
/// n < 2. Accumulation is per-row then a fixed-order reduction, so the
/// result does not depend on the thread count.
double pair_mean(const std::vector<double>& ratios, std::size_t n,
                 Exec mode = Exec::parallel);

}  // namespace taxo::kernels
