#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <tuple>

#include "spmx/error.hpp"
#include "spmx/random.hpp"
#include "spmx/solvers.hpp"
#include "solver_util.hpp"

namespace spmx {
namespace {

struct Clustering {
  std::vector<std::size_t> assignment;
  std::vector<double> centroids;  // k x L
  double wcss = std::numeric_limits<double>::infinity();
  int iterations = 0;
};

double squared_distance(const double* a, const double* b, std::size_t n) {
  double d = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = a[i] - b[i];
    d += t * t;
  }
  return d;
}

// k-means++ seeding followed by Lloyd iterations.
Clustering kmeans(const std::vector<double>& points, std::size_t n, std::size_t dim,
                  std::size_t k, int max_iter, std::uint64_t seed) {
  PhiloxStream rng(seed, 0);
  Clustering c;
  c.centroids.assign(k * dim, 0.0);
  std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
  std::size_t first = static_cast<std::size_t>(rng.below(n));
  std::copy_n(&points[first * dim], dim, &c.centroids[0]);
  for (std::size_t centre = 1; centre < k; ++centre) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      nearest[i] = std::min(nearest[i], squared_distance(&points[i * dim],
                                                         &c.centroids[(centre - 1) * dim], dim));
      total += nearest[i];
    }
    std::size_t pick = n - 1;
    if (total > 0.0) {
      const double target = rng.uniform() * total;
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        acc += nearest[i];
        if (acc >= target && nearest[i] > 0.0) {
          pick = i;
          break;
        }
      }
    } else {
      pick = static_cast<std::size_t>(rng.below(n));
    }
    std::copy_n(&points[pick * dim], dim, &c.centroids[centre * dim]);
  }

  c.assignment.assign(n, k);
  std::vector<double> dist(n, 0.0);
  std::vector<std::size_t> counts(k);
  for (int it = 1; it <= max_iter; ++it) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < k; ++j) {
        const double d = squared_distance(&points[i * dim], &c.centroids[j * dim], dim);
        if (d < best_d) {
          best_d = d;
          best = j;
        }
      }
      dist[i] = best_d;
      if (c.assignment[i] != best) {
        c.assignment[i] = best;
        changed = true;
      }
    }
    c.iterations = it;
    if (!changed && it > 1) break;
    std::fill(c.centroids.begin(), c.centroids.end(), 0.0);
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t j = c.assignment[i];
      ++counts[j];
      for (std::size_t d = 0; d < dim; ++d) c.centroids[j * dim + d] += points[i * dim + d];
    }
    for (std::size_t j = 0; j < k; ++j) {
      if (counts[j] == 0) {
        // Re-seed an empty cluster at the worst-fit point.
        const auto far = static_cast<std::size_t>(
            std::max_element(dist.begin(), dist.end()) - dist.begin());
        std::copy_n(&points[far * dim], dim, &c.centroids[j * dim]);
        dist[far] = 0.0;
        changed = true;
        continue;
      }
      for (std::size_t d = 0; d < dim; ++d)
        c.centroids[j * dim + d] /= static_cast<double>(counts[j]);
    }
  }
  c.wcss = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    c.wcss += squared_distance(&points[i * dim], &c.centroids[c.assignment[i] * dim], dim);
  return c;
}

std::size_t count_distinct_capped(const std::vector<double>& points, std::size_t n,
                                  std::size_t dim, std::size_t cap) {
  std::set<std::vector<double>> seen;
  for (std::size_t i = 0; i < n && seen.size() < cap; ++i)
    seen.emplace(points.begin() + static_cast<std::ptrdiff_t>(i * dim),
                 points.begin() + static_cast<std::ptrdiff_t>((i + 1) * dim));
  return seen.size();
}

}  // namespace

UnmixResult unmix_lumos(const SpectralImage& s, std::size_t k, const MixingMatrix& m,
                        const SolverConfig& cfg) {
  detail::require_bands(s, m);
  cfg.validate();
  if (k < 1) fail(ErrorKind::InvalidArgument, "LUMoS needs k >= 1");
  const std::size_t bands = s.bands();
  const std::size_t voxels = s.voxels();
  const std::size_t fps = m.fluorophores();

  std::vector<std::size_t> members;
  std::vector<double> norms;
  std::vector<double> points;
  for (std::size_t p = 0; p < voxels; ++p) {
    double norm = 0.0;
    for (std::size_t l = 0; l < bands; ++l) norm += std::abs(s.data(l, p));
    if (norm == 0.0) continue;
    members.push_back(p);
    norms.push_back(norm);
    for (std::size_t l = 0; l < bands; ++l) points.push_back(s.data(l, p) / norm);
  }
  const std::size_t n = members.size();
  if (count_distinct_capped(points, n, bands, k) < k)
    fail(ErrorKind::DegenerateClustering,
         "LUMoS: k = " + std::to_string(k) + " exceeds the number of distinct pixel spectra");

  Clustering best;
  int best_restart = -1;
  for (int r = 0; r < cfg.lumos_restarts; ++r) {
    Clustering c = kmeans(points, n, bands, k, cfg.lumos_max_iter,
                          cfg.rng_seed + static_cast<std::uint64_t>(r));
    if (c.wcss < best.wcss) {
      best = std::move(c);
      best_restart = r;
    }
  }

  // Greedy cluster -> channel matching by cosine similarity; ties go to the
  // lower channel index, then the lower cluster index.
  std::vector<std::tuple<double, std::size_t, std::size_t>> pairs;
  for (std::size_t c = 0; c < k; ++c) {
    const Eigen::Map<const Eigen::VectorXd> centroid(&best.centroids[c * bands],
                                                     static_cast<Eigen::Index>(bands));
    for (std::size_t j = 0; j < fps; ++j) {
      const Eigen::VectorXd col = m.matrix().col(static_cast<Eigen::Index>(j));
      const double denom = centroid.norm() * col.norm();
      const double cosine = denom > 0.0 ? centroid.dot(col) / denom : 0.0;
      pairs.emplace_back(cosine, j, c);
    }
  }
  std::stable_sort(pairs.begin(), pairs.end(), [](const auto& a, const auto& b) {
    if (std::get<0>(a) != std::get<0>(b)) return std::get<0>(a) > std::get<0>(b);
    if (std::get<1>(a) != std::get<1>(b)) return std::get<1>(a) < std::get<1>(b);
    return std::get<2>(a) < std::get<2>(b);
  });
  constexpr std::size_t kUnmatched = static_cast<std::size_t>(-1);
  std::vector<std::size_t> channel_of_cluster(k, kUnmatched);
  std::vector<bool> channel_taken(fps, false);
  Json matching = Json::array();
  for (const auto& [cosine, j, c] : pairs) {
    if (channel_of_cluster[c] != kUnmatched || channel_taken[j]) continue;
    channel_of_cluster[c] = j;
    channel_taken[j] = true;
    matching.push_back({{"cluster", c}, {"channel", j}, {"cosine", cosine}});
  }

  UnmixResult result{detail::make_estimate(s, m), Json{{"method", "lumos"}}};
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t channel = channel_of_cluster[best.assignment[i]];
    if (channel != kUnmatched) result.estimate.data(channel, members[i]) = norms[i];
  }
  result.meta["k"] = k;
  result.meta["best_restart"] = best_restart;
  result.meta["wcss"] = best.wcss;
  result.meta["iterations"] = best.iterations;
  result.meta["matching"] = matching;
  return result;
}

}  // namespace spmx
