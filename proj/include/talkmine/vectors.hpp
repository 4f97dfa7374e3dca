#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "talkmine/corpus.hpp"

namespace talkmine {

// Uniform double in [0, 1) from the top 53 bits. std::uniform_real_distribution
// is implementation-defined; this keeps seeded runs identical everywhere.
inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Uniform integer in [0, n).
inline std::size_t uniform_index(std::mt19937_64& rng, std::size_t n) {
  return static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n)) % n;
}

// Cosine similarity; defined as 0 when either vector is all zeros.
inline double cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw std::invalid_argument("cosine: dimension mismatch " + std::to_string(a.size()) + " vs " +
                                std::to_string(b.size()));
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0 || nb == 0) return 0.0;
  const double c = dot / (std::sqrt(na) * std::sqrt(nb));
  return std::clamp(c, -1.0, 1.0);
}

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

inline Vector mean_vector(const std::vector<const Vector*>& vs, std::size_t dim) {
  Vector m(dim, 0.0);
  if (vs.empty()) return m;
  for (const auto* v : vs)
    for (std::size_t i = 0; i < dim; ++i) m[i] += (*v)[i];
  for (auto& x : m) x /= static_cast<double>(vs.size());
  return m;
}

struct ClusterResult {
  std::size_t k = 0;
  std::vector<std::size_t> assignments;     // point -> cluster
  std::vector<Vector> centroids;
  std::vector<std::size_t> representatives;  // cluster -> point index
  std::vector<double> inertia_history;       // within-cluster SSE after each assignment step
  std::size_t iterations = 0;
};

struct KMeansOptions {
  std::size_t max_iterations = 100;
  double relative_tolerance = 1e-6;
};

// Lloyd's algorithm with k-means++ seeding.
inline ClusterResult kmeans(const std::vector<Vector>& points, std::size_t k, std::uint64_t seed,
                            const KMeansOptions& opts = {}) {
  const std::size_t n = points.size();
  if (k < 1 || k > n)
    throw std::invalid_argument("kmeans: k=" + std::to_string(k) + " outside [1," +
                                std::to_string(n) + "]");
  const std::size_t dim = points.front().size();
  for (const auto& p : points)
    if (p.size() != dim) throw std::invalid_argument("kmeans: inconsistent dimensions");

  std::mt19937_64 rng(seed);
  ClusterResult res;
  res.k = k;

  // k-means++: first centre uniform, then proportional to squared distance to
  // the nearest chosen centre. With no mass left, the lowest unchosen index.
  std::vector<bool> chosen(n, false);
  std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
  std::size_t first = uniform_index(rng, n);
  res.centroids.push_back(points[first]);
  chosen[first] = true;
  while (res.centroids.size() < k) {
    double total = 0;
    for (std::size_t i = 0; i < n; ++i) {
      nearest[i] = std::min(nearest[i], squared_distance(points[i], res.centroids.back()));
      if (!chosen[i]) total += nearest[i];
    }
    std::size_t pick = n;
    if (total > 0) {
      double r = uniform01(rng) * total;
      for (std::size_t i = 0; i < n; ++i) {
        if (chosen[i] || nearest[i] == 0) continue;
        pick = i;
        if (r < nearest[i]) break;
        r -= nearest[i];
      }
    }
    if (pick == n)
      for (std::size_t i = 0; i < n; ++i)
        if (!chosen[i]) { pick = i; break; }
    chosen[pick] = true;
    res.centroids.push_back(points[pick]);
  }

  res.assignments.assign(n, k);
  double prev = std::numeric_limits<double>::infinity();
  for (std::size_t iter = 0; iter < opts.max_iterations; ++iter) {
    bool changed = false;
    double sse = 0;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < k; ++c) {
        const double d = squared_distance(points[i], res.centroids[c]);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (res.assignments[i] != best) changed = true;
      res.assignments[i] = best;
      sse += best_d;
    }
    res.inertia_history.push_back(sse);
    res.iterations = iter + 1;

    // Empty clusters keep their previous centroid.
    for (std::size_t c = 0; c < k; ++c) {
      std::vector<const Vector*> members;
      for (std::size_t i = 0; i < n; ++i)
        if (res.assignments[i] == c) members.push_back(&points[i]);
      if (!members.empty()) res.centroids[c] = mean_vector(members, dim);
    }
    if (!changed) break;
    if (std::isfinite(prev) && prev > 0 && (prev - sse) / prev < opts.relative_tolerance) break;
    prev = sse;
  }

  // Representative: assigned point nearest the centroid, lowest index on ties.
  // A cluster left empty (duplicate points) takes the nearest unused point so
  // the k representatives stay distinct.
  std::vector<bool> used(n, false);
  res.representatives.assign(k, n);
  for (std::size_t c = 0; c < k; ++c) {
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      if (res.assignments[i] != c || used[i]) continue;
      const double d = squared_distance(points[i], res.centroids[c]);
      if (d < best_d) {
        best_d = d;
        res.representatives[c] = i;
      }
    }
    if (res.representatives[c] == n) {
      for (std::size_t i = 0; i < n; ++i) {
        if (used[i]) continue;
        const double d = squared_distance(points[i], res.centroids[c]);
        if (d < best_d) {
          best_d = d;
          res.representatives[c] = i;
        }
      }
    }
    used[res.representatives[c]] = true;
  }
  return res;
}

}  // namespace talkmine
