#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "portfolio/core.hpp"
#include "portfolio/error.hpp"
#include "portfolio/rng.hpp"

namespace portfolio {

enum class Metric { L1, L2, LINF };

inline const char* metric_name(Metric m) {
  switch (m) {
    case Metric::L1: return "l1";
    case Metric::L2: return "l2";
    case Metric::LINF: return "linf";
  }
  return "?";
}

inline Metric parse_metric(const std::string& s) {
  if (s == "l1") return Metric::L1;
  if (s == "l2") return Metric::L2;
  if (s == "linf") return Metric::LINF;
  throw InputError("unknown metric '" + s + "' (expected l1, l2, or linf)");
}

inline double distance(std::span<const double> x, std::span<const double> y, Metric m) {
  if (x.size() != y.size())
    throw InputError("distance: dimension mismatch (" + std::to_string(x.size()) +
                     " vs " + std::to_string(y.size()) + ")");
  double acc = 0.0;
  switch (m) {
    case Metric::L1:
      for (std::size_t k = 0; k < x.size(); ++k) acc += std::abs(x[k] - y[k]);
      return acc;
    case Metric::L2:
      for (std::size_t k = 0; k < x.size(); ++k) {
        double d = x[k] - y[k];
        acc += d * d;
      }
      return std::sqrt(acc);
    case Metric::LINF:
      for (std::size_t k = 0; k < x.size(); ++k)
        acc = std::max(acc, std::abs(x[k] - y[k]));
      return acc;
  }
  return acc;
}

struct NearestNeighbor {
  std::size_t index = 0;
  double dist = 0.0;
};

// Exact linear scan; ties resolve to the smallest index. This is the
// reference implementation the estimator guarantees assume.
inline NearestNeighbor nearest_neighbor(std::span<const double> x,
                                        std::span<const LabeledPoint> points,
                                        Metric m) {
  if (points.empty()) throw InputError("nearest_neighbor: empty sample");
  NearestNeighbor best{0, std::numeric_limits<double>::infinity()};
  for (std::size_t p = 0; p < points.size(); ++p) {
    double d = distance(x, points[p].embedding, m);
    if (d < best.dist) best = {p, d};
  }
  return best;
}

struct SeparationReport {
  double min_interclass_distance = 0.0;
  // pair_minima[a][b] = min distance between classes a and b; diagonal is 0.
  std::vector<std::vector<double>> pair_minima;
  std::size_t duplicate_conflicts = 0;  // identical points with different labels
};

inline SeparationReport separation_audit(std::span<const LabeledPoint> dataset,
                                         Metric m) {
  int num_classes = 0;
  for (const auto& p : dataset) num_classes = std::max(num_classes, p.label + 1);
  std::vector<bool> seen(static_cast<std::size_t>(num_classes), false);
  for (const auto& p : dataset) {
    if (p.label < 0) throw InputError("separation_audit: negative label");
    seen[static_cast<std::size_t>(p.label)] = true;
  }
  int present = 0;
  for (bool b : seen) present += b ? 1 : 0;
  if (present < 2)
    throw InputError("separation_audit: needs at least two classes, found " +
                     std::to_string(present));

  const double inf = std::numeric_limits<double>::infinity();
  SeparationReport report;
  report.pair_minima.assign(static_cast<std::size_t>(num_classes),
                            std::vector<double>(static_cast<std::size_t>(num_classes), inf));
  for (int c = 0; c < num_classes; ++c)
    report.pair_minima[static_cast<std::size_t>(c)][static_cast<std::size_t>(c)] = 0.0;

  for (std::size_t a = 0; a < dataset.size(); ++a) {
    for (std::size_t b = a + 1; b < dataset.size(); ++b) {
      if (dataset[a].label == dataset[b].label) continue;
      double d = distance(dataset[a].embedding, dataset[b].embedding, m);
      auto la = static_cast<std::size_t>(dataset[a].label);
      auto lb = static_cast<std::size_t>(dataset[b].label);
      if (d < report.pair_minima[la][lb]) {
        report.pair_minima[la][lb] = d;
        report.pair_minima[lb][la] = d;
      }
      if (d == 0.0) ++report.duplicate_conflicts;
    }
  }

  double global = inf;
  for (int a = 0; a < num_classes; ++a)
    for (int b = a + 1; b < num_classes; ++b)
      global = std::min(global, report.pair_minima[static_cast<std::size_t>(a)]
                                                  [static_cast<std::size_t>(b)]);
  report.min_interclass_distance = global;
  return report;
}

// Per-dimension min-max rescaling, fit on the sample pool and applied to
// queries with clamping to [0,1]. Degenerate dimensions map to 0.
struct Normalizer {
  std::vector<double> lo, hi;

  static Normalizer fit(std::span<const LabeledPoint> pool) {
    if (pool.empty()) throw InputError("Normalizer::fit: empty pool");
    std::size_t dim = pool.front().embedding.size();
    Normalizer n;
    n.lo.assign(dim, std::numeric_limits<double>::infinity());
    n.hi.assign(dim, -std::numeric_limits<double>::infinity());
    for (const auto& p : pool) {
      if (p.embedding.size() != dim)
        throw InputError("Normalizer::fit: inconsistent embedding dimension");
      for (std::size_t k = 0; k < dim; ++k) {
        n.lo[k] = std::min(n.lo[k], p.embedding[k]);
        n.hi[k] = std::max(n.hi[k], p.embedding[k]);
      }
    }
    return n;
  }

  std::vector<double> apply(std::span<const double> x) const {
    if (x.size() != lo.size())
      throw InputError("Normalizer::apply: dimension mismatch");
    std::vector<double> out(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) {
      double range = hi[k] - lo[k];
      double v = range > 0.0 ? (x[k] - lo[k]) / range : 0.0;
      out[k] = std::clamp(v, 0.0, 1.0);
    }
    return out;
  }
};

// Mean nearest-neighbor distance from each query to a uniform s-subset of
// the pool, averaged over `trials` independent subsets, for each s in sizes.
inline std::map<std::size_t, double> nn_distance_curve(
    std::span<const LabeledPoint> pool, std::span<const LabeledPoint> queries,
    const std::vector<std::size_t>& sizes, Metric m, std::size_t trials,
    std::uint64_t seed) {
  if (pool.empty()) throw InputError("nn_distance_curve: empty pool");
  if (queries.empty()) throw InputError("nn_distance_curve: no queries");
  if (trials == 0) throw InputError("nn_distance_curve: trials must be positive");
  for (std::size_t s : sizes)
    if (s == 0 || s > pool.size())
      throw InputError("nn_distance_curve: size " + std::to_string(s) +
                       " outside [1, " + std::to_string(pool.size()) + "]");

  std::map<std::size_t, double> curve;
  std::size_t size_pos = 0;
  for (std::size_t s : sizes) {
    KahanSum total;
    for (std::size_t t = 0; t < trials; ++t) {
      Rng rng(substream_seed(seed, "nn_curve", size_pos * 1000003ULL + t));
      auto idx = rng.sample_without_replacement(pool.size(), s);
      std::vector<LabeledPoint> subset;
      subset.reserve(s);
      for (std::size_t i : idx) subset.push_back(pool[i]);
      for (const auto& q : queries)
        total.add(nearest_neighbor(q.embedding, subset, m).dist);
    }
    curve[s] = total.value() / (static_cast<double>(trials) * static_cast<double>(queries.size()));
    ++size_pos;
  }
  return curve;
}

}  // namespace portfolio
