#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "portfolio/core.hpp"
#include "portfolio/error.hpp"
#include "portfolio/metrics.hpp"
#include "portfolio/rng.hpp"

namespace portfolio {

// Synthetic classification task: C clusters in [0,1]^d whose LINF balls are
// separated by at least declared_r. Cluster spread is restricted to the
// first intrinsic_dim coordinates; embedded data concentrating on a
// low-dimensional subspace of the ambient space is the regime where
// nearest-neighbor distances shrink at a useful rate.
struct SyntheticTask {
  int num_classes = 0;
  std::size_t dim = 0;
  std::size_t intrinsic_dim = 0;
  double declared_r = 0.0;
  double radius = 0.0;  // cluster half-width under LINF
  std::vector<std::vector<double>> centers;
  std::vector<LabeledPoint> points;
};

// Soft classifier with squared-distance logits over per-class prototypes:
//   z_c(x) = -scale * ||x - prototype_c||_2^2,  f(x) = softmax(z / tau).
struct SyntheticClassifier {
  int index = 0;
  std::string name;
  std::vector<std::vector<double>> prototypes;  // C x d, inside [0,1]^d
  double scale = 1.0;
  double tau = 1.0;
  double cost = 1.0;
};

namespace detail {

inline LabeledPoint sample_cluster_point(const SyntheticTask& task, int cls,
                                         Rng& rng, const std::string& id) {
  const auto& center = task.centers[static_cast<std::size_t>(cls)];
  LabeledPoint p;
  p.id = id;
  p.label = cls;
  p.embedding = center;
  for (std::size_t k = 0; k < task.intrinsic_dim; ++k)
    p.embedding[k] = center[k] + rng.uniform(-task.radius, task.radius);
  return p;
}

}  // namespace detail

inline SyntheticTask generate_task(int num_classes, std::size_t dim,
                                   double declared_r, std::size_t points_per_class,
                                   std::uint64_t seed, double radius = 0.05,
                                   std::size_t intrinsic_dim = 2) {
  if (num_classes < 2)
    throw InputError("generate_task: need at least 2 classes (separation undefined)");
  if (dim == 0) throw InputError("generate_task: dim must be positive");
  if (!(declared_r > 0.0)) throw InputError("generate_task: declared_r must be positive");
  if (!(radius > 0.0) || radius >= 0.5)
    throw InputError("generate_task: radius must lie in (0, 0.5)");
  if (points_per_class == 0)
    throw InputError("generate_task: points_per_class must be positive");

  SyntheticTask task;
  task.num_classes = num_classes;
  task.dim = dim;
  task.intrinsic_dim = std::min(intrinsic_dim == 0 ? dim : intrinsic_dim, dim);
  task.declared_r = declared_r;
  task.radius = radius;

  // Centers go in [radius, 1-radius]^d so every cluster ball stays inside
  // the unit cube. The small margin keeps the separation guarantee safe
  // against rounding in downstream distance computations.
  const double required = declared_r + 2.0 * radius + 1e-9;
  const std::size_t max_attempts = 100000;
  // a partial packing can dead-end, so stalls restart it from scratch
  const std::size_t stall_limit = 1000;
  Rng rng(substream_seed(seed, "task_centers"));
  std::size_t attempts = 0, stalled = 0;
  while (task.centers.size() < static_cast<std::size_t>(num_classes)) {
    if (++attempts > max_attempts)
      throw InputError(
          "generate_task: could not pack " + std::to_string(num_classes) +
          " centers at separation " + std::to_string(declared_r) +
          " in dimension " + std::to_string(dim) +
          "; use a smaller separation/radius or a larger dimension");
    std::vector<double> c(dim);
    for (std::size_t k = 0; k < dim; ++k)
      c[k] = rng.uniform(radius, 1.0 - radius);
    bool ok = true;
    for (const auto& other : task.centers) {
      if (distance(c, other, Metric::LINF) < required) {
        ok = false;
        break;
      }
    }
    if (ok) {
      task.centers.push_back(std::move(c));
      stalled = 0;
    } else if (++stalled >= stall_limit) {
      task.centers.clear();
      stalled = 0;
    }
  }

  Rng point_rng(substream_seed(seed, "task_points"));
  task.points.reserve(points_per_class * static_cast<std::size_t>(num_classes));
  for (int cls = 0; cls < num_classes; ++cls) {
    for (std::size_t n = 0; n < points_per_class; ++n) {
      std::string id = "c" + std::to_string(cls) + "_" + std::to_string(n);
      task.points.push_back(detail::sample_cluster_point(task, cls, point_rng, id));
    }
  }
  return task;
}

// Fresh on-manifold points, round-robin over classes. Ids carry the given
// prefix so pools and query sets drawn from one task never collide.
inline std::vector<LabeledPoint> sample_points(const SyntheticTask& task,
                                               std::size_t count, std::uint64_t seed,
                                               const std::string& id_prefix = "q") {
  Rng rng(substream_seed(seed, "task_extra_points"));
  std::vector<LabeledPoint> out;
  out.reserve(count);
  for (std::size_t n = 0; n < count; ++n) {
    int cls = static_cast<int>(n % static_cast<std::size_t>(task.num_classes));
    out.push_back(detail::sample_cluster_point(task, cls, rng,
                                               id_prefix + std::to_string(n)));
  }
  return out;
}

inline SyntheticClassifier make_classifier(const SyntheticTask& task,
                                           std::string name, double cost,
                                           double perturbation, double tau,
                                           double scale, std::uint64_t seed,
                                           int index = 0) {
  if (!(tau > 0.0)) throw InputError("make_classifier: tau must be positive");
  if (!(scale > 0.0)) throw InputError("make_classifier: scale must be positive");
  if (!(cost > 0.0)) throw InputError("make_classifier: cost must be positive");
  SyntheticClassifier cl;
  cl.index = index;
  cl.name = std::move(name);
  cl.scale = scale;
  cl.tau = tau;
  cl.cost = cost;
  Rng rng(substream_seed(seed, "classifier_prototypes"));
  cl.prototypes.reserve(task.centers.size());
  for (const auto& center : task.centers) {
    std::vector<double> proto(center.size());
    for (std::size_t k = 0; k < center.size(); ++k)
      proto[k] = std::clamp(center[k] + rng.uniform(-perturbation, perturbation),
                            0.0, 1.0);
    cl.prototypes.push_back(std::move(proto));
  }
  return cl;
}

inline std::vector<double> logits(const SyntheticClassifier& cl,
                                  std::span<const double> x) {
  std::vector<double> z(cl.prototypes.size());
  for (std::size_t c = 0; c < cl.prototypes.size(); ++c) {
    const auto& proto = cl.prototypes[c];
    if (proto.size() != x.size())
      throw InputError("logits: dimension mismatch");
    double sq = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
      double d = x[k] - proto[k];
      sq += d * d;
    }
    z[c] = -cl.scale * sq;
  }
  return z;
}

// Softmax of z / tau, stabilized by max-logit subtraction.
inline std::vector<double> softmax(std::span<const double> z, double tau) {
  if (!(tau > 0.0)) throw InputError("softmax: tau must be positive");
  if (z.empty()) throw InputError("softmax: empty logit vector");
  double zmax = -std::numeric_limits<double>::infinity();
  for (double v : z) {
    if (!std::isfinite(v)) throw InputError("softmax: non-finite logit");
    zmax = std::max(zmax, v);
  }
  std::vector<double> p(z.size());
  double total = 0.0;
  for (std::size_t c = 0; c < z.size(); ++c) {
    p[c] = std::exp((z[c] - zmax) / tau);
    total += p[c];
  }
  for (double& v : p) v /= total;
  return p;
}

inline std::vector<double> softmax_predict(const SyntheticClassifier& cl,
                                           std::span<const double> x) {
  return softmax(logits(cl, x), cl.tau);
}

inline int oracle_label(const SyntheticTask& task, std::span<const double> x) {
  double best = std::numeric_limits<double>::infinity();
  int cls = -1;
  for (std::size_t c = 0; c < task.centers.size(); ++c) {
    double d = distance(x, task.centers[c], Metric::LINF);
    if (d < best) {
      best = d;
      cls = static_cast<int>(c);
    }
  }
  if (best > task.radius + 1e-12)
    throw InputError("oracle_label: point lies outside every class region");
  return cls;
}

inline double true_sp(const SyntheticClassifier& cl, const SyntheticTask& task,
                      std::span<const double> x) {
  std::vector<double> p = softmax_predict(cl, x);
  return p[static_cast<std::size_t>(oracle_label(task, x))];
}

// Lipschitz constant of x -> f(x) from ([0,1]^d, m) into distributions under
// the total-variation-style l1 norm. Uses the per-coordinate logit gradient
// bound |dz_c/dx_k| <= 2*scale*max(p_ck, 1-p_ck) on the unit cube together
// with the (2/tau)-Lipschitz bound of the tempered softmax in max-norm.
inline double distribution_lipschitz(const SyntheticClassifier& cl, Metric m) {
  double worst = 0.0;
  for (const auto& proto : cl.prototypes) {
    double l1 = 0.0, sq = 0.0, linf = 0.0;
    for (double pk : proto) {
      double g = 2.0 * cl.scale * std::max(pk, 1.0 - pk);
      l1 += g;
      sq += g * g;
      linf = std::max(linf, g);
    }
    double bound = 0.0;
    switch (m) {
      case Metric::L1: bound = linf; break;       // |grad . delta| <= max_k g_k * ||delta||_1
      case Metric::L2: bound = std::sqrt(sq); break;
      case Metric::LINF: bound = l1; break;
    }
    worst = std::max(worst, bound);
  }
  return (2.0 / cl.tau) * worst;
}

// Lipschitz constant of the success-probability function SP(x) on the task
// manifold: same-class pairs are controlled by the classifier constant,
// cross-class pairs by the oracle constant 2/r (halved).
inline double sp_lipschitz(const SyntheticClassifier& cl, const SyntheticTask& task,
                           Metric m) {
  return std::max(distribution_lipschitz(cl, m), 1.0 / task.declared_r);
}

inline double oracle_lipschitz(const SyntheticTask& task) {
  return 2.0 / task.declared_r;
}

}  // namespace portfolio
