#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "portfolio/core.hpp"
#include "portfolio/error.hpp"
#include "portfolio/metrics.hpp"
#include "portfolio/rng.hpp"

namespace portfolio {

// One labelled sample: embedded points plus, for every classifier, the
// stored output distribution over the C classes at each point.
struct SampleSet {
  std::vector<LabeledPoint> points;
  std::vector<Mat> outputs;  // outputs[i] is |points| x C for classifier i

  std::size_t size() const { return points.size(); }
  std::size_t num_classifiers() const { return outputs.size(); }
};

// Checks the SampleSet invariants: per-point rows are probability vectors.
inline void validate_sample_set(const SampleSet& set, double sum_tolerance = 1e-9) {
  for (std::size_t i = 0; i < set.outputs.size(); ++i) {
    const Mat& out = set.outputs[i];
    if (out.rows != set.points.size())
      throw InputError("sample set: classifier " + std::to_string(i) +
                       " outputs cover " + std::to_string(out.rows) +
                       " points, expected " + std::to_string(set.points.size()));
    for (std::size_t p = 0; p < out.rows; ++p) {
      double sum = 0.0;
      for (std::size_t c = 0; c < out.cols; ++c) {
        double v = out.at(p, c);
        if (!(v >= 0.0 && v <= 1.0))
          throw InputError("sample set: probability out of [0,1] at point " +
                           std::to_string(p) + ", classifier " + std::to_string(i));
        sum += v;
      }
      if (std::abs(sum - 1.0) > sum_tolerance)
        throw InputError("sample set: probability row " + std::to_string(p) +
                         " for classifier " + std::to_string(i) + " sums to " +
                         std::to_string(sum));
    }
  }
}

struct EstimatorConfig {
  std::size_t num_samples = 10;   // K
  std::size_t sample_size = 100;  // s
  Metric metric = Metric::LINF;
  double tau = 1.0;
  double lambda = 0.0;
  std::uint64_t seed = 0;

  // Sampling is without replacement within each sample set, so a pool must
  // hold K*s points to keep the K draws meaningfully distinct.
  void validate(std::size_t pool_size) const {
    if (num_samples == 0) throw InputError("estimator config: K must be positive");
    if (sample_size == 0) throw InputError("estimator config: s must be positive");
    if (!(tau > 0.0)) throw InputError("estimator config: tau must be positive");
    if (lambda < 0.0) throw InputError("estimator config: lambda must be nonnegative");
    if (num_samples * sample_size > pool_size)
      throw InputError("estimator config: K*s = " +
                       std::to_string(num_samples * sample_size) +
                       " exceeds sample pool size " + std::to_string(pool_size));
  }
};

// SP of one stored output distribution against the truth label.
inline double success_probability(std::span<const double> dist, int truth) {
  if (truth < 0 || static_cast<std::size_t>(truth) >= dist.size())
    throw InputError("success_probability: truth label " + std::to_string(truth) +
                     " out of range for " + std::to_string(dist.size()) + " classes");
  return dist[static_cast<std::size_t>(truth)];
}

// K independent uniform subsets of the pool, each of size s drawn without
// replacement, mutually independent (a point may recur across sets).
inline std::vector<SampleSet> draw_samples(const SampleSet& pool, std::size_t k,
                                           std::size_t s, std::uint64_t seed) {
  if (s > pool.size())
    throw InputError("draw_samples: sample size " + std::to_string(s) +
                     " exceeds pool size " + std::to_string(pool.size()));
  if (k == 0) throw InputError("draw_samples: K must be positive");
  std::vector<SampleSet> sets;
  sets.reserve(k);
  for (std::size_t j = 0; j < k; ++j) {
    Rng rng(substream_seed(seed, "sample_set", j));
    auto idx = rng.sample_without_replacement(pool.size(), s);
    SampleSet set;
    set.points.reserve(s);
    for (std::size_t p : idx) set.points.push_back(pool.points[p]);
    set.outputs.reserve(pool.outputs.size());
    for (const Mat& src : pool.outputs) {
      Mat out(s, src.cols);
      for (std::size_t r = 0; r < s; ++r)
        for (std::size_t c = 0; c < src.cols; ++c)
          out.at(r, c) = src.at(idx[r], c);
      set.outputs.push_back(std::move(out));
    }
    sets.push_back(std::move(set));
  }
  return sets;
}

// Mean over the K sample sets of the classifier's success probability at the
// nearest neighbor of x. All classifiers share one NN search per sample set,
// so the full M x N matrix costs the same geometry work as a single row.
inline Mat estimate_sp_matrix(std::span<const LabeledPoint> queries,
                              std::span<const SampleSet> samples, Metric m) {
  if (samples.empty()) throw InputError("estimate_sp_matrix: no sample sets");
  std::size_t num_classifiers = samples.front().num_classifiers();
  for (const SampleSet& s : samples)
    if (s.num_classifiers() != num_classifiers)
      throw InputError("estimate_sp_matrix: inconsistent classifier counts across sets");
  if (num_classifiers == 0)
    throw InputError("estimate_sp_matrix: sample sets carry no classifier outputs");

  Mat acc(num_classifiers, queries.size(), 0.0);
  for (std::size_t q = 0; q < queries.size(); ++q) {
    for (const SampleSet& set : samples) {
      NearestNeighbor nn = nearest_neighbor(queries[q].embedding, set.points, m);
      int label = set.points[nn.index].label;
      for (std::size_t i = 0; i < num_classifiers; ++i)
        acc.at(i, q) += success_probability(
            std::span<const double>(set.outputs[i].data).subspan(
                nn.index * set.outputs[i].cols, set.outputs[i].cols),
            label);
    }
  }
  double inv = 1.0 / static_cast<double>(samples.size());
  for (double& v : acc.data) v = std::clamp(v * inv, 0.0, 1.0);
  return acc;
}

inline double estimate_sp(std::span<const double> x, std::size_t classifier,
                          std::span<const SampleSet> samples, Metric m) {
  if (samples.empty()) throw InputError("estimate_sp: no sample sets");
  KahanSum acc;
  for (const SampleSet& set : samples) {
    if (classifier >= set.num_classifiers())
      throw DataError("estimate_sp: sample set has no outputs for classifier " +
                      std::to_string(classifier));
    NearestNeighbor nn = nearest_neighbor(x, set.points, m);
    const Mat& out = set.outputs[classifier];
    acc.add(success_probability(
        std::span<const double>(out.data).subspan(nn.index * out.cols, out.cols),
        set.points[nn.index].label));
  }
  return std::clamp(acc.value() / static_cast<double>(samples.size()), 0.0, 1.0);
}

// Estimator noise per classifier: the standard deviation of the estimate
// across `resamples` independently redrawn sample families, averaged over
// held-out validation queries.
inline std::vector<double> estimate_sigma_all(
    const SampleSet& pool, std::span<const LabeledPoint> validation_queries,
    std::size_t k, std::size_t s, Metric m, std::size_t resamples,
    std::uint64_t seed) {
  if (resamples < 2)
    throw InputError("estimate_sigma: need at least 2 resamples");
  if (validation_queries.empty())
    throw InputError("estimate_sigma: no validation queries");

  std::vector<Mat> estimates;
  estimates.reserve(resamples);
  for (std::size_t r = 0; r < resamples; ++r) {
    auto family = draw_samples(pool, k, s, substream_seed(seed, "sigma_redraw", r));
    estimates.push_back(estimate_sp_matrix(validation_queries, family, m));
  }

  std::size_t num_classifiers = estimates.front().rows;
  std::vector<double> sigma(num_classifiers, 0.0);
  for (std::size_t i = 0; i < num_classifiers; ++i) {
    KahanSum over_queries;
    for (std::size_t q = 0; q < validation_queries.size(); ++q) {
      double mean = 0.0;
      for (std::size_t r = 0; r < resamples; ++r) mean += estimates[r].at(i, q);
      mean /= static_cast<double>(resamples);
      double var = 0.0;
      for (std::size_t r = 0; r < resamples; ++r) {
        double d = estimates[r].at(i, q) - mean;
        var += d * d;
      }
      var /= static_cast<double>(resamples - 1);
      over_queries.add(std::sqrt(var));
    }
    sigma[i] = over_queries.value() / static_cast<double>(validation_queries.size());
  }
  return sigma;
}

inline double estimate_sigma(std::size_t classifier, const SampleSet& pool,
                             std::span<const LabeledPoint> validation_queries,
                             std::size_t k, std::size_t s, Metric m,
                             std::size_t resamples, std::uint64_t seed) {
  auto all = estimate_sigma_all(pool, validation_queries, k, s, m, resamples, seed);
  if (classifier >= all.size())
    throw DataError("estimate_sigma: classifier index out of range");
  return all[classifier];
}

// Raw and variance-regularized scores feeding the solver.
struct ScoreMatrix {
  Mat raw;                    // M x N estimates in [0,1]
  std::vector<double> sigma;  // per-classifier estimator noise
  double lambda = 0.0;
  Mat regularized;            // raw - lambda * sigma, broadcast per row
};

inline ScoreMatrix regularize(Mat raw, std::vector<double> sigma, double lambda) {
  if (sigma.size() != raw.rows)
    throw InputError("regularize: sigma length does not match classifier count");
  if (lambda < 0.0) throw InputError("regularize: lambda must be nonnegative");
  ScoreMatrix sm;
  sm.regularized = raw;
  for (std::size_t i = 0; i < raw.rows; ++i)
    for (std::size_t j = 0; j < raw.cols; ++j)
      sm.regularized.at(i, j) -= lambda * sigma[i];
  sm.raw = std::move(raw);
  sm.sigma = std::move(sigma);
  sm.lambda = lambda;
  return sm;
}

inline ScoreMatrix build_score_matrix(std::span<const LabeledPoint> queries,
                                      const SampleSet& pool,
                                      std::span<const LabeledPoint> validation_queries,
                                      const EstimatorConfig& cfg,
                                      std::size_t sigma_resamples = 20) {
  auto samples = draw_samples(pool, cfg.num_samples, cfg.sample_size,
                              substream_seed(cfg.seed, "samples"));
  Mat raw = estimate_sp_matrix(queries, samples, cfg.metric);
  auto sigma = estimate_sigma_all(pool, validation_queries, cfg.num_samples,
                                  cfg.sample_size, cfg.metric, sigma_resamples,
                                  substream_seed(cfg.seed, "sigma"));
  return regularize(std::move(raw), std::move(sigma), cfg.lambda);
}

}  // namespace portfolio
