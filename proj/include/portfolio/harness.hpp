#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "portfolio/core.hpp"
#include "portfolio/error.hpp"
#include "portfolio/estimator.hpp"
#include "portfolio/io.hpp"
#include "portfolio/metrics.hpp"
#include "portfolio/rng.hpp"
#include "portfolio/simulator.hpp"
#include "portfolio/solver.hpp"

namespace portfolio {

// Validated in-memory dataset: a labelled sample pool with stored classifier
// outputs, plus the query set to be routed. Embeddings are min-max normalized
// on the pool at ingest.
struct DataBundle {
  SampleSet pool;                     // labels + outputs per classifier
  std::vector<LabeledPoint> queries;  // label = -1 when unknown
  std::vector<Mat> query_outputs;     // per classifier, |queries| x C
  std::vector<ClassifierProfile> profiles;
  int num_classes = 0;
  Normalizer normalizer;
  bool has_query_labels = false;
};

inline int argmax_row(const Mat& m, std::size_t r) {
  int best = 0;
  double bv = m.at(r, 0);
  for (std::size_t c = 1; c < m.cols; ++c) {
    if (m.at(r, c) > bv) {
      bv = m.at(r, c);
      best = static_cast<int>(c);
    }
  }
  return best;
}

namespace detail_harness {

inline Mat align_outputs(const OutputRows& rows, std::span<const LabeledPoint> points,
                         const std::string& context) {
  std::unordered_map<std::string, std::size_t> index;
  index.reserve(rows.ids.size());
  for (std::size_t r = 0; r < rows.ids.size(); ++r)
    if (!index.emplace(rows.ids[r], r).second)
      throw InputError(context + ": duplicate id '" + rows.ids[r] + "' in outputs");
  Mat aligned(points.size(), rows.values.cols);
  for (std::size_t p = 0; p < points.size(); ++p) {
    auto it = index.find(points[p].id);
    if (it == index.end())
      throw InputError(context + ": no output row for id '" + points[p].id + "'");
    for (std::size_t c = 0; c < rows.values.cols; ++c)
      aligned.at(p, c) = rows.values.at(it->second, c);
  }
  return aligned;
}

inline Mat logits_to_probs(const Mat& z, double tau) {
  Mat p(z.rows, z.cols);
  for (std::size_t r = 0; r < z.rows; ++r) {
    std::vector<double> row(z.cols);
    for (std::size_t c = 0; c < z.cols; ++c) row[c] = z.at(r, c);
    std::vector<double> probs = softmax(row, tau);
    for (std::size_t c = 0; c < z.cols; ++c) p.at(r, c) = probs[c];
  }
  return p;
}

}  // namespace detail_harness

inline DataBundle ingest(const RunConfig& cfg) {
  DataBundle bundle;

  std::vector<LabeledPoint> pool_points = read_embeddings(cfg.pool_embeddings);
  auto pool_labels = read_labels(cfg.pool_labels);
  for (auto& p : pool_points) {
    auto it = pool_labels.find(p.id);
    if (it == pool_labels.end())
      throw InputError(cfg.pool_labels.string() + ": missing label for pool id '" +
                       p.id + "'");
    p.label = it->second;
  }

  bundle.queries = read_embeddings(cfg.query_embeddings);
  if (!cfg.query_labels.empty()) {
    auto qlabels = read_labels(cfg.query_labels);
    for (auto& q : bundle.queries) {
      auto it = qlabels.find(q.id);
      if (it == qlabels.end())
        throw InputError(cfg.query_labels.string() + ": missing label for query id '" +
                         q.id + "'");
      q.label = it->second;
    }
    bundle.has_query_labels = true;
  }
  if (pool_points.front().embedding.size() != bundle.queries.front().embedding.size())
    throw InputError("pool and query embeddings have different dimensions");

  int num_classes = 0;
  for (const auto& spec : cfg.classifiers) {
    if (spec.outputs_path.empty() || spec.query_outputs_path.empty())
      throw InputError("classifier '" + spec.name +
                       "': outputs_path and query_outputs_path are both required");
    OutputRows pool_rows, query_rows;
    try {
      pool_rows = read_outputs(spec.outputs_path);
      query_rows = read_outputs(spec.query_outputs_path);
    } catch (const InputError& e) {
      throw InputError(std::string(e.what()) + " (classifier '" + spec.name + "')");
    }
    if (num_classes == 0) num_classes = static_cast<int>(pool_rows.values.cols);
    if (static_cast<int>(pool_rows.values.cols) != num_classes ||
        static_cast<int>(query_rows.values.cols) != num_classes)
      throw InputError("classifier '" + spec.name + "': class count " +
                       std::to_string(pool_rows.values.cols) +
                       " disagrees with earlier files (" + std::to_string(num_classes) +
                       ")");
    Mat pool_out = detail_harness::align_outputs(pool_rows, pool_points,
                                                 "classifier '" + spec.name + "'");
    Mat query_out = detail_harness::align_outputs(query_rows, bundle.queries,
                                                  "classifier '" + spec.name + "'");
    if (pool_rows.is_logits)
      pool_out = detail_harness::logits_to_probs(pool_out, cfg.tau);
    if (query_rows.is_logits)
      query_out = detail_harness::logits_to_probs(query_out, cfg.tau);
    bundle.pool.outputs.push_back(std::move(pool_out));
    bundle.query_outputs.push_back(std::move(query_out));
    ClassifierProfile prof;
    prof.index = static_cast<int>(bundle.profiles.size());
    prof.name = spec.name;
    prof.cost = spec.cost;
    bundle.profiles.push_back(std::move(prof));
  }
  bundle.num_classes = num_classes;

  for (const auto& p : pool_points)
    if (p.label >= num_classes)
      throw InputError("pool label " + std::to_string(p.label) + " for id '" + p.id +
                       "' exceeds class count " + std::to_string(num_classes));
  if (bundle.has_query_labels)
    for (const auto& q : bundle.queries)
      if (q.label >= num_classes)
        throw InputError("query label " + std::to_string(q.label) + " for id '" +
                         q.id + "' exceeds class count " + std::to_string(num_classes));

  bundle.normalizer = Normalizer::fit(pool_points);
  for (auto& p : pool_points) p.embedding = bundle.normalizer.apply(p.embedding);
  for (auto& q : bundle.queries) q.embedding = bundle.normalizer.apply(q.embedding);
  bundle.pool.points = std::move(pool_points);

  validate_sample_set(bundle.pool, 1e-6);
  return bundle;
}

// Everything the per-budget runs share: the pool split, the drawn sample
// sets, raw estimates for queries and validation points, and sigma.
struct PipelineContext {
  const DataBundle* bundle = nullptr;
  EstimatorConfig est;
  double feature_extraction_cost = 0.0;
  std::vector<double> lambda_grid;
  bool lambda_is_grid = false;

  SampleSet sample_pool;
  std::vector<LabeledPoint> validation;
  std::vector<std::vector<int>> validation_predictions;  // per classifier
  Mat raw_query;  // M x N
  Mat raw_val;    // M x Nv
  std::vector<double> sigma;
  std::vector<std::vector<int>> query_predictions;  // per classifier
};

inline constexpr std::size_t kSigmaResamples = 20;

inline PipelineContext prepare_pipeline(const DataBundle& bundle, const RunConfig& cfg) {
  PipelineContext ctx;
  ctx.bundle = &bundle;
  ctx.est = EstimatorConfig{cfg.num_samples, cfg.sample_size, cfg.metric,
                            cfg.tau,         0.0,             cfg.seed};
  ctx.feature_extraction_cost = cfg.feature_extraction_cost;
  ctx.lambda_grid = cfg.lambda_grid;
  ctx.lambda_is_grid = cfg.lambda_is_grid;

  // 50/50 split of the pool: one half feeds the sample sets and sigma
  // redraws, the other is held out for sigma averaging and lambda selection.
  std::size_t n = bundle.pool.size();
  if (n < 2) throw InputError("pipeline: pool must hold at least 2 points");
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  Rng split_rng(substream_seed(cfg.seed, "split"));
  split_rng.shuffle(idx);
  std::size_t cut = n - n / 2;  // sample half gets the extra point on odd sizes

  ctx.est.validate(cut);

  ctx.sample_pool.points.reserve(cut);
  for (std::size_t i = 0; i < cut; ++i)
    ctx.sample_pool.points.push_back(bundle.pool.points[idx[i]]);
  for (const Mat& src : bundle.pool.outputs) {
    Mat out(cut, src.cols);
    for (std::size_t r = 0; r < cut; ++r)
      for (std::size_t c = 0; c < src.cols; ++c)
        out.at(r, c) = src.at(idx[r], c);
    ctx.sample_pool.outputs.push_back(std::move(out));
  }

  ctx.validation.reserve(n - cut);
  for (std::size_t i = cut; i < n; ++i)
    ctx.validation.push_back(bundle.pool.points[idx[i]]);
  ctx.validation_predictions.resize(bundle.profiles.size());
  for (std::size_t m = 0; m < bundle.profiles.size(); ++m) {
    ctx.validation_predictions[m].reserve(n - cut);
    for (std::size_t i = cut; i < n; ++i)
      ctx.validation_predictions[m].push_back(argmax_row(bundle.pool.outputs[m], idx[i]));
  }

  auto samples = draw_samples(ctx.sample_pool, cfg.num_samples, cfg.sample_size,
                              substream_seed(cfg.seed, "samples"));
  ctx.raw_query = estimate_sp_matrix(bundle.queries, samples, cfg.metric);
  ctx.raw_val = estimate_sp_matrix(ctx.validation, samples, cfg.metric);
  ctx.sigma = estimate_sigma_all(ctx.sample_pool, ctx.validation, cfg.num_samples,
                                 cfg.sample_size, cfg.metric, kSigmaResamples,
                                 substream_seed(cfg.seed, "sigma"));

  ctx.query_predictions.resize(bundle.profiles.size());
  for (std::size_t m = 0; m < bundle.profiles.size(); ++m) {
    ctx.query_predictions[m].reserve(bundle.queries.size());
    for (std::size_t q = 0; q < bundle.queries.size(); ++q)
      ctx.query_predictions[m].push_back(argmax_row(bundle.query_outputs[m], q));
  }
  return ctx;
}

struct LambdaTraceRow {
  double budget = 0.0;
  double lambda = 0.0;
  double validation_accuracy = 0.0;
  bool selected = false;
};

struct MethodResult {
  Portfolio portfolio;
  double realized_accuracy = std::numeric_limits<double>::quiet_NaN();
  double lambda = std::numeric_limits<double>::quiet_NaN();
  bool proven_optimal = false;
  std::vector<LambdaTraceRow> trace;
};

namespace detail_harness {

inline double fraction_correct(const std::vector<int>& choice,
                               const std::vector<std::vector<int>>& predictions,
                               std::span<const LabeledPoint> points) {
  std::size_t correct = 0;
  for (std::size_t j = 0; j < points.size(); ++j) {
    if (points[j].label < 0)
      throw DataError("realized accuracy requires truth labels for every query");
    if (predictions[static_cast<std::size_t>(choice[j])][j] == points[j].label)
      ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(points.size());
}

inline double min_profile_cost(const std::vector<ClassifierProfile>& profiles) {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& p : profiles) m = std::min(m, p.cost);
  return m;
}

inline std::vector<double> profile_costs(const std::vector<ClassifierProfile>& ps) {
  std::vector<double> out;
  out.reserve(ps.size());
  for (const auto& p : ps) out.push_back(p.cost);
  return out;
}

inline Portfolio to_portfolio(const Solution& sol, std::span<const LabeledPoint> queries) {
  Portfolio pf;
  pf.query_ids.reserve(queries.size());
  for (const auto& q : queries) pf.query_ids.push_back(q.id);
  pf.choice = sol.choice;
  pf.realized_cost = sol.cost;
  pf.objective = sol.objective;
  return pf;
}

}  // namespace detail_harness

// The full estimator -> score matrix -> solver pipeline at one budget.
// Feature extraction is charged once per query set, off the top.
// dp_cost_scale > 0 switches the final solve to the DP mode at that scale.
inline MethodResult run_portfolio(const PipelineContext& ctx, double raw_budget,
                                  long long dp_cost_scale = 0) {
  const DataBundle& bundle = *ctx.bundle;
  const std::size_t n = bundle.queries.size();
  const std::size_t nv = ctx.validation.size();
  const double eff = raw_budget - ctx.feature_extraction_cost;
  const double min_b = detail_harness::min_profile_cost(bundle.profiles);
  const double need = static_cast<double>(n) * min_b;
  if (need > eff + kCostEps)
    throw InfeasibleError("INFEASIBLE: minimum feasible budget = N*min_i b_i = " +
                          std::to_string(need) + ", effective budget = " +
                          std::to_string(eff));

  std::vector<double> costs = detail_harness::profile_costs(bundle.profiles);

  MethodResult result;
  double chosen_lambda = ctx.lambda_grid.front();
  if (ctx.lambda_grid.size() > 1) {
    double best_acc = -1.0;
    double val_budget = eff * static_cast<double>(nv) / static_cast<double>(n);
    for (double lam : ctx.lambda_grid) {
      ScoreMatrix val_scores = regularize(ctx.raw_val, ctx.sigma, lam);
      AssignmentProblem vp{std::move(val_scores.regularized), costs, val_budget, 1e-6};
      Solution vsol = solve(vp);
      double acc = detail_harness::fraction_correct(
          vsol.choice, ctx.validation_predictions, ctx.validation);
      result.trace.push_back({raw_budget, lam, acc, false});
      if (acc > best_acc) {
        best_acc = acc;
        chosen_lambda = lam;
      }
    }
    for (auto& row : result.trace) row.selected = (row.lambda == chosen_lambda);
  }

  ScoreMatrix scores = regularize(ctx.raw_query, ctx.sigma, chosen_lambda);
  AssignmentProblem problem{std::move(scores.regularized), costs, eff, 1e-6};
  Solution sol = dp_cost_scale > 0 ? solve_dp(problem, dp_cost_scale) : solve(problem);
  if (sol.cost > eff + kCostEps)
    throw std::logic_error("portfolio: solver returned a budget-violating solution");

  result.portfolio = detail_harness::to_portfolio(sol, bundle.queries);
  result.lambda = chosen_lambda;
  result.proven_optimal = sol.proven_optimal;
  if (bundle.has_query_labels)
    result.realized_accuracy = detail_harness::fraction_correct(
        sol.choice, ctx.query_predictions, bundle.queries);
  return result;
}

// Uniformly applies the most expensive classifier that fits the effective
// budget on every query.
inline MethodResult run_single_best(const PipelineContext& ctx, double raw_budget) {
  const DataBundle& bundle = *ctx.bundle;
  const std::size_t n = bundle.queries.size();
  const double eff = raw_budget - ctx.feature_extraction_cost;
  int best = -1;
  double best_cost = -1.0;
  for (const auto& prof : bundle.profiles) {
    if (static_cast<double>(n) * prof.cost <= eff + kCostEps && prof.cost > best_cost) {
      best = prof.index;
      best_cost = prof.cost;
    }
  }
  if (best < 0)
    throw InfeasibleError("INFEASIBLE: no classifier fits the effective budget " +
                          std::to_string(eff) + " uniformly");
  MethodResult result;
  Solution sol;
  sol.choice.assign(n, best);
  sol.objective = std::numeric_limits<double>::quiet_NaN();
  sol.cost = detail_solver::canonical_cost(detail_harness::profile_costs(bundle.profiles),
                                           sol.choice);
  result.portfolio = detail_harness::to_portfolio(sol, bundle.queries);
  result.proven_optimal = true;
  if (bundle.has_query_labels)
    result.realized_accuracy = detail_harness::fraction_correct(
        sol.choice, ctx.query_predictions, bundle.queries);
  return result;
}

// Scores every (classifier, query) pair with an independent U[0,1] guess and
// routes through the same exact solver.
inline MethodResult run_random(const PipelineContext& ctx, double raw_budget,
                               std::uint64_t seed) {
  const DataBundle& bundle = *ctx.bundle;
  const std::size_t n = bundle.queries.size();
  const std::size_t m = bundle.profiles.size();
  const double eff = raw_budget - ctx.feature_extraction_cost;

  Rng rng(substream_seed(seed, "random_baseline"));
  Mat scores(m, n);
  for (double& v : scores.data) v = rng.uniform();
  AssignmentProblem problem{std::move(scores),
                            detail_harness::profile_costs(bundle.profiles), eff, 1e-6};
  Solution sol = solve(problem);

  MethodResult result;
  result.portfolio = detail_harness::to_portfolio(sol, bundle.queries);
  result.proven_optimal = sol.proven_optimal;
  if (bundle.has_query_labels)
    result.realized_accuracy = detail_harness::fraction_correct(
        sol.choice, ctx.query_predictions, bundle.queries);
  return result;
}

struct SweepRow {
  double budget = 0.0;
  std::string method;
  std::string error;  // empty on success
  double realized_accuracy = std::numeric_limits<double>::quiet_NaN();
  double realized_cost = std::numeric_limits<double>::quiet_NaN();
  double objective = std::numeric_limits<double>::quiet_NaN();
  double lambda = std::numeric_limits<double>::quiet_NaN();
  std::string certificate;
  std::vector<double> usage;  // per classifier, sums to 1 on success
};

struct SweepReport {
  std::vector<std::string> classifier_names;
  std::vector<SweepRow> rows;
  std::vector<LambdaTraceRow> lambda_trace;
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;
  double feature_extraction_cost = 0.0;
  double tau = 0.0;
};

namespace detail_harness {

inline std::vector<double> usage_fractions(const std::vector<int>& choice,
                                           std::size_t num_classifiers) {
  std::vector<double> usage(num_classifiers, 0.0);
  for (int i : choice) usage[static_cast<std::size_t>(i)] += 1.0;
  for (double& u : usage) u /= static_cast<double>(choice.size());
  return usage;
}

}  // namespace detail_harness

// One row per (budget, method). Failures are recorded on the row and the
// sweep continues.
inline SweepReport sweep(const DataBundle& bundle, const RunConfig& cfg) {
  if (cfg.budgets.empty()) throw InputError("sweep: at least one budget required");
  if (!bundle.has_query_labels)
    throw InputError("sweep: query labels are required to report realized accuracy");

  PipelineContext ctx = prepare_pipeline(bundle, cfg);
  SweepReport report;
  for (const auto& p : bundle.profiles) report.classifier_names.push_back(p.name);
  report.config_hash = cfg.config_hash;
  report.seed = cfg.seed;
  report.feature_extraction_cost = cfg.feature_extraction_cost;
  report.tau = cfg.tau;

  auto push = [&](double budget, const std::string& method, MethodResult&& r) {
    SweepRow row;
    row.budget = budget;
    row.method = method;
    row.realized_accuracy = r.realized_accuracy;
    row.realized_cost = r.portfolio.realized_cost;
    row.objective = r.portfolio.objective;
    row.lambda = r.lambda;
    row.certificate = r.proven_optimal ? "optimal" : "";
    row.usage = detail_harness::usage_fractions(r.portfolio.choice,
                                                bundle.profiles.size());
    // budget ledger: feature cost plus realized inference cost fits the raw budget
    if (row.realized_cost + cfg.feature_extraction_cost > budget + kCostEps)
      throw std::logic_error("sweep: row violates the budget ledger");
    report.rows.push_back(std::move(row));
    for (auto& t : r.trace) report.lambda_trace.push_back(t);
  };
  auto push_error = [&](double budget, const std::string& method,
                        const std::string& error) {
    SweepRow row;
    row.budget = budget;
    row.method = method;
    row.error = error;
    report.rows.push_back(std::move(row));
  };

  for (double budget : cfg.budgets) {
    try {
      push(budget, "portfolio", run_portfolio(ctx, budget));
    } catch (const InfeasibleError&) {
      push_error(budget, "portfolio", "infeasible");
    } catch (const InputError& e) {
      push_error(budget, "portfolio", e.what());
    }
    if (cfg.baseline_single_best) {
      try {
        push(budget, "single_best", run_single_best(ctx, budget));
      } catch (const InfeasibleError&) {
        push_error(budget, "single_best", "infeasible");
      }
    }
    if (cfg.baseline_random) {
      try {
        push(budget, "random", run_random(ctx, budget, cfg.seed));
      } catch (const InfeasibleError&) {
        push_error(budget, "random", "infeasible");
      }
    }
  }
  return report;
}

inline std::string format_optional(double v) {
  return std::isnan(v) ? std::string() : format_double(v);
}

inline void write_sweep_report(const SweepReport& report,
                               const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "tradeoff.csv");
    if (!out) throw InputError("cannot write " + (dir / "tradeoff.csv").string());
    out << "budget,method,realized_accuracy,realized_cost,objective,lambda,certificate,error\n";
    for (const auto& r : report.rows) {
      out << format_double(r.budget) << ',' << r.method << ','
          << format_optional(r.realized_accuracy) << ','
          << format_optional(r.realized_cost) << ',' << format_optional(r.objective)
          << ',' << format_optional(r.lambda) << ',' << r.certificate << ','
          << r.error << "\n";
    }
  }
  {
    std::ofstream out(dir / "usage.csv");
    if (!out) throw InputError("cannot write " + (dir / "usage.csv").string());
    out << "budget,method";
    for (const auto& name : report.classifier_names) out << ',' << name;
    out << "\n";
    for (const auto& r : report.rows) {
      if (r.usage.empty()) continue;  // error rows carry no usage
      out << format_double(r.budget) << ',' << r.method;
      for (double u : r.usage) out << ',' << format_double(u);
      out << "\n";
    }
  }
  if (!report.lambda_trace.empty()) {
    std::ofstream out(dir / "lambda_trace.csv");
    if (!out) throw InputError("cannot write " + (dir / "lambda_trace.csv").string());
    out << "budget,lambda,validation_accuracy,selected\n";
    for (const auto& t : report.lambda_trace) {
      out << format_double(t.budget) << ',' << format_double(t.lambda) << ','
          << format_double(t.validation_accuracy) << ',' << (t.selected ? 1 : 0)
          << "\n";
    }
  }
  {
    nlohmann::ordered_json meta;
    char hex[17];
    std::snprintf(hex, sizeof hex, "%016llx",
                  static_cast<unsigned long long>(report.config_hash));
    meta["config_hash"] = hex;
    meta["seed"] = report.seed;
    meta["classifiers"] = report.classifier_names;
    meta["feature_extraction_cost"] = report.feature_extraction_cost;
    meta["feature_cost_convention"] = "charged once per query set";
    meta["estimation_tau"] = report.tau;
    meta["test_time_prediction"] = "argmax of stored output distribution";
    std::ofstream out(dir / "meta.json");
    if (!out) throw InputError("cannot write " + (dir / "meta.json").string());
    out << meta.dump(2) << "\n";
  }
}

// -------- sample-size experiments (NN distance and estimation error) --------

struct NnCurveRow {
  Metric metric;
  std::size_t sample_size = 0;
  double mean_nn_distance = 0.0;
};

struct ErrorCurveRow {
  Metric metric;
  std::size_t sample_size = 0;
  std::string classifier;
  double mean_abs_error = 0.0;
};

struct CurveTables {
  std::vector<NnCurveRow> nn;
  std::vector<ErrorCurveRow> error;
};

// For each metric and sample size: the mean query-to-NN distance over
// redrawn subsets, and per classifier the gap between the mean estimate and
// the realized accuracy on the query set. Subset draws share one stream
// across metrics so the three curves see identical subsets.
inline CurveTables curve_experiment(const DataBundle& bundle, const RunConfig& cfg,
                                    const std::vector<std::size_t>& sizes,
                                    std::size_t trials) {
  if (!bundle.has_query_labels)
    throw InputError("curves: query labels are required for the error table");
  for (std::size_t s : sizes)
    if (s > bundle.pool.size())
      throw InputError("curves: sample size " + std::to_string(s) +
                       " exceeds pool size " + std::to_string(bundle.pool.size()));

  std::vector<std::vector<int>> preds(bundle.profiles.size());
  std::vector<double> realized(bundle.profiles.size(), 0.0);
  for (std::size_t m = 0; m < bundle.profiles.size(); ++m) {
    preds[m].resize(bundle.queries.size());
    std::size_t correct = 0;
    for (std::size_t q = 0; q < bundle.queries.size(); ++q) {
      preds[m][q] = argmax_row(bundle.query_outputs[m], q);
      if (preds[m][q] == bundle.queries[q].label) ++correct;
    }
    realized[m] = static_cast<double>(correct) / static_cast<double>(bundle.queries.size());
  }

  CurveTables tables;
  const Metric metrics[] = {Metric::L1, Metric::L2, Metric::LINF};
  for (Metric m : metrics) {
    auto curve = nn_distance_curve(bundle.pool.points, bundle.queries, sizes, m,
                                   trials, substream_seed(cfg.seed, "curves_nn"));
    for (const auto& [s, d] : curve) tables.nn.push_back({m, s, d});

    for (std::size_t si = 0; si < sizes.size(); ++si) {
      std::size_t s = sizes[si];
      auto family = draw_samples(bundle.pool, cfg.num_samples, s,
                                 substream_seed(cfg.seed, "curves_est", si));
      Mat est = estimate_sp_matrix(bundle.queries, family, m);
      for (std::size_t i = 0; i < bundle.profiles.size(); ++i) {
        KahanSum mean;
        for (std::size_t q = 0; q < est.cols; ++q) mean.add(est.at(i, q));
        double estimated = mean.value() / static_cast<double>(est.cols);
        tables.error.push_back(
            {m, s, bundle.profiles[i].name, std::abs(estimated - realized[i])});
      }
    }
  }
  return tables;
}

inline void write_curve_tables(const CurveTables& tables,
                               const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "nn_distance.csv");
    if (!out) throw InputError("cannot write " + (dir / "nn_distance.csv").string());
    out << "metric,sample_size,mean_nn_distance\n";
    for (const auto& r : tables.nn)
      out << metric_name(r.metric) << ',' << r.sample_size << ','
          << format_double(r.mean_nn_distance) << "\n";
  }
  {
    std::ofstream out(dir / "estimation_error.csv");
    if (!out)
      throw InputError("cannot write " + (dir / "estimation_error.csv").string());
    out << "metric,sample_size,classifier,mean_abs_error\n";
    for (const auto& r : tables.error)
      out << metric_name(r.metric) << ',' << r.sample_size << ',' << r.classifier
          << ',' << format_double(r.mean_abs_error) << "\n";
  }
}

// -------- synthetic bundle export --------

// Writes a simulator task in the harness file formats (pool/ and queries/
// subdirectories plus a ready-to-run config.json).
inline void export_bundle(const SyntheticTask& task,
                          const std::vector<SyntheticClassifier>& classifiers,
                          std::span<const LabeledPoint> pool_points,
                          std::span<const LabeledPoint> query_points,
                          const RunConfig& cfg, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "pool");
  fs::create_directories(dir / "queries");

  auto write_split = [&](const fs::path& sub, std::span<const LabeledPoint> pts) {
    write_embeddings(sub / "embeddings.csv", pts);
    write_labels(sub / "labels.csv", pts);
    std::vector<std::string> ids;
    ids.reserve(pts.size());
    for (const auto& p : pts) ids.push_back(p.id);
    for (const auto& cl : classifiers) {
      Mat probs(pts.size(), static_cast<std::size_t>(task.num_classes));
      for (std::size_t r = 0; r < pts.size(); ++r) {
        std::vector<double> p = softmax_predict(cl, pts[r].embedding);
        for (std::size_t c = 0; c < p.size(); ++c) probs.at(r, c) = p[c];
      }
      write_outputs(sub / ("outputs_" + cl.name + ".csv"), ids, probs);
    }
  };
  write_split(dir / "pool", pool_points);
  write_split(dir / "queries", query_points);

  nlohmann::ordered_json j;
  j["metric"] = metric_name(cfg.metric);
  j["K"] = cfg.num_samples;
  j["s"] = cfg.sample_size;
  j["tau"] = cfg.tau;
  if (cfg.lambda_is_grid)
    j["lambda"] = cfg.lambda_grid;
  else
    j["lambda"] = cfg.lambda_grid.front();
  j["seed"] = cfg.seed;
  j["budgets"] = cfg.budgets;
  j["feature_extraction_cost"] = cfg.feature_extraction_cost;
  j["pool"] = {{"embeddings", "pool/embeddings.csv"}, {"labels", "pool/labels.csv"}};
  j["queries"] = {{"embeddings", "queries/embeddings.csv"},
                  {"labels", "queries/labels.csv"}};
  j["classifiers"] = nlohmann::ordered_json::array();
  for (const auto& cl : classifiers) {
    j["classifiers"].push_back(
        {{"name", cl.name},
         {"cost", cl.cost},
         {"outputs_path", "pool/outputs_" + cl.name + ".csv"},
         {"query_outputs_path", "queries/outputs_" + cl.name + ".csv"}});
  }
  j["baselines"] = {{"single_best", cfg.baseline_single_best},
                    {"random", cfg.baseline_random}};
  std::ofstream out(dir / "config.json");
  if (!out) throw InputError("cannot write " + (dir / "config.json").string());
  out << j.dump(2) << "\n";
}

}  // namespace portfolio
