// Command-line front end: simulate / audit / estimate / solve / sweep / curves.
// Exit codes: 0 success, 2 infeasible budget, 3 input error.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "portfolio/harness.hpp"

namespace fs = std::filesystem;
using namespace portfolio;

namespace {

struct ClassifierArg {
  std::string name;
  double cost = 1.0;
  double perturbation = 0.05;
  double tau = 1.0;
  double scale = 8.0;
};

ClassifierArg parse_classifier_arg(const std::string& text) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    std::size_t colon = text.find(':', start);
    if (colon == std::string::npos) {
      parts.push_back(text.substr(start));
      break;
    }
    parts.push_back(text.substr(start, colon - start));
    start = colon + 1;
  }
  if (parts.size() < 3 || parts.size() > 5)
    throw InputError("--classifier expects name:cost:perturbation[:tau[:scale]], got '" +
                     text + "'");
  ClassifierArg arg;
  arg.name = parts[0];
  arg.cost = std::stod(parts[1]);
  arg.perturbation = std::stod(parts[2]);
  if (parts.size() > 3) arg.tau = std::stod(parts[3]);
  if (parts.size() > 4) arg.scale = std::stod(parts[4]);
  return arg;
}

int run_simulate(const std::string& out_dir, int classes, std::size_t dim,
                 std::size_t intrinsic_dim, double separation, double radius,
                 std::size_t pool_per_class, std::size_t num_queries,
                 std::uint64_t seed, const std::vector<std::string>& classifier_args,
                 const std::string& metric, std::size_t K, std::size_t s,
                 double tau, const std::vector<double>& lambda,
                 std::vector<double> budgets, double feature_cost) {
  SyntheticTask task = generate_task(classes, dim, separation, pool_per_class, seed,
                                     radius, intrinsic_dim);

  std::vector<ClassifierArg> args;
  if (classifier_args.empty()) {
    args = {{"small", 0.15, 0.12, 1.0, 8.0},
            {"medium", 0.52, 0.06, 1.0, 8.0},
            {"large", 1.0, 0.02, 1.0, 8.0}};
  } else {
    for (const auto& text : classifier_args) args.push_back(parse_classifier_arg(text));
  }
  std::vector<SyntheticClassifier> classifiers;
  for (std::size_t i = 0; i < args.size(); ++i) {
    classifiers.push_back(make_classifier(task, args[i].name, args[i].cost,
                                          args[i].perturbation, args[i].tau,
                                          args[i].scale,
                                          substream_seed(seed, "classifier", i),
                                          static_cast<int>(i)));
  }

  std::vector<LabeledPoint> queries = sample_points(task, num_queries, seed, "q");

  RunConfig cfg;
  cfg.metric = parse_metric(metric);
  cfg.num_samples = K;
  std::size_t pool_half = task.points.size() - task.points.size() / 2;
  cfg.sample_size = s > 0 ? s : std::max<std::size_t>(1, pool_half / K);
  cfg.tau = tau;
  if (lambda.size() == 1) {
    cfg.lambda_grid = lambda;
    cfg.lambda_is_grid = false;
  } else if (!lambda.empty()) {
    cfg.lambda_grid = lambda;
    cfg.lambda_is_grid = true;
  } else {
    cfg.lambda_grid = {0.0, 1.0, 5.0, 20.0, 100.0};
    cfg.lambda_is_grid = true;
  }
  cfg.seed = seed;
  cfg.feature_extraction_cost = feature_cost;
  if (budgets.empty()) {
    double min_b = classifiers.front().cost, max_b = classifiers.front().cost;
    for (const auto& cl : classifiers) {
      min_b = std::min(min_b, cl.cost);
      max_b = std::max(max_b, cl.cost);
    }
    double n = static_cast<double>(num_queries);
    for (int k = 0; k < 20; ++k) {
      double t = static_cast<double>(k) / 19.0;
      budgets.push_back(feature_cost + n * (min_b + t * (max_b - min_b)));
    }
  }
  cfg.budgets = budgets;

  export_bundle(task, classifiers, task.points, queries, cfg, out_dir);
  std::cout << "wrote synthetic bundle to " << out_dir << " ("
            << task.points.size() << " pool points, " << queries.size()
            << " queries, " << classifiers.size() << " classifiers)\n";
  return 0;
}

int run_audit(const std::string& embeddings_path, const std::string& labels_path,
              const std::string& metric, bool raw, const std::string& out_path) {
  std::vector<LabeledPoint> points = read_embeddings(embeddings_path);
  auto labels = read_labels(labels_path);
  for (auto& p : points) {
    auto it = labels.find(p.id);
    if (it == labels.end())
      throw InputError("missing label for id '" + p.id + "'");
    p.label = it->second;
  }
  if (!raw) {
    Normalizer norm = Normalizer::fit(points);
    for (auto& p : points) p.embedding = norm.apply(p.embedding);
  }
  SeparationReport report = separation_audit(points, parse_metric(metric));
  std::cout << "min_interclass_distance: " << format_double(report.min_interclass_distance)
            << "\n";
  std::cout << "duplicate_conflicts: " << report.duplicate_conflicts << "\n";
  if (!out_path.empty()) {
    std::ofstream out(out_path);
    if (!out) throw InputError("cannot write " + out_path);
    out << "class_a,class_b,min_distance\n";
    for (std::size_t a = 0; a < report.pair_minima.size(); ++a)
      for (std::size_t b = a + 1; b < report.pair_minima.size(); ++b)
        out << a << ',' << b << ',' << format_double(report.pair_minima[a][b]) << "\n";
    std::cout << "wrote per-class-pair minima to " << out_path << "\n";
  }
  return 0;
}

int run_estimate(const std::string& config_path, const std::string& out_dir) {
  RunConfig cfg = parse_config(config_path);
  DataBundle bundle = ingest(cfg);
  PipelineContext ctx = prepare_pipeline(bundle, cfg);
  double lambda = cfg.lambda_grid.front();
  ScoreMatrix scores = regularize(ctx.raw_query, ctx.sigma, lambda);

  fs::create_directories(out_dir);
  {
    std::ofstream out(fs::path(out_dir) / "scores.csv");
    if (!out) throw InputError("cannot write scores.csv");
    out << "query_id";
    for (const auto& p : bundle.profiles) out << ",raw_" << p.name;
    for (const auto& p : bundle.profiles) out << ",reg_" << p.name;
    out << "\n";
    for (std::size_t j = 0; j < bundle.queries.size(); ++j) {
      out << bundle.queries[j].id;
      for (std::size_t i = 0; i < bundle.profiles.size(); ++i)
        out << ',' << format_double(scores.raw.at(i, j));
      for (std::size_t i = 0; i < bundle.profiles.size(); ++i)
        out << ',' << format_double(scores.regularized.at(i, j));
      out << "\n";
    }
  }
  {
    std::ofstream out(fs::path(out_dir) / "sigma.csv");
    if (!out) throw InputError("cannot write sigma.csv");
    out << "classifier,sigma,lambda\n";
    for (std::size_t i = 0; i < bundle.profiles.size(); ++i)
      out << bundle.profiles[i].name << ',' << format_double(scores.sigma[i]) << ','
          << format_double(lambda) << "\n";
  }
  std::cout << "wrote score matrix for " << bundle.queries.size() << " queries x "
            << bundle.profiles.size() << " classifiers to " << out_dir << "\n";
  return 0;
}

int run_solve(const std::string& config_path, double budget,
              const std::string& out_path, bool use_dp, long long cost_scale) {
  RunConfig cfg = parse_config(config_path);
  DataBundle bundle = ingest(cfg);
  PipelineContext ctx = prepare_pipeline(bundle, cfg);
  MethodResult result = run_portfolio(ctx, budget, use_dp ? cost_scale : 0);

  std::cout << "objective: " << format_double(result.portfolio.objective) << "\n";
  std::cout << "realized_cost: " << format_double(result.portfolio.realized_cost)
            << " (+ feature extraction " << format_double(cfg.feature_extraction_cost)
            << ")\n";
  std::cout << "lambda: " << format_double(result.lambda) << "\n";
  std::cout << "certificate: " << (result.proven_optimal ? "optimal" : "gap") << "\n";
  if (!std::isnan(result.realized_accuracy))
    std::cout << "realized_accuracy: " << format_double(result.realized_accuracy) << "\n";
  if (!out_path.empty()) {
    std::ofstream out(out_path);
    if (!out) throw InputError("cannot write " + out_path);
    out << "query_id,classifier\n";
    for (std::size_t j = 0; j < result.portfolio.query_ids.size(); ++j)
      out << result.portfolio.query_ids[j] << ','
          << bundle.profiles[static_cast<std::size_t>(result.portfolio.choice[j])].name
          << "\n";
    std::cout << "wrote assignment to " << out_path << "\n";
  }
  return 0;
}

int run_sweep(const std::string& config_path, const std::string& out_dir) {
  RunConfig cfg = parse_config(config_path);
  DataBundle bundle = ingest(cfg);
  SweepReport report = sweep(bundle, cfg);
  write_sweep_report(report, out_dir);
  std::size_t failed = 0;
  for (const auto& r : report.rows)
    if (!r.error.empty()) ++failed;
  std::cout << "wrote sweep report (" << report.rows.size() << " rows, " << failed
            << " failed) to " << out_dir << "\n";
  return 0;
}

int run_curves(const std::string& config_path, const std::vector<std::size_t>& sizes,
               std::size_t trials, const std::string& out_dir) {
  RunConfig cfg = parse_config(config_path);
  DataBundle bundle = ingest(cfg);
  CurveTables tables = curve_experiment(bundle, cfg, sizes, trials);
  write_curve_tables(tables, out_dir);
  std::cout << "wrote NN-distance and estimation-error tables to " << out_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"budget-constrained classifier assignment toolkit"};
  app.require_subcommand(1);

  // simulate
  auto* sim = app.add_subcommand("simulate", "generate a synthetic bundle");
  std::string sim_out;
  int sim_classes = 5;
  std::size_t sim_dim = 8, sim_intrinsic = 2, sim_ppc = 300, sim_queries = 200;
  std::size_t sim_K = 10, sim_s = 0;
  double sim_sep = 0.3, sim_radius = 0.05, sim_tau = 1.0, sim_fec = 0.0;
  std::uint64_t sim_seed = 1;
  std::vector<std::string> sim_classifiers;
  std::vector<double> sim_lambda, sim_budgets;
  std::string sim_metric = "linf";
  sim->add_option("--out", sim_out, "output directory")->required();
  sim->add_option("--classes", sim_classes, "number of classes");
  sim->add_option("--dim", sim_dim, "embedding dimension");
  sim->add_option("--intrinsic-dim", sim_intrinsic, "dimensions that vary within a cluster");
  sim->add_option("--separation", sim_sep, "declared inter-class LINF separation r");
  sim->add_option("--radius", sim_radius, "cluster half-width");
  sim->add_option("--pool-per-class", sim_ppc, "pool points per class");
  sim->add_option("--queries", sim_queries, "number of query points");
  sim->add_option("--seed", sim_seed, "master seed");
  sim->add_option("--classifier", sim_classifiers,
                  "name:cost:perturbation[:tau[:scale]] (repeatable)");
  sim->add_option("--metric", sim_metric, "l1|l2|linf");
  sim->add_option("--K", sim_K, "number of sample sets");
  sim->add_option("--s", sim_s, "sample set size (0 = auto)");
  sim->add_option("--tau", sim_tau, "temperature written to the config");
  sim->add_option("--lambda", sim_lambda, "lambda value(s)")->delimiter(',');
  sim->add_option("--budgets", sim_budgets, "budget list")->delimiter(',');
  sim->add_option("--feature-cost", sim_fec, "feature extraction cost");

  // audit
  auto* aud = app.add_subcommand("audit", "separation report for a labelled dataset");
  std::string aud_emb, aud_lab, aud_metric = "linf", aud_out;
  bool aud_raw = false;
  aud->add_option("--embeddings", aud_emb, "embeddings.csv")->required();
  aud->add_option("--labels", aud_lab, "labels.csv")->required();
  aud->add_option("--metric", aud_metric, "l1|l2|linf");
  aud->add_flag("--raw", aud_raw, "skip min-max normalization");
  aud->add_option("--out", aud_out, "per-class-pair minima CSV");

  // estimate
  auto* est = app.add_subcommand("estimate", "score matrix to CSV");
  std::string est_config, est_out = ".";
  est->add_option("--config", est_config, "config.json")->required();
  est->add_option("--out", est_out, "output directory");

  // solve
  auto* sol = app.add_subcommand("solve", "assign classifiers at one budget");
  std::string sol_config, sol_out;
  double sol_budget = 0.0;
  bool sol_dp = false;
  long long sol_scale = 100;
  sol->add_option("--config", sol_config, "config.json")->required();
  sol->add_option("--budget", sol_budget, "raw budget")->required();
  sol->add_option("--out", sol_out, "assignment CSV");
  sol->add_flag("--dp", sol_dp, "use the dynamic-programming mode");
  sol->add_option("--cost-scale", sol_scale, "integer cost units for --dp");

  // sweep
  auto* swp = app.add_subcommand("sweep", "full accuracy-cost tradeoff study");
  std::string swp_config, swp_out = "sweep_out";
  swp->add_option("--config", swp_config, "config.json")->required();
  swp->add_option("--out", swp_out, "output directory");

  // curves
  auto* crv = app.add_subcommand("curves", "NN-distance and estimation-error tables");
  std::string crv_config, crv_out = "curves_out";
  std::vector<std::size_t> crv_sizes;
  std::size_t crv_trials = 5;
  crv->add_option("--config", crv_config, "config.json")->required();
  crv->add_option("--sizes", crv_sizes, "sample sizes")->delimiter(',')->required();
  crv->add_option("--trials", crv_trials, "subset redraws per size");
  crv->add_option("--out", crv_out, "output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed())
      return run_simulate(sim_out, sim_classes, sim_dim, sim_intrinsic, sim_sep,
                          sim_radius, sim_ppc, sim_queries, sim_seed, sim_classifiers,
                          sim_metric, sim_K, sim_s, sim_tau, sim_lambda, sim_budgets,
                          sim_fec);
    if (aud->parsed()) return run_audit(aud_emb, aud_lab, aud_metric, aud_raw, aud_out);
    if (est->parsed()) return run_estimate(est_config, est_out);
    if (sol->parsed())
      return run_solve(sol_config, sol_budget, sol_out, sol_dp, sol_scale);
    if (swp->parsed()) return run_sweep(swp_config, swp_out);
    if (crv->parsed()) return run_curves(crv_config, crv_sizes, crv_trials, crv_out);
  } catch (const InfeasibleError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
