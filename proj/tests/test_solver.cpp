#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "portfolio/rng.hpp"
#include "portfolio/solver.hpp"

using namespace portfolio;

namespace {

AssignmentProblem make_problem(std::vector<std::vector<double>> score_rows,
                               std::vector<double> costs, double budget) {
  AssignmentProblem p;
  p.scores = Mat(score_rows.size(), score_rows.front().size());
  for (std::size_t i = 0; i < score_rows.size(); ++i)
    for (std::size_t j = 0; j < score_rows[i].size(); ++j)
      p.scores.at(i, j) = score_rows[i][j];
  p.costs = std::move(costs);
  p.budget = budget;
  return p;
}

AssignmentProblem random_instance(Rng& rng, bool grid_costs) {
  std::size_t m = 2 + rng.below(3);  // 2..4
  std::size_t n = 2 + rng.below(9);  // 2..10
  AssignmentProblem p;
  p.scores = Mat(m, n);
  for (double& v : p.scores.data) v = rng.uniform();
  p.costs.resize(m);
  for (double& c : p.costs)
    c = grid_costs ? static_cast<double>(1 + rng.below(100)) / 100.0
                   : rng.uniform(1e-3, 1.0);
  double min_b = *std::min_element(p.costs.begin(), p.costs.end());
  double max_b = *std::max_element(p.costs.begin(), p.costs.end());
  // budgets span infeasible through slack
  double u = rng.uniform(-0.1, 1.1);
  p.budget = static_cast<double>(n) * (min_b + u * (max_b - min_b));
  // keep the budget on the same grid as the costs so the DP scaling is exact
  if (grid_costs)
    p.budget = static_cast<double>(std::llround(p.budget * 100.0)) / 100.0;
  return p;
}

}  // namespace

TEST_CASE("solve on small crafted instances", "[solver]") {
  SECTION("single classifier takes every query") {
    auto p = make_problem({{0.4, 0.9, 0.1}}, {1.0}, 3.0);
    Solution s = solve(p);
    REQUIRE(s.choice == std::vector<int>{0, 0, 0});
    REQUIRE_THAT(s.cost, Catch::Matchers::WithinAbs(3.0, 1e-12));
    REQUIRE(s.proven_optimal);
  }
  SECTION("cheap/expensive split under a tight budget") {
    auto p = make_problem({{0.6, 0.6}, {0.9, 0.9}}, {0.15, 1.0}, 1.2);
    Solution s = solve(p);
    REQUIRE_THAT(s.objective, Catch::Matchers::WithinAbs(1.5, 1e-12));
    REQUIRE_THAT(s.cost, Catch::Matchers::WithinAbs(1.15, 1e-12));
    // two optima exist; the lexicographically smaller assignment wins
    REQUIRE(s.choice == std::vector<int>{0, 1});
  }
  SECTION("a dominant classifier under a slack budget takes everything") {
    auto p = make_problem({{0.2, 0.3, 0.1}, {0.9, 0.8, 0.7}}, {0.5, 1.0}, 3.0);
    Solution s = solve(p);
    REQUIRE(s.choice == std::vector<int>{1, 1, 1});
  }
  SECTION("full tie resolves to all-zeros") {
    auto p = make_problem({{0.5, 0.5}, {0.5, 0.5}}, {0.3, 0.3}, 1.0);
    REQUIRE(solve(p).choice == std::vector<int>{0, 0});
    REQUIRE(brute_force(p).choice == std::vector<int>{0, 0});
  }
  SECTION("infeasible budget carries a diagnostic") {
    auto p = make_problem({{0.5, 0.5}}, {1.0}, 1.5);
    REQUIRE_THROWS_WITH(solve(p),
                        Catch::Matchers::ContainsSubstring("minimum feasible budget"));
  }
  SECTION("non-finite scores are rejected") {
    auto p = make_problem({{0.5, std::nan("")}}, {1.0}, 3.0);
    REQUIRE_THROWS_AS(solve(p), InputError);
    p = make_problem({{0.5, std::numeric_limits<double>::infinity()}}, {1.0}, 3.0);
    REQUIRE_THROWS_AS(solve(p), InputError);
  }
}

TEST_CASE("brute force oracle behavior", "[solver]") {
  SECTION("agrees with solve on the two-by-two example") {
    auto p = make_problem({{0.6, 0.6}, {0.9, 0.9}}, {0.15, 1.0}, 1.2);
    Solution bf = brute_force(p);
    Solution s = solve(p);
    REQUIRE(bf.choice == s.choice);
    REQUIRE_THAT(bf.objective, Catch::Matchers::WithinAbs(s.objective, 1e-12));
  }
  SECTION("infeasible instance throws") {
    auto p = make_problem({{0.5}}, {2.0}, 1.0);
    REQUIRE_THROWS_AS(brute_force(p), InfeasibleError);
  }
  SECTION("oracle dominates feasible heuristics") {
    Rng rng(31);
    AssignmentProblem p;
    p.scores = Mat(3, 6);
    for (double& v : p.scores.data) v = rng.uniform();
    p.costs = {0.2, 0.5, 0.9};
    p.budget = 3.0;
    Solution bf = brute_force(p);
    // all-cheapest baseline
    std::vector<int> cheap(6, 0);
    REQUIRE(bf.objective >=
            detail_solver::canonical_objective(p.scores, cheap) - 1e-12);
    // twenty random feasible assignments
    for (int t = 0; t < 20; ++t) {
      std::vector<int> pick(6);
      double c = 0.0;
      for (auto& v : pick) {
        v = static_cast<int>(rng.below(3));
        c += p.costs[static_cast<std::size_t>(v)];
      }
      if (c <= p.budget)
        REQUIRE(bf.objective >=
                detail_solver::canonical_objective(p.scores, pick) - 1e-12);
    }
  }
  SECTION("oversized instances are rejected") {
    AssignmentProblem p;
    p.scores = Mat(4, 15, 0.5);
    p.costs = {0.1, 0.2, 0.3, 0.4};
    p.budget = 100.0;
    REQUIRE_THROWS_AS(brute_force(p), InputError);
  }
}

TEST_CASE("branch-and-bound matches the oracle on 200 random instances", "[solver]") {
  Rng rng(2024);
  int solved = 0, infeasible = 0;
  for (int t = 0; t < 200; ++t) {
    AssignmentProblem p = random_instance(rng, false);
    Solution bf, bb;
    bool bf_infeasible = false, bb_infeasible = false;
    try {
      bf = brute_force(p);
    } catch (const InfeasibleError&) {
      bf_infeasible = true;
    }
    try {
      bb = solve(p);
    } catch (const InfeasibleError&) {
      bb_infeasible = true;
    }
    REQUIRE(bf_infeasible == bb_infeasible);
    if (bf_infeasible) {
      ++infeasible;
      continue;
    }
    ++solved;
    REQUIRE_THAT(bb.objective, Catch::Matchers::WithinAbs(bf.objective, 1e-9));
    REQUIRE(bb.choice == bf.choice);
    REQUIRE(bb.cost <= p.budget + 1e-9);
    REQUIRE(bf.cost <= p.budget + 1e-9);
    REQUIRE(lp_bound(p) >= bb.objective - 1e-9);
  }
  REQUIRE(solved > 100);
  REQUIRE(infeasible > 0);  // the budget draw really spans infeasible cases
}

TEST_CASE("objective is monotone in the budget", "[solver]") {
  Rng rng(77);
  AssignmentProblem p;
  p.scores = Mat(3, 8);
  for (double& v : p.scores.data) v = rng.uniform();
  p.costs = {0.15, 0.52, 1.0};
  double prev = -1e300;
  for (double budget = 8 * 0.15; budget <= 8 * 1.0 + 1e-9; budget += 0.05) {
    p.budget = budget;
    Solution s = solve(p);
    REQUIRE(s.objective >= prev - 1e-12);
    prev = s.objective;
  }
}

TEST_CASE("per-row score shifts keep each solution optimal for its matrix",
          "[solver]") {
  Rng rng(555);
  for (int t = 0; t < 20; ++t) {
    AssignmentProblem raw = random_instance(rng, false);
    if (raw.budget < raw.scores.cols *
                         *std::min_element(raw.costs.begin(), raw.costs.end()))
      continue;
    AssignmentProblem reg = raw;
    for (std::size_t i = 0; i < reg.scores.rows; ++i) {
      double shift = rng.uniform(0.0, 0.4);  // lambda * sigma_i
      for (std::size_t j = 0; j < reg.scores.cols; ++j)
        reg.scores.at(i, j) -= shift;
    }
    Solution raw_solved = solve(raw), raw_oracle = brute_force(raw);
    Solution reg_solved = solve(reg), reg_oracle = brute_force(reg);
    REQUIRE(raw_solved.choice == raw_oracle.choice);
    REQUIRE(reg_solved.choice == reg_oracle.choice);
  }
}

TEST_CASE("lp bound properties", "[solver]") {
  SECTION("two-by-two example admits at least the integer optimum") {
    auto p = make_problem({{0.6, 0.6}, {0.9, 0.9}}, {0.15, 1.0}, 1.2);
    double bound = lp_bound(p);
    REQUIRE(bound >= 1.5 - 1e-12);
    REQUIRE(bound <= 1.8 + 1e-12);
  }
  SECTION("slack budget collapses the bound to the column maxima") {
    Rng rng(8);
    auto p = make_problem({{0.0, 0.0, 0.0}, {0.0, 0.0, 0.0}}, {0.3, 0.8}, 100.0);
    for (double& v : p.scores.data) v = rng.uniform();
    double expected = 0.0;
    for (std::size_t j = 0; j < 3; ++j)
      expected += std::max(p.scores.at(0, j), p.scores.at(1, j));
    REQUIRE_THAT(lp_bound(p), Catch::Matchers::WithinAbs(expected, 1e-12));
    // the relaxation is integral here, so the bound meets the solve objective
    REQUIRE_THAT(lp_bound(p), Catch::Matchers::WithinAbs(solve(p).objective, 1e-12));
  }
  SECTION("infeasible instance throws") {
    auto p = make_problem({{0.5}}, {1.0}, 0.5);
    REQUIRE_THROWS_AS(lp_bound(p), InfeasibleError);
  }
}

TEST_CASE("dynamic programming mode", "[solver]") {
  SECTION("normalized cost ladder scales to exact integers") {
    std::vector<double> table1{0.15, 0.22, 0.29, 0.52, 0.53, 0.98, 1.0};
    auto w = scaled_costs(table1, 100);
    REQUIRE(w == std::vector<long long>{15, 22, 29, 52, 53, 98, 100});
  }
  SECTION("matches the oracle on random grid-cost instances up to N=8") {
    Rng rng(4242);
    int solved = 0;
    for (int t = 0; t < 60; ++t) {
      AssignmentProblem p = random_instance(rng, true);
      if (p.scores.cols > 8) continue;
      Solution bf, dp;
      bool bf_inf = false, dp_inf = false;
      try {
        bf = brute_force(p);
      } catch (const InfeasibleError&) {
        bf_inf = true;
      }
      try {
        dp = solve_dp(p, 100);
      } catch (const InfeasibleError&) {
        dp_inf = true;
      }
      REQUIRE(bf_inf == dp_inf);
      if (bf_inf) continue;
      ++solved;
      REQUIRE_THAT(dp.objective, Catch::Matchers::WithinAbs(bf.objective, 1e-9));
      REQUIRE(dp.choice == bf.choice);
      REQUIRE(dp.rounding_slack == 0.0);
      REQUIRE(dp.cost <= p.budget + 1e-9);
    }
    REQUIRE(solved > 10);
  }
  SECTION("single classifier reduces to the trivial assignment") {
    auto p = make_problem({{0.1, 0.9}}, {0.5}, 1.0);
    Solution s = solve_dp(p, 10);
    REQUIRE(s.choice == std::vector<int>{0, 0});
    REQUIRE(s.rounding_slack == 0.0);
  }
  SECTION("inexact costs report their rounding slack") {
    auto p = make_problem({{0.5, 0.5}}, {1.0 / 3.0}, 1.0);
    Solution s = solve_dp(p, 100);
    REQUIRE(s.rounding_slack > 0.0);
    REQUIRE(s.rounding_slack < 0.01);
  }
  SECTION("oversized tables advise the branch-and-bound mode") {
    AssignmentProblem p;
    p.scores = Mat(2, 2000, 0.5);
    p.costs = {1.0, 2.0};
    p.budget = 1e6;
    REQUIRE_THROWS_WITH(solve_dp(p, 1000),
                        Catch::Matchers::ContainsSubstring("branch-and-bound"));
  }
}
