#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "portfolio/core.hpp"
#include "portfolio/error.hpp"

namespace portfolio {

// Multiple-choice knapsack instance: pick exactly one classifier per query
// (column) maximizing the score sum subject to the cost budget.
struct AssignmentProblem {
  Mat scores;                 // M x N
  std::vector<double> costs;  // length M, all positive
  double budget = 0.0;
  double gap_tolerance = 1e-6;
};

struct Solution {
  std::vector<int> choice;  // classifier per query
  double objective = 0.0;
  double cost = 0.0;
  bool proven_optimal = false;
  double gap = 0.0;            // certified optimality gap (0 when proven)
  double rounding_slack = 0.0; // only set by solve_dp
};

namespace detail_solver {

// Ties between equal-objective assignments resolve to the lexicographically
// smallest choice vector in query order; every solver mode shares this rule.
inline constexpr double kTieEps = 1e-12;

inline void validate_problem(const AssignmentProblem& p) {
  if (p.scores.rows == 0 || p.scores.cols == 0)
    throw InputError("solver: empty score matrix");
  if (p.costs.size() != p.scores.rows)
    throw InputError("solver: cost vector length " + std::to_string(p.costs.size()) +
                     " does not match classifier count " + std::to_string(p.scores.rows));
  for (double v : p.scores.data)
    if (!std::isfinite(v)) throw InputError("solver: non-finite score");
  for (double b : p.costs)
    if (!(b > 0.0) || !std::isfinite(b))
      throw InputError("solver: classifier costs must be positive and finite");
  if (!std::isfinite(p.budget)) throw InputError("solver: budget must be finite");
}

inline double min_cost(const AssignmentProblem& p) {
  return *std::min_element(p.costs.begin(), p.costs.end());
}

inline void check_feasibility(const AssignmentProblem& p) {
  double need = static_cast<double>(p.scores.cols) * min_cost(p);
  if (need > p.budget + kCostEps) {
    throw InfeasibleError("INFEASIBLE: minimum feasible budget = N*min_i b_i = " +
                          std::to_string(need));
  }
}

// Canonical objective/cost: accumulate in query order so that equal
// assignments produce bit-identical sums in every solver mode.
inline double canonical_objective(const Mat& scores, const std::vector<int>& choice) {
  KahanSum s;
  for (std::size_t j = 0; j < choice.size(); ++j)
    s.add(scores.at(static_cast<std::size_t>(choice[j]), j));
  return s.value();
}

inline double canonical_cost(const std::vector<double>& costs,
                             const std::vector<int>& choice) {
  KahanSum s;
  for (int i : choice) s.add(costs[static_cast<std::size_t>(i)]);
  return s.value();
}

struct HullItem {
  int classifier;
  double cost;
  double score;
};

// Dominance filter for one query: drop any classifier that is no cheaper and
// no better than another. Result is strictly increasing in both cost and
// score; equal (cost, score) pairs keep the lowest classifier index.
inline std::vector<HullItem> dominance_filter(const AssignmentProblem& p,
                                              std::size_t query) {
  std::vector<HullItem> items;
  items.reserve(p.costs.size());
  for (std::size_t i = 0; i < p.costs.size(); ++i)
    items.push_back({static_cast<int>(i), p.costs[i], p.scores.at(i, query)});
  std::sort(items.begin(), items.end(), [](const HullItem& a, const HullItem& b) {
    if (a.cost != b.cost) return a.cost < b.cost;
    if (a.score != b.score) return a.score > b.score;
    return a.classifier < b.classifier;
  });
  std::vector<HullItem> kept;
  for (const HullItem& it : items) {
    if (!kept.empty() && it.cost == kept.back().cost) continue;
    if (!kept.empty() && it.score <= kept.back().score) continue;
    kept.push_back(it);
  }
  return kept;
}

// Upper concave envelope of the filtered items (decreasing incremental
// efficiency). Keeps the cheapest and the best item.
inline std::vector<HullItem> lp_hull(std::vector<HullItem> filtered) {
  std::vector<HullItem> hull;
  for (const HullItem& it : filtered) {
    while (hull.size() >= 2) {
      const HullItem& a = hull[hull.size() - 2];
      const HullItem& b = hull[hull.size() - 1];
      double slope_ab = (b.score - a.score) / (b.cost - a.cost);
      double slope_bn = (it.score - b.score) / (it.cost - b.cost);
      if (slope_bn >= slope_ab)
        hull.pop_back();
      else
        break;
    }
    hull.push_back(it);
  }
  return hull;
}

struct Increment {
  std::size_t query;
  double dcost;
  double dscore;
  double efficiency;
};

struct LpStructure {
  std::vector<std::vector<HullItem>> hulls;   // per query
  std::vector<Increment> increments;          // efficiency-descending
  std::vector<double> base_score;             // hull[0].score per query
  double base_cost_per_query = 0.0;           // == min cost, same for all queries
};

inline LpStructure build_lp_structure(const AssignmentProblem& p) {
  LpStructure lp;
  std::size_t n = p.scores.cols;
  lp.hulls.resize(n);
  lp.base_score.resize(n);
  lp.base_cost_per_query = min_cost(p);
  for (std::size_t j = 0; j < n; ++j) {
    lp.hulls[j] = lp_hull(dominance_filter(p, j));
    lp.base_score[j] = lp.hulls[j].front().score;
    for (std::size_t k = 1; k < lp.hulls[j].size(); ++k) {
      double dc = lp.hulls[j][k].cost - lp.hulls[j][k - 1].cost;
      double ds = lp.hulls[j][k].score - lp.hulls[j][k - 1].score;
      lp.increments.push_back({j, dc, ds, ds / dc});
    }
  }
  std::stable_sort(lp.increments.begin(), lp.increments.end(),
                   [](const Increment& a, const Increment& b) {
                     if (a.efficiency != b.efficiency)
                       return a.efficiency > b.efficiency;
                     return a.query < b.query;
                   });
  return lp;
}

}  // namespace detail_solver

// Upper bound on the integer optimum from the MCKP linear relaxation:
// cheapest item per query, then hull increments by decreasing efficiency
// with a fractional final step.
inline double lp_bound(const AssignmentProblem& p) {
  using namespace detail_solver;
  validate_problem(p);
  check_feasibility(p);
  LpStructure lp = build_lp_structure(p);
  KahanSum base;
  for (double s : lp.base_score) base.add(s);
  double rem = p.budget + kCostEps -
               lp.base_cost_per_query * static_cast<double>(p.scores.cols);
  if (rem < 0.0) rem = 0.0;
  double bound = base.value();
  for (const Increment& inc : lp.increments) {
    if (inc.dcost <= rem) {
      bound += inc.dscore;
      rem -= inc.dcost;
    } else {
      bound += inc.dscore * rem / inc.dcost;
      break;
    }
  }
  return bound;
}

// Exhaustive oracle. Enumerates assignments in lexicographic order and keeps
// the first one attaining the best objective, so ties resolve exactly as in
// the other modes.
inline Solution brute_force(const AssignmentProblem& p) {
  using namespace detail_solver;
  validate_problem(p);
  check_feasibility(p);
  std::size_t m = p.scores.rows, n = p.scores.cols;
  if (static_cast<double>(n) * std::log(static_cast<double>(m)) >
      std::log(1e7) + 1e-12)
    throw InputError("brute_force: instance too large (M^N exceeds 1e7)");

  const double budget_eps = p.budget + kCostEps;
  std::vector<int> choice(n, 0);
  Solution best;
  best.objective = -std::numeric_limits<double>::infinity();
  for (;;) {
    double c = canonical_cost(p.costs, choice);
    if (c <= budget_eps) {
      double obj = canonical_objective(p.scores, choice);
      if (obj > best.objective) {
        best.choice = choice;
        best.objective = obj;
        best.cost = c;
      }
    }
    // odometer step, rightmost digit fastest
    std::size_t j = n;
    while (j > 0) {
      --j;
      if (choice[j] + 1 < static_cast<int>(m)) {
        ++choice[j];
        std::fill(choice.begin() + static_cast<std::ptrdiff_t>(j) + 1, choice.end(), 0);
        break;
      }
      if (j == 0) {
        if (best.choice.empty())
          throw InfeasibleError("INFEASIBLE: no assignment satisfies the budget");
        best.proven_optimal = true;
        return best;
      }
    }
  }
}

// Exact branch-and-bound. Branches on the query with the largest gap between
// its best and second-best dominance-filtered score; bounds come from the LP
// relaxation of the unassigned suffix. The search keeps expanding nodes that
// could still contain an equal-objective, lexicographically smaller
// assignment, so the result matches brute_force exactly, ties included.
inline Solution solve(const AssignmentProblem& p) {
  using namespace detail_solver;
  validate_problem(p);
  check_feasibility(p);
  const std::size_t m = p.scores.rows, n = p.scores.cols;
  const double budget_eps = p.budget + kCostEps;
  const double min_b = min_cost(p);

  LpStructure lp = build_lp_structure(p);

  // Branch order: descending best-vs-second-best gap over filtered items.
  std::vector<double> gap(n);
  for (std::size_t j = 0; j < n; ++j) {
    std::vector<HullItem> filtered = dominance_filter(p, j);
    if (filtered.size() < 2) {
      gap[j] = std::numeric_limits<double>::infinity();
    } else {
      gap[j] = filtered.back().score - filtered[filtered.size() - 2].score;
    }
  }
  std::vector<std::size_t> order(n);
  for (std::size_t j = 0; j < n; ++j) order[j] = j;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (gap[a] != gap[b]) return gap[a] > gap[b];
    return a < b;
  });
  std::vector<std::size_t> pos_in_order(n);
  for (std::size_t d = 0; d < n; ++d) pos_in_order[order[d]] = d;

  // Suffix sums of LP base scores along the branch order.
  std::vector<double> base_suffix(n + 1, 0.0);
  for (std::size_t d = n; d-- > 0;)
    base_suffix[d] = base_suffix[d + 1] + lp.base_score[order[d]];

  // Candidate order per query: descending score, then lowest index, so good
  // incumbents appear early.
  std::vector<std::vector<int>> candidates(n, std::vector<int>(m));
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < m; ++i) candidates[j][i] = static_cast<int>(i);
    std::stable_sort(candidates[j].begin(), candidates[j].end(), [&](int a, int b) {
      double sa = p.scores.at(static_cast<std::size_t>(a), j);
      double sb = p.scores.at(static_cast<std::size_t>(b), j);
      if (sa != sb) return sa > sb;
      return a < b;
    });
  }

  // Initial incumbent: integral LP greedy (base items, then whole hull
  // increments that fit, in efficiency order).
  std::vector<int> inc_choice(n);
  std::vector<std::size_t> hull_pos(n, 0);
  {
    double rem = p.budget + kCostEps - min_b * static_cast<double>(n);
    std::vector<std::size_t> next_pos(n, 1);
    for (const Increment& inc : lp.increments) {
      std::size_t j = inc.query;
      // increments of one query arrive in hull order; apply only contiguously
      if (hull_pos[j] + 1 != next_pos[j]) {
        ++next_pos[j];
        continue;
      }
      if (inc.dcost <= rem) {
        rem -= inc.dcost;
        hull_pos[j] += 1;
      }
      ++next_pos[j];
    }
    for (std::size_t j = 0; j < n; ++j) inc_choice[j] = lp.hulls[j][hull_pos[j]].classifier;
  }
  Solution best;
  best.choice = inc_choice;
  best.objective = canonical_objective(p.scores, inc_choice);
  best.cost = canonical_cost(p.costs, inc_choice);

  std::vector<int> choice(n, -1);

  // Bound for the unassigned suffix starting at branch depth d.
  auto suffix_bound = [&](std::size_t depth, double used_cost) -> double {
    double rem = budget_eps - used_cost -
                 min_b * static_cast<double>(n - depth);
    if (rem < 0.0) return -std::numeric_limits<double>::infinity();
    double bound = base_suffix[depth];
    for (const Increment& inc : lp.increments) {
      if (pos_in_order[inc.query] < depth) continue;
      if (inc.dcost <= rem) {
        bound += inc.dscore;
        rem -= inc.dcost;
      } else {
        bound += inc.dscore * rem / inc.dcost;
        break;
      }
    }
    return bound;
  };

  auto leaf = [&]() {
    double obj = canonical_objective(p.scores, choice);
    if (obj > best.objective ||
        (obj == best.objective &&
         std::lexicographical_compare(choice.begin(), choice.end(),
                                      best.choice.begin(), best.choice.end()))) {
      best.choice = choice;
      best.objective = obj;
      best.cost = canonical_cost(p.costs, choice);
    }
  };

  auto dfs = [&](auto&& self, std::size_t depth, double used_cost,
                 double value) -> void {
    if (depth == n) {
      leaf();
      return;
    }
    double bound = value + suffix_bound(depth, used_cost);
    if (bound < best.objective - kTieEps) return;
    std::size_t j = order[depth];
    double tail = min_b * static_cast<double>(n - depth - 1);
    for (int i : candidates[j]) {
      double b = p.costs[static_cast<std::size_t>(i)];
      if (used_cost + b + tail > budget_eps) continue;
      choice[j] = i;
      self(self, depth + 1, used_cost + b,
           value + p.scores.at(static_cast<std::size_t>(i), j));
      choice[j] = -1;
    }
  };
  dfs(dfs, 0, 0.0, 0.0);

  best.proven_optimal = true;
  best.gap = 0.0;  // search ran to completion, within gap_tolerance trivially
  return best;
}

// Integer cost units for the DP mode.
inline std::vector<long long> scaled_costs(const std::vector<double>& costs,
                                           long long cost_scale) {
  std::vector<long long> w(costs.size());
  for (std::size_t i = 0; i < costs.size(); ++i) {
    double scaled = costs[i] * static_cast<double>(cost_scale);
    if (!(std::abs(scaled) < 9e15))
      throw InputError("solve_dp: scaled cost overflows integer range");
    w[i] = std::llround(scaled);
  }
  return w;
}

// Exact optimum of the cost-scaled instance via dynamic programming over
// budget units. The reported rounding slack is the largest distortion, in
// original cost units, that the scaling introduced.
inline Solution solve_dp(const AssignmentProblem& p, long long cost_scale) {
  using namespace detail_solver;
  validate_problem(p);
  if (cost_scale <= 0) throw InputError("solve_dp: cost_scale must be positive");
  const std::size_t m = p.scores.rows, n = p.scores.cols;

  std::vector<long long> w = scaled_costs(p.costs, cost_scale);
  double scaled_budget = p.budget * static_cast<double>(cost_scale);
  if (!(std::abs(scaled_budget) < 9e15))
    throw InputError("solve_dp: scaled budget overflows integer range");
  long long cap = std::llround(scaled_budget);

  long long min_w = *std::min_element(w.begin(), w.end());
  if (cap < 0 || static_cast<double>(min_w) * static_cast<double>(n) >
                     static_cast<double>(cap)) {
    double need = static_cast<double>(n) * min_cost(p);
    throw InfeasibleError("INFEASIBLE: minimum feasible budget = N*min_i b_i = " +
                          std::to_string(need));
  }

  const std::size_t width = static_cast<std::size_t>(cap) + 1;
  constexpr std::size_t kTableLimit = 512ull * 1024 * 1024;
  if (n > kTableLimit / (width * sizeof(int)))
    throw InputError("solve_dp: DP table of " + std::to_string(n) + " x " +
                     std::to_string(width) +
                     " cells exceeds the memory limit; use the branch-and-bound mode");

  const double neg_inf = -std::numeric_limits<double>::infinity();
  // value[w] holds the suffix optimum for queries j..N-1 under budget w;
  // pick[j][w] records the smallest classifier attaining it.
  std::vector<double> value(width, 0.0), next(width, 0.0);
  std::vector<std::vector<int>> pick(n, std::vector<int>(width, -1));
  for (std::size_t jj = n; jj-- > 0;) {
    std::swap(value, next);  // next := dp for jj+1
    for (std::size_t ww = 0; ww < width; ++ww) {
      double bestv = neg_inf;
      int besti = -1;
      for (std::size_t i = 0; i < m; ++i) {
        if (w[i] < 0 || static_cast<std::size_t>(w[i]) > ww) continue;
        double tail = next[ww - static_cast<std::size_t>(w[i])];
        if (tail == neg_inf) continue;
        double v = p.scores.at(i, jj) + tail;
        if (v > bestv) {
          bestv = v;
          besti = static_cast<int>(i);
        }
      }
      value[ww] = bestv;
      pick[jj][ww] = besti;
    }
  }

  if (pick[0][width - 1] < 0)
    throw InfeasibleError("INFEASIBLE: no assignment satisfies the scaled budget");

  Solution sol;
  sol.choice.resize(n);
  std::size_t ww = width - 1;
  for (std::size_t j = 0; j < n; ++j) {
    int i = pick[j][ww];
    sol.choice[j] = i;
    ww -= static_cast<std::size_t>(w[static_cast<std::size_t>(i)]);
  }
  sol.objective = canonical_objective(p.scores, sol.choice);
  sol.cost = canonical_cost(p.costs, sol.choice);
  sol.proven_optimal = true;

  double slack = std::abs(static_cast<double>(cap) / static_cast<double>(cost_scale) -
                          p.budget);
  for (std::size_t i = 0; i < m; ++i)
    slack = std::max(slack, std::abs(static_cast<double>(w[i]) /
                                         static_cast<double>(cost_scale) -
                                     p.costs[i]));
  sol.rounding_slack = slack;
  return sol;
}

}  // namespace portfolio
