#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <unordered_map>
#include <vector>

#include "portfolio/error.hpp"

namespace portfolio {

// Absolute tolerance for budget/cost comparisons. Costs are decimal-valued
// reals whose binary sums drift by well under this at |X| <= 1e5.
inline constexpr double kCostEps = 1e-9;

// Compensated summation; keeps long cost sums within kCostEps of exact.
class KahanSum {
public:
  void add(double x) {
    double y = x - carry_;
    double t = sum_ + y;
    carry_ = (t - sum_) - y;
    sum_ = t;
  }
  double value() const { return sum_; }

private:
  double sum_ = 0.0;
  double carry_ = 0.0;
};

// Dense row-major matrix of doubles.
struct Mat {
  std::size_t rows = 0, cols = 0;
  std::vector<double> data;

  Mat() = default;
  Mat(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}

  double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

// One embedded, labelled instance. Coordinates are expected to be normalized
// to [0,1] per dimension before any distance computation (see metrics.hpp).
struct LabeledPoint {
  std::string id;
  std::vector<double> embedding;
  int label = 0;
};

struct ClassifierProfile {
  int index = 0;        // dense 0..M-1
  std::string name;
  double cost = 0.0;    // normalized cost units, > 0
  double lipschitz_hint = -1.0;  // optional; < 0 means unknown
};

// Assignment of exactly one classifier to each query.
struct Portfolio {
  std::vector<std::string> query_ids;
  std::vector<int> choice;  // classifier index per query, aligned with query_ids
  double realized_cost = 0.0;
  double objective = 0.0;
};

struct BudgetSpec {
  double raw_budget = 0.0;
  double feature_extraction_cost = 0.0;
  double effective_budget = 0.0;
};

inline BudgetSpec make_budget(double raw_budget, double feature_extraction_cost) {
  if (!(raw_budget > 0.0) || !std::isfinite(raw_budget))
    throw InputError("budget: raw_budget must be positive and finite");
  if (feature_extraction_cost < 0.0 || !std::isfinite(feature_extraction_cost))
    throw InputError("budget: feature_extraction_cost must be nonnegative");
  // A negative effective budget is representable; it is reported as
  // infeasible by check_feasible rather than rejected here.
  return BudgetSpec{raw_budget, feature_extraction_cost,
                    raw_budget - feature_extraction_cost};
}

// Fraction of queries whose prediction matches the truth label.
inline double accuracy(const Portfolio& portfolio,
                       const std::unordered_map<std::string, int>& predictions,
                       const std::unordered_map<std::string, int>& truth) {
  if (portfolio.query_ids.empty()) throw InputError("accuracy: empty query set");
  std::size_t correct = 0;
  for (const std::string& id : portfolio.query_ids) {
    auto p = predictions.find(id);
    if (p == predictions.end())
      throw DataError("accuracy: missing prediction for query '" + id + "'");
    auto t = truth.find(id);
    if (t == truth.end())
      throw DataError("accuracy: missing truth label for query '" + id + "'");
    if (p->second == t->second) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(portfolio.query_ids.size());
}

inline double cost(const Portfolio& portfolio,
                   const std::vector<ClassifierProfile>& profiles) {
  KahanSum total;
  for (std::size_t q = 0; q < portfolio.choice.size(); ++q) {
    int i = portfolio.choice[q];
    if (i < 0 || static_cast<std::size_t>(i) >= profiles.size())
      throw DataError("cost: unknown classifier index " + std::to_string(i) +
                      " for query '" + portfolio.query_ids[q] + "'");
    total.add(profiles[static_cast<std::size_t>(i)].cost);
  }
  return total.value();
}

inline bool check_feasible(const Portfolio& portfolio,
                           const std::vector<ClassifierProfile>& profiles,
                           const BudgetSpec& budget,
                           std::vector<std::string>* warnings = nullptr) {
  if (budget.effective_budget < 0.0) {
    if (warnings)
      warnings->push_back(
          "effective budget is negative: feature extraction cost exceeds raw budget");
    return false;
  }
  return cost(portfolio, profiles) <= budget.effective_budget + kCostEps;
}

}  // namespace portfolio
