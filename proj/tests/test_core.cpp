#include <catch2/catch_amalgamated.hpp>

#include "portfolio/core.hpp"
#include "portfolio/rng.hpp"

using namespace portfolio;

namespace {

Portfolio make_portfolio(std::vector<std::string> ids, std::vector<int> choice) {
  Portfolio p;
  p.query_ids = std::move(ids);
  p.choice = std::move(choice);
  return p;
}

std::vector<ClassifierProfile> two_profiles() {
  return {{0, "small", 0.15, -1.0}, {1, "large", 1.0, -1.0}};
}

}  // namespace

TEST_CASE("accuracy counts matching predictions", "[core]") {
  Portfolio p = make_portfolio({"a", "b", "c"}, {0, 0, 0});
  std::unordered_map<std::string, int> truth{{"a", 1}, {"b", 2}, {"c", 3}};

  SECTION("all correct gives 1.0") {
    REQUIRE(accuracy(p, truth, truth) == 1.0);
  }
  SECTION("two of three correct") {
    std::unordered_map<std::string, int> pred{{"a", 1}, {"b", 2}, {"c", 9}};
    REQUIRE_THAT(accuracy(p, pred, truth),
                 Catch::Matchers::WithinAbs(2.0 / 3.0, 1e-15));
  }
  SECTION("empty query set is an error") {
    Portfolio empty;
    REQUIRE_THROWS_AS(accuracy(empty, truth, truth), InputError);
  }
  SECTION("missing prediction names the query") {
    std::unordered_map<std::string, int> pred{{"a", 1}, {"b", 2}};
    REQUIRE_THROWS_WITH(accuracy(p, pred, truth),
                        Catch::Matchers::ContainsSubstring("'c'"));
  }
  SECTION("missing truth label names the query") {
    std::unordered_map<std::string, int> t2{{"a", 1}, {"c", 3}};
    REQUIRE_THROWS_WITH(accuracy(p, truth, t2),
                        Catch::Matchers::ContainsSubstring("'b'"));
  }
}

TEST_CASE("cost sums the assigned per-call costs", "[core]") {
  auto profiles = two_profiles();

  SECTION("same classifier four times") {
    Portfolio p = make_portfolio({"a", "b", "c", "d"}, {0, 0, 0, 0});
    REQUIRE_THAT(cost(p, profiles), Catch::Matchers::WithinAbs(0.60, 1e-12));
  }
  SECTION("empty assignment costs nothing") {
    Portfolio p;
    REQUIRE(cost(p, profiles) == 0.0);
  }
  SECTION("mixed assignment") {
    Portfolio p = make_portfolio({"a", "b"}, {0, 1});
    REQUIRE_THAT(cost(p, profiles), Catch::Matchers::WithinAbs(1.15, 1e-12));
  }
  SECTION("unknown classifier index") {
    Portfolio p = make_portfolio({"a"}, {7});
    REQUIRE_THROWS_AS(cost(p, profiles), DataError);
  }
}

TEST_CASE("long cost sums stay within 1e-9 of exact", "[core]") {
  std::vector<ClassifierProfile> profiles{{0, "c", 0.1, -1.0}};
  std::vector<std::string> ids(100000);
  std::vector<int> choice(100000, 0);
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = "q" + std::to_string(i);
  Portfolio p = make_portfolio(std::move(ids), std::move(choice));
  REQUIRE_THAT(cost(p, profiles), Catch::Matchers::WithinAbs(10000.0, 1e-9));
}

TEST_CASE("check_feasible compares cost against the effective budget", "[core]") {
  auto profiles = two_profiles();
  Portfolio p = make_portfolio({"a", "b", "c", "d"}, {0, 0, 0, 0});  // cost 0.60

  SECTION("boundary equality is feasible") {
    REQUIRE(check_feasible(p, profiles, make_budget(0.60, 0.0)));
  }
  SECTION("over budget is infeasible") {
    Portfolio q = make_portfolio({"a", "b"}, {0, 1});  // cost 1.15
    REQUIRE_FALSE(check_feasible(q, profiles, make_budget(1.0, 0.0)));
  }
  SECTION("negative effective budget warns") {
    std::vector<std::string> warnings;
    REQUIRE_FALSE(check_feasible(p, profiles, make_budget(1.0, 2.0), &warnings));
    REQUIRE_FALSE(warnings.empty());
  }
  SECTION("feasibility is monotone in budget") {
    Rng rng(7);
    for (int trial = 0; trial < 50; ++trial) {
      double b1 = rng.uniform(0.0, 2.0) + 0.01;
      double b2 = b1 + rng.uniform(0.0, 2.0);
      if (check_feasible(p, profiles, make_budget(b1, 0.0)))
        REQUIRE(check_feasible(p, profiles, make_budget(b2, 0.0)));
    }
  }
}

TEST_CASE("budget spec arithmetic", "[core]") {
  BudgetSpec b = make_budget(10.0, 2.5);
  REQUIRE(b.effective_budget == 7.5);
  REQUIRE_THROWS_AS(make_budget(0.0, 0.0), InputError);
  REQUIRE_THROWS_AS(make_budget(1.0, -0.5), InputError);
}
