#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>

#include "portfolio/estimator.hpp"
#include "portfolio/simulator.hpp"
#include "test_util.hpp"

using namespace portfolio;

namespace {

// Single-point sample set whose one classifier reports `p_truth` on the
// truth class of that point.
SampleSet one_point_set(std::vector<double> where, int label, double p_truth) {
  SampleSet set;
  set.points.push_back({"p", std::move(where), label});
  Mat out(1, 2);
  out.at(0, static_cast<std::size_t>(label)) = p_truth;
  out.at(0, static_cast<std::size_t>(1 - label)) = 1.0 - p_truth;
  set.outputs.push_back(std::move(out));
  return set;
}

}  // namespace

TEST_CASE("success probability reads the truth coordinate", "[estimator]") {
  std::vector<double> one_hot{0.0, 1.0, 0.0};
  REQUIRE(success_probability(one_hot, 1) == 1.0);
  std::vector<double> uniform{0.25, 0.25, 0.25, 0.25};
  REQUIRE(success_probability(uniform, 3) == 0.25);
  std::vector<double> mixed{0.7, 0.2, 0.1};
  REQUIRE(success_probability(mixed, 1) == 0.2);
  REQUIRE_THROWS_AS(success_probability(mixed, 3), InputError);
  REQUIRE_THROWS_AS(success_probability(mixed, -1), InputError);
}

TEST_CASE("draw_samples", "[estimator]") {
  SyntheticTask task = generate_task(4, 3, 0.3, 25, 2, 0.05);
  auto cl = make_classifier(task, "c", 1.0, 0.05, 1.0, 6.0, 3);
  SampleSet pool = testutil::make_sample_pool(task, {cl}, task.points);

  SECTION("full-size samples equal the pool up to order") {
    auto sets = draw_samples(pool, 3, pool.size(), 11);
    for (const auto& set : sets) {
      REQUIRE(set.size() == pool.size());
      std::multiset<std::string> got, want;
      for (const auto& p : set.points) got.insert(p.id);
      for (const auto& p : pool.points) want.insert(p.id);
      REQUIRE(got == want);
    }
  }
  SECTION("identical seeds give identical families") {
    auto a = draw_samples(pool, 4, 20, 99);
    auto b = draw_samples(pool, 4, 20, 99);
    for (std::size_t k = 0; k < a.size(); ++k)
      for (std::size_t p = 0; p < a[k].size(); ++p) {
        REQUIRE(a[k].points[p].id == b[k].points[p].id);
        REQUIRE(a[k].outputs[0].data == b[k].outputs[0].data);
      }
  }
  SECTION("points within one sample are distinct") {
    auto sets = draw_samples(pool, 5, 40, 123);
    for (const auto& set : sets) {
      std::set<std::string> ids;
      for (const auto& p : set.points) ids.insert(p.id);
      REQUIRE(ids.size() == set.size());
    }
  }
  SECTION("oversized draw is rejected") {
    REQUIRE_THROWS_AS(draw_samples(pool, 2, pool.size() + 1, 1), InputError);
  }
  SECTION("forty sets of a thousand distinct points from a 40k pool") {
    SampleSet big;
    big.points.resize(40000);
    for (std::size_t i = 0; i < big.points.size(); ++i)
      big.points[i] = {"p" + std::to_string(i), {0.0, 0.0}, 0};
    auto sets = draw_samples(big, 40, 1000, 5);
    REQUIRE(sets.size() == 40);
    for (const auto& set : sets) {
      std::set<std::string> ids;
      for (const auto& p : set.points) ids.insert(p.id);
      REQUIRE(ids.size() == 1000);
    }
  }
}

TEST_CASE("estimate_sp", "[estimator]") {
  SECTION("hand-computed average of two sample sets") {
    std::vector<SampleSet> samples{one_point_set({0.0, 0.0}, 0, 0.8),
                                   one_point_set({0.0, 0.0}, 0, 0.6)};
    double sp = estimate_sp(std::vector<double>{0.3, 0.3}, 0, samples, Metric::L2);
    REQUIRE_THAT(sp, Catch::Matchers::WithinAbs(0.7, 1e-12));
  }
  SECTION("query present in every sample recovers its own SP") {
    SyntheticTask task = generate_task(3, 3, 0.3, 30, 8, 0.05);
    auto cl = make_classifier(task, "c", 1.0, 0.08, 1.0, 6.0, 4);
    SampleSet pool = testutil::make_sample_pool(task, {cl}, task.points);
    auto sets = draw_samples(pool, 5, pool.size(), 17);  // full pool each time
    const auto& x = task.points[12];
    double expected =
        pool.outputs[0].at(12, static_cast<std::size_t>(x.label));
    REQUIRE_THAT(estimate_sp(x.embedding, 0, sets, Metric::LINF),
                 Catch::Matchers::WithinAbs(expected, 1e-12));
  }
  SECTION("always-correct classifier estimates to one") {
    SyntheticTask task = generate_task(3, 3, 0.3, 20, 9, 0.05);
    auto ideal = make_classifier(task, "ideal", 1.0, 0.0, 1e-3, 8.0, 1);
    SampleSet pool = testutil::make_sample_pool(task, {ideal}, task.points);
    auto sets = draw_samples(pool, 4, 30, 21);
    for (int q = 0; q < 10; ++q) {
      auto probe = sample_points(task, 10, 33);
      REQUIRE(estimate_sp(probe[static_cast<std::size_t>(q)].embedding, 0, sets,
                          Metric::LINF) >= 1.0 - 1e-9);
    }
  }
  SECTION("missing classifier outputs raise a data error") {
    std::vector<SampleSet> samples{one_point_set({0.0}, 0, 1.0)};
    REQUIRE_THROWS_AS(estimate_sp(std::vector<double>{0.0}, 3, samples, Metric::L1),
                      DataError);
  }
  SECTION("estimates stay in [0,1] on random inputs") {
    SyntheticTask task = generate_task(4, 4, 0.25, 40, 12, 0.05);
    auto cl = make_classifier(task, "c", 1.0, 0.15, 0.8, 6.0, 5);
    SampleSet pool = testutil::make_sample_pool(task, {cl}, task.points);
    auto sets = draw_samples(pool, 7, 25, 2);
    Mat est = estimate_sp_matrix(sample_points(task, 50, 91), sets, Metric::L1);
    for (double v : est.data) {
      REQUIRE(v >= 0.0);
      REQUIRE(v <= 1.0);
    }
  }
}

TEST_CASE("estimator error shrinks as the sample size grows", "[estimator]") {
  // trend over s in {50, 200, 1000}, averaged over 200 queries and 3 seeds
  const std::size_t sizes[] = {50, 200, 1000};
  double err[3] = {0.0, 0.0, 0.0};
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    SyntheticTask task = generate_task(5, 8, 0.3, 260, seed, 0.05, 2);
    auto cl = make_classifier(task, "c", 1.0, 0.06, 1.0, 6.0, seed + 10);
    SampleSet pool = testutil::make_sample_pool(task, {cl}, task.points);
    auto queries = sample_points(task, 200, seed + 100);
    for (int si = 0; si < 3; ++si) {
      auto sets = draw_samples(pool, 6, sizes[si], seed + 7);
      Mat est = estimate_sp_matrix(queries, sets, Metric::LINF);
      double total = 0.0;
      for (std::size_t q = 0; q < queries.size(); ++q)
        total += std::abs(est.at(0, q) - true_sp(cl, task, queries[q].embedding));
      err[si] += total / static_cast<double>(queries.size());
    }
  }
  INFO("err(50)=" << err[0] << " err(200)=" << err[1] << " err(1000)=" << err[2]);
  REQUIRE(err[1] <= err[0] + 1e-9);
  REQUIRE(err[2] <= err[1] + 1e-9);
}

TEST_CASE("single-sample Lipschitz error bound holds per query", "[estimator]") {
  SyntheticTask task = generate_task(4, 6, 0.3, 60, 44, 0.05);
  auto cl = make_classifier(task, "c", 1.0, 0.07, 1.0, 6.0, 6);
  SampleSet pool = testutil::make_sample_pool(task, {cl}, task.points);
  auto sets = draw_samples(pool, 1, 80, 3);
  auto queries = sample_points(task, 150, 71);
  const double bound = sp_lipschitz(cl, task, Metric::L1);
  for (const auto& q : queries) {
    NearestNeighbor nn = nearest_neighbor(q.embedding, sets[0].points, Metric::L1);
    double sp_nn = true_sp(cl, task, sets[0].points[nn.index].embedding);
    double sp_q = true_sp(cl, task, q.embedding);
    REQUIRE(std::abs(sp_nn - sp_q) <= bound * nn.dist + 1e-9);
  }
}

TEST_CASE("estimate_sigma", "[estimator]") {
  SECTION("deterministic classifier has zero sigma") {
    SyntheticTask task = generate_task(3, 3, 0.3, 40, 14, 0.05);
    auto ideal = make_classifier(task, "ideal", 1.0, 0.0, 1e-3, 8.0, 1);
    SampleSet pool = testutil::make_sample_pool(task, {ideal}, task.points);
    auto queries = sample_points(task, 20, 5);
    double sigma = estimate_sigma(0, pool, queries, 4, 20, Metric::LINF, 6, 77);
    REQUIRE(sigma <= 1e-12);
  }
  SECTION("sigma shrinks with K (statistical over 30 repetitions)") {
    SyntheticTask task = generate_task(4, 4, 0.3, 120, 23, 0.05, 2);
    auto cl = make_classifier(task, "c", 1.0, 0.1, 0.8, 6.0, 8);
    SampleSet pool = testutil::make_sample_pool(task, {cl}, task.points);
    auto queries = sample_points(task, 10, 6);
    double at_k10 = 0.0, at_k40 = 0.0;
    for (std::uint64_t rep = 0; rep < 30; ++rep) {
      at_k10 += estimate_sigma(0, pool, queries, 10, 12, Metric::LINF, 8, 1000 + rep);
      at_k40 += estimate_sigma(0, pool, queries, 40, 12, Metric::LINF, 8, 2000 + rep);
    }
    REQUIRE(at_k40 >= 0.0);
    REQUIRE(at_k40 < at_k10);
  }
  SECTION("too few resamples is an error") {
    SyntheticTask task = generate_task(2, 2, 0.3, 10, 3, 0.05);
    auto cl = make_classifier(task, "c", 1.0, 0.0, 1.0, 6.0, 2);
    SampleSet pool = testutil::make_sample_pool(task, {cl}, task.points);
    REQUIRE_THROWS_AS(
        estimate_sigma(0, pool, task.points, 2, 5, Metric::L1, 1, 1),
        InputError);
  }
}

TEST_CASE("score matrix assembly", "[estimator]") {
  SyntheticTask task = generate_task(3, 4, 0.3, 60, 19, 0.05);
  auto small = make_classifier(task, "small", 0.15, 0.12, 1.0, 6.0, 1);
  auto large = make_classifier(task, "large", 1.0, 0.02, 1.0, 6.0, 2);
  SampleSet pool = testutil::make_sample_pool(task, {small, large}, task.points);
  auto queries = sample_points(task, 30, 40);
  auto validation = sample_points(task, 20, 41, "v");

  EstimatorConfig cfg{4, 30, Metric::LINF, 1.0, 0.0, 555};

  SECTION("lambda zero leaves scores untouched") {
    ScoreMatrix sm = build_score_matrix(queries, pool, validation, cfg, 5);
    REQUIRE(sm.raw.data == sm.regularized.data);
  }
  SECTION("lambda five shifts each row by five sigma") {
    cfg.lambda = 5.0;
    ScoreMatrix sm = build_score_matrix(queries, pool, validation, cfg, 5);
    for (std::size_t i = 0; i < sm.raw.rows; ++i)
      for (std::size_t j = 0; j < sm.raw.cols; ++j)
        REQUIRE_THAT(sm.regularized.at(i, j),
                     Catch::Matchers::WithinAbs(sm.raw.at(i, j) - 5.0 * sm.sigma[i],
                                                1e-12));
  }
  SECTION("config validation rejects K*s beyond the pool") {
    EstimatorConfig bad{10, 100, Metric::L1, 1.0, 0.0, 1};
    REQUIRE_THROWS_AS(bad.validate(task.points.size()), InputError);
  }
}
