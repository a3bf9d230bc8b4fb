#include "rfqa/eval.hpp"

#include "pool_fixtures.hpp"

#include <gtest/gtest.h>

using namespace rfqa;

namespace {

std::vector<double> v(std::initializer_list<double> xs) { return xs; }

// r = 1 / 0.5 / 0 with losses 0 / 0.2 / 0.3; pooled r is exactly 0.5
void three_targets(TargetScores& pred, TargetScores& truth) {
  pred["T1"] = {{"a", 1}, {"b", 2}, {"c", 3}};
  truth["T1"] = {{"a", 0.2}, {"b", 0.4}, {"c", 0.6}};
  pred["T2"] = {{"a", 1}, {"b", 2}, {"c", 3}};
  truth["T2"] = {{"a", 0.3}, {"b", 0.7}, {"c", 0.5}};
  pred["T3"] = {{"a", 1}, {"b", 3}, {"c", 2}};
  truth["T3"] = {{"a", 0.4}, {"b", 0.4}, {"c", 0.7}};
}

}  // namespace

TEST(Pearson, Examples) {
  EXPECT_DOUBLE_EQ(*pearson(v({1, 2, 3}), v({2, 4, 6})), 1.0);
  EXPECT_DOUBLE_EQ(*pearson(v({1, 2, 3}), v({3, 2, 1})), -1.0);
  EXPECT_FALSE(pearson(v({1, 1, 1}), v({1, 2, 3})));
  EXPECT_FALSE(pearson(v({1, 2, 3}), v({4, 4, 4})));
  EXPECT_THROW(pearson(v({1, 2}), v({1, 2, 3})), Error);
  EXPECT_THROW(pearson(v({1}), v({1})), Error);
}

TEST(Pearson, SymmetricAndAffineInvariant) {
  Rng rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> x(12), y(12);
    for (std::size_t i = 0; i < x.size(); ++i) {
      x[i] = rng.normal();
      y[i] = 0.5 * x[i] + rng.normal();
    }
    double r = *pearson(x, y);
    EXPECT_NEAR(*pearson(y, x), r, 1e-12);
    for (double a : {3.0, 0.01, -2.0}) {
      std::vector<double> ax(x.size());
      for (std::size_t i = 0; i < x.size(); ++i) ax[i] = a * x[i] + 7.5;
      EXPECT_NEAR(*pearson(ax, y), (a > 0 ? 1 : -1) * r, 1e-12);
    }
  }
}

TEST(GdtLoss, Examples) {
  EXPECT_EQ(gdt_loss({{"a", 0.9}, {"b", 0.5}}, {{"a", 0.8}, {"b", 0.1}}), 0.0);
  EXPECT_DOUBLE_EQ(gdt_loss({{"a", 0.8}, {"b", 0.6}}, {{"a", 0.1}, {"b", 0.9}}), 0.2);
  // five models: predictor picks m4 (truth 0.55), best truth is m2 (0.71)
  ScoreMap truth{{"m1", 0.40}, {"m2", 0.71}, {"m3", 0.66}, {"m4", 0.55}, {"m5", 0.12}};
  ScoreMap pred{{"m1", 0.3}, {"m2", 0.5}, {"m3", 0.2}, {"m4", 0.61}, {"m5", 0.6}};
  EXPECT_NEAR(gdt_loss(truth, pred), 0.16, 1e-15);
  // tied predictions: the lexicographically smallest id is taken
  EXPECT_DOUBLE_EQ(gdt_loss({{"a", 0.3}, {"b", 0.9}}, {{"a", 0.5}, {"b", 0.5}}), 0.6);
  EXPECT_THROW(gdt_loss({}, {}), Error);
}

TEST(GdtLoss, MatchesBruteForceArgmax) {
  Rng rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    ScoreMap truth, pred;
    const std::size_t n = 1 + rng.below(12);
    for (std::size_t i = 0; i < n; ++i) {
      std::string id = "m" + std::to_string(rng.below(100));
      truth[id] = rng.unit();
      pred[id] = std::round(rng.unit() * 4) / 4;  // frequent ties
    }
    std::string top;
    double top_v = -1, best = -1;
    for (const auto& [id, p] : pred)
      if (p > top_v || (p == top_v && id < top)) {
        top = id;
        top_v = p;
      }
    for (const auto& [id, t] : truth) best = std::max(best, t);
    double expected = best - truth[top];
    EXPECT_EQ(gdt_loss(truth, pred), expected);

    ScoreMap cubed;
    for (const auto& [id, p] : pred) cubed[id] = p * p * p + 1;
    EXPECT_EQ(gdt_loss(truth, cubed), expected);
  }
}

TEST(EvaluateGlobal, IdentityGivesPerfectScores) {
  TargetScores truth;
  Rng rng(3);
  for (int t = 0; t < 3; ++t)
    for (int m = 0; m < 6; ++m) truth["T" + std::to_string(t)]["m" + std::to_string(m)] = rng.unit();
  auto r = evaluate_global(truth, truth);
  EXPECT_DOUBLE_EQ(*r.ave_corr, 1.0);
  EXPECT_DOUBLE_EQ(*r.over_corr, 1.0);
  EXPECT_EQ(r.ave_loss, 0.0);
}

TEST(EvaluateGlobal, HandComputedThreeTargets) {
  TargetScores pred, truth;
  three_targets(pred, truth);
  auto r = evaluate_global(pred, truth);
  ASSERT_EQ(r.per_target.size(), 3u);
  EXPECT_NEAR(*r.per_target[0].pearson, 1.0, 1e-12);
  EXPECT_NEAR(*r.per_target[1].pearson, 0.5, 1e-12);
  EXPECT_NEAR(*r.per_target[2].pearson, 0.0, 1e-12);
  EXPECT_NEAR(r.per_target[1].loss, 0.2, 1e-12);
  EXPECT_NEAR(r.per_target[2].loss, 0.3, 1e-12);
  EXPECT_NEAR(*r.ave_corr, 0.5, 1e-12);
  EXPECT_NEAR(*r.over_corr, 0.5, 1e-12);
  EXPECT_NEAR(r.ave_loss, 0.5 / 3, 1e-12);
  EXPECT_EQ(r.excluded_correlations, 0u);
}

TEST(EvaluateGlobal, SingleModelTargetsOnlyCountTowardLoss) {
  TargetScores pred, truth;
  three_targets(pred, truth);
  pred["T4"] = {{"solo", 0.9}};
  truth["T4"] = {{"solo", 0.3}};
  auto r = evaluate_global(pred, truth);
  ASSERT_EQ(r.per_target.size(), 4u);
  EXPECT_FALSE(r.per_target[3].pearson);
  EXPECT_EQ(r.per_target[3].loss, 0.0);
  EXPECT_EQ(r.excluded_correlations, 1u);
  EXPECT_NEAR(*r.ave_corr, 0.5, 1e-12);
  EXPECT_NEAR(r.ave_loss, 0.5 / 4, 1e-12);
  EXPECT_FALSE(r.diagnostics.empty());
}

TEST(EvaluateGlobal, SkipsTargetsWithoutOverlap) {
  TargetScores pred, truth;
  three_targets(pred, truth);
  pred["T9"] = {{"x", 0.1}, {"y", 0.2}};
  truth["T9"] = {{"p", 0.1}};
  pred["T8"] = {{"x", 0.1}};
  auto r = evaluate_global(pred, truth);
  EXPECT_EQ(r.per_target.size(), 3u);
  EXPECT_EQ(r.diagnostics.size(), 2u);
  EXPECT_THROW(evaluate_global({{"T8", {{"x", 0.1}}}}, truth), Error);
}

TEST(LocalBins, SinglePairAndEdges) {
  auto bins = local_binned_error(v({3.5}), v({4.0}));
  ASSERT_EQ(bins.size(), 20u);
  for (std::size_t b = 0; b < 20; ++b) {
    EXPECT_EQ(bins[b].count, b == 3 ? 1u : 0u);
    EXPECT_EQ(bins[b].mean_abs_error.has_value(), b == 3);
  }
  EXPECT_EQ(*bins[3].mean_abs_error, 0.5);
  EXPECT_TRUE(std::isinf(bins[19].hi));

  auto edges = local_binned_error(v({0.0, 1.0, 19.0, 42.0}), v({0, 1, 19, 42}));
  EXPECT_EQ(edges[0].count, 1u);
  EXPECT_EQ(edges[1].count, 1u);
  EXPECT_EQ(edges[19].count, 2u);
  for (const auto& b : edges)
    if (b.count) {
      EXPECT_EQ(*b.mean_abs_error, 0.0);
    }
  EXPECT_THROW(local_binned_error(v({1.0}), v({})), Error);
}

TEST(LocalBins, WeightedMeanEqualsMae) {
  Rng rng(4);
  std::vector<double> real, pred;
  for (int i = 0; i < 500; ++i) {
    real.push_back(25 * rng.unit() * rng.unit());
    pred.push_back(std::min(15.0, std::max(0.0, real.back() + 2 * rng.normal())));
  }
  auto bins = local_binned_error(real, pred);
  double mae = 0, weighted = 0;
  std::size_t total = 0;
  for (std::size_t i = 0; i < real.size(); ++i) mae += std::abs(real[i] - pred[i]);
  mae /= double(real.size());
  for (const auto& b : bins) {
    total += b.count;
    if (b.count) {
      EXPECT_GE(*b.mean_abs_error, 0.0);
      weighted += *b.mean_abs_error * double(b.count);
    }
  }
  EXPECT_EQ(total, real.size());
  EXPECT_NEAR(weighted / double(total), mae, 1e-12);
}

TEST(ThresholdSweep, CumulativeCounts) {
  std::vector<SweepInput> pools;
  std::uint64_t seed = 10;
  for (std::size_t keep : {15u, 25u, 50u, 90u}) {
    auto pool = fixtures::gated_pool(100, keep, seed++);
    pool.target_id = "T" + std::to_string(keep);
    auto c = pairwise_scores(pool);
    EXPECT_EQ(c.pool_max, double(keep) / 100);
    pools.push_back(make_sweep_input(c, pool.target_id, {{"a", 1.0}, {"b", 0.5}}));
  }
  auto rows = threshold_sweep(pools, v({0.2, 0.3, 0.6, 1.0}));
  ASSERT_EQ(rows.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(rows[i].n_targets, i + 1);
}

TEST(ThresholdSweep, EmptyRowsAndSinglePool) {
  SweepInput in{"T", 0.9, {{"a", 0.1}, {"b", 0.5}, {"c", 0.3}}, {{"a", 0.2}, {"b", 0.4}, {"c", 0.45}}};
  std::vector<SweepInput> pools{in};
  auto rows = threshold_sweep(pools, v({0.5, 0.9, 1.0}));
  EXPECT_EQ(rows[0].n_targets, 0u);
  EXPECT_FALSE(rows[0].average_corr);
  double r = *pearson(v({0.1, 0.5, 0.3}), v({0.2, 0.4, 0.45}));
  EXPECT_EQ(*rows[1].average_corr, r);
  EXPECT_EQ(*rows[2].average_corr, r);
  auto table = write_sweep(rows);
  EXPECT_EQ(table.substr(0, table.find('\n', table.find('\n') + 1) + 1), "threshold\tn_targets\taverage_corr\n0.5\t0\t\n");
}

TEST(Files, TruthRoundTripAndTables) {
  TargetScores pred, truth;
  three_targets(pred, truth);
  EXPECT_EQ(parse_truth_file(write_truth_file(truth)), truth);
  EXPECT_THROW(parse_truth_file("T1 a\n"), Error);
  auto r = evaluate_global(pred, truth);
  EXPECT_EQ(write_global_summary(r),
            "n_targets\tave_corr\tover_corr\tave_loss\texcluded_corr\n3\t0.500000\t0.500000\t0.166667\t0\n");
  auto per = write_per_target(r);
  EXPECT_NE(per.find("T2\t3\t0.500000\t0.200000\n"), std::string::npos);
  auto bins = write_local_bins(local_binned_error(v({3.5}), v({4.0})));
  EXPECT_NE(bins.find("3\t4\t1\t0.500000\n"), std::string::npos);
  EXPECT_NE(bins.find("19\tinf\t0\t\n"), std::string::npos);
}
