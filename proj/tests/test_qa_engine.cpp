#include "rfqa/qa_engine.hpp"

#include "pool_fixtures.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace rfqa;

namespace {

Tree leaf(double v) { return Tree{{TreeNode{-1, 0.0, -1, -1, v}}}; }

Tree stump(std::size_t feature, double threshold, double left, double right) {
  return Tree{{TreeNode{static_cast<std::int32_t>(feature), threshold, 1, 2, 0.0}, TreeNode{-1, 0.0, -1, -1, left},
               TreeNode{-1, 0.0, -1, -1, right}}};
}

RandomForestModel forest_of(std::vector<Tree> trees) {
  RandomForestModel m;
  m.n_features = kFeatureCount;
  m.params.n_trees = trees.size();
  m.trees = std::move(trees);
  return m;
}

PredictedAnnotations coil(std::size_t n) { return {std::string(n, 'C'), std::vector<double>(n, 0.5)}; }

}  // namespace

TEST(SToDistance, AnchorsAndCap) {
  EXPECT_EQ(s_to_distance(1.0), 0.0);
  EXPECT_DOUBLE_EQ(s_to_distance(0.5), 3.8);
  EXPECT_GT(3.8 * std::sqrt(1 / 0.01 - 1), 15.0);
  EXPECT_EQ(s_to_distance(0.01), 15.0);
  EXPECT_EQ(s_to_distance(0.0), 15.0);
  EXPECT_EQ(s_to_distance(-0.3), 15.0);
  EXPECT_EQ(s_to_distance(std::nan("")), 15.0);
  EXPECT_EQ(s_to_distance(0.2, 3.8, 5.0), 5.0);
}

TEST(SToDistance, RoundTripThroughCap) {
  for (double d = 0; d <= 40; d += 0.125) EXPECT_NEAR(s_to_distance(s_score(d)), std::min(d, 15.0), 1e-9) << d;
}

TEST(LocalPredict, ConstantForests) {
  auto m = synthetic::random_native(30, 1);
  auto ann = coil(30);
  for (const auto& p : local_predict(m, ann, forest_of({leaf(1.0)}))) EXPECT_EQ(p.distance, 0.0);
  for (const auto& p : local_predict(m, ann, forest_of({leaf(0.5)}))) EXPECT_DOUBLE_EQ(p.distance, 3.8);
  auto local = local_predict(m, ann, forest_of({leaf(0.5), leaf(0.5), leaf(0.5)}));
  ASSERT_EQ(local.size(), 30u);
  for (std::size_t i = 0; i < local.size(); ++i) EXPECT_EQ(local[i].seq_index, static_cast<int>(i + 1));
}

// Tree 1 asks whether the centre residue is Ala; tree 2 whether at most half
// of the window's resolved residues disagree with the predicted SS.
TEST(LocalPredict, HandTracedTwoTreeForest) {
  std::string seq;
  for (int i = 0; i < 20; ++i) seq += i % 3 == 0 ? 'A' : 'G';
  auto m = synthetic::extended_ca_chain(seq);  // CA-only, assigned all coil
  PredictedAnnotations ann{std::string(10, 'H') + std::string(10, 'C'), std::vector<double>(20, 0.5)};
  const std::size_t centre_ala = 7 * 20 + static_cast<std::size_t>(*aa::index_of('A'));
  const std::size_t window_ss_diff = kOneHotSize;
  auto forest = forest_of({stump(centre_ala, 0.5, 0.25, 0.64), stump(window_ss_diff, 0.5, 0.2, 0.8)});

  auto local = local_predict(m, ann, forest);
  ASSERT_EQ(local.size(), 20u);
  for (int c = 1; c <= 20; ++c) {
    int lo = std::max(1, c - 7), hi = std::min(20, c + 7);
    int helix = std::max(0, std::min(10, hi) - lo + 1);
    double diff = double(helix) / double(hi - lo + 1);
    double t1 = seq[static_cast<std::size_t>(c - 1)] == 'A' ? 0.64 : 0.25;
    double t2 = diff <= 0.5 ? 0.2 : 0.8;
    double q = (t1 + t2) / 2;
    const auto& p = local[static_cast<std::size_t>(c - 1)];
    EXPECT_EQ(p.quality, q) << c;
    EXPECT_DOUBLE_EQ(p.distance, 3.8 * std::sqrt(1 / q - 1)) << c;
  }
  // residue 1: Ala, window 1..8 all predicted H -> (0.64 + 0.8) / 2
  EXPECT_DOUBLE_EQ(local[0].quality, 0.72);
  // residue 20: Gly, window 13..20 none predicted H -> (0.25 + 0.2) / 2
  EXPECT_DOUBLE_EQ(local[19].quality, 0.225);
}

TEST(LocalPredict, LayoutMismatchIsError) {
  auto m = synthetic::random_native(10, 2);
  auto f = forest_of({leaf(0.5)});
  f.feature_layout_version = "other-v0";
  try {
    local_predict(m, coil(10), f);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::layout_mismatch);
  }
  auto g = forest_of({leaf(0.5)});
  g.n_features = 312;
  EXPECT_THROW(local_predict(m, coil(10), g), Error);
}

TEST(LocalPredict, ShortAnnotationIsError) {
  auto m = synthetic::random_native(10, 2);
  try {
    local_predict(m, coil(8), forest_of({leaf(0.5)}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::length_mismatch);
  }
}

TEST(SingleModelGlobal, MeanQualityAndOverride) {
  auto m = synthetic::random_native(15, 3);
  m.model_id = "modelA";
  EXPECT_EQ(single_model_global(m, coil(15), forest_of({leaf(1.0)})), 1.0);
  EXPECT_DOUBLE_EQ(single_model_global(m, coil(15), forest_of({leaf(0.2), leaf(0.6)})), 0.4);
  auto overrides = parse_score_file("# external\nmodelA 0.37\nmodelB 0.9\n");
  EXPECT_EQ(single_model_global(m, coil(15), forest_of({leaf(1.0)}), &overrides), 0.37);
}

TEST(ScoreFile, RejectsBadLines) {
  EXPECT_THROW(parse_score_file("a 1.5\n"), Error);
  EXPECT_THROW(parse_score_file("a\n"), Error);
  EXPECT_THROW(parse_score_file("a x\n"), Error);
  EXPECT_TRUE(parse_score_file("\n\n").empty());
}

TEST(Gate, ChooseMethodIsStrict) {
  EXPECT_EQ(choose_method(5, 0.2, 0.2), GlobalMethod::single);
  EXPECT_EQ(choose_method(5, std::nextafter(0.2, 1.0), 0.2), GlobalMethod::pairwise);
  EXPECT_EQ(choose_method(1, 0.9, 0.2), GlobalMethod::single);
  EXPECT_EQ(choose_method(3, std::nullopt, 0.2), GlobalMethod::single);
}

TEST(Gate, ConstructedPoolsAroundTheGate) {
  const auto forest = forest_of({leaf(0.3)});
  struct Case {
    std::size_t keep;
    GlobalMethod method;
  };
  for (auto [keep, method] : {Case{19, GlobalMethod::single}, Case{20, GlobalMethod::single},
                              Case{21, GlobalMethod::pairwise}}) {
    auto pool = fixtures::gated_pool(100, keep, 40 + keep);
    auto ann = synthetic::annotations_of(pool.models[0], 100);
    auto pred = hybrid_global(pool, ann, forest);
    ASSERT_TRUE(pred.pool_max);
    EXPECT_EQ(*pred.pool_max, double(keep) / 100.0) << keep;
    EXPECT_EQ(pred.method, method) << keep;
    for (const auto& mp : pred.models)
      EXPECT_EQ(mp.global_score, method == GlobalMethod::single ? 0.3 : *pred.pool_max);
    EXPECT_EQ(predict_pool(pool, ann, forest).method, method);
  }
}

TEST(Gate, ExactlyPointTwo) {
  auto pool = fixtures::gated_pool(100, 20, 9);
  auto ann = synthetic::annotations_of(pool.models[0], 100);
  auto pred = hybrid_global(pool, ann, forest_of({leaf(0.5)}));
  EXPECT_EQ(*pred.pool_max, 0.2);
  EXPECT_EQ(pred.method, GlobalMethod::single);
  QaOptions lower;
  lower.gate = 0.19;
  EXPECT_EQ(hybrid_global(pool, ann, forest_of({leaf(0.5)}), lower).method, GlobalMethod::pairwise);
}

TEST(Gate, SingleModelAndNearDuplicatePools) {
  auto native = synthetic::random_native(40, 5, "TD");
  auto ann = synthetic::annotations_of(native, 40);
  auto forest = forest_of({leaf(0.6)});
  ModelPool one{"TD", {native}, synthetic::sequence_of(native)};
  auto p1 = hybrid_global(one, ann, forest);
  EXPECT_EQ(p1.method, GlobalMethod::single);
  EXPECT_FALSE(p1.pool_max);
  EXPECT_DOUBLE_EQ(p1.models[0].global_score, 0.6);

  ModelPool dup{"TD", {}, one.sequence};
  for (int i = 0; i < 4; ++i) dup.models.push_back(synthetic::noisy_decoy(native, 0.1, 50 + static_cast<std::uint64_t>(i), "m" + std::to_string(i)));
  auto p2 = hybrid_global(dup, ann, forest);
  EXPECT_EQ(p2.method, GlobalMethod::pairwise);
  EXPECT_GT(*p2.pool_max, 0.95);
}

TEST(PredictPool, PairwiseScoresFollowModelsWhenRelabelled) {
  auto native = synthetic::random_native(40, 6, "TR");
  auto ann = synthetic::annotations_of(native, 40);
  ModelPool pool{"TR", {}, synthetic::sequence_of(native)};
  for (int i = 0; i < 5; ++i) pool.models.push_back(synthetic::noisy_decoy(native, 0.5 + i, 60 + static_cast<std::uint64_t>(i), "m" + std::to_string(i)));
  auto forest = forest_of({leaf(0.5)});
  auto a = predict_pool(pool, ann, forest);
  ASSERT_EQ(a.method, GlobalMethod::pairwise);
  auto renamed = pool;
  for (std::size_t i = 0; i < renamed.models.size(); ++i) renamed.models[i].model_id = "z" + std::to_string(9 - i);
  auto b = predict_pool(renamed, ann, forest);
  for (std::size_t i = 0; i < a.models.size(); ++i) EXPECT_EQ(a.models[i].global_score, b.models[i].global_score);
}

TEST(PredictPool, QaRecordsRespectCapAndGaps) {
  auto native = synthetic::random_native(30, 7, "TQ");
  auto ann = synthetic::annotations_of(native, 30);
  auto gappy = native;
  gappy.model_id = "gappy";
  gappy.residues.erase(gappy.residues.begin() + 4, gappy.residues.begin() + 8);
  ModelPool pool{"TQ", {native, gappy}, synthetic::sequence_of(native)};
  pool.models[0].model_id = "full";
  auto pred = predict_pool(pool, ann, forest_of({leaf(0.01), leaf(1.0)}), QaOptions{.threads = 2});
  auto recs = to_qa_records(pred, 30);
  ASSERT_EQ(recs.size(), 2u);
  for (const auto& r : recs) {
    EXPECT_GE(r.global_score, 0.0);
    EXPECT_LE(r.global_score, 1.0);
    ASSERT_EQ(r.distances.size(), 30u);
  }
  for (std::size_t k = 4; k < 8; ++k) EXPECT_FALSE(recs[1].distances[k]);
  auto qa = parse_qa_output(write_qa_output("TQ", recs));
  for (const auto& r : qa.records)
    for (const auto& d : r.distances)
      if (d) {
        EXPECT_GT(*d, 0.0);
        EXPECT_LE(*d, 15.0);
      }
}
