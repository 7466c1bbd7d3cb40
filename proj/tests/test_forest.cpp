#include <gtest/gtest.h>

#include "dataloc/error.hpp"
#include "dataloc/forest.hpp"
#include "support/generators.hpp"
#include "support/reference_tree.hpp"

namespace dataloc {
namespace {

// Feature values are RSSI, so the separable example sits at -60 (a) and -50 (b).
FeatureMatrix separable() {
  FeatureMatrix m{{"aa:00:00:00:00:01"}, {}, {}};
  for (int i = 0; i < 5; ++i) {
    m.values.push_back(-60);
    m.labels.push_back("a");
  }
  for (int i = 0; i < 5; ++i) {
    m.values.push_back(-50);
    m.labels.push_back("b");
  }
  return m;
}

TEST(Gini, Formula) {
  const std::vector<std::uint32_t> even{2, 2}, pure{4, 0}, three{1, 1, 1};
  EXPECT_DOUBLE_EQ(gini_impurity(even), 0.5);
  EXPECT_DOUBLE_EQ(gini_impurity(pure), 0.0);
  EXPECT_NEAR(gini_impurity(three), 2.0 / 3.0, 1e-12);
}

TEST(Forest, SeparableDataIsLearned) {
  ForestConfig c;
  c.max_features = MaxFeatures::all();
  const auto model = train_forest(separable(), c);
  EXPECT_EQ(evaluate(model, separable()), 1.0);
  EXPECT_EQ(model.classes, (std::vector<std::string>{"a", "b"}));
}

TEST(Forest, ThreeTreeForestAnswersB) {
  ForestConfig c;
  c.n_estimators = 3;
  c.max_features = MaxFeatures::all();
  c.seed = 5;
  const auto model = train_forest(separable(), c);
  ASSERT_EQ(model.trees.size(), 3u);
  const std::vector<double> x{-50};
  EXPECT_EQ(predict(model, x), "b");
}

TEST(Forest, VoteTieGoesToSmallestLabel) {
  // Two single-leaf trees voting r2 and r1.
  ForestModel model;
  model.device_universe = {"aa:00:00:00:00:01"};
  model.classes = {"r1", "r2"};
  model.config.n_estimators = 2;
  model.trees = {DecisionTree{{TreeNode{-1, 0, -1, -1, 1, {0, 1}}}}, DecisionTree{{TreeNode{-1, 0, -1, -1, 0, {1, 0}}}}};
  const std::vector<double> x{-70};
  EXPECT_EQ(model.votes(x), (std::vector<std::uint32_t>{1, 1}));
  EXPECT_EQ(predict(model, x), "r1");
  model.trees.push_back(model.trees.front());
  EXPECT_EQ(predict(model, x), "r2");
}

TEST(Forest, TrainingIsDeterministic) {
  testing::Gen g(21);
  const auto m = testing::random_matrix(g, 80, 9, 4);
  ForestConfig c;
  c.n_estimators = 7;
  c.max_depth = 6;
  c.seed = 3;
  const auto a = train_forest(m, c);
  EXPECT_EQ(serialize_model(a), serialize_model(train_forest(m, c)));
  EXPECT_EQ(serialize_model(a), serialize_model(train_forest(m, c, 4)));
  c.seed = 4;
  EXPECT_NE(serialize_model(a), serialize_model(train_forest(m, c)));
}

TEST(Forest, DepthAndVoteLaws) {
  testing::Gen g(22);
  for (int trial = 0; trial < 20; ++trial) {
    const auto m = testing::random_matrix(g, 40, 5, 3);
    ForestConfig c;
    c.n_estimators = testing::uniform_int(g, 1, 6);
    c.max_depth = testing::uniform_int(g, 1, 5);
    c.seed = static_cast<std::uint64_t>(trial);
    const auto model = train_forest(m, c);
    ASSERT_EQ(model.trees.size(), static_cast<std::size_t>(c.n_estimators));
    for (const auto& t : model.trees) ASSERT_LE(t.depth(), c.max_depth);
    for (std::size_t r = 0; r < m.rows(); ++r) {
      const auto v = model.votes(m.row(r));
      std::uint32_t total = 0;
      for (auto x : v) total += x;
      ASSERT_EQ(total, static_cast<std::uint32_t>(c.n_estimators));
    }
  }
}

TEST(Forest, SingleTreeMatchesExhaustiveReference) {
  testing::Gen g(23);
  for (int trial = 0; trial < 25; ++trial) {
    const auto m = testing::random_matrix(g, testing::uniform_int(g, 4, 40), testing::uniform_int(g, 1, 5), 3);
    ForestConfig c;
    c.n_estimators = 1;
    c.bootstrap = false;
    c.max_features = MaxFeatures::all();
    c.max_depth = testing::uniform_int(g, 1, 8);
    const auto model = train_forest(m, c);
    std::vector<std::vector<double>> rows;
    for (std::size_t r = 0; r < m.rows(); ++r) rows.emplace_back(m.row(r).begin(), m.row(r).end());
    const testing::ReferenceTree ref(rows, m.labels, c.max_depth);
    testing::Gen probe(trial);
    for (int q = 0; q < 50; ++q) {
      std::vector<double> x(m.cols());
      for (auto& v : x) v = testing::uniform_int(probe, -100, -30);
      ASSERT_EQ(predict(model, x), ref.predict(x)) << "trial " << trial;
    }
  }
}

TEST(Forest, Errors) {
  FeatureMatrix one{{"aa:00:00:00:00:01"}, {-50, -60}, {"a", "a"}};
  try {
    train_forest(one, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::SingleClass);
  }
  const auto model = train_forest(separable(), {});
  const std::vector<double> wrong{-50, -60};
  try {
    predict(model, wrong);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::DimensionMismatch);
  }
  ForestConfig bad;
  bad.n_estimators = 0;
  EXPECT_THROW(train_forest(separable(), bad), Error);
}

TEST(MaxFeatures, ParseAndResolve) {
  EXPECT_EQ(MaxFeatures::parse("sqrt").resolve(100), 10u);
  EXPECT_EQ(MaxFeatures::parse("sqrt").resolve(2), 1u);
  EXPECT_EQ(MaxFeatures::parse("all").resolve(7), 7u);
  EXPECT_EQ(MaxFeatures::parse("3").resolve(7), 3u);
  EXPECT_EQ(MaxFeatures::parse("3").to_string(), "3");
  EXPECT_THROW(MaxFeatures::parse("half"), Error);
}

TEST(ModelFile, RoundTrip) {
  testing::Gen g(24);
  const auto m = testing::random_matrix(g, 50, 6, 3);
  ForestConfig c;
  c.n_estimators = 4;
  c.max_features = MaxFeatures::fixed(2);
  c.seed = 9;
  const auto model = train_forest(m, c);
  const auto text = serialize_model(model);
  const auto back = deserialize_model(text);
  EXPECT_EQ(back, model);
  EXPECT_EQ(serialize_model(back), text);
  EXPECT_EQ(predict_all(back, m), predict_all(model, m));
}

TEST(ModelFile, Corruption) {
  try {
    deserialize_model("");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::CorruptModel);
  }
  const auto text = serialize_model(train_forest(separable(), {}));
  auto v2 = text;
  v2.replace(0, std::string("dataloc-forest 1").size(), "dataloc-forest 2");
  try {
    deserialize_model(v2);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::VersionMismatch);
  }
  EXPECT_THROW(deserialize_model(text.substr(0, text.size() / 2)), Error);
}

TEST(Predict, UniverseMismatch) {
  const auto model = train_forest(separable(), {});
  FeatureMatrix other{{"aa:00:00:00:00:02"}, {-50}, {"a"}};
  EXPECT_THROW(predict_all(model, other), Error);
}

}  // namespace
}  // namespace dataloc
