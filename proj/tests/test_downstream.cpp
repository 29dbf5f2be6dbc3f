#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>

#include "mlfair/downstream.hpp"
#include "test_util.hpp"

using namespace mlfair;

namespace {

// Gaussian blobs centred at +-3 on every axis, one per class.
Eigen::MatrixXd blobs(std::mt19937_64& rng, const std::vector<int>& y, int d) {
  std::normal_distribution<double> z(0.0, 0.5);
  Eigen::MatrixXd x(static_cast<Eigen::Index>(y.size()), d);
  for (std::size_t i = 0; i < y.size(); ++i)
    for (int j = 0; j < d; ++j) x(static_cast<Eigen::Index>(i), j) = (y[i] == (j % 3) ? 3.0 : -3.0) + z(rng);
  return x;
}

std::vector<int> random_labels(std::mt19937_64& rng, std::size_t n, int k) {
  std::uniform_int_distribution<int> pick(0, k - 1);
  std::vector<int> y(n);
  for (auto& v : y) v = pick(rng);
  return y;
}

// Two dense communities joined sparsely.
Graph two_communities(std::mt19937_64& rng, int half, double p_in, double p_out) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<std::pair<int, int>> pairs;
  for (int a = 0; a < 2 * half; ++a)
    for (int b = a + 1; b < 2 * half; ++b)
      if (u(rng) < ((a < half) == (b < half) ? p_in : p_out)) pairs.emplace_back(a, b);
  return testutil::unit_graph(2 * half, pairs);
}

}  // namespace

TEST(Classifier, SeparatesBlobs) {
  std::mt19937_64 rng(1);
  auto y = random_labels(rng, 600, 3);
  auto x = blobs(rng, y, 6);
  auto clf = train_linear_classifier(x, y);
  EXPECT_GE(accuracy(clf.predict(x), y), 0.99);
  auto proba = clf.predict_proba(x);
  for (Eigen::Index i = 0; i < proba.rows(); ++i) EXPECT_NEAR(proba.row(i).sum(), 1.0, 1e-12);
}

TEST(Classifier, ZeroEpochsIsUniform) {
  std::mt19937_64 rng(2);
  auto y = random_labels(rng, 50, 4);
  auto x = blobs(rng, y, 3);
  ClassifierConfig cfg;
  cfg.epochs = 0;
  auto proba = train_linear_classifier(x, y, cfg).predict_proba(x);
  EXPECT_LT((proba.array() - 0.25).abs().maxCoeff(), 1e-12);
}

TEST(Classifier, LossIsMonotone) {
  std::mt19937_64 rng(3);
  auto y = random_labels(rng, 200, 2);
  Eigen::MatrixXd x = Eigen::MatrixXd::Random(200, 5);
  ClassifierConfig cfg;
  cfg.learning_rate = 5.0;  // step halving must keep the objective from rising
  auto clf = train_linear_classifier(x, y, cfg);
  ASSERT_GT(clf.loss_trace.size(), 2u);
  for (std::size_t k = 1; k < clf.loss_trace.size(); ++k) EXPECT_LE(clf.loss_trace[k], clf.loss_trace[k - 1]);
}

TEST(Classifier, ConstantFeaturesAreHandled) {
  std::vector<int> y{0, 1, 0, 1};
  Eigen::MatrixXd x = Eigen::MatrixXd::Ones(4, 2);
  auto clf = train_linear_classifier(x, y);
  EXPECT_TRUE(clf.predict_proba(x).allFinite());
}

TEST(StratifiedSplit, DisjointAndStratified) {
  std::mt19937_64 rng(4);
  auto y = random_labels(rng, 400, 3);
  auto s = stratified_split(y, {}, 5);
  std::set<std::size_t> all;
  for (const auto* part : {&s.train, &s.val, &s.test})
    for (auto i : *part) EXPECT_TRUE(all.insert(i).second);
  EXPECT_EQ(all.size(), 400u);
  for (int c = 0; c < 3; ++c) {
    const auto m = static_cast<double>(std::count(y.begin(), y.end(), c));
    const auto t = static_cast<double>(std::count_if(s.train.begin(), s.train.end(), [&](auto i) { return y[i] == c; }));
    EXPECT_NEAR(t / m, 0.5, 0.02);
  }
  auto again = stratified_split(y, {}, 5);
  EXPECT_EQ(again.test, s.test);
}

TEST(NcEvaluate, LabelEncodingEmbeddingIsPerfectAndFair) {
  std::mt19937_64 rng(5);
  const std::size_t n = 300;
  auto y = random_labels(rng, n, 2);
  std::vector<int> grp;
  testutil::random_groups(rng, n, 2, &grp);
  Eigen::MatrixXd e = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), 2);
  for (std::size_t i = 0; i < n; ++i) e(static_cast<Eigen::Index>(i), y[i]) = 1.0;
  auto res = nc_evaluate(e, y, {{"g", grp}});
  EXPECT_EQ(res.report.get("f1"), 1.0);
  EXPECT_EQ(res.report.get("accuracy"), 1.0);
  EXPECT_EQ(res.report.get("delta_eo"), 0.0);
}

TEST(NcEvaluate, ConstantEmbeddingHasZeroParityGap) {
  std::mt19937_64 rng(6);
  const std::size_t n = 200;
  auto y = random_labels(rng, n, 3);
  std::vector<int> grp;
  testutil::random_groups(rng, n, 3, &grp);
  Eigen::MatrixXd e = Eigen::MatrixXd::Ones(static_cast<Eigen::Index>(n), 4);
  auto res = nc_evaluate(e, y, {{"g", grp}, {"h", grp}});
  EXPECT_EQ(res.report.get("delta_dp"), 0.0);
  EXPECT_TRUE(res.report.has("micro_f1"));
  EXPECT_TRUE(res.report.has("delta_dp_h"));
}

TEST(NcEvaluate, Errors) {
  Eigen::MatrixXd e = Eigen::MatrixXd::Ones(4, 2);
  EXPECT_THROW(nc_evaluate(e, {0, 1, 0}, {{"g", {0, 1, 0}}}), InputError);
  EXPECT_THROW(nc_evaluate(e, {0, 1, 0, 1}, {}), InputError);
  EXPECT_THROW(nc_evaluate(e, {0, 1, 0, 1}, {{"g", {0, 1}}}), InputError);
}

TEST(LpSplit, Properties) {
  std::mt19937_64 rng(7);
  auto g = testutil::random_graph(rng, 80, 0.1, true);
  auto s = lp_split(g, 0.3, 11);
  const auto m = g.edges(false).size();
  EXPECT_EQ(s.test_pos.size(), static_cast<std::size_t>(0.3 * static_cast<double>(m)));
  EXPECT_EQ(s.test_neg.size(), s.test_pos.size());
  EXPECT_EQ(s.train_neg.size(), m - s.test_pos.size());
  EXPECT_EQ(s.train_graph.edges(false).size(), m - s.test_pos.size());
  // Held-out edges never leak into the training graph.
  for (auto [u, v] : s.test_pos) {
    EXPECT_TRUE(g.has_edge(u, v));
    EXPECT_FALSE(s.train_graph.has_edge(u, v));
  }
  std::set<NodePair> neg;
  for (const auto* part : {&s.test_neg, &s.train_neg})
    for (auto [u, v] : *part) {
      EXPECT_NE(u, v);
      EXPECT_FALSE(g.has_edge(u, v));
      EXPECT_TRUE(neg.insert({std::min(u, v), std::max(u, v)}).second);
    }
  // Self-loops stay in the training graph.
  for (NodeId u = 0; u < 80; ++u) EXPECT_EQ(s.train_graph.self_loop(u), g.self_loop(u));

  auto again = lp_split(g, 0.3, 11);
  EXPECT_EQ(again.test_pos, s.test_pos);
  EXPECT_EQ(again.train_neg, s.train_neg);
}

TEST(LpSplit, EdgeCases) {
  std::mt19937_64 rng(8);
  auto g = testutil::random_graph(rng, 40, 0.2);
  auto zero = lp_split(g, 0.0, 1);
  EXPECT_TRUE(zero.test_pos.empty());
  EXPECT_EQ(zero.train_graph.num_edges(), g.num_edges());

  std::vector<std::pair<int, int>> pairs;
  for (int u = 0; u < 6; ++u)
    for (int v = u + 1; v < 6; ++v) pairs.emplace_back(u, v);
  EXPECT_THROW(lp_split(testutil::unit_graph(6, pairs), 0.2, 1), InputError);
  EXPECT_THROW(lp_split(g, 1.2, 1), InputError);
}

TEST(Hadamard, Features) {
  Eigen::MatrixXd e(3, 2);
  e << 1, 2, 3, 4, 5, 6;
  auto x = hadamard_features(e, {{0, 2}, {1, 1}});
  Eigen::MatrixXd want(2, 2);
  want << 5, 12, 9, 16;
  EXPECT_EQ(x, want);
  EXPECT_THROW(hadamard_features(e, {{0, 3}}), InputError);
}

TEST(LpEvaluate, CommunityEmbeddingBeatsChance) {
  std::mt19937_64 rng(9);
  auto g = two_communities(rng, 60, 0.2, 0.01);
  auto split = lp_split(g, 0.2, 3);
  // Community indicator plus noise: same-community pairs score high.
  std::normal_distribution<double> z(0.0, 0.1);
  Eigen::MatrixXd e(120, 2);
  for (int u = 0; u < 120; ++u) {
    e(u, 0) = (u < 60 ? 1.0 : -1.0) + z(rng);
    e(u, 1) = z(rng);
  }
  std::vector<int> grp(120);
  for (int u = 0; u < 120; ++u) grp[static_cast<std::size_t>(u)] = u % 2;
  auto res = lp_evaluate(e, split, {{"g", grp}});
  // Half the random negatives fall inside a community, so the ceiling is the
  // AUROC of the same-community indicator itself.
  std::vector<double> ideal;
  std::vector<int> truth;
  for (const auto* part : {&split.test_pos, &split.test_neg})
    for (auto [u, v] : *part) {
      ideal.push_back((u < 60) == (v < 60) ? 1.0 : 0.0);
      truth.push_back(part == &split.test_pos ? 1 : 0);
    }
  const double ceiling = auroc(ideal, truth);
  ASSERT_GT(ceiling, 0.6);
  EXPECT_GT(res.report.get("auroc"), ceiling - 0.03);
  EXPECT_GE(res.report.get("ap"), 0.0);
  EXPECT_LE(res.report.get("ap"), 1.0);
  EXPECT_EQ(res.test_scores.size(), split.test_pos.size() + split.test_neg.size());
  EXPECT_TRUE(res.report.has("delta_dp_lp"));

  // Random embedding sits near chance.
  std::normal_distribution<double> w(0.0, 1.0);
  Eigen::MatrixXd noise(120, 2);
  for (Eigen::Index i = 0; i < noise.size(); ++i) noise.data()[i] = w(rng);
  EXPECT_LT(lp_evaluate(noise, split, {{"g", grp}}).report.get("auroc"), 0.7);
}

TEST(Summarize, MeanAndPopulationStd) {
  EvalReport a, b;
  a.set("x", 1.0);
  a.set("y", 0.0);
  b.set("x", 3.0);
  b.set("y", 0.0);
  auto s = summarize({a, b});
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s[0].metric, "x");
  EXPECT_EQ(s[0].mean, 2.0);
  EXPECT_EQ(s[0].std, 1.0);
  EXPECT_EQ(s[1].std, 0.0);
  EXPECT_TRUE(summarize({}).empty());
  EXPECT_THROW(a.get("z"), InputError);
}
