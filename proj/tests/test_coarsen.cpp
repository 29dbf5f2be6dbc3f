#include <gtest/gtest.h>

#include <random>

#include "mlfair/coarsen.hpp"
#include "test_util.hpp"

using namespace mlfair;
using testutil::groups_from;
using testutil::unit_graph;

namespace {

std::vector<std::vector<NodeId>> sorted_groups(Matching m) {
  for (auto& g : m.groups) std::sort(g.begin(), g.end());
  std::sort(m.groups.begin(), m.groups.end());
  return m.groups;
}

AttributeMatrix uniform_attrs(std::size_t n) { return groups_from(std::vector<int>(n, 0), 1); }

}  // namespace

TEST(NhemWeight, Examples) {
  auto edge = unit_graph(2, {{0, 1}});
  EXPECT_DOUBLE_EQ(nhem_weight(edge, 0, 1), 1.0);
  auto tri = unit_graph(3, {{0, 1}, {1, 2}, {0, 2}});
  for (auto [u, v] : {std::pair{0, 1}, {1, 2}, {0, 2}}) EXPECT_DOUBLE_EQ(nhem_weight(tri, u, v), 0.5);
  auto star = unit_graph(5, {{0, 1}, {0, 2}, {0, 3}, {0, 4}});
  EXPECT_DOUBLE_EQ(nhem_weight(star, 0, 3), 1.0 / std::sqrt(4.0 * 1.0));
  EXPECT_THROW(nhem_weight(star, 1, 2), InputError);
}

TEST(MatchNodes, NoEdgesGivesSingletons) {
  auto g = unit_graph(4, {});
  auto m = match_nodes(g, uniform_attrs(4), 0.5);
  EXPECT_EQ(m.groups.size(), 4u);
  for (const auto& grp : m.groups) EXPECT_EQ(grp.size(), 1u);
}

TEST(MatchNodes, PathHandTrace) {
  // a-b-c-d: endpoints have degree 1 and are visited first.
  auto g = unit_graph(4, {{0, 1}, {1, 2}, {2, 3}});
  auto m = match_nodes(g, uniform_attrs(4), 0.0);
  EXPECT_EQ(m.groups, (std::vector<std::vector<NodeId>>{{0, 1}, {3, 2}}));
}

TEST(MatchNodes, FairnessTermOnlyCandidate) {
  auto g = unit_graph(2, {{0, 1}});
  auto m = match_nodes(g, groups_from({0, 1}, 2), 1.0);
  ASSERT_EQ(m.groups.size(), 1u);
  EXPECT_EQ(sorted_groups(m)[0], (std::vector<NodeId>{0, 1}));
}

TEST(MatchNodes, ArgmaxTiesGoToSmallestIndex) {
  // Star: centre 0 is visited last; leaf 1 has only the centre.
  auto g = unit_graph(4, {{0, 1}, {0, 2}, {0, 3}});
  auto m = match_nodes(g, uniform_attrs(4), 0.0);
  EXPECT_EQ(m.groups[0], (std::vector<NodeId>{1, 0}));
  // Triangle: node 0 picks between 1 and 2 with equal scores.
  auto tri = unit_graph(3, {{0, 1}, {1, 2}, {0, 2}});
  EXPECT_EQ(match_nodes(tri, uniform_attrs(3), 0.3).groups[0], (std::vector<NodeId>{0, 1}));
}

TEST(MatchNodes, UsesDivergenceOrientedFromMatchingNode) {
  // Node 0 (degree 2, lowest index) is visited first with candidates 1 and 2.
  // Forward: phi(s0, s2) = 1 > phi(s0, s1). Reversed: phi(s1, s0) = 1 > phi(s2, s0).
  Eigen::MatrixXd c(5, 3);
  c << 1, 1, 0,  //
      1, 1, 1,   //
      1, 0, 0,   //
      1, 0, 0,   //
      1, 0, 0;
  AttributeMatrix s(c, {{"g", {"a", "b", "c"}, 0}});
  auto phi = [&](int a, int b) { return divergence(s.row(a).transpose(), s.row(b).transpose()); };
  ASSERT_EQ(phi(0, 2), 1.0);
  ASSERT_LT(phi(0, 1), 1.0);
  ASSERT_EQ(phi(1, 0), 1.0);
  ASSERT_LT(phi(2, 0), 1.0);
  auto g = unit_graph(5, {{0, 1}, {0, 2}, {1, 3}, {1, 4}, {2, 3}, {2, 4}});
  EXPECT_EQ(match_nodes(g, s, 1.0).groups[0], (std::vector<NodeId>{0, 2}));
}

TEST(MatchNodes, ZeroLambdaIgnoresAttributes) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 30; ++trial) {
    auto g = testutil::random_graph(rng, 60, 0.08);
    auto a = testutil::random_groups(rng, g.num_nodes(), 3);
    auto b = testutil::random_groups(rng, g.num_nodes(), 2);
    EXPECT_EQ(match_nodes(g, a, 0.0).groups, match_nodes(g, b, 0.0).groups);
    EXPECT_EQ(match_nodes(g, a, 0.0).groups, match_nodes(g, uniform_attrs(g.num_nodes()), 0.7).groups);
  }
}

TEST(MatchNodes, FullLambdaPrefersInterGroupNeighbours) {
  std::mt19937_64 rng(22);
  for (int trial = 0; trial < 30; ++trial) {
    auto g = testutil::random_graph(rng, 80, 0.06);
    std::vector<int> gs;
    auto s = testutil::random_groups(rng, g.num_nodes(), 2, &gs);
    auto m = match_nodes(g, s, 1.0);
    // Replay the greedy order to know what was still unmatched at each step.
    std::vector<char> matched(g.num_nodes(), 0);
    for (const auto& grp : m.groups) {
      const NodeId u = grp[0];
      bool had_inter = false;
      for (NodeId v : g.neighbors(u))
        if (v != u && !matched[v] && gs[v] != gs[u]) had_inter = true;
      if (grp.size() == 2 && had_inter) {
        EXPECT_NE(gs[grp[0]], gs[grp[1]]);
      }
      for (NodeId x : grp) matched[x] = 1;
    }
  }
}

TEST(MatchNodes, IsAValidMatching) {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 30; ++trial) {
    auto g = testutil::random_graph(rng, 70, 0.05, true);
    auto m = match_nodes(g, testutil::random_groups(rng, g.num_nodes(), 3), 0.5);
    std::vector<int> seen(g.num_nodes(), 0);
    for (const auto& grp : m.groups) {
      ASSERT_TRUE(grp.size() == 1 || grp.size() == 2);
      for (NodeId u : grp) ++seen[u];
      if (grp.size() == 2) {
        EXPECT_NE(grp[0], grp[1]);
        EXPECT_TRUE(g.has_edge(grp[0], grp[1]));
      }
    }
    for (int c : seen) EXPECT_EQ(c, 1);
    EXPECT_NO_THROW(build_coarse_graph(g, testutil::random_groups(rng, g.num_nodes(), 2), m));
  }
}

TEST(BuildCoarseGraph, SingleEdgeCollapse) {
  auto g = unit_graph(2, {{0, 1}});
  auto cl = build_coarse_graph(g, groups_from({0, 1}, 2), Matching{{{0, 1}}});
  ASSERT_EQ(cl.graph.num_nodes(), 1u);
  EXPECT_DOUBLE_EQ(cl.graph.self_loop(0), 1.0);
  EXPECT_DOUBLE_EQ(cl.graph.degree(0), 2.0);
  EXPECT_DOUBLE_EQ(cl.graph.total_degree(), g.total_degree());
  EXPECT_EQ(cl.attrs.counts(), (Eigen::MatrixXd(1, 2) << 1, 1).finished());
}

TEST(BuildCoarseGraph, IdentityMatching) {
  std::mt19937_64 rng(24);
  auto g = testutil::random_graph(rng, 25, 0.2, true);
  auto s = testutil::random_groups(rng, g.num_nodes(), 3);
  Matching m;
  for (NodeId u = 0; u < static_cast<NodeId>(g.num_nodes()); ++u) m.groups.push_back({u});
  auto cl = build_coarse_graph(g, s, m);
  EXPECT_TRUE(testutil::dense_adjacency(cl.graph) == testutil::dense_adjacency(g));
  EXPECT_EQ(cl.attrs.counts(), s.counts());
}

TEST(BuildCoarseGraph, SquareCycle) {
  auto g = unit_graph(4, {{0, 1}, {1, 2}, {2, 3}, {3, 0}});
  auto cl = build_coarse_graph(g, uniform_attrs(4), Matching{{{0, 1}, {2, 3}}});
  ASSERT_EQ(cl.graph.num_nodes(), 2u);
  EXPECT_DOUBLE_EQ(cl.graph.weight(0, 1), 2.0);
  EXPECT_DOUBLE_EQ(cl.graph.self_loop(0), 1.0);
  EXPECT_DOUBLE_EQ(cl.graph.self_loop(1), 1.0);
  EXPECT_EQ(cl.merge.parent, (std::vector<NodeId>{0, 0, 1, 1}));
}

TEST(BuildCoarseGraph, RejectsInvalidMatchings) {
  auto g = unit_graph(3, {{0, 1}});
  auto s = uniform_attrs(3);
  EXPECT_THROW(build_coarse_graph(g, s, Matching{{{0, 2}, {1}}}), InputError);
  EXPECT_THROW(build_coarse_graph(g, s, Matching{{{0, 1}}}), InputError);
  EXPECT_THROW(build_coarse_graph(g, s, Matching{{{0, 1}, {1}, {2}}}), InputError);
  EXPECT_THROW(build_coarse_graph(g, s, Matching{{{0, 1, 2}}}), InputError);
}

TEST(CoarsenHierarchy, ZeroLevels) {
  auto g = unit_graph(3, {{0, 1}});
  auto h = coarsen_hierarchy(g, uniform_attrs(3), 0, 0.5);
  EXPECT_EQ(h.depth(), 0);
  ASSERT_EQ(h.levels.size(), 1u);
  EXPECT_EQ(h.coarsest().graph.num_nodes(), 3u);
}

TEST(CoarsenHierarchy, CompleteGraphHalves) {
  std::vector<std::pair<int, int>> pairs;
  for (int u = 0; u < 8; ++u)
    for (int v = u + 1; v < 8; ++v) pairs.emplace_back(u, v);
  auto h = coarsen_hierarchy(unit_graph(8, pairs), uniform_attrs(8), 2, 0.5);
  ASSERT_EQ(h.levels.size(), 3u);
  EXPECT_EQ(h.levels[1].graph.num_nodes(), 4u);
  EXPECT_EQ(h.levels[2].graph.num_nodes(), 2u);
}

TEST(CoarsenHierarchy, BoundsAndConservation) {
  std::mt19937_64 rng(25);
  for (int trial = 0; trial < 40; ++trial) {
    auto g = testutil::random_graph(rng, 20 + static_cast<int>(rng() % 200), 0.03, true);
    auto s = testutil::random_groups(rng, g.num_nodes(), 3);
    const double lambda = static_cast<double>(rng() % 5) / 4.0;
    auto h = coarsen_hierarchy(g, s, 4, lambda);
    const Eigen::VectorXd col0 = s.counts().colwise().sum().transpose();
    for (int i = 0; i < h.depth(); ++i) {
      const auto& fine = h.levels[static_cast<std::size_t>(i)];
      const auto& coarse = h.levels[static_cast<std::size_t>(i) + 1];
      EXPECT_LE(coarse.graph.num_nodes(), fine.graph.num_nodes());
      EXPECT_GE(2 * coarse.graph.num_nodes(), fine.graph.num_nodes());
      EXPECT_LE(coarse.graph.num_edges(), fine.graph.num_edges());
      EXPECT_NEAR(coarse.graph.total_degree(), g.total_degree(), 1e-9);
      const Eigen::VectorXd cols = coarse.attrs.counts().colwise().sum().transpose();
      EXPECT_LT((cols - col0).cwiseAbs().maxCoeff(), 1e-12);
      for (Eigen::Index u = 0; u < coarse.attrs.rows(); ++u) {
        const double mass = coarse.attrs.row(u).sum();
        EXPECT_GE(mass, 1.0);
        // One attribute: the block mass is the number of merged originals.
        EXPECT_EQ(mass, std::round(mass));
      }
    }
  }
}
