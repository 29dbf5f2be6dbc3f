#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "mlfair/attributes.hpp"
#include "mlfair/error.hpp"
#include "mlfair/graph.hpp"

namespace mlfair {

/// Partition of the nodes into singletons and edge-connected pairs.
struct Matching {
  std::vector<std::vector<NodeId>> groups;
};

/// Fine node -> supernode, supernodes numbered in group-creation order.
struct MergeMap {
  std::vector<NodeId> parent;
  std::size_t num_coarse = 0;
};

struct Level {
  Graph graph;
  AttributeMatrix attrs;
};

struct Hierarchy {
  std::vector<Level> levels;     // levels[0] is the input graph
  std::vector<MergeMap> merges;  // merges[i] maps level i onto level i + 1
  double lambda_c = 0.0;

  int depth() const { return static_cast<int>(merges.size()); }
  const Level& coarsest() const { return levels.back(); }
};

struct CoarseLevel {
  Graph graph;
  AttributeMatrix attrs;
  MergeMap merge;
};

/// Normalized heavy-edge weight A[u][v] / sqrt(deg(u) deg(v)).
inline double nhem_weight(const Graph& g, NodeId u, NodeId v) {
  const double a = g.weight(u, v);
  if (a <= 0.0) throw InputError("nhem_weight on absent edge");
  return a / std::sqrt(g.degree(u) * g.degree(v));
}

/// Greedy fairness-aware matching. Nodes are visited by increasing weighted
/// degree (ties by index); each unmatched node takes the unmatched neighbour
/// maximizing (1 - lambda_c) * nhem + lambda_c * divergence(u, v), ties to
/// the smaller index, or stays a singleton when none is left.
inline Matching match_nodes(const Graph& g, const AttributeMatrix& s, double lambda_c) {
  if (lambda_c < 0.0 || lambda_c > 1.0) throw InputError("lambda_c must lie in [0, 1]");
  const auto n = g.num_nodes();
  if (static_cast<std::size_t>(s.rows()) != n) throw InputError("attribute rows do not match graph");

  std::vector<NodeId> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](NodeId a, NodeId b) { return g.degree(a) < g.degree(b); });

  std::vector<char> matched(n, 0);
  Matching m;
  m.groups.reserve(n);
  for (NodeId u : order) {
    if (matched[u]) continue;
    matched[u] = 1;
    NodeId best = -1;
    double best_score = -std::numeric_limits<double>::infinity();
    auto nb = g.neighbors(u);
    for (NodeId v : nb) {
      if (v == u || matched[v]) continue;
      double score = (1.0 - lambda_c) * nhem_weight(g, u, v);
      if (lambda_c > 0.0) score += lambda_c * divergence(s.row(u).transpose(), s.row(v).transpose());
      if (score > best_score) {
        best_score = score;
        best = v;
      }
    }
    if (best < 0) {
      m.groups.push_back({u});
    } else {
      matched[best] = 1;
      m.groups.push_back({u, best});
    }
  }
  return m;
}

/// Collapses every matched group into a supernode. Edge weights between
/// supernodes are summed; edges internal to a group and inherited self-loops
/// become the supernode's self-loop, which keeps total degree unchanged.
inline CoarseLevel build_coarse_graph(const Graph& g, const AttributeMatrix& s, const Matching& m) {
  const auto n = g.num_nodes();
  MergeMap mm;
  mm.parent.assign(n, -1);
  mm.num_coarse = m.groups.size();
  for (std::size_t p = 0; p < m.groups.size(); ++p) {
    const auto& grp = m.groups[p];
    if (grp.empty() || grp.size() > 2) throw InputError("invalid matching: group size");
    for (NodeId u : grp) {
      if (u < 0 || static_cast<std::size_t>(u) >= n || mm.parent[u] != -1)
        throw InputError("invalid matching: not a partition");
      mm.parent[u] = static_cast<NodeId>(p);
    }
    if (grp.size() == 2 && (grp[0] == grp[1] || !g.has_edge(grp[0], grp[1])))
      throw InputError("invalid matching: pair is not an edge");
  }
  for (auto p : mm.parent)
    if (p < 0) throw InputError("invalid matching: node left out");

  std::vector<IndexedEdge> triples;
  triples.reserve(g.num_edges() + n);
  for (const auto& e : g.edges()) triples.push_back({mm.parent[e.u], mm.parent[e.v], e.weight});

  Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(mm.num_coarse), s.cols());
  for (std::size_t u = 0; u < n; ++u) counts.row(mm.parent[u]) += s.row(static_cast<Eigen::Index>(u));

  return {Graph::from_triples(mm.num_coarse, triples), AttributeMatrix(std::move(counts), s.blocks()),
          std::move(mm)};
}

inline Hierarchy coarsen_hierarchy(const Graph& g0, const AttributeMatrix& s0, int levels,
                                   double lambda_c) {
  if (levels < 0) throw InputError("coarsen level must be >= 0");
  Hierarchy h;
  h.lambda_c = lambda_c;
  h.levels.push_back({g0, s0});
  for (int i = 0; i < levels; ++i) {
    const auto& cur = h.levels.back();
    auto matching = match_nodes(cur.graph, cur.attrs, lambda_c);
    auto next = build_coarse_graph(cur.graph, cur.attrs, matching);
    h.merges.push_back(std::move(next.merge));
    h.levels.push_back({std::move(next.graph), std::move(next.attrs)});
  }
  return h;
}

}  // namespace mlfair
