#pragma once

#include <Eigen/Sparse>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <istream>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "mlfair/error.hpp"

namespace mlfair {

using NodeId = std::int32_t;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

struct NamedEdge {
  std::string u;
  std::string v;
  double weight = 1.0;
};

struct IndexedEdge {
  NodeId u = 0;
  NodeId v = 0;
  double weight = 1.0;
};

namespace detail {

inline std::string format_double(double x) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

inline std::optional<double> parse_double(std::string_view s) {
  double x = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), x);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) return std::nullopt;
  return x;
}

inline std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

}  // namespace detail

/// Immutable weighted undirected graph in compressed sparse row form.
///
/// Self-loops are stored once as the entry (u, u) and contribute twice to the
/// weighted degree, so the degree of a supernode always equals the summed
/// degrees of the nodes collapsed into it.
class Graph {
 public:
  Graph() = default;

  /// Builds from dense-index triples. Each triple (u, v, w) adds w to both
  /// A[u][v] and A[v][u] (once when u == v); duplicates accumulate.
  static Graph from_triples(std::size_t n, std::span<const IndexedEdge> triples,
                            std::vector<std::string> names = {}) {
    struct Entry {
      NodeId u, v;
      double w;
    };
    std::vector<Entry> entries;
    entries.reserve(triples.size() * 2);
    for (const auto& e : triples) {
      if (e.u < 0 || e.v < 0 || static_cast<std::size_t>(e.u) >= n ||
          static_cast<std::size_t>(e.v) >= n)
        throw InputError("edge endpoint out of range");
      if (!(e.weight > 0.0) || !std::isfinite(e.weight))
        throw InputError("non-positive weight on edge (" + std::to_string(e.u) + ", " +
                         std::to_string(e.v) + ")");
      entries.push_back({e.u, e.v, e.weight});
      if (e.u != e.v) entries.push_back({e.v, e.u, e.weight});
    }
    std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
      return a.u != b.u ? a.u < b.u : a.v < b.v;
    });

    Graph g;
    g.offsets_.assign(n + 1, 0);
    for (std::size_t i = 0; i < entries.size();) {
      std::size_t j = i;
      double w = 0.0;
      while (j < entries.size() && entries[j].u == entries[i].u && entries[j].v == entries[i].v)
        w += entries[j++].w;
      g.targets_.push_back(entries[i].v);
      g.weights_.push_back(w);
      ++g.offsets_[static_cast<std::size_t>(entries[i].u) + 1];
      i = j;
    }
    std::partial_sum(g.offsets_.begin(), g.offsets_.end(), g.offsets_.begin());

    g.degree_.assign(n, 0.0);
    g.self_loop_.assign(n, 0.0);
    for (std::size_t u = 0; u < n; ++u) {
      double d = 0.0;
      for (auto k = g.offsets_[u]; k < g.offsets_[u + 1]; ++k) {
        d += g.weights_[k];
        if (static_cast<std::size_t>(g.targets_[k]) == u) {
          d += g.weights_[k];
          g.self_loop_[u] = g.weights_[k];
        } else if (static_cast<std::size_t>(g.targets_[k]) > u) {
          ++g.num_edges_;
        }
      }
      g.degree_[u] = d;
    }

    if (names.empty()) {
      names.reserve(n);
      for (std::size_t i = 0; i < n; ++i) names.push_back(std::to_string(i));
    }
    if (names.size() != n) throw InputError("node name table size mismatch");
    g.names_ = std::move(names);
    g.index_.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      if (!g.index_.emplace(g.names_[i], static_cast<NodeId>(i)).second)
        throw InputError("duplicate node name '" + g.names_[i] + "'");
    }
    return g;
  }

  std::size_t num_nodes() const { return degree_.size(); }

  /// Unordered edges, self-loops excluded.
  std::size_t num_edges() const { return num_edges_; }

  std::span<const NodeId> neighbors(NodeId u) const {
    return {targets_.data() + offsets_[u], targets_.data() + offsets_[u + 1]};
  }
  std::span<const double> neighbor_weights(NodeId u) const {
    return {weights_.data() + offsets_[u], weights_.data() + offsets_[u + 1]};
  }

  /// A[u][v], zero when absent.
  double weight(NodeId u, NodeId v) const {
    auto nb = neighbors(u);
    auto it = std::lower_bound(nb.begin(), nb.end(), v);
    if (it == nb.end() || *it != v) return 0.0;
    return weights_[offsets_[u] + static_cast<std::size_t>(it - nb.begin())];
  }

  bool has_edge(NodeId u, NodeId v) const { return weight(u, v) > 0.0; }
  double self_loop(NodeId u) const { return self_loop_[u]; }
  double degree(NodeId u) const { return degree_[u]; }
  std::span<const double> degrees() const { return degree_; }

  double total_degree() const {
    double s = 0.0;
    for (double d : degree_) s += d;
    return s;
  }

  const std::vector<std::string>& names() const { return names_; }
  const std::string& name(NodeId u) const { return names_[u]; }

  std::optional<NodeId> index_of(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  /// Every stored undirected edge once, u <= v, in row order.
  std::vector<IndexedEdge> edges(bool include_self_loops = true) const {
    std::vector<IndexedEdge> out;
    out.reserve(num_edges_);
    for (std::size_t u = 0; u < num_nodes(); ++u) {
      for (auto k = offsets_[u]; k < offsets_[u + 1]; ++k) {
        auto v = targets_[k];
        if (static_cast<std::size_t>(v) < u) continue;
        if (static_cast<std::size_t>(v) == u && !include_self_loops) continue;
        out.push_back({static_cast<NodeId>(u), v, weights_[k]});
      }
    }
    return out;
  }

 private:
  std::vector<std::size_t> offsets_{0};
  std::vector<NodeId> targets_;
  std::vector<double> weights_;
  std::vector<double> degree_;
  std::vector<double> self_loop_;
  std::size_t num_edges_ = 0;
  std::vector<std::string> names_;
  std::unordered_map<std::string, NodeId> index_;
};

/// Maps arbitrary string ids to dense indices in first-appearance order.
inline Graph build_graph(std::span<const NamedEdge> edges,
                         std::span<const std::string> isolated = {}) {
  std::vector<std::string> names;
  std::unordered_map<std::string, NodeId> index;
  auto intern = [&](const std::string& id) {
    if (id.empty()) throw InputError("empty node id");
    auto [it, inserted] = index.emplace(id, static_cast<NodeId>(names.size()));
    if (inserted) names.push_back(id);
    return it->second;
  };
  std::vector<IndexedEdge> triples;
  triples.reserve(edges.size());
  for (const auto& e : edges) {
    NodeId u = intern(e.u);
    NodeId v = intern(e.v);
    triples.push_back({u, v, e.weight});
  }
  for (const auto& id : isolated) intern(id);
  const auto n = names.size();
  return Graph::from_triples(n, triples, std::move(names));
}

/// D^{-1/2} A D^{-1/2}, with A replaced by A + I when add_self_loops is set.
/// D holds plain row sums here (a stored self-loop counts once).
inline SparseMatrix normalized_adjacency(const Graph& g, bool add_self_loops) {
  const auto n = g.num_nodes();
  std::vector<double> row_sum(n, 0.0);
  for (std::size_t u = 0; u < n; ++u) {
    for (double w : g.neighbor_weights(static_cast<NodeId>(u))) row_sum[u] += w;
    if (add_self_loops) row_sum[u] += 1.0;
    if (row_sum[u] <= 0.0) throw InputError("isolated node " + g.name(static_cast<NodeId>(u)));
  }
  std::vector<Eigen::Triplet<double>> trips;
  for (std::size_t u = 0; u < n; ++u) {
    const auto uid = static_cast<NodeId>(u);
    auto nb = g.neighbors(uid);
    auto ws = g.neighbor_weights(uid);
    bool diag_done = false;
    for (std::size_t k = 0; k < nb.size(); ++k) {
      double w = ws[k];
      if (static_cast<std::size_t>(nb[k]) == u && add_self_loops) {
        w += 1.0;
        diag_done = true;
      }
      trips.emplace_back(static_cast<int>(u), nb[k],
                         w / std::sqrt(row_sum[u] * row_sum[static_cast<std::size_t>(nb[k])]));
    }
    if (add_self_loops && !diag_done)
      trips.emplace_back(static_cast<int>(u), static_cast<int>(u), 1.0 / row_sum[u]);
  }
  SparseMatrix p(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  p.setFromTriplets(trips.begin(), trips.end());
  p.makeCompressed();
  return p;
}

/// Whitespace-separated `u v [w]` lines; `#` starts a comment line. A line
/// holding a single id declares a node without edges.
inline Graph read_edge_list(std::istream& in) {
  std::vector<NamedEdge> edges;
  std::vector<std::string> lone;
  std::string line;
  std::size_t lineno = 0;
  // Lone declarations must keep their position in the first-appearance order.
  std::vector<std::string> order;
  std::unordered_map<std::string, bool> seen;
  auto note = [&](std::string_view id) {
    std::string s(id);
    if (seen.emplace(s, true).second) order.push_back(std::move(s));
  };
  while (std::getline(in, line)) {
    ++lineno;
    auto tok = detail::split_ws(line);
    if (tok.empty() || tok[0].front() == '#') continue;
    if (tok.size() == 1) {
      note(tok[0]);
      continue;
    }
    if (tok.size() > 3)
      throw InputError("malformed edge at line " + std::to_string(lineno));
    double w = 1.0;
    if (tok.size() == 3) {
      auto parsed = detail::parse_double(tok[2]);
      if (!parsed) throw InputError("malformed weight at line " + std::to_string(lineno));
      w = *parsed;
    }
    if (!(w > 0.0))
      throw InputError("non-positive weight at line " + std::to_string(lineno));
    note(tok[0]);
    note(tok[1]);
    edges.push_back({std::string(tok[0]), std::string(tok[1]), w});
  }
  std::unordered_map<std::string, NodeId> index;
  for (std::size_t i = 0; i < order.size(); ++i) index.emplace(order[i], static_cast<NodeId>(i));
  std::vector<IndexedEdge> triples;
  triples.reserve(edges.size());
  for (const auto& e : edges) triples.push_back({index.at(e.u), index.at(e.v), e.weight});
  const auto n = order.size();
  return Graph::from_triples(n, triples, std::move(order));
}

/// Writes each undirected edge once. Lone-id lines are emitted only where
/// needed so that re-reading reproduces the same dense index order.
inline void write_edge_list(std::ostream& out, const Graph& g) {
  std::size_t next = 0;
  auto declare_upto = [&](std::size_t limit) {
    for (; next < limit; ++next) out << g.name(static_cast<NodeId>(next)) << '\n';
  };
  for (const auto& e : g.edges()) {
    const auto u = static_cast<std::size_t>(e.u);
    const auto v = static_cast<std::size_t>(e.v);
    if (v >= next) {
      if (u == v) {
        declare_upto(u);
      } else if (u >= next) {
        declare_upto(u);
        if (v != u + 1 || next != u) declare_upto(v);
      } else {
        declare_upto(v);
      }
    }
    out << g.name(e.u) << ' ' << g.name(e.v) << ' ' << detail::format_double(e.weight) << '\n';
    next = std::max(next, v + 1);
  }
  declare_upto(g.num_nodes());
}

}  // namespace mlfair
