#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "mlfair/attributes.hpp"
#include "mlfair/embed.hpp"
#include "mlfair/error.hpp"
#include "mlfair/graph.hpp"

namespace mlfair {

/// Planted-partition generator with a sensitive attribute tied to the
/// blocks and labels tied to blocks with a group-dependent skew.
struct SyntheticSpec {
  std::string kind = "sbm";  // sbm | erdos (erdos uses p_in for every pair)
  int n = 1000;
  int blocks = 2;
  double p_in = 0.02;
  double p_out = 0.002;
  double p_label = -1.0;     // distinct blocks sharing a planted label; < 0 means p_out
  int groups = 2;
  double rho = 0.8;          // P(attribute copies block id mod groups)
  int classes = 2;
  double label_noise = 0.1;  // P(label is redrawn uniformly)
  double label_skew = 0.0;   // P(a group-0 node with label 0 is relabeled 1)
  // block: label = block mod classes. cross: label = (block / groups) mod
  // classes, so with blocks = groups * classes the label and group factors
  // of the block structure are independent.
  std::string label_rule = "block";
  std::uint64_t seed = 0;

  void validate() const {
    if (kind != "sbm" && kind != "erdos") throw InputError("synthetic kind must be sbm or erdos");
    if (label_rule != "block" && label_rule != "cross") throw InputError("label_rule must be block or cross");
    if (n < 2) throw InputError("synthetic graph needs n >= 2");
    if (blocks < 1 || groups < 1 || classes < 2) throw InputError("bad synthetic block/group/class counts");
    if (p_label > 1.0) throw InputError("synthetic probabilities must lie in [0, 1]");
    for (double p : {p_in, p_out, rho, label_noise, label_skew})
      if (!(p >= 0.0 && p <= 1.0)) throw InputError("synthetic probabilities must lie in [0, 1]");
  }
};

struct SyntheticGraph {
  Graph graph;
  AttributeTable attributes;  // single attribute column "group"
  std::vector<int> block;
  std::vector<int> group;
  std::vector<int> label;
};

namespace detail {

// Geometric skipping over the candidate pairs of one block pair.
template <typename Emit>
void sample_block_pair(std::int64_t size_a, std::int64_t size_b, bool same, double p,
                       std::mt19937_64& rng, Emit&& emit) {
  if (p <= 0.0) return;
  const std::int64_t total = same ? size_a * (size_a - 1) / 2 : size_a * size_b;
  if (total <= 0) return;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double log_q = p < 1.0 ? std::log1p(-p) : 0.0;
  std::int64_t k = -1;
  while (true) {
    if (p >= 1.0) {
      ++k;
    } else {
      const double r = unif(rng);
      k += 1 + static_cast<std::int64_t>(std::floor(std::log1p(-r) / log_q));
    }
    if (k >= total) break;
    if (same) {
      // Row i owns pairs (i, j), j < i, starting at i * (i - 1) / 2.
      auto i = static_cast<std::int64_t>((1.0 + std::sqrt(1.0 + 8.0 * static_cast<double>(k))) / 2.0);
      while (i * (i - 1) / 2 > k) --i;
      while ((i + 1) * i / 2 <= k) ++i;
      emit(i, k - i * (i - 1) / 2);
    } else {
      emit(k / size_b, k % size_b);
    }
  }
}

}  // namespace detail

inline SyntheticGraph generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(mix_seed(spec.seed, 0x5b11ULL));
  const int nb = spec.kind == "sbm" ? spec.blocks : 1;
  SyntheticGraph out;
  out.block.resize(static_cast<std::size_t>(spec.n));
  std::vector<std::vector<NodeId>> members(static_cast<std::size_t>(nb));
  for (int i = 0; i < spec.n; ++i) {
    const int b = static_cast<int>(static_cast<std::int64_t>(i) * nb / spec.n);
    out.block[static_cast<std::size_t>(i)] = b;
    members[static_cast<std::size_t>(b)].push_back(i);
  }

  auto planted = [&](int b) {
    return spec.label_rule == "cross" ? (b / spec.groups) % spec.classes : b % spec.classes;
  };
  const double p_label = spec.p_label < 0.0 ? spec.p_out : spec.p_label;
  std::vector<IndexedEdge> edges;
  for (int a = 0; a < nb; ++a) {
    for (int b = a; b < nb; ++b) {
      const auto& ma = members[static_cast<std::size_t>(a)];
      const auto& mb = members[static_cast<std::size_t>(b)];
      const double p = a == b ? spec.p_in : planted(a) == planted(b) ? p_label : spec.p_out;
      detail::sample_block_pair(static_cast<std::int64_t>(ma.size()), static_cast<std::int64_t>(mb.size()),
                                a == b, p, rng, [&](std::int64_t i, std::int64_t j) {
                                  edges.push_back({ma[static_cast<std::size_t>(i)],
                                                   mb[static_cast<std::size_t>(j)], 1.0});
                                });
    }
  }
  std::vector<std::string> names;
  for (int i = 0; i < spec.n; ++i) names.push_back(std::to_string(i));
  out.graph = Graph::from_triples(static_cast<std::size_t>(spec.n), edges, names);

  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::uniform_int_distribution<int> any_group(0, spec.groups - 1);
  std::uniform_int_distribution<int> any_class(0, spec.classes - 1);
  out.group.resize(static_cast<std::size_t>(spec.n));
  out.label.resize(static_cast<std::size_t>(spec.n));
  out.attributes.attribute_names = {"group"};
  for (int i = 0; i < spec.n; ++i) {
    const auto u = static_cast<std::size_t>(i);
    const int b = out.block[u];
    int s = unif(rng) < spec.rho ? b % spec.groups : any_group(rng);
    int y = unif(rng) < spec.label_noise ? any_class(rng) : planted(b);
    if (s == 0 && y == 0 && unif(rng) < spec.label_skew) y = 1;
    out.group[u] = s;
    out.label[u] = y;
    out.attributes.node_ids.push_back(names[u]);
    out.attributes.values.push_back({std::to_string(s)});
  }
  return out;
}

}  // namespace mlfair
