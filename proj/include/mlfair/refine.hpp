#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "mlfair/attributes.hpp"
#include "mlfair/coarsen.hpp"
#include "mlfair/embed.hpp"
#include "mlfair/error.hpp"
#include "mlfair/graph.hpp"

namespace mlfair {

struct RefineHyper {
  double lambda_r = 0.5;
  double gamma = 0.5;
  int epochs = 200;
  double learning_rate = 1e-3;
  int layers = 2;
  std::uint64_t init_seed = 0;

  void validate() const {
    if (lambda_r < 0.0 || lambda_r > 1.0) throw InputError("lambda_r must lie in [0, 1]");
    if (gamma < 0.0 || gamma > 1.0) throw InputError("gamma must lie in [0, 1]");
    if (epochs < 0) throw InputError("epochs must be >= 0");
    if (layers < 1) throw InputError("refinement needs at least one layer");
    if (!(learning_rate > 0.0)) throw InputError("learning rate must be positive");
  }
};

/// Stack of graph-convolution layers; layer i maps (dim + attr_dim) -> dim.
struct RefinementModel {
  std::vector<Eigen::MatrixXd> layers;
  Eigen::Index dim = 0;
  Eigen::Index attr_dim = 0;

  std::size_t depth() const { return layers.size(); }
};

/// Glorot-uniform initialization, seeded.
inline RefinementModel init_model(Eigen::Index dim, Eigen::Index attr_dim, int layers,
                                  std::uint64_t seed) {
  if (dim < 1 || layers < 1) throw InputError("bad refinement model shape");
  RefinementModel m;
  m.dim = dim;
  m.attr_dim = attr_dim;
  std::mt19937_64 rng(mix_seed(seed, 0x61a55ULL));
  const double limit = std::sqrt(6.0 / static_cast<double>(dim + attr_dim + dim));
  std::uniform_real_distribution<double> u(-limit, limit);
  for (int i = 0; i < layers; ++i) {
    Eigen::MatrixXd theta(dim + attr_dim, dim);
    for (Eigen::Index c = 0; c < theta.cols(); ++c)
      for (Eigen::Index r = 0; r < theta.rows(); ++r) theta(r, c) = u(rng);
    m.layers.push_back(std::move(theta));
  }
  return m;
}

/// Undirected coarse edges whose endpoints' attributes diverge by at least
/// gamma in either direction. Each edge appears once with u < v.
struct FairEdgeMask {
  std::vector<std::pair<NodeId, NodeId>> edges;
  std::size_t num_nodes = 0;

  std::size_t edge_count() const { return edges.size(); }

  SparseMatrix matrix() const {
    std::vector<Eigen::Triplet<double>> t;
    for (auto [u, v] : edges) {
      t.emplace_back(u, v, 1.0);
      t.emplace_back(v, u, 1.0);
    }
    SparseMatrix m(static_cast<Eigen::Index>(num_nodes), static_cast<Eigen::Index>(num_nodes));
    m.setFromTriplets(t.begin(), t.end());
    return m;
  }
};

inline FairEdgeMask build_fair_edge_mask(const Graph& g, const AttributeMatrix& s, double gamma) {
  if (gamma < 0.0 || gamma > 1.0) throw InputError("gamma must lie in [0, 1]");
  FairEdgeMask mask;
  mask.num_nodes = g.num_nodes();
  for (const auto& e : g.edges(false)) {
    const auto su = s.row(e.u).transpose();
    const auto sv = s.row(e.v).transpose();
    if (std::max(divergence(su, sv), divergence(sv, su)) >= gamma) mask.edges.emplace_back(e.u, e.v);
  }
  return mask;
}

/// Copies every supernode's row to each of its children.
inline Eigen::MatrixXd project(const Eigen::MatrixXd& coarse, const MergeMap& mm) {
  if (static_cast<std::size_t>(coarse.rows()) != mm.num_coarse)
    throw InputError("coarse embedding rows do not match merge map");
  Eigen::MatrixXd fine(static_cast<Eigen::Index>(mm.parent.size()), coarse.cols());
  for (std::size_t u = 0; u < mm.parent.size(); ++u)
    fine.row(static_cast<Eigen::Index>(u)) = coarse.row(mm.parent[u]);
  return fine;
}

/// Everything backpropagation needs from a forward pass.
struct ForwardPass {
  std::vector<Eigen::MatrixXd> activations;  // H_0 .. H_l
  std::vector<Eigen::MatrixXd> propagated;   // P (H_{i-1} || S~), one per layer

  const Eigen::MatrixXd& output() const { return activations.back(); }
};

/// H_i = tanh(P (H_{i-1} || S~) Theta_i) with P the self-loop-augmented
/// symmetric normalized adjacency.
inline ForwardPass gcn_forward(const RefinementModel& model, const SparseMatrix& p,
                               const Eigen::MatrixXd& s_tilde, const Eigen::MatrixXd& h0) {
  const auto n = p.rows();
  if (h0.rows() != n || s_tilde.rows() != n) throw InputError("refinement input row mismatch");
  if (h0.cols() != model.dim || s_tilde.cols() != model.attr_dim)
    throw InputError("refinement input column mismatch");
  ForwardPass fp;
  fp.activations.push_back(h0);
  Eigen::MatrixXd x(n, model.dim + model.attr_dim);
  x.rightCols(model.attr_dim) = s_tilde;
  for (const auto& theta : model.layers) {
    x.leftCols(model.dim) = fp.activations.back();
    Eigen::MatrixXd px = p * x;
    fp.activations.push_back((px * theta).array().tanh().matrix());
    fp.propagated.push_back(std::move(px));
  }
  return fp;
}

inline ForwardPass gcn_forward(const RefinementModel& model, const Graph& g,
                               const Eigen::MatrixXd& s_tilde, const Eigen::MatrixXd& h0) {
  return gcn_forward(model, normalized_adjacency(g, true), s_tilde, h0);
}

struct Losses {
  double utility = 0.0;
  double fairness = 0.0;
  double total = 0.0;
};

/// L_u = ||H_0 - H_l||_F^2 / n, L_f = -mean over masked edges of
/// sigmoid(h_u . h_v) (zero for an empty mask), L = (1 - lr) L_u + lr L_f.
inline Losses losses(const Eigen::MatrixXd& h0, const Eigen::MatrixXd& hl, const FairEdgeMask& mask,
                     double lambda_r) {
  Losses l;
  const auto n = static_cast<double>(h0.rows());
  l.utility = n > 0 ? (h0 - hl).squaredNorm() / n : 0.0;
  if (mask.edge_count() > 0) {
    double acc = 0.0;
    for (auto [u, v] : mask.edges) acc += detail::sigmoid(hl.row(u).dot(hl.row(v)));
    l.fairness = -acc / static_cast<double>(mask.edge_count());
  }
  l.total = (1.0 - lambda_r) * l.utility + lambda_r * l.fairness;
  return l;
}

struct GradientResult {
  Losses loss;
  std::vector<Eigen::MatrixXd> grads;  // one per layer, shaped like Theta_i
};

/// Exact gradient of the combined loss with respect to every Theta_i.
/// P is treated as constant and symmetric.
inline GradientResult gradients(const RefinementModel& model, const SparseMatrix& p,
                                const Eigen::MatrixXd& s_tilde, const Eigen::MatrixXd& h0,
                                const FairEdgeMask& mask, double lambda_r) {
  auto fp = gcn_forward(model, p, s_tilde, h0);
  const auto& hl = fp.output();
  GradientResult res;
  res.loss = losses(h0, hl, mask, lambda_r);

  const double n = static_cast<double>(h0.rows());
  Eigen::MatrixXd g = ((1.0 - lambda_r) * 2.0 / n) * (hl - h0);
  if (mask.edge_count() > 0 && lambda_r > 0.0) {
    const double scale = -lambda_r / static_cast<double>(mask.edge_count());
    for (auto [u, v] : mask.edges) {
      const double sg = detail::sigmoid(hl.row(u).dot(hl.row(v)));
      const double c = scale * sg * (1.0 - sg);
      g.row(u) += c * hl.row(v);
      g.row(v) += c * hl.row(u);
    }
  }

  const auto l = model.depth();
  res.grads.resize(l);
  for (std::size_t i = l; i-- > 0;) {
    const auto& h = fp.activations[i + 1];
    Eigen::MatrixXd gz = g.array() * (1.0 - h.array().square());
    res.grads[i] = fp.propagated[i].transpose() * gz;
    if (i > 0) {
      Eigen::MatrixXd gx = p * (gz * model.layers[i].transpose());
      g = gx.leftCols(model.dim);
    }
  }
  return res;
}

struct TrainResult {
  RefinementModel model;
  std::vector<Losses> trace;  // trace[k] = loss after k optimizer steps
};

/// Trains on the coarsest level with H_0 = E_c using full-batch Adam.
inline TrainResult train_refiner(const Graph& gc, const AttributeMatrix& sc, const Eigen::MatrixXd& ec,
                                 const RefineHyper& hyper) {
  hyper.validate();
  if (static_cast<std::size_t>(ec.rows()) != gc.num_nodes())
    throw InputError("base embedding rows do not match the coarsest graph");
  const auto p = normalized_adjacency(gc, true);
  const Eigen::MatrixXd s_tilde = row_normalize(sc.counts());
  const auto mask = build_fair_edge_mask(gc, sc, hyper.gamma);

  TrainResult tr;
  tr.model = init_model(ec.cols(), sc.cols(), hyper.layers, hyper.init_seed);
  const double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  std::vector<Eigen::MatrixXd> m1, m2;
  for (const auto& t : tr.model.layers) {
    m1.push_back(Eigen::MatrixXd::Zero(t.rows(), t.cols()));
    m2.push_back(Eigen::MatrixXd::Zero(t.rows(), t.cols()));
  }
  auto check = [](const Losses& l, int epoch) {
    if (!std::isfinite(l.total))
      throw NumericError("refinement loss diverged at epoch " + std::to_string(epoch) +
                         " (L_u=" + std::to_string(l.utility) + ", L_f=" + std::to_string(l.fairness) + ")");
  };
  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    auto gr = gradients(tr.model, p, s_tilde, ec, mask, hyper.lambda_r);
    check(gr.loss, epoch);
    tr.trace.push_back(gr.loss);
    const double t = epoch + 1;
    const double c1 = 1.0 - std::pow(beta1, t);
    const double c2 = 1.0 - std::pow(beta2, t);
    for (std::size_t i = 0; i < tr.model.depth(); ++i) {
      m1[i] = beta1 * m1[i] + (1.0 - beta1) * gr.grads[i];
      m2[i] = beta2 * m2[i] + (1.0 - beta2) * gr.grads[i].cwiseProduct(gr.grads[i]);
      tr.model.layers[i].array() -=
          hyper.learning_rate * (m1[i].array() / c1) / ((m2[i].array() / c2).sqrt() + eps);
    }
  }
  auto fp = gcn_forward(tr.model, p, s_tilde, ec);
  tr.trace.push_back(losses(ec, fp.output(), mask, hyper.lambda_r));
  check(tr.trace.back(), hyper.epochs);
  return tr;
}

/// Applies the trained model level by level, coarsest to finest, projecting
/// and renormalizing rows at each step. With no coarsening the model is
/// applied once to the input graph.
inline Embedding refine_all(const Hierarchy& h, const Eigen::MatrixXd& ec, const RefinementModel& model) {
  if (static_cast<std::size_t>(ec.rows()) != h.coarsest().graph.num_nodes())
    throw InputError("base embedding rows do not match the coarsest graph");
  auto apply = [&](const Level& lvl, const Eigen::MatrixXd& h0) {
    const Eigen::MatrixXd s_tilde = row_normalize(lvl.attrs.counts());
    Embedding e;
    e.values = gcn_forward(model, lvl.graph, s_tilde, h0).output();
    return normalize_rows(std::move(e));
  };
  if (h.depth() == 0) return apply(h.levels[0], ec);
  Embedding cur;
  cur.values = ec;
  for (int i = h.depth() - 1; i >= 0; --i) {
    const auto idx = static_cast<std::size_t>(i);
    cur = apply(h.levels[idx], project(cur.values, h.merges[idx]));
  }
  return cur;
}

struct GroupPairBound {
  int p = 0;
  int q = 0;
  double lhs = 0.0;
  double bound = 0.0;
  bool holds = false;
};

struct Theorem1Report {
  std::vector<double> beta;  // per group
  std::vector<GroupPairBound> pairs;
  bool all_hold = true;
};

/// Compares ||mu_p - mu_q||_2 against 2 (1 - min(beta_p, beta_q)) for every
/// pair of groups, beta_i being the share of group-i nodes with at least one
/// edge into another group. Group ids must be dense in [0, G).
inline Theorem1Report theorem1_check(const Eigen::MatrixXd& e, const std::vector<int>& groups,
                                     const Graph& g, double tol = 1e-3) {
  const auto n = g.num_nodes();
  if (static_cast<std::size_t>(e.rows()) != n || groups.size() != n)
    throw InputError("embedding, groups and graph disagree in size");
  int num_groups = 0;
  for (int s : groups) {
    if (s < 0) throw InputError("negative group id");
    num_groups = std::max(num_groups, s + 1);
  }
  if (num_groups < 2) throw InputError("theorem check needs at least two groups");
  const auto gcount = static_cast<std::size_t>(num_groups);
  std::vector<std::size_t> size(gcount, 0), bridging(gcount, 0);
  Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(num_groups, e.cols());
  for (std::size_t u = 0; u < n; ++u) {
    const auto s = static_cast<std::size_t>(groups[u]);
    ++size[s];
    mean.row(groups[u]) += e.row(static_cast<Eigen::Index>(u));
    for (NodeId v : g.neighbors(static_cast<NodeId>(u))) {
      if (groups[static_cast<std::size_t>(v)] != groups[u]) {
        ++bridging[s];
        break;
      }
    }
  }
  Theorem1Report rep;
  for (std::size_t s = 0; s < gcount; ++s) {
    if (size[s] == 0) throw InputError("group " + std::to_string(s) + " is empty");
    mean.row(static_cast<Eigen::Index>(s)) /= static_cast<double>(size[s]);
    rep.beta.push_back(static_cast<double>(bridging[s]) / static_cast<double>(size[s]));
  }
  for (int p = 0; p < num_groups; ++p) {
    for (int q = p + 1; q < num_groups; ++q) {
      GroupPairBound b;
      b.p = p;
      b.q = q;
      b.lhs = (mean.row(p) - mean.row(q)).norm();
      b.bound = 2.0 * (1.0 - std::min(rep.beta[static_cast<std::size_t>(p)],
                                      rep.beta[static_cast<std::size_t>(q)]));
      b.holds = b.lhs <= b.bound + tol;
      rep.all_hold = rep.all_hold && b.holds;
      rep.pairs.push_back(b);
    }
  }
  return rep;
}

}  // namespace mlfair
