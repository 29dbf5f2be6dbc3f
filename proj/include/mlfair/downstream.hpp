#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <random>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "mlfair/embed.hpp"
#include "mlfair/error.hpp"
#include "mlfair/graph.hpp"
#include "mlfair/metrics.hpp"

namespace mlfair {

struct ClassifierConfig {
  double l2 = 1e-4;
  int epochs = 300;
  double learning_rate = 0.1;
};

/// Multinomial logistic regression over standardized features.
struct LinearClassifier {
  Eigen::MatrixXd weights;  // d x K
  Eigen::RowVectorXd bias;  // K
  Eigen::RowVectorXd feature_mean;
  Eigen::RowVectorXd feature_scale;
  std::vector<double> loss_trace;

  Eigen::Index num_classes() const { return weights.cols(); }

  Eigen::MatrixXd standardize(const Eigen::MatrixXd& x) const {
    return (x.rowwise() - feature_mean).array().rowwise() / feature_scale.array();
  }

  Eigen::MatrixXd predict_proba(const Eigen::MatrixXd& x) const {
    Eigen::MatrixXd logits = (standardize(x) * weights).rowwise() + bias;
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
      const double mx = logits.row(i).maxCoeff();
      logits.row(i) = (logits.row(i).array() - mx).exp();
      logits.row(i) /= logits.row(i).sum();
    }
    return logits;
  }

  std::vector<int> predict(const Eigen::MatrixXd& x) const {
    auto proba = predict_proba(x);
    std::vector<int> out(static_cast<std::size_t>(x.rows()));
    for (Eigen::Index i = 0; i < proba.rows(); ++i) {
      Eigen::Index arg = 0;
      proba.row(i).maxCoeff(&arg);
      out[static_cast<std::size_t>(i)] = static_cast<int>(arg);
    }
    return out;
  }
};

namespace detail {

struct SoftmaxObjective {
  const Eigen::MatrixXd& x;
  const std::vector<int>& y;
  double l2;

  double operator()(const Eigen::MatrixXd& w, const Eigen::RowVectorXd& b, Eigen::MatrixXd* gw,
                    Eigen::RowVectorXd* gb) const {
    const auto n = static_cast<double>(x.rows());
    Eigen::MatrixXd logits = (x * w).rowwise() + b;
    double loss = 0.0;
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
      const double mx = logits.row(i).maxCoeff();
      logits.row(i) = (logits.row(i).array() - mx).exp();
      const double z = logits.row(i).sum();
      logits.row(i) /= z;
      loss -= std::log(std::max(logits(i, y[static_cast<std::size_t>(i)]), 1e-300));
    }
    loss = loss / n + 0.5 * l2 * w.squaredNorm();
    if (gw) {
      for (Eigen::Index i = 0; i < logits.rows(); ++i) logits(i, y[static_cast<std::size_t>(i)]) -= 1.0;
      *gw = x.transpose() * logits / n + l2 * w;
      *gb = logits.colwise().sum() / n;
    }
    return loss;
  }
};

}  // namespace detail

/// Full-batch gradient descent from zero weights. A step that would raise
/// the regularized loss is retried with half the step size, so the loss
/// trace never increases.
inline LinearClassifier train_linear_classifier(const Eigen::MatrixXd& x, const std::vector<int>& y,
                                                const ClassifierConfig& cfg = {}) {
  if (static_cast<std::size_t>(x.rows()) != y.size() || y.empty())
    throw InputError("classifier needs one label per row");
  int k = 0;
  for (int c : y) {
    if (c < 0) throw InputError("negative class label");
    k = std::max(k, c + 1);
  }
  std::vector<std::size_t> per_class(static_cast<std::size_t>(k), 0);
  for (int c : y) ++per_class[static_cast<std::size_t>(c)];
  std::size_t present = 0;
  for (auto c : per_class) present += c > 0 ? 1 : 0;
  if (present < 2) throw InputError("classifier needs at least two classes");
  for (std::size_t c = 0; c < per_class.size(); ++c)
    if (per_class[c] == 0) throw InputError("class " + std::to_string(c) + " absent from training data");

  LinearClassifier clf;
  clf.feature_mean = x.colwise().mean();
  clf.feature_scale = ((x.rowwise() - clf.feature_mean).array().square().colwise().mean()).sqrt();
  for (Eigen::Index j = 0; j < clf.feature_scale.size(); ++j)
    if (!(clf.feature_scale[j] > 1e-12)) clf.feature_scale[j] = 1.0;
  const Eigen::MatrixXd xs = clf.standardize(x);
  clf.weights = Eigen::MatrixXd::Zero(x.cols(), k);
  clf.bias = Eigen::RowVectorXd::Zero(k);

  detail::SoftmaxObjective obj{xs, y, cfg.l2};
  Eigen::MatrixXd gw;
  Eigen::RowVectorXd gb;
  double loss = obj(clf.weights, clf.bias, &gw, &gb);
  clf.loss_trace.push_back(loss);
  double step = cfg.learning_rate;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Eigen::MatrixXd w_next;
    Eigen::RowVectorXd b_next;
    double next = loss;
    for (int tries = 0; tries < 30; ++tries) {
      w_next = clf.weights - step * gw;
      b_next = clf.bias - step * gb;
      next = obj(w_next, b_next, nullptr, nullptr);
      if (next <= loss) break;
      step *= 0.5;
    }
    if (!(next <= loss)) break;
    clf.weights = std::move(w_next);
    clf.bias = std::move(b_next);
    loss = obj(clf.weights, clf.bias, &gw, &gb);
    clf.loss_trace.push_back(loss);
  }
  return clf;
}

/// Flat metric report; keys keep insertion order.
struct EvalReport {
  std::vector<std::pair<std::string, double>> metrics;
  std::vector<std::pair<std::string, double>> timings;  // seconds per phase

  void set(const std::string& key, double value) {
    for (auto& [k, v] : metrics)
      if (k == key) {
        v = value;
        return;
      }
    metrics.emplace_back(key, value);
  }

  double get(const std::string& key) const {
    for (const auto& [k, v] : metrics)
      if (k == key) return v;
    throw InputError("report has no metric '" + key + "'");
  }

  bool has(const std::string& key) const {
    for (const auto& [k, v] : metrics)
      if (k == key) return true;
    return false;
  }
};

/// One sensitive attribute as seen by the evaluators: a group id per node.
struct GroupColumn {
  std::string name;
  std::vector<int> group;
};

struct NodeSplit {
  std::vector<std::size_t> train, val, test;
};

struct SplitRatios {
  double train = 0.5;
  double val = 0.25;
};

/// Per-class shuffled split; every class keeps at least one training node.
inline NodeSplit stratified_split(const std::vector<int>& labels, const SplitRatios& ratios,
                                  std::uint64_t seed) {
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
  std::mt19937_64 rng(mix_seed(seed, 0x5917ULL));
  NodeSplit split;
  for (auto& [c, members] : by_class) {
    std::shuffle(members.begin(), members.end(), rng);
    const auto m = members.size();
    auto n_train = std::max<std::size_t>(1, static_cast<std::size_t>(ratios.train * static_cast<double>(m)));
    auto n_val = static_cast<std::size_t>(ratios.val * static_cast<double>(m));
    n_train = std::min(n_train, m);
    n_val = std::min(n_val, m - n_train);
    split.train.insert(split.train.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(n_train));
    split.val.insert(split.val.end(), members.begin() + static_cast<std::ptrdiff_t>(n_train),
                     members.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
    split.test.insert(split.test.end(), members.begin() + static_cast<std::ptrdiff_t>(n_train + n_val),
                      members.end());
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.val.begin(), split.val.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

inline Eigen::MatrixXd take_rows(const Eigen::MatrixXd& m, const std::vector<std::size_t>& rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i)
    out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(rows[i]));
  return out;
}

template <typename T>
std::vector<T> take(const std::vector<T>& v, const std::vector<std::size_t>& idx) {
  std::vector<T> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(v[i]);
  return out;
}

/// Default advantaged classes: {1} for binary labels, every class otherwise.
inline std::vector<int> default_advantaged(int num_classes) {
  if (num_classes == 2) return {1};
  std::vector<int> all(static_cast<std::size_t>(num_classes));
  std::iota(all.begin(), all.end(), 0);
  return all;
}

struct NcConfig {
  SplitRatios ratios;
  std::uint64_t seed = 0;
  std::vector<int> advantaged;  // empty -> default_advantaged
  ClassifierConfig classifier;
};

struct NcResult {
  EvalReport report;
  LinearClassifier classifier;
  NodeSplit split;
};

inline void add_fairness_keys(EvalReport& rep, const std::string& dp_key, const std::string& eo_key,
                              const std::vector<GroupColumn>& groups, const std::vector<double>& dp,
                              const std::vector<double>& eo) {
  rep.set(dp_key, dp.at(0));
  rep.set(eo_key, eo.at(0));
  if (groups.size() > 1) {
    for (std::size_t k = 0; k < groups.size(); ++k) {
      rep.set(dp_key + "_" + groups[k].name, dp[k]);
      rep.set(eo_key + "_" + groups[k].name, eo[k]);
    }
  }
}

/// Node classification: linear classifier on the training rows, utility
/// and group fairness measured on the test rows.
inline NcResult nc_evaluate(const Eigen::MatrixXd& e, const std::vector<int>& labels,
                            const std::vector<GroupColumn>& groups, const NcConfig& cfg = {}) {
  if (static_cast<std::size_t>(e.rows()) != labels.size()) throw InputError("one label per node required");
  if (groups.empty()) throw InputError("at least one sensitive attribute required");
  for (const auto& g : groups)
    if (g.group.size() != labels.size()) throw InputError("group column size mismatch");
  int k = 0;
  for (int c : labels) k = std::max(k, c + 1);

  NcResult res;
  res.split = stratified_split(labels, cfg.ratios, cfg.seed);
  for (int c = 0; c < k; ++c) {
    bool seen = false;
    for (auto i : res.split.train) seen = seen || labels[i] == c;
    if (!seen) throw InputError("class " + std::to_string(c) + " absent from the training split");
  }
  res.classifier = train_linear_classifier(take_rows(e, res.split.train), take(labels, res.split.train),
                                           cfg.classifier);
  const auto x_test = take_rows(e, res.split.test);
  const auto y_test = take(labels, res.split.test);
  const auto proba = res.classifier.predict_proba(x_test);
  const auto pred = res.classifier.predict(x_test);

  auto& rep = res.report;
  if (k == 2) {
    std::vector<double> s(static_cast<std::size_t>(proba.rows()));
    for (Eigen::Index i = 0; i < proba.rows(); ++i) s[static_cast<std::size_t>(i)] = proba(i, 1);
    rep.set("auroc", auroc(s, y_test));
    rep.set("f1", f1_binary(pred, y_test));
  } else {
    rep.set("auroc", auroc_ovr(proba, y_test));
    rep.set("micro_f1", micro_f1(pred, y_test));
  }
  rep.set("accuracy", accuracy(pred, y_test));

  const auto adv = cfg.advantaged.empty() ? default_advantaged(k) : cfg.advantaged;
  std::vector<double> dp, eo;
  for (const auto& g : groups) {
    GroupedPredictions gp{pred, y_test, take(g.group, res.split.test), adv};
    dp.push_back(delta_dp(gp));
    eo.push_back(delta_eo(gp));
  }
  add_fairness_keys(rep, "delta_dp", "delta_eo", groups, dp, eo);
  return res;
}

// ---------------------------------------------------------------------------
// Link prediction

using NodePair = std::pair<NodeId, NodeId>;

struct LpSplit {
  Graph train_graph;
  std::vector<NodePair> test_pos;
  std::vector<NodePair> test_neg;
  std::vector<NodePair> train_neg;
  std::uint64_t seed = 0;
};

/// Holds out floor(ratio * |E|) uniformly chosen edges and samples
/// non-edges of the full graph without replacement: as many test negatives
/// as test positives and as many train negatives as remaining train edges.
inline LpSplit lp_split(const Graph& g, double ratio, std::uint64_t seed) {
  if (ratio < 0.0 || ratio > 1.0) throw InputError("link-prediction ratio must lie in [0, 1]");
  if (g.num_edges() < 10) throw InputError("link-prediction split needs at least 10 edges");
  auto edges = g.edges(false);
  std::mt19937_64 rng(mix_seed(seed, 0x11f5ULL));
  std::shuffle(edges.begin(), edges.end(), rng);
  const auto n_test = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(edges.size())));

  LpSplit split;
  split.seed = seed;
  std::vector<IndexedEdge> keep;
  for (std::size_t i = 0; i < edges.size(); ++i) {
    if (i < n_test) {
      split.test_pos.emplace_back(edges[i].u, edges[i].v);
    } else {
      keep.push_back(edges[i]);
    }
  }
  for (std::size_t u = 0; u < g.num_nodes(); ++u) {
    const auto uid = static_cast<NodeId>(u);
    if (g.self_loop(uid) > 0.0) keep.push_back({uid, uid, g.self_loop(uid)});
  }
  std::sort(keep.begin(), keep.end(), [](const auto& a, const auto& b) {
    return a.u != b.u ? a.u < b.u : a.v < b.v;
  });
  split.train_graph = Graph::from_triples(g.num_nodes(), keep, g.names());

  const std::size_t n_train_neg = edges.size() - n_test;
  const std::size_t needed = n_test + n_train_neg;
  const auto n = static_cast<std::uint64_t>(g.num_nodes());
  const std::uint64_t non_edges = n * (n - 1) / 2 - g.num_edges();
  if (needed > non_edges) throw InputError("not enough non-edges for negative sampling");

  std::vector<NodePair> negatives;
  negatives.reserve(needed);
  if (2 * needed >= non_edges) {
    for (NodeId u = 0; u < static_cast<NodeId>(n); ++u)
      for (NodeId v = u + 1; v < static_cast<NodeId>(n); ++v)
        if (!g.has_edge(u, v)) negatives.emplace_back(u, v);
    std::shuffle(negatives.begin(), negatives.end(), rng);
    negatives.resize(needed);
  } else {
    std::unordered_set<std::uint64_t> taken;
    std::uniform_int_distribution<NodeId> pick(0, static_cast<NodeId>(n - 1));
    while (negatives.size() < needed) {
      NodeId a = pick(rng), b = pick(rng);
      if (a == b) continue;
      if (a > b) std::swap(a, b);
      if (g.has_edge(a, b)) continue;
      const auto key = static_cast<std::uint64_t>(a) * n + static_cast<std::uint64_t>(b);
      if (!taken.insert(key).second) continue;
      negatives.emplace_back(a, b);
    }
  }
  split.test_neg.assign(negatives.begin(), negatives.begin() + static_cast<std::ptrdiff_t>(n_test));
  split.train_neg.assign(negatives.begin() + static_cast<std::ptrdiff_t>(n_test), negatives.end());
  return split;
}

inline Eigen::MatrixXd hadamard_features(const Eigen::MatrixXd& e, const std::vector<NodePair>& pairs) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(pairs.size()), e.cols());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    auto [u, v] = pairs[i];
    if (u < 0 || v < 0 || u >= e.rows() || v >= e.rows()) throw InputError("pair index out of range");
    x.row(static_cast<Eigen::Index>(i)) = e.row(u).cwiseProduct(e.row(v));
  }
  return x;
}

struct LpResult {
  EvalReport report;
  LinearClassifier classifier;
  std::vector<double> test_scores;  // test_pos then test_neg
};

/// Trains on Hadamard features of train edges vs train negatives, scores the
/// held-out pairs and reports utility plus intra/inter-group score gaps.
inline LpResult lp_evaluate(const Eigen::MatrixXd& e, const LpSplit& split,
                            const std::vector<GroupColumn>& groups, const ClassifierConfig& ccfg = {}) {
  if (static_cast<std::size_t>(e.rows()) != split.train_graph.num_nodes())
    throw InputError("embedding rows do not match the split's node set");
  if (groups.empty()) throw InputError("at least one sensitive attribute required");
  std::vector<NodePair> train_pairs;
  for (const auto& ed : split.train_graph.edges(false)) train_pairs.emplace_back(ed.u, ed.v);
  std::vector<int> y(train_pairs.size(), 1);
  train_pairs.insert(train_pairs.end(), split.train_neg.begin(), split.train_neg.end());
  y.resize(train_pairs.size(), 0);

  LpResult res;
  res.classifier = train_linear_classifier(hadamard_features(e, train_pairs), y, ccfg);

  std::vector<NodePair> test = split.test_pos;
  test.insert(test.end(), split.test_neg.begin(), split.test_neg.end());
  std::vector<int> truth(split.test_pos.size(), 1);
  truth.resize(test.size(), 0);
  const auto proba = res.classifier.predict_proba(hadamard_features(e, test));
  res.test_scores.resize(test.size());
  for (std::size_t i = 0; i < test.size(); ++i) res.test_scores[i] = proba(static_cast<Eigen::Index>(i), 1);

  auto& rep = res.report;
  const auto um = utility_metrics(res.test_scores, truth);
  rep.set("auroc", um.auroc);
  rep.set("ap", um.ap);
  rep.set("accuracy", um.accuracy);

  std::vector<double> dp, eo;
  for (const auto& g : groups) {
    PairScores ps;
    ps.score = res.test_scores;
    for (std::size_t i = 0; i < test.size(); ++i) {
      ps.is_edge.push_back(truth[i] == 1);
      ps.group_u.push_back(g.group.at(static_cast<std::size_t>(test[i].first)));
      ps.group_v.push_back(g.group.at(static_cast<std::size_t>(test[i].second)));
    }
    auto f = lp_fairness(ps);
    dp.push_back(f.delta_dp);
    eo.push_back(f.delta_eo);
  }
  add_fairness_keys(rep, "delta_dp_lp", "delta_eo_lp", groups, dp, eo);
  return res;
}

struct MetricSummary {
  std::string metric;
  double mean = 0.0;
  double std = 0.0;
};

/// Mean and population standard deviation of every metric across runs.
inline std::vector<MetricSummary> summarize(const std::vector<EvalReport>& runs) {
  std::vector<MetricSummary> out;
  if (runs.empty()) return out;
  for (const auto& [key, unused] : runs.front().metrics) {
    std::vector<double> xs;
    for (const auto& r : runs) xs.push_back(r.get(key));
    double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
    out.push_back({key, mean, detail::population_std(xs)});
  }
  return out;
}

}  // namespace mlfair
