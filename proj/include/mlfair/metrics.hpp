#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <span>
#include <vector>

#include "mlfair/error.hpp"

namespace mlfair {

/// Instance-level predictions together with each instance's demographic
/// group. `truth` may be left empty when only demographic parity is needed.
struct GroupedPredictions {
  std::vector<int> predicted;
  std::vector<int> truth;
  std::vector<int> group;
  std::vector<int> advantaged;  // Y+
};

struct PairScores {
  std::vector<double> score;
  std::vector<bool> is_edge;
  std::vector<int> group_u;
  std::vector<int> group_v;
};

struct LpFairness {
  double delta_dp = 0.0;
  double delta_eo = 0.0;
};

struct UtilityMetrics {
  double auroc = 0.0;
  double ap = 0.0;
  double accuracy = 0.0;
  double f1 = 0.0;
};

namespace detail {

inline double population_std(std::span<const double> xs) {
  if (xs.empty()) return 0.0;
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double var = 0.0;
  for (double x : xs) var += (x - mean) * (x - mean);
  return std::sqrt(var / static_cast<double>(xs.size()));
}

inline void check_grouped(const GroupedPredictions& gp, bool need_truth) {
  if (gp.predicted.size() != gp.group.size())
    throw InputError("predictions and groups differ in length");
  if (need_truth && gp.truth.size() != gp.predicted.size())
    throw InputError("predictions and labels differ in length");
  if (gp.advantaged.empty()) throw InputError("advantaged class set is empty");
  if (gp.group.empty()) throw InputError("no instances, group set is empty");
}

}  // namespace detail

/// Mean over advantaged classes of the population standard deviation of the
/// per-group rate P(Y_hat = y | S = s).
inline double delta_dp(const GroupedPredictions& gp) {
  detail::check_grouped(gp, false);
  std::map<int, std::size_t> group_size;
  for (int s : gp.group) ++group_size[s];
  double total = 0.0;
  for (int y : gp.advantaged) {
    std::map<int, std::size_t> hits;
    for (std::size_t i = 0; i < gp.group.size(); ++i)
      if (gp.predicted[i] == y) ++hits[gp.group[i]];
    std::vector<double> rates;
    for (const auto& [s, size] : group_size)
      rates.push_back(static_cast<double>(hits[s]) / static_cast<double>(size));
    total += detail::population_std(rates);
  }
  return total / static_cast<double>(gp.advantaged.size());
}

/// Same dispersion over true-positive rates P(Y_hat = y | Y = y, S = s).
/// Groups without a member of class y are skipped for that class; a class
/// left with fewer than two groups contributes zero.
inline double delta_eo(const GroupedPredictions& gp) {
  detail::check_grouped(gp, true);
  double total = 0.0;
  for (int y : gp.advantaged) {
    std::map<int, std::pair<std::size_t, std::size_t>> tally;  // group -> (hits, members)
    for (std::size_t i = 0; i < gp.group.size(); ++i) {
      if (gp.truth[i] != y) continue;
      auto& t = tally[gp.group[i]];
      ++t.second;
      if (gp.predicted[i] == y) ++t.first;
    }
    if (tally.size() < 2) {
      warn("class " + std::to_string(y) + " present in fewer than two groups; contributes 0 to delta_eo");
      continue;
    }
    std::vector<double> rates;
    for (const auto& [s, t] : tally)
      rates.push_back(static_cast<double>(t.first) / static_cast<double>(t.second));
    total += detail::population_std(rates);
  }
  return total / static_cast<double>(gp.advantaged.size());
}

/// Gap in mean score between intra-group and inter-group pairs, over all
/// pairs (dp) and over true edges only (eo).
inline LpFairness lp_fairness(const PairScores& ps) {
  const auto n = ps.score.size();
  if (ps.is_edge.size() != n || ps.group_u.size() != n || ps.group_v.size() != n)
    throw InputError("pair score arrays differ in length");
  double sum[2][2] = {{0, 0}, {0, 0}};  // [edge_only][intra]
  std::size_t cnt[2][2] = {{0, 0}, {0, 0}};
  for (std::size_t i = 0; i < n; ++i) {
    const int intra = ps.group_u[i] == ps.group_v[i] ? 1 : 0;
    sum[0][intra] += ps.score[i];
    ++cnt[0][intra];
    if (ps.is_edge[i]) {
      sum[1][intra] += ps.score[i];
      ++cnt[1][intra];
    }
  }
  for (auto& row : cnt)
    for (auto c : row)
      if (c == 0) throw InputError("empty stratum in link-prediction fairness");
  auto mean = [&](int e, int intra) { return sum[e][intra] / static_cast<double>(cnt[e][intra]); };
  return {std::abs(mean(0, 1) - mean(0, 0)), std::abs(mean(1, 1) - mean(1, 0))};
}

/// Rank statistic with average ranks on ties.
inline double auroc(std::span<const double> scores, std::span<const int> positive) {
  const auto n = scores.size();
  if (positive.size() != n) throw InputError("scores and labels differ in length");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] < scores[b]; });
  double rank_sum = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k)
      if (positive[order[k]]) rank_sum += avg_rank;
    i = j;
  }
  for (int p : positive) n_pos += p ? 1 : 0;
  const auto n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) throw InputError("AUROC needs both classes");
  const double np = static_cast<double>(n_pos);
  return (rank_sum - np * (np + 1.0) / 2.0) / (np * static_cast<double>(n_neg));
}

/// Area under the precision-recall step curve, thresholds swept over the
/// distinct scores in descending order.
inline double average_precision(std::span<const double> scores, std::span<const int> positive) {
  const auto n = scores.size();
  if (positive.size() != n) throw InputError("scores and labels differ in length");
  std::size_t n_pos = 0;
  for (int p : positive) n_pos += p ? 1 : 0;
  if (n_pos == 0 || n_pos == n) throw InputError("average precision needs both classes");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] > scores[b]; });
  double ap = 0.0, prev_recall = 0.0;
  std::size_t tp = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) {
      if (positive[order[j]]) ++tp;
      ++j;
    }
    const double recall = static_cast<double>(tp) / static_cast<double>(n_pos);
    const double precision = static_cast<double>(tp) / static_cast<double>(j);
    ap += (recall - prev_recall) * precision;
    prev_recall = recall;
    i = j;
  }
  return ap;
}

inline double accuracy(std::span<const int> predicted, std::span<const int> truth) {
  if (predicted.size() != truth.size() || truth.empty())
    throw InputError("accuracy needs equal nonempty label arrays");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hit += predicted[i] == truth[i] ? 1 : 0;
  return static_cast<double>(hit) / static_cast<double>(truth.size());
}

inline double f1_binary(std::span<const int> predicted, std::span<const int> truth, int positive = 1) {
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const bool p = predicted[i] == positive;
    const bool t = truth[i] == positive;
    tp += p && t;
    fp += p && !t;
    fn += !p && t;
  }
  if (tp == 0) return 0.0;
  return 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
}

/// For single-label multi-class prediction micro-F1 coincides with accuracy.
inline double micro_f1(std::span<const int> predicted, std::span<const int> truth) {
  return accuracy(predicted, truth);
}

/// Binary utility metrics from positive-class scores in [0, 1];
/// accuracy and F1 threshold at 0.5.
inline UtilityMetrics utility_metrics(std::span<const double> scores, std::span<const int> truth) {
  UtilityMetrics m;
  m.auroc = auroc(scores, truth);
  m.ap = average_precision(scores, truth);
  std::vector<int> pred(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) pred[i] = scores[i] >= 0.5 ? 1 : 0;
  std::vector<int> t(truth.begin(), truth.end());
  for (auto& x : t) x = x ? 1 : 0;
  m.accuracy = accuracy(pred, t);
  m.f1 = f1_binary(pred, t);
  return m;
}

/// Macro one-vs-rest AUROC over classes that have both positives and
/// negatives in `truth`.
inline double auroc_ovr(const Eigen::MatrixXd& proba, std::span<const int> truth) {
  double total = 0.0;
  int used = 0;
  for (Eigen::Index k = 0; k < proba.cols(); ++k) {
    std::vector<double> s(truth.size());
    std::vector<int> pos(truth.size());
    std::size_t np = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      s[i] = proba(static_cast<Eigen::Index>(i), k);
      pos[i] = truth[i] == k ? 1 : 0;
      np += static_cast<std::size_t>(pos[i]);
    }
    if (np == 0 || np == truth.size()) continue;
    total += auroc(s, pos);
    ++used;
  }
  if (used == 0) throw InputError("AUROC needs both classes");
  return total / used;
}

}  // namespace mlfair
