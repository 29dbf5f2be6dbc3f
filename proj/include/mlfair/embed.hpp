#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <numeric>
#include <unordered_map>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "mlfair/error.hpp"
#include "mlfair/graph.hpp"

namespace mlfair {

// Skip-gram tables are float, as in word2vec: twice the SIMD width, half the memory traffic.
using RowMatrixF = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Node representations, one row per node.
struct Embedding {
  Eigen::MatrixXd values;
  bool normalized = false;

  Eigen::Index rows() const { return values.rows(); }
  Eigen::Index dim() const { return values.cols(); }
};

enum class EmbedderKind { spectral, deepwalk };

inline EmbedderKind parse_embedder_kind(const std::string& s) {
  if (s == "spectral") return EmbedderKind::spectral;
  if (s == "deepwalk") return EmbedderKind::deepwalk;
  throw InputError("unknown embedder kind '" + s + "'");
}

inline std::string to_string(EmbedderKind k) {
  return k == EmbedderKind::spectral ? "spectral" : "deepwalk";
}

struct DeepWalkConfig {
  int walks_per_node = 10;
  int walk_length = 80;
  int window = 10;
  int negatives = 5;
  int epochs = 1;
  double initial_lr = 0.025;
};

struct EmbedderConfig {
  EmbedderKind kind = EmbedderKind::spectral;
  int dim = 128;
  std::uint64_t seed = 0;
  DeepWalkConfig deepwalk;
};

/// splitmix64 finalizer; derives independent stream seeds from tuples.
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0) {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1) + 0xbf58476d1ce4e5b9ULL * (c + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Scales every row to unit L2 norm; a zero row is a numeric failure.
inline Embedding normalize_rows(Embedding e) {
  for (Eigen::Index u = 0; u < e.values.rows(); ++u) {
    const double norm = e.values.row(u).norm();
    if (!(norm > 0.0) || !std::isfinite(norm))
      throw NumericError("embedding row " + std::to_string(u) + " has zero or non-finite norm");
    e.values.row(u) /= norm;
  }
  e.normalized = true;
  return e;
}

/// Unit rows for refinement input. Zero rows stay zero: a low-dimensional
/// spectral embedding legitimately leaves some nodes with no mass.
inline Eigen::MatrixXd normalize_nonzero_rows(Eigen::MatrixXd m) {
  for (Eigen::Index u = 0; u < m.rows(); ++u) {
    const double norm = m.row(u).norm();
    if (!std::isfinite(norm)) throw NumericError("embedding row " + std::to_string(u) + " is not finite");
    if (norm > 0.0) m.row(u) /= norm;
  }
  return m;
}

// ---------------------------------------------------------------------------
// Spectral embedder

struct SpectralPairs {
  Eigen::VectorXd eigenvalues;   // descending
  Eigen::MatrixXd eigenvectors;  // column k pairs with eigenvalues[k]
};

inline constexpr std::size_t kSpectralMaxNodes = 5000;

/// Top-d eigenpairs of the self-loop-augmented normalized adjacency. Each
/// eigenvector is signed so its largest-magnitude entry is positive.
inline SpectralPairs spectral_pairs(const Graph& g, int d) {
  const auto n = g.num_nodes();
  if (n == 0) throw InputError("cannot embed an empty graph");
  if (n > kSpectralMaxNodes) throw InputError("spectral embedder limited to 5000 nodes");
  if (d < 1 || static_cast<std::size_t>(d) > n)
    throw InputError("spectral embedding dimension must lie in [1, n]");
  Eigen::MatrixXd p = Eigen::MatrixXd(normalized_adjacency(g, true));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(p);
  if (solver.info() != Eigen::Success) throw NumericError("eigendecomposition failed");
  const auto nn = static_cast<Eigen::Index>(n);
  SpectralPairs out;
  out.eigenvalues.resize(d);
  out.eigenvectors.resize(nn, d);
  for (int k = 0; k < d; ++k) {
    const auto src = nn - 1 - k;
    out.eigenvalues[k] = solver.eigenvalues()[src];
    Eigen::VectorXd v = solver.eigenvectors().col(src);
    Eigen::Index arg = 0;
    double best = -1.0;
    for (Eigen::Index i = 0; i < nn; ++i) {
      if (std::abs(v[i]) > best) {
        best = std::abs(v[i]);
        arg = i;
      }
    }
    if (v[arg] < 0.0) v = -v;
    out.eigenvectors.col(k) = v;
  }
  return out;
}

/// Column k = v_k * sqrt(max(lambda_k, 0)). Deterministic; the seed is
/// accepted for interface symmetry only.
inline Embedding embed_spectral(const Graph& g, int d, std::uint64_t /*seed*/ = 0) {
  auto pairs = spectral_pairs(g, d);
  Embedding e;
  e.values = pairs.eigenvectors;
  for (int k = 0; k < d; ++k) e.values.col(k) *= std::sqrt(std::max(pairs.eigenvalues[k], 0.0));
  return e;
}

// ---------------------------------------------------------------------------
// DeepWalk embedder

/// Flattened walk corpus.
struct WalkCorpus {
  std::vector<NodeId> tokens;
  std::vector<std::size_t> offsets{0};

  std::size_t num_walks() const { return offsets.size() - 1; }
  std::span<const NodeId> walk(std::size_t i) const {
    return {tokens.data() + offsets[i], tokens.data() + offsets[i + 1]};
  }
};

/// walks_per_node passes; each pass visits nodes in a shuffled order and
/// each walk draws from its own stream seeded by (seed, node, pass), so a
/// walk does not depend on which walks were generated before it. Transitions
/// are proportional to edge weight; self-loops are not followed.
inline WalkCorpus generate_walks(const Graph& g, const DeepWalkConfig& cfg, std::uint64_t seed) {
  if (cfg.walks_per_node < 1 || cfg.walk_length < 1) throw InputError("walk parameters must be >= 1");
  const auto n = g.num_nodes();
  std::vector<std::size_t> off(n + 1, 0);
  std::vector<NodeId> nbr;
  std::vector<double> cum;
  for (std::size_t u = 0; u < n; ++u) {
    const auto uid = static_cast<NodeId>(u);
    auto nb = g.neighbors(uid);
    auto ws = g.neighbor_weights(uid);
    double acc = 0.0;
    for (std::size_t k = 0; k < nb.size(); ++k) {
      if (nb[k] == uid) continue;
      acc += ws[k];
      nbr.push_back(nb[k]);
      cum.push_back(acc);
    }
    off[u + 1] = nbr.size();
  }

  WalkCorpus corpus;
  corpus.tokens.reserve(n * static_cast<std::size_t>(cfg.walks_per_node) *
                        static_cast<std::size_t>(cfg.walk_length));
  std::vector<NodeId> order(n);
  for (int pass = 0; pass < cfg.walks_per_node; ++pass) {
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 shuffle_rng(mix_seed(seed, 0xfeedULL, static_cast<std::uint64_t>(pass)));
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    for (NodeId start : order) {
      std::mt19937_64 rng(mix_seed(seed, static_cast<std::uint64_t>(start) + 1,
                                   static_cast<std::uint64_t>(pass)));
      NodeId cur = start;
      corpus.tokens.push_back(cur);
      for (int step = 1; step < cfg.walk_length; ++step) {
        const auto b = off[static_cast<std::size_t>(cur)];
        const auto e = off[static_cast<std::size_t>(cur) + 1];
        if (b == e) break;
        std::uniform_real_distribution<double> pick(0.0, cum[e - 1]);
        const double r = pick(rng);
        auto it = std::upper_bound(cum.begin() + static_cast<std::ptrdiff_t>(b),
                                   cum.begin() + static_cast<std::ptrdiff_t>(e), r);
        if (it == cum.begin() + static_cast<std::ptrdiff_t>(e)) --it;
        cur = nbr[static_cast<std::size_t>(it - cum.begin())];
        corpus.tokens.push_back(cur);
      }
      corpus.offsets.push_back(corpus.tokens.size());
    }
  }
  return corpus;
}

struct SkipGramResult {
  Embedding embedding;
  std::vector<double> epoch_loss;  // mean sampled SGNS loss per context pair
};

namespace detail {

inline double log_sigmoid(double x) {
  return x >= 0.0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
}

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double ex = std::exp(x);
  return ex / (1.0 + ex);
}

}  // namespace detail

/// Skip-gram with negative sampling over a walk corpus, word2vec style:
/// dynamic window shrinking, unigram^0.75 noise table, learning rate decayed
/// linearly from initial_lr to initial_lr / 100. Single-threaded.
inline SkipGramResult train_skipgram(const WalkCorpus& corpus, std::size_t n, int dim,
                                     const DeepWalkConfig& cfg, std::uint64_t seed) {
  if (dim < 1 || cfg.window < 1 || cfg.negatives < 1 || cfg.epochs < 1)
    throw InputError("skip-gram parameters must be >= 1");
  const auto d = static_cast<Eigen::Index>(dim);
  std::mt19937_64 rng(mix_seed(seed, 0x5eedULL));

  RowMatrixF in(static_cast<Eigen::Index>(n), d);
  RowMatrixF out = RowMatrixF::Zero(static_cast<Eigen::Index>(n), d);
  {
    std::uniform_real_distribution<double> init(-0.5 / dim, 0.5 / dim);
    for (Eigen::Index i = 0; i < in.size(); ++i) in.data()[i] = static_cast<float>(init(rng));
  }

  std::vector<double> freq(n, 0.0);
  for (NodeId t : corpus.tokens) freq[static_cast<std::size_t>(t)] += 1.0;
  const std::size_t table_size = std::max<std::size_t>(1u << 20, 64 * n);
  std::vector<NodeId> table(table_size);
  {
    double norm = 0.0;
    for (double f : freq) norm += std::pow(f, 0.75);
    if (norm <= 0.0) throw InputError("empty walk corpus");
    std::size_t i = 0;
    double acc = 0.0;
    for (std::size_t w = 0; w < n && i < table_size; ++w) {
      acc += std::pow(freq[w], 0.75) / norm;
      while (i < table_size && static_cast<double>(i) / static_cast<double>(table_size) < acc)
        table[i++] = static_cast<NodeId>(w);
    }
    for (; i < table_size; ++i) table[i] = static_cast<NodeId>(n - 1);
  }

  SkipGramResult res;
  const double total_tokens =
      static_cast<double>(corpus.tokens.size()) * static_cast<double>(cfg.epochs);
  double processed = 0.0;
  Eigen::VectorXf grad(d);
  std::uniform_int_distribution<int> shrink(0, cfg.window - 1);
  std::uniform_int_distribution<std::size_t> noise(0, table_size - 1);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double loss_sum = 0.0;
    std::size_t pairs = 0;
    for (std::size_t w = 0; w < corpus.num_walks(); ++w) {
      auto walk = corpus.walk(w);
      const auto len = static_cast<int>(walk.size());
      for (int i = 0; i < len; ++i, processed += 1.0) {
        const double lr = cfg.initial_lr * (1.0 - 0.99 * processed / total_tokens);
        const NodeId center = walk[static_cast<std::size_t>(i)];
        const int reach = cfg.window - shrink(rng);
        for (int j = std::max(0, i - reach); j <= std::min(len - 1, i + reach); ++j) {
          if (j == i) continue;
          const NodeId ctx = walk[static_cast<std::size_t>(j)];
          auto v_in = in.row(ctx);
          grad.setZero();
          for (int k = 0; k <= cfg.negatives; ++k) {
            NodeId target;
            double label;
            if (k == 0) {
              target = center;
              label = 1.0;
            } else {
              target = table[noise(rng)];
              if (target == center) continue;
              label = 0.0;
            }
            auto v_out = out.row(target);
            const double f = static_cast<double>(v_in.dot(v_out));
            // One exp serves both the loss and the gradient.
            const double ex = std::exp(-std::abs(f));
            const double sig = f >= 0.0 ? 1.0 / (1.0 + ex) : ex / (1.0 + ex);
            const double agree = label > 0.0 ? f : -f;
            loss_sum += std::log1p(ex) - std::min(agree, 0.0);
            const auto g = static_cast<float>((label - sig) * lr);
            grad.noalias() += g * v_out.transpose();
            v_out += g * v_in;
          }
          v_in += grad.transpose();
          ++pairs;
        }
      }
    }
    res.epoch_loss.push_back(pairs ? loss_sum / static_cast<double>(pairs) : 0.0);
  }
  res.embedding.values = in.cast<double>();
  if (!res.embedding.values.allFinite()) throw NumericError("skip-gram produced non-finite values");
  return res;
}

inline Embedding embed_deepwalk(const Graph& g, int dim, const DeepWalkConfig& cfg,
                                std::uint64_t seed) {
  if (g.num_nodes() == 0) throw InputError("cannot embed an empty graph");
  auto corpus = generate_walks(g, cfg, seed);
  return train_skipgram(corpus, g.num_nodes(), dim, cfg, seed).embedding;
}

/// Graph in, embedding out. Any embedder honouring this signature can be
/// used as the base model on the coarsest graph.
inline Embedding embed(const Graph& g, const EmbedderConfig& cfg) {
  if (cfg.dim < 1) throw InputError("embedding dimension must be >= 1");
  switch (cfg.kind) {
    case EmbedderKind::spectral:
      return embed_spectral(g, cfg.dim, cfg.seed);
    case EmbedderKind::deepwalk:
      return embed_deepwalk(g, cfg.dim, cfg.deepwalk, cfg.seed);
  }
  throw InputError("unknown embedder kind");
}

// ---------------------------------------------------------------------------
// word2vec text format: `N d` header, then `node-id v1 ... vd` per row.

inline void write_embedding(std::ostream& out, const Embedding& e,
                            std::span<const std::string> node_ids) {
  if (static_cast<Eigen::Index>(node_ids.size()) != e.rows())
    throw InputError("node id count does not match embedding rows");
  out << e.rows() << ' ' << e.dim() << '\n';
  for (Eigen::Index u = 0; u < e.rows(); ++u) {
    out << node_ids[static_cast<std::size_t>(u)];
    for (Eigen::Index k = 0; k < e.dim(); ++k) out << ' ' << detail::format_double(e.values(u, k));
    out << '\n';
  }
}

struct NamedEmbedding {
  std::vector<std::string> node_ids;
  Embedding embedding;
};

inline NamedEmbedding read_embedding(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw InputError("embedding file is empty");
  auto head = detail::split_ws(line);
  if (head.size() != 2) throw InputError("embedding header must be `N d`");
  auto n = detail::parse_double(head[0]);
  auto d = detail::parse_double(head[1]);
  if (!n || !d || *n < 0 || *d < 1) throw InputError("bad embedding header");
  NamedEmbedding ne;
  ne.embedding.values.resize(static_cast<Eigen::Index>(*n), static_cast<Eigen::Index>(*d));
  Eigen::Index row = 0;
  while (std::getline(in, line)) {
    auto tok = detail::split_ws(line);
    if (tok.empty()) continue;
    if (row >= ne.embedding.values.rows() ||
        static_cast<Eigen::Index>(tok.size()) != ne.embedding.values.cols() + 1)
      throw InputError("malformed embedding row " + std::to_string(row));
    ne.node_ids.emplace_back(tok[0]);
    for (Eigen::Index k = 0; k < ne.embedding.values.cols(); ++k) {
      auto x = detail::parse_double(tok[static_cast<std::size_t>(k) + 1]);
      if (!x) throw InputError("bad embedding value in row " + std::to_string(row));
      ne.embedding.values(row, k) = *x;
    }
    ++row;
  }
  if (row != ne.embedding.values.rows()) throw InputError("embedding file has fewer rows than declared");
  bool unit = row > 0;
  for (Eigen::Index u = 0; u < row && unit; ++u)
    unit = std::abs(ne.embedding.values.row(u).norm() - 1.0) <= 1e-6;
  ne.embedding.normalized = unit;
  return ne;
}

/// Reorders rows to follow `order`; every id must be present.
inline Embedding align_embedding(const NamedEmbedding& ne, std::span<const std::string> order) {
  std::unordered_map<std::string, Eigen::Index> pos;
  for (std::size_t i = 0; i < ne.node_ids.size(); ++i)
    pos.emplace(ne.node_ids[i], static_cast<Eigen::Index>(i));
  Embedding e;
  e.normalized = ne.embedding.normalized;
  e.values.resize(static_cast<Eigen::Index>(order.size()), ne.embedding.dim());
  for (std::size_t i = 0; i < order.size(); ++i) {
    auto it = pos.find(order[i]);
    if (it == pos.end()) throw InputError("embedding has no row for node '" + order[i] + "'");
    e.values.row(static_cast<Eigen::Index>(i)) = ne.embedding.values.row(it->second);
  }
  return e;
}

}  // namespace mlfair
