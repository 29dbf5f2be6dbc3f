#pragma once

#include <algorithm>
#include <cstdint>
#include <istream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "mlfair/attributes.hpp"
#include "mlfair/downstream.hpp"
#include "mlfair/embed.hpp"
#include "mlfair/error.hpp"
#include "mlfair/refine.hpp"
#include "mlfair/synthetic.hpp"

namespace mlfair {

enum class Task { nc, lp };

inline Task parse_task(const std::string& s) {
  if (s == "nc") return Task::nc;
  if (s == "lp") return Task::lp;
  throw InputError("task must be nc or lp, got '" + s + "'");
}

inline std::string to_string(Task t) { return t == Task::nc ? "nc" : "lp"; }

/// Everything a pipeline run needs. Paths may be empty when the caller
/// supplies data in memory.
struct PipelineConfig {
  std::string edges;
  std::string attrs;
  std::string schema;
  std::string labels;
  std::string out;
  Task task = Task::nc;
  int levels = 2;
  double lambda_c = 0.5;
  EmbedderConfig embedder{EmbedderKind::spectral, 128, 0, {}};
  RefineHyper refine;
  std::uint64_t seed = 0;
  int runs = 1;
  double lp_ratio = 0.10;
  SplitRatios split;
  std::vector<std::string> positive_classes;  // label names; empty -> default
  bool normalize_base = true;
  ClassifierConfig classifier;

  void validate() const {
    if (levels < 0) throw InputError("levels must be >= 0");
    if (lambda_c < 0.0 || lambda_c > 1.0) throw InputError("lambda_c must lie in [0, 1]");
    if (embedder.dim < 1) throw InputError("dim must be >= 1");
    if (runs < 1) throw InputError("runs must be >= 1");
    if (lp_ratio < 0.0 || lp_ratio > 1.0) throw InputError("lp_ratio must lie in [0, 1]");
    if (split.train <= 0.0 || split.val < 0.0 || split.train + split.val >= 1.0)
      throw InputError("split ratios must leave a nonempty test share");
    refine.validate();
  }
};

/// Ordered key=value map; blank lines and `#` comments are skipped.
using KeyValues = std::vector<std::pair<std::string, std::string>>;

inline KeyValues parse_key_values(std::istream& in) {
  KeyValues kv;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto t = detail::trim(line);
    if (t.empty() || t.front() == '#') continue;
    auto eq = t.find('=');
    if (eq == std::string::npos) throw InputError("config line " + std::to_string(lineno) + " lacks '='");
    auto key = detail::trim(std::string_view(t).substr(0, eq));
    auto value = detail::trim(std::string_view(t).substr(eq + 1));
    std::replace(key.begin(), key.end(), '-', '_');
    bool replaced = false;
    for (auto& [k, v] : kv)
      if (k == key) {
        v = value;
        replaced = true;
      }
    if (!replaced) kv.emplace_back(key, value);
  }
  return kv;
}

namespace detail {

inline double to_double(const std::string& key, const std::string& v) {
  auto x = parse_double(v);
  if (!x) throw InputError("config key '" + key + "' expects a number, got '" + v + "'");
  return *x;
}

inline long long to_int(const std::string& key, const std::string& v) {
  long long x = 0;
  auto res = std::from_chars(v.data(), v.data() + v.size(), x);
  if (res.ec != std::errc{} || res.ptr != v.data() + v.size())
    throw InputError("config key '" + key + "' expects an integer, got '" + v + "'");
  return x;
}

inline std::uint64_t to_u64(const std::string& key, const std::string& v) {
  std::uint64_t x = 0;
  auto res = std::from_chars(v.data(), v.data() + v.size(), x);
  if (res.ec != std::errc{} || res.ptr != v.data() + v.size())
    throw InputError("config key '" + key + "' expects a non-negative integer, got '" + v + "'");
  return x;
}

inline bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw InputError("config key '" + key + "' expects true or false");
}

inline int to_int32(const std::string& key, const std::string& v) {
  auto x = to_int(key, v);
  if (x < -(1LL << 31) || x > (1LL << 31) - 1) throw InputError("config key '" + key + "' out of range");
  return static_cast<int>(x);
}

inline std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  if (v.empty()) return out;
  for (auto& s : split_csv(v))
    if (!s.empty()) out.push_back(s);
  return out;
}

}  // namespace detail

/// Applies one key to the config; returns false for keys it does not own.
inline bool apply_key(PipelineConfig& c, const std::string& key, const std::string& v) {
  using namespace detail;
  if (key == "edges") c.edges = v;
  else if (key == "attrs") c.attrs = v;
  else if (key == "schema") c.schema = v;
  else if (key == "labels") c.labels = v;
  else if (key == "out") c.out = v;
  else if (key == "task") c.task = parse_task(v);
  else if (key == "levels") c.levels = to_int32(key, v);
  else if (key == "lambda_c") c.lambda_c = to_double(key, v);
  else if (key == "lambda_r") c.refine.lambda_r = to_double(key, v);
  else if (key == "gamma") c.refine.gamma = to_double(key, v);
  else if (key == "epochs") c.refine.epochs = to_int32(key, v);
  else if (key == "lr") c.refine.learning_rate = to_double(key, v);
  else if (key == "layers") c.refine.layers = to_int32(key, v);
  else if (key == "dim") c.embedder.dim = to_int32(key, v);
  else if (key == "embedder") c.embedder.kind = parse_embedder_kind(v);
  else if (key == "walks_per_node") c.embedder.deepwalk.walks_per_node = to_int32(key, v);
  else if (key == "walk_length") c.embedder.deepwalk.walk_length = to_int32(key, v);
  else if (key == "window") c.embedder.deepwalk.window = to_int32(key, v);
  else if (key == "negatives") c.embedder.deepwalk.negatives = to_int32(key, v);
  else if (key == "dw_epochs") c.embedder.deepwalk.epochs = to_int32(key, v);
  else if (key == "dw_lr") c.embedder.deepwalk.initial_lr = to_double(key, v);
  else if (key == "seed") c.seed = to_u64(key, v);
  else if (key == "runs") c.runs = to_int32(key, v);
  else if (key == "lp_ratio") c.lp_ratio = to_double(key, v);
  else if (key == "train_ratio") c.split.train = to_double(key, v);
  else if (key == "val_ratio") c.split.val = to_double(key, v);
  else if (key == "positive_classes") c.positive_classes = split_list(v);
  else if (key == "normalize_base") c.normalize_base = to_bool(key, v);
  else if (key == "clf_epochs") c.classifier.epochs = to_int32(key, v);
  else if (key == "clf_lr") c.classifier.learning_rate = to_double(key, v);
  else if (key == "clf_l2") c.classifier.l2 = to_double(key, v);
  else return false;
  return true;
}

inline bool apply_key(SyntheticSpec& s, const std::string& key, const std::string& v) {
  using namespace detail;
  if (key == "kind") s.kind = v;
  else if (key == "n") s.n = to_int32(key, v);
  else if (key == "blocks") s.blocks = to_int32(key, v);
  else if (key == "p_in") s.p_in = to_double(key, v);
  else if (key == "p_out") s.p_out = to_double(key, v);
  else if (key == "p_label") s.p_label = to_double(key, v);
  else if (key == "groups") s.groups = to_int32(key, v);
  else if (key == "rho") s.rho = to_double(key, v);
  else if (key == "classes") s.classes = to_int32(key, v);
  else if (key == "label_noise") s.label_noise = to_double(key, v);
  else if (key == "label_skew") s.label_skew = to_double(key, v);
  else if (key == "label_rule") s.label_rule = v;
  else if (key == "seed") s.seed = to_u64(key, v);
  else return false;
  return true;
}

/// Canonical key=value rendering; parsing it back yields the same config.
inline std::string to_text(const PipelineConfig& c) {
  std::ostringstream o;
  auto num = [](double x) { return detail::format_double(x); };
  std::string pos;
  for (std::size_t i = 0; i < c.positive_classes.size(); ++i)
    pos += (i ? "," : "") + c.positive_classes[i];
  o << "edges=" << c.edges << '\n'
    << "attrs=" << c.attrs << '\n'
    << "schema=" << c.schema << '\n'
    << "labels=" << c.labels << '\n'
    << "out=" << c.out << '\n'
    << "task=" << to_string(c.task) << '\n'
    << "levels=" << c.levels << '\n'
    << "lambda_c=" << num(c.lambda_c) << '\n'
    << "lambda_r=" << num(c.refine.lambda_r) << '\n'
    << "gamma=" << num(c.refine.gamma) << '\n'
    << "epochs=" << c.refine.epochs << '\n'
    << "lr=" << num(c.refine.learning_rate) << '\n'
    << "layers=" << c.refine.layers << '\n'
    << "dim=" << c.embedder.dim << '\n'
    << "embedder=" << to_string(c.embedder.kind) << '\n'
    << "walks_per_node=" << c.embedder.deepwalk.walks_per_node << '\n'
    << "walk_length=" << c.embedder.deepwalk.walk_length << '\n'
    << "window=" << c.embedder.deepwalk.window << '\n'
    << "negatives=" << c.embedder.deepwalk.negatives << '\n'
    << "dw_epochs=" << c.embedder.deepwalk.epochs << '\n'
    << "dw_lr=" << num(c.embedder.deepwalk.initial_lr) << '\n'
    << "seed=" << c.seed << '\n'
    << "runs=" << c.runs << '\n'
    << "lp_ratio=" << num(c.lp_ratio) << '\n'
    << "train_ratio=" << num(c.split.train) << '\n'
    << "val_ratio=" << num(c.split.val) << '\n'
    << "positive_classes=" << pos << '\n'
    << "normalize_base=" << (c.normalize_base ? "true" : "false") << '\n'
    << "clf_epochs=" << c.classifier.epochs << '\n'
    << "clf_lr=" << num(c.classifier.learning_rate) << '\n'
    << "clf_l2=" << num(c.classifier.l2) << '\n';
  return o.str();
}

/// Builds a config from key=value pairs; unknown keys are input errors.
inline PipelineConfig parse_config(const KeyValues& kv) {
  PipelineConfig c;
  for (const auto& [k, v] : kv)
    if (!apply_key(c, k, v)) throw InputError("unknown config key '" + k + "'");
  c.embedder.seed = c.seed;
  c.refine.init_seed = c.seed;
  return c;
}

inline PipelineConfig parse_config(const std::string& text) {
  std::istringstream in(text);
  return parse_config(parse_key_values(in));
}

}  // namespace mlfair
