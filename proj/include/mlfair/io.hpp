#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "mlfair/attributes.hpp"
#include "mlfair/coarsen.hpp"
#include "mlfair/downstream.hpp"
#include "mlfair/embed.hpp"
#include "mlfair/error.hpp"
#include "mlfair/graph.hpp"
#include "mlfair/refine.hpp"

namespace mlfair {

namespace fs = std::filesystem;

inline std::ifstream open_in(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw InputError("cannot open '" + p.string() + "' for reading");
  return in;
}

inline std::ofstream open_out(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw InputError("cannot open '" + p.string() + "' for writing");
  return out;
}

inline Graph load_graph(const fs::path& p) {
  auto in = open_in(p);
  return read_edge_list(in);
}

inline void save_graph(const fs::path& p, const Graph& g) {
  auto out = open_out(p);
  write_edge_list(out, g);
}

/// Reads the attribute CSV and one-hot encodes it in graph node order.
inline AttributeMatrix load_attributes(const fs::path& p, const Graph& g, const fs::path& schema = {}) {
  auto in = open_in(p);
  auto table = read_attribute_table(in);
  AttributeSchema sch;
  if (!schema.empty()) {
    auto sin = open_in(schema);
    sch = read_schema(sin);
  } else {
    sch = infer_schema(table);
  }
  return encode_one_hot(table, sch, g.names());
}

inline void save_embedding(const fs::path& p, const Embedding& e, const std::vector<std::string>& ids) {
  auto out = open_out(p);
  write_embedding(out, e, ids);
}

inline NamedEmbedding load_embedding(const fs::path& p) {
  auto in = open_in(p);
  return read_embedding(in);
}

// ---------------------------------------------------------------------------
// Labels: CSV `node,label`.

struct LabelSet {
  std::vector<std::string> class_names;  // index -> label text
  std::vector<int> labels;               // per node, graph order
};

/// Integer labels are ordered numerically, anything else by first
/// appearance.
inline LabelSet load_labels(const fs::path& p, const Graph& g) {
  auto in = open_in(p);
  std::string line;
  std::vector<std::pair<std::string, std::string>> rows;
  bool header = false;
  while (std::getline(in, line)) {
    if (detail::trim(line).empty()) continue;
    auto cells = detail::split_csv(line);
    if (cells.size() != 2) throw InputError("label rows must be `node,label`");
    if (!header) {
      header = true;
      if (cells[0] == "node") continue;
    }
    rows.emplace_back(cells[0], cells[1]);
  }
  bool numeric = true;
  for (const auto& [n, l] : rows) {
    long long x;
    auto r = std::from_chars(l.data(), l.data() + l.size(), x);
    numeric = numeric && r.ec == std::errc{} && r.ptr == l.data() + l.size();
  }
  LabelSet ls;
  for (const auto& [n, l] : rows)
    if (std::find(ls.class_names.begin(), ls.class_names.end(), l) == ls.class_names.end())
      ls.class_names.push_back(l);
  if (numeric)
    std::sort(ls.class_names.begin(), ls.class_names.end(),
              [](const std::string& a, const std::string& b) { return std::stoll(a) < std::stoll(b); });
  std::unordered_map<std::string, int> cls;
  for (std::size_t i = 0; i < ls.class_names.size(); ++i) cls.emplace(ls.class_names[i], static_cast<int>(i));
  std::unordered_map<std::string, int> by_node;
  for (const auto& [n, l] : rows) by_node[n] = cls.at(l);
  ls.labels.resize(g.num_nodes());
  for (std::size_t u = 0; u < g.num_nodes(); ++u) {
    auto it = by_node.find(g.name(static_cast<NodeId>(u)));
    if (it == by_node.end()) throw InputError("no label for node '" + g.name(static_cast<NodeId>(u)) + "'");
    ls.labels[u] = it->second;
  }
  return ls;
}

inline void save_labels(const fs::path& p, const std::vector<std::string>& ids, const std::vector<int>& labels) {
  auto out = open_out(p);
  out << "node,label\n";
  for (std::size_t i = 0; i < ids.size(); ++i) out << ids[i] << ',' << labels[i] << '\n';
}

inline void save_attribute_table(const fs::path& p, const AttributeTable& t) {
  auto out = open_out(p);
  out << "node";
  for (const auto& a : t.attribute_names) out << ',' << a;
  out << '\n';
  for (std::size_t r = 0; r < t.node_ids.size(); ++r) {
    out << t.node_ids[r];
    for (const auto& v : t.values[r]) out << ',' << v;
    out << '\n';
  }
}

/// Group id per node for every attribute of a finest-level matrix.
inline std::vector<GroupColumn> group_columns(const AttributeMatrix& s) {
  std::vector<GroupColumn> cols;
  for (std::size_t k = 0; k < s.blocks().size(); ++k) cols.push_back({s.blocks()[k].name, s.groups(k)});
  return cols;
}

// ---------------------------------------------------------------------------
// Hierarchy directory: level_i.edges, level_i.attrs.csv, merge_i.map.

inline void save_hierarchy(const fs::path& dir, const Hierarchy& h) {
  fs::create_directories(dir);
  for (std::size_t i = 0; i < h.levels.size(); ++i) {
    const auto& lvl = h.levels[i];
    save_graph(dir / ("level_" + std::to_string(i) + ".edges"), lvl.graph);
    auto out = open_out(dir / ("level_" + std::to_string(i) + ".attrs.csv"));
    write_attribute_counts(out, lvl.attrs, lvl.graph.names());
  }
  for (std::size_t i = 0; i < h.merges.size(); ++i) {
    auto out = open_out(dir / ("merge_" + std::to_string(i) + ".map"));
    const auto& fine = h.levels[i].graph;
    const auto& coarse = h.levels[i + 1].graph;
    for (std::size_t u = 0; u < h.merges[i].parent.size(); ++u)
      out << fine.name(static_cast<NodeId>(u)) << ' ' << coarse.name(h.merges[i].parent[u]) << '\n';
  }
  auto meta = open_out(dir / "hierarchy.json");
  nlohmann::ordered_json j;
  j["levels"] = h.depth();
  j["lambda_c"] = h.lambda_c;
  std::vector<std::size_t> nodes, edges;
  for (const auto& l : h.levels) {
    nodes.push_back(l.graph.num_nodes());
    edges.push_back(l.graph.num_edges());
  }
  j["nodes"] = nodes;
  j["edges"] = edges;
  meta << j.dump(2) << '\n';
}

inline Hierarchy load_hierarchy(const fs::path& dir) {
  Hierarchy h;
  {
    auto in = open_in(dir / "hierarchy.json");
    auto j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded() || !j.contains("levels")) throw InputError("bad hierarchy.json");
    h.lambda_c = j.value("lambda_c", 0.0);
  }
  for (std::size_t i = 0;; ++i) {
    auto edges = dir / ("level_" + std::to_string(i) + ".edges");
    if (!fs::exists(edges)) break;
    auto g = load_graph(edges);
    auto ain = open_in(dir / ("level_" + std::to_string(i) + ".attrs.csv"));
    auto attrs = read_attribute_counts(ain);
    if (static_cast<std::size_t>(attrs.rows()) != g.num_nodes())
      throw InputError("level " + std::to_string(i) + " attribute rows do not match its graph");
    // Count rows follow the file's node order; realign to graph order.
    ain.clear();
    ain.seekg(0);
    std::string line;
    std::getline(ain, line);
    Eigen::MatrixXd aligned(attrs.rows(), attrs.cols());
    Eigen::Index r = 0;
    while (std::getline(ain, line)) {
      if (detail::trim(line).empty()) continue;
      auto id = detail::split_csv(line).at(0);
      auto idx = g.index_of(id);
      if (!idx) throw InputError("attribute row for unknown node '" + id + "'");
      aligned.row(*idx) = attrs.row(r++);
    }
    h.levels.push_back({std::move(g), AttributeMatrix(std::move(aligned), attrs.blocks())});
  }
  if (h.levels.empty()) throw InputError("hierarchy directory has no level_0.edges");
  for (std::size_t i = 0; i + 1 < h.levels.size(); ++i) {
    auto in = open_in(dir / ("merge_" + std::to_string(i) + ".map"));
    const auto& fine = h.levels[i].graph;
    const auto& coarse = h.levels[i + 1].graph;
    MergeMap mm;
    mm.parent.assign(fine.num_nodes(), -1);
    mm.num_coarse = coarse.num_nodes();
    std::string line;
    while (std::getline(in, line)) {
      auto tok = detail::split_ws(line);
      if (tok.empty()) continue;
      if (tok.size() != 2) throw InputError("merge map rows must be `child parent`");
      auto c = fine.index_of(std::string(tok[0]));
      auto p = coarse.index_of(std::string(tok[1]));
      if (!c || !p) throw InputError("merge map references an unknown node");
      mm.parent[*c] = *p;
    }
    for (auto p : mm.parent)
      if (p < 0) throw InputError("merge map leaves a node unmapped");
    h.merges.push_back(std::move(mm));
  }
  return h;
}

// ---------------------------------------------------------------------------
// Refinement model: text tensors plus a JSON sidecar.

inline void save_model(const fs::path& tensors, const fs::path& sidecar, const RefinementModel& m,
                       const RefineHyper& hyper) {
  {
    auto out = open_out(tensors);
    for (const auto& t : m.layers) {
      out << t.rows() << ' ' << t.cols() << '\n';
      for (Eigen::Index r = 0; r < t.rows(); ++r) {
        for (Eigen::Index c = 0; c < t.cols(); ++c) out << (c ? " " : "") << detail::format_double(t(r, c));
        out << '\n';
      }
    }
  }
  nlohmann::ordered_json j;
  j["activation"] = "tanh";
  j["dim"] = m.dim;
  j["attr_dim"] = m.attr_dim;
  auto shapes = nlohmann::ordered_json::array();
  for (const auto& t : m.layers) shapes.push_back({t.rows(), t.cols()});
  j["layers"] = shapes;
  j["lambda_r"] = hyper.lambda_r;
  j["gamma"] = hyper.gamma;
  j["epochs"] = hyper.epochs;
  j["learning_rate"] = hyper.learning_rate;
  j["init_seed"] = hyper.init_seed;
  auto out = open_out(sidecar);
  out << j.dump(2) << '\n';
}

inline RefinementModel load_model(const fs::path& tensors, const fs::path& sidecar) {
  auto sin = open_in(sidecar);
  auto j = nlohmann::json::parse(sin, nullptr, false);
  if (j.is_discarded() || !j.contains("layers")) throw InputError("bad model sidecar");
  RefinementModel m;
  m.dim = j.at("dim").get<Eigen::Index>();
  m.attr_dim = j.at("attr_dim").get<Eigen::Index>();
  auto in = open_in(tensors);
  for (const auto& shape : j.at("layers")) {
    Eigen::Index rows = 0, cols = 0;
    in >> rows >> cols;
    if (!in || rows != shape.at(0).get<Eigen::Index>() || cols != shape.at(1).get<Eigen::Index>() ||
        rows != m.dim + m.attr_dim || cols != m.dim)
      throw InputError("model tensor shape mismatch");
    Eigen::MatrixXd t(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < cols; ++c) {
        std::string tok;
        in >> tok;
        auto x = detail::parse_double(tok);
        if (!x) throw InputError("bad model tensor value");
        t(r, c) = *x;
      }
    m.layers.push_back(std::move(t));
  }
  return m;
}

inline void save_loss_trace(const fs::path& p, const std::vector<Losses>& trace) {
  auto out = open_out(p);
  out << "epoch,L_u,L_f,L\n";
  for (std::size_t i = 0; i < trace.size(); ++i)
    out << i << ',' << detail::format_double(trace[i].utility) << ','
        << detail::format_double(trace[i].fairness) << ',' << detail::format_double(trace[i].total) << '\n';
}

// ---------------------------------------------------------------------------
// Reports

inline nlohmann::ordered_json metrics_json(const EvalReport& r) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& [k, v] : r.metrics) j[k] = v;
  return j;
}

inline nlohmann::ordered_json timing_json(const EvalReport& r) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  double total = 0.0;
  for (const auto& [k, v] : r.timings) {
    j[k] = v;
    total += v;
  }
  j["time_seconds"] = total;
  return j;
}

inline void save_summary(const fs::path& p, const std::vector<MetricSummary>& rows) {
  auto out = open_out(p);
  out << "metric,mean,std\n";
  for (const auto& r : rows)
    out << r.metric << ',' << detail::format_double(r.mean) << ',' << detail::format_double(r.std) << '\n';
}

inline void save_json(const fs::path& p, const nlohmann::ordered_json& j) {
  auto out = open_out(p);
  out << j.dump(2) << '\n';
}

}  // namespace mlfair
