#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "mlfair/error.hpp"
#include "mlfair/graph.hpp"

namespace mlfair {

/// One categorical sensitive attribute and the columns it owns.
struct AttributeBlock {
  std::string name;
  std::vector<std::string> values;
  Eigen::Index offset = 0;

  Eigen::Index width() const { return static_cast<Eigen::Index>(values.size()); }
};

using AttributeSchema = std::vector<std::pair<std::string, std::vector<std::string>>>;

/// Raw per-node categorical assignments as read from a CSV file.
struct AttributeTable {
  std::vector<std::string> attribute_names;
  std::vector<std::string> node_ids;
  std::vector<std::vector<std::string>> values;  // values[row][attribute]
};

/// Per-node attribute distributions. At the finest level each row is a
/// concatenation of one-hot blocks; after coarsening a row counts how many
/// original nodes carry each value.
class AttributeMatrix {
 public:
  AttributeMatrix() = default;
  AttributeMatrix(Eigen::MatrixXd counts, std::vector<AttributeBlock> blocks)
      : counts_(std::move(counts)), blocks_(std::move(blocks)) {
    Eigen::Index total = 0;
    for (const auto& b : blocks_) {
      if (b.offset != total) throw InputError("attribute blocks must be contiguous");
      total += b.width();
    }
    if (total != counts_.cols()) throw InputError("attribute blocks do not cover every column");
  }

  Eigen::Index rows() const { return counts_.rows(); }
  Eigen::Index cols() const { return counts_.cols(); }
  const Eigen::MatrixXd& counts() const { return counts_; }
  auto row(Eigen::Index u) const { return counts_.row(u); }
  const std::vector<AttributeBlock>& blocks() const { return blocks_; }

  std::optional<std::size_t> find_attribute(const std::string& name) const {
    for (std::size_t k = 0; k < blocks_.size(); ++k)
      if (blocks_[k].name == name) return k;
    return std::nullopt;
  }

  /// Dominant value index of attribute k for every row (exact group id at
  /// the finest level). Ties resolve to the first value.
  std::vector<int> groups(std::size_t k) const {
    const auto& b = blocks_.at(k);
    std::vector<int> out(static_cast<std::size_t>(rows()));
    for (Eigen::Index u = 0; u < rows(); ++u) {
      Eigen::Index best = 0;
      counts_.row(u).segment(b.offset, b.width()).maxCoeff(&best);
      out[static_cast<std::size_t>(u)] = static_cast<int>(best);
    }
    return out;
  }

  std::vector<std::string> column_names() const {
    std::vector<std::string> out;
    for (const auto& b : blocks_)
      for (const auto& v : b.values) out.push_back(b.name + "=" + v);
    return out;
  }

 private:
  Eigen::MatrixXd counts_;
  std::vector<AttributeBlock> blocks_;
};

inline AttributeSchema infer_schema(const AttributeTable& table) {
  AttributeSchema schema;
  for (std::size_t k = 0; k < table.attribute_names.size(); ++k) {
    std::vector<std::string> vals;
    for (const auto& row : table.values) {
      if (std::find(vals.begin(), vals.end(), row[k]) == vals.end()) vals.push_back(row[k]);
    }
    schema.emplace_back(table.attribute_names[k], std::move(vals));
  }
  return schema;
}

/// Rows follow `node_order`; every node must be present in the table.
inline AttributeMatrix encode_one_hot(const AttributeTable& table, const AttributeSchema& schema,
                                      std::span<const std::string> node_order) {
  std::vector<AttributeBlock> blocks;
  std::vector<std::size_t> table_col;
  Eigen::Index m = 0;
  for (const auto& [name, vals] : schema) {
    auto it = std::find(table.attribute_names.begin(), table.attribute_names.end(), name);
    if (it == table.attribute_names.end()) throw InputError("attribute '" + name + "' not in table");
    table_col.push_back(static_cast<std::size_t>(it - table.attribute_names.begin()));
    blocks.push_back({name, vals, m});
    m += static_cast<Eigen::Index>(vals.size());
  }
  std::unordered_map<std::string, std::size_t> row_of;
  for (std::size_t r = 0; r < table.node_ids.size(); ++r) row_of.emplace(table.node_ids[r], r);

  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(node_order.size()), m);
  for (std::size_t u = 0; u < node_order.size(); ++u) {
    auto it = row_of.find(node_order[u]);
    if (it == row_of.end()) throw InputError("missing attributes for node '" + node_order[u] + "'");
    const auto& row = table.values[it->second];
    for (std::size_t k = 0; k < blocks.size(); ++k) {
      const auto& value = row[table_col[k]];
      const auto& vals = blocks[k].values;
      auto pos = std::find(vals.begin(), vals.end(), value);
      if (pos == vals.end())
        throw InputError("unknown value '" + value + "' for attribute '" + blocks[k].name + "'");
      s(static_cast<Eigen::Index>(u), blocks[k].offset + (pos - vals.begin())) = 1.0;
    }
  }
  return AttributeMatrix(std::move(s), std::move(blocks));
}

inline Eigen::VectorXd merge_rows(const Eigen::Ref<const Eigen::VectorXd>& a,
                                  const Eigen::Ref<const Eigen::VectorXd>& b) {
  if (a.size() != b.size()) throw InputError("attribute row dimension mismatch");
  return a + b;
}

/// KL-based divergence of two attribute distributions mapped into [0, 1].
/// Each row is normalized by its total L1 mass over all blocks. Returns
/// exactly 1 when `su` has mass where `sv` has none.
inline double divergence(const Eigen::Ref<const Eigen::VectorXd>& su,
                         const Eigen::Ref<const Eigen::VectorXd>& sv) {
  if (su.size() != sv.size()) throw InputError("attribute row dimension mismatch");
  const double mu = su.sum();
  const double mv = sv.sum();
  if (!(mu > 0.0) || !(mv > 0.0)) throw InputError("attribute row with zero mass");
  double kl = 0.0;
  for (Eigen::Index j = 0; j < su.size(); ++j) {
    if (su[j] <= 0.0) continue;
    if (sv[j] <= 0.0) return 1.0;
    const double p = su[j] / mu;
    const double q = sv[j] / mv;
    kl += p * std::log(p / q);
  }
  if (kl < 0.0) kl = 0.0;
  return 1.0 - 1.0 / (1.0 + kl);
}

inline Eigen::MatrixXd row_normalize(const Eigen::MatrixXd& s) {
  Eigen::MatrixXd out = s;
  for (Eigen::Index u = 0; u < s.rows(); ++u) {
    const double mass = s.row(u).sum();
    if (!(mass > 0.0)) throw InputError("attribute row " + std::to_string(u) + " has zero mass");
    out.row(u) /= mass;
  }
  return out;
}

namespace detail {

inline std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

inline std::vector<std::string> split_csv(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == ',') {
      out.push_back(trim(line.substr(start, i - start)));
      start = i + 1;
    }
  }
  return out;
}

}  // namespace detail

/// CSV with header `node,attr1,attr2,...`.
inline AttributeTable read_attribute_table(std::istream& in) {
  AttributeTable t;
  std::string line;
  std::size_t lineno = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    auto cells = detail::split_csv(line);
    if (!have_header) {
      if (cells.size() < 2) throw InputError("attribute header needs node and one attribute");
      t.attribute_names.assign(cells.begin() + 1, cells.end());
      have_header = true;
      continue;
    }
    if (cells.size() != t.attribute_names.size() + 1)
      throw InputError("attribute row at line " + std::to_string(lineno) + " has wrong arity");
    for (const auto& c : cells)
      if (c.empty()) throw InputError("empty attribute cell at line " + std::to_string(lineno));
    t.node_ids.push_back(cells[0]);
    t.values.emplace_back(cells.begin() + 1, cells.end());
  }
  if (!have_header) throw InputError("attribute table is empty");
  return t;
}

/// Explicit schema: one `attr=v1,v2,...` line per attribute.
inline AttributeSchema read_schema(std::istream& in) {
  AttributeSchema schema;
  std::string line;
  while (std::getline(in, line)) {
    auto t = detail::trim(line);
    if (t.empty() || t.front() == '#') continue;
    auto eq = t.find('=');
    if (eq == std::string::npos) throw InputError("schema line without '=': " + t);
    schema.emplace_back(detail::trim(std::string_view(t).substr(0, eq)),
                        detail::split_csv(std::string_view(t).substr(eq + 1)));
  }
  return schema;
}

/// Count-matrix form used for every hierarchy level:
/// header `node,attr=value,...`, one numeric row per node.
inline void write_attribute_counts(std::ostream& out, const AttributeMatrix& s,
                                   std::span<const std::string> node_ids) {
  out << "node";
  for (const auto& c : s.column_names()) out << ',' << c;
  out << '\n';
  for (Eigen::Index u = 0; u < s.rows(); ++u) {
    out << node_ids[static_cast<std::size_t>(u)];
    for (Eigen::Index j = 0; j < s.cols(); ++j) out << ',' << detail::format_double(s.counts()(u, j));
    out << '\n';
  }
}

inline AttributeMatrix read_attribute_counts(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw InputError("attribute count file is empty");
  auto header = detail::split_csv(line);
  if (header.size() < 2 || header[0] != "node") throw InputError("bad attribute count header");
  std::vector<AttributeBlock> blocks;
  Eigen::Index col = 0;
  for (std::size_t i = 1; i < header.size(); ++i, ++col) {
    auto eq = header[i].find('=');
    if (eq == std::string::npos) throw InputError("bad attribute column '" + header[i] + "'");
    auto name = header[i].substr(0, eq);
    auto value = header[i].substr(eq + 1);
    if (blocks.empty() || blocks.back().name != name) blocks.push_back({name, {}, col});
    blocks.back().values.push_back(value);
  }
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (detail::trim(line).empty()) continue;
    auto cells = detail::split_csv(line);
    if (cells.size() != header.size()) throw InputError("attribute count row has wrong arity");
    std::vector<double> r;
    for (std::size_t i = 1; i < cells.size(); ++i) {
      auto x = detail::parse_double(cells[i]);
      if (!x || *x < 0.0) throw InputError("bad attribute count '" + cells[i] + "'");
      r.push_back(*x);
    }
    rows.push_back(std::move(r));
  }
  Eigen::MatrixXd s(static_cast<Eigen::Index>(rows.size()), col);
  for (std::size_t u = 0; u < rows.size(); ++u)
    for (Eigen::Index j = 0; j < col; ++j) s(static_cast<Eigen::Index>(u), j) = rows[u][static_cast<std::size_t>(j)];
  return AttributeMatrix(std::move(s), std::move(blocks));
}

}  // namespace mlfair
