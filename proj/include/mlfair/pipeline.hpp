#pragma once

#include <chrono>
#include <filesystem>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "mlfair/attributes.hpp"
#include "mlfair/coarsen.hpp"
#include "mlfair/config.hpp"
#include "mlfair/downstream.hpp"
#include "mlfair/embed.hpp"
#include "mlfair/io.hpp"
#include "mlfair/refine.hpp"

namespace mlfair {

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

/// In-memory result of coarsen -> base embed -> refine.
struct MlfairOutput {
  Hierarchy hierarchy;
  Embedding base;             // raw embedder output on the coarsest graph
  TrainResult training;
  Embedding embedding;        // E_0, unit rows
  double coarsen_seconds = 0.0;
  double embed_seconds = 0.0;
  double refine_seconds = 0.0;
};

inline MlfairOutput run_mlfair(const Graph& g, const AttributeMatrix& s, const PipelineConfig& cfg) {
  cfg.validate();
  MlfairOutput out;
  {
    Stopwatch sw;
    out.hierarchy = coarsen_hierarchy(g, s, cfg.levels, cfg.lambda_c);
    out.coarsen_seconds = sw.seconds();
  }
  const auto& coarsest = out.hierarchy.coarsest();
  {
    Stopwatch sw;
    auto ecfg = cfg.embedder;
    ecfg.seed = cfg.seed;
    out.base = embed(coarsest.graph, ecfg);
    out.embed_seconds = sw.seconds();
  }
  {
    Stopwatch sw;
    const Eigen::MatrixXd ec = cfg.normalize_base ? normalize_nonzero_rows(out.base.values) : out.base.values;
    auto hyper = cfg.refine;
    hyper.init_seed = cfg.seed;
    out.training = train_refiner(coarsest.graph, coarsest.attrs, ec, hyper);
    out.embedding = refine_all(out.hierarchy, ec, out.training.model);
    out.refine_seconds = sw.seconds();
  }
  return out;
}

struct PipelineResult {
  EvalReport report;              // mean over runs
  std::vector<EvalReport> runs;
  MlfairOutput first_run;
};

namespace detail {

inline std::vector<int> resolve_advantaged(const PipelineConfig& cfg, const LabelSet& ls) {
  std::vector<int> adv;
  for (const auto& name : cfg.positive_classes) {
    auto it = std::find(ls.class_names.begin(), ls.class_names.end(), name);
    if (it == ls.class_names.end()) throw InputError("positive class '" + name + "' is not a label");
    adv.push_back(static_cast<int>(it - ls.class_names.begin()));
  }
  return adv;
}

inline void commit_staging(const fs::path& staging, const fs::path& out) {
  fs::create_directories(out);
  for (const auto& entry : fs::directory_iterator(staging)) {
    auto target = out / entry.path().filename();
    fs::remove_all(target);
    fs::rename(entry.path(), target);
  }
  fs::remove_all(staging);
}

}  // namespace detail

/// File-based end-to-end run. Artifacts are written to a staging directory
/// and moved into cfg.out only when every phase succeeded.
inline PipelineResult run_pipeline(const PipelineConfig& cfg) {
  cfg.validate();
  if (cfg.edges.empty() || cfg.attrs.empty()) throw InputError("pipeline needs edges and attrs");
  if (cfg.task == Task::nc && cfg.labels.empty()) throw InputError("node classification needs labels");

  Stopwatch total;
  const auto g = load_graph(cfg.edges);
  const auto s = load_attributes(cfg.attrs, g, cfg.schema);
  const auto groups = group_columns(s);

  PipelineResult res;
  double eval_seconds = 0.0;
  if (cfg.task == Task::nc) {
    const auto ls = load_labels(cfg.labels, g);
    res.first_run = run_mlfair(g, s, cfg);
    Stopwatch sw;
    NcConfig nc{cfg.split, 0, detail::resolve_advantaged(cfg, ls), cfg.classifier};
    for (int r = 0; r < cfg.runs; ++r) {
      nc.seed = cfg.seed + static_cast<std::uint64_t>(r);
      res.runs.push_back(nc_evaluate(res.first_run.embedding.values, ls.labels, groups, nc).report);
    }
    eval_seconds = sw.seconds();
  } else {
    for (int r = 0; r < cfg.runs; ++r) {
      const auto seed = cfg.seed + static_cast<std::uint64_t>(r);
      auto split = lp_split(g, cfg.lp_ratio, seed);
      auto run_cfg = cfg;
      run_cfg.seed = seed;
      auto out = run_mlfair(split.train_graph, s, run_cfg);
      Stopwatch sw;
      res.runs.push_back(lp_evaluate(out.embedding.values, split, groups, cfg.classifier).report);
      eval_seconds += sw.seconds();
      if (r == 0) res.first_run = std::move(out);
    }
  }

  for (const auto& m : summarize(res.runs)) res.report.set(m.metric, m.mean);
  res.report.timings = {{"coarsen_s", res.first_run.coarsen_seconds},
                        {"embed_s", res.first_run.embed_seconds},
                        {"refine_s", res.first_run.refine_seconds},
                        {"eval_s", eval_seconds}};

  if (!cfg.out.empty()) {
    const fs::path out = cfg.out;
    const fs::path staging = out.string() + ".partial";
    fs::remove_all(staging);
    try {
      fs::create_directories(staging);
      const auto& fo = res.first_run;
      save_hierarchy(staging / "hierarchy", fo.hierarchy);
      save_embedding(staging / "base_embedding.txt", fo.base, fo.hierarchy.coarsest().graph.names());
      save_embedding(staging / "embedding.txt", fo.embedding, g.names());
      auto hyper = cfg.refine;
      hyper.init_seed = cfg.seed;
      save_model(staging / "model.txt", staging / "model.json", fo.training.model, hyper);
      save_loss_trace(staging / "loss_trace.csv", fo.training.trace);
      save_json(staging / "report.json", metrics_json(res.report));
      auto timing = timing_json(res.report);
      timing["total_s"] = total.seconds();
      save_json(staging / "timing.json", timing);
      if (cfg.runs > 1) save_summary(staging / "summary.csv", summarize(res.runs));
      auto cout = open_out(staging / "config.txt");
      cout << to_text(cfg);
      cout.close();
      detail::commit_staging(staging, out);
    } catch (...) {
      std::error_code ec;
      fs::remove_all(staging, ec);
      throw;
    }
  }
  return res;
}

struct BenchRow {
  int level = 0;
  std::size_t nodes = 0;
  std::size_t edges = 0;
  double coarsen_s = 0.0;
  double embed_s = 0.0;
  double refine_s = 0.0;
  double total_s = 0.0;
};

/// Phase timings of the embedding pipeline for each coarsen level.
inline std::vector<BenchRow> bench_levels(const Graph& g, const AttributeMatrix& s, PipelineConfig cfg,
                                          int from, int to) {
  if (from < 0 || to < from) throw InputError("bench level range must satisfy 0 <= from <= to");
  std::vector<BenchRow> rows;
  for (int level = from; level <= to; ++level) {
    cfg.levels = level;
    Stopwatch sw;
    auto out = run_mlfair(g, s, cfg);
    BenchRow r;
    r.total_s = sw.seconds();
    r.level = level;
    r.nodes = out.hierarchy.coarsest().graph.num_nodes();
    r.edges = out.hierarchy.coarsest().graph.num_edges();
    r.coarsen_s = out.coarsen_seconds;
    r.embed_s = out.embed_seconds;
    r.refine_s = out.refine_seconds;
    rows.push_back(r);
  }
  return rows;
}

inline void write_bench_csv(std::ostream& out, const std::vector<BenchRow>& rows) {
  out << "level,nodes,edges,coarsen_s,embed_s,refine_s,total_s\n";
  for (const auto& r : rows)
    out << r.level << ',' << r.nodes << ',' << r.edges << ',' << detail::format_double(r.coarsen_s) << ','
        << detail::format_double(r.embed_s) << ',' << detail::format_double(r.refine_s) << ','
        << detail::format_double(r.total_s) << '\n';
}

}  // namespace mlfair
