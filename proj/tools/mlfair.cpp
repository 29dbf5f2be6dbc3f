// mlfair command-line front end.
//
// Every subcommand accepts --seed and --config <file>; the config file holds
// key=value lines using the same names as the flags (dashes or underscores).
// Flags given on the command line override the file.
//
// Exit codes: 0 success, 2 input error (including bad flags), 3 numeric failure.

#include <CLI11.hpp>

#include <iostream>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "mlfair/mlfair.hpp"

namespace fm = mlfair;

namespace {

struct KeySpec {
  const char* key;
  const char* help;
};

// Keys shared with the config file, grouped by the subcommands that use them.
constexpr KeySpec kInputKeys[] = {
    {"edges", "edge list (`u v [w]` per line)"},
    {"attrs", "sensitive attribute CSV (`node,attr1,...`)"},
    {"schema", "optional schema file (`attr=v1,v2,...` per line)"},
};
constexpr KeySpec kCoarsenKeys[] = {
    {"levels", "coarsen level c"},
    {"lambda_c", "fairness weight in node matching, in [0,1]"},
};
constexpr KeySpec kEmbedKeys[] = {
    {"embedder", "base embedder: spectral | deepwalk"},
    {"dim", "embedding dimensionality"},
    {"walks_per_node", "deepwalk: walks per node"},
    {"walk_length", "deepwalk: walk length"},
    {"window", "deepwalk: context window"},
    {"negatives", "deepwalk: negative samples"},
    {"dw_epochs", "deepwalk: passes over the walk corpus"},
    {"dw_lr", "deepwalk: initial learning rate"},
};
constexpr KeySpec kRefineKeys[] = {
    {"lambda_r", "fairness weight in the refinement loss, in [0,1]"},
    {"gamma", "attribute divergence threshold for the fairness mask"},
    {"epochs", "refinement training epochs"},
    {"lr", "refinement learning rate"},
    {"layers", "refinement layer count"},
    {"normalize_base", "row-normalize the base embedding before refinement (true|false)"},
};
constexpr KeySpec kEvalKeys[] = {
    {"labels", "node labels CSV (`node,label`)"},
    {"runs", "number of evaluation runs with different splits"},
    {"train_ratio", "node-classification train share"},
    {"val_ratio", "node-classification validation share"},
    {"positive_classes", "advantaged classes, comma separated label names"},
    {"lp_ratio", "share of edges held out for link prediction"},
    {"clf_epochs", "linear classifier epochs"},
    {"clf_lr", "linear classifier learning rate"},
    {"clf_l2", "linear classifier L2 penalty"},
};
constexpr KeySpec kSynthKeys[] = {
    {"kind", "sbm | erdos"},
    {"n", "node count"},
    {"blocks", "SBM block count"},
    {"p_in", "intra-block edge probability"},
    {"p_out", "inter-block edge probability"},
    {"p_label", "edge probability between distinct blocks with the same planted label (default: p_out)"},
    {"groups", "sensitive attribute values"},
    {"rho", "probability that a node's attribute copies its block"},
    {"classes", "label classes"},
    {"label_noise", "probability a label is redrawn uniformly"},
    {"label_skew", "probability a group-0 node with label 0 is relabeled 1"},
    {"label_rule", "block (label = block mod classes) | cross (label = block / groups mod classes)"},
};

std::string flag_name(const std::string& key) {
  std::string f = key;
  for (auto& c : f)
    if (c == '_') c = '-';
  return "--" + f;
}

/// Raw flag values for one subcommand, merged with the config file after
/// parsing.
struct Command {
  CLI::App* app = nullptr;
  std::map<std::string, std::string> raw;
  std::map<std::string, CLI::Option*> opts;
  std::string config_path;

  template <std::size_t N>
  void keys(const KeySpec (&specs)[N]) {
    for (const auto& s : specs) add(s.key, s.help);
  }
  void add(const std::string& key, const std::string& help) {
    opts[key] = app->add_option(flag_name(key), raw[key], help);
  }

  fm::KeyValues merged() const {
    fm::KeyValues kv;
    if (!config_path.empty()) {
      auto in = fm::open_in(config_path);
      kv = fm::parse_key_values(in);
    }
    for (const auto& [key, opt] : opts) {
      if (opt->count() == 0) continue;
      bool replaced = false;
      for (auto& [k, v] : kv)
        if (k == key) {
          v = raw.at(key);
          replaced = true;
        }
      if (!replaced) kv.emplace_back(key, raw.at(key));
    }
    return kv;
  }
};

// Options bind into the command's own maps, so commands never move.
std::unique_ptr<Command> make_command(CLI::App& parent, const std::string& name, const std::string& desc) {
  auto c = std::make_unique<Command>();
  c->app = parent.add_subcommand(name, desc);
  c->app->add_option("--config", c->config_path, "key=value config file");
  c->add("seed", "random seed");
  return c;
}

// Splits merged keys between the pipeline config and the synthetic spec.
void apply_all(const fm::KeyValues& kv, fm::PipelineConfig& cfg, fm::SyntheticSpec* spec = nullptr) {
  for (const auto& [k, v] : kv) {
    bool used = fm::apply_key(cfg, k, v);
    if (spec) used = fm::apply_key(*spec, k, v) || used;
    if (!used) {
      fm::SyntheticSpec scratch;
      if (!fm::apply_key(scratch, k, v)) throw fm::InputError("unknown config key '" + k + "'");
    }
  }
  cfg.embedder.seed = cfg.seed;
  cfg.refine.init_seed = cfg.seed;
}

void emit_json(const nlohmann::ordered_json& j, const std::string& out) {
  if (!out.empty()) fm::save_json(out, j);
  std::cout << j.dump(2) << '\n';
}

std::pair<int, int> parse_level_range(const std::string& s) {
  auto dots = s.find("..");
  auto to_int = [&](const std::string& t) {
    auto x = fm::detail::to_int32("levels", t);
    if (x < 0) throw fm::InputError("levels must be >= 0");
    return x;
  };
  if (dots == std::string::npos) {
    int v = to_int(s);
    return {v, v};
  }
  return {to_int(s.substr(0, dots)), to_int(s.substr(dots + 2))};
}

std::string require(const std::string& value, const char* key) {
  if (value.empty()) throw fm::InputError(std::string("missing required --") + key);
  return value;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mlfair: fairness-aware multi-level graph embedding"};
  app.require_subcommand(1, 1);

  auto coarsen = make_command(app, "coarsen", "build a coarsening hierarchy");
  coarsen->keys(kInputKeys);
  coarsen->keys(kCoarsenKeys);
  coarsen->add("out", "output hierarchy directory");

  auto embed = make_command(app, "embed", "run the base embedder on a graph");
  embed->add("edges", "edge list");
  embed->keys(kEmbedKeys);
  embed->add("out", "output embedding file");

  std::string refine_hierarchy, refine_embedding;
  auto refine = make_command(app, "refine", "train the refinement model and refine to the finest level");
  refine->app->add_option("--hierarchy", refine_hierarchy, "hierarchy directory from `coarsen`")->required();
  refine->app->add_option("--embedding", refine_embedding, "base embedding of the coarsest level")->required();
  refine->keys(kRefineKeys);
  refine->add("out", "output directory");

  std::string nc_embedding;
  auto eval_nc = make_command(app, "eval-nc", "node classification utility and fairness");
  eval_nc->app->add_option("--embedding", nc_embedding, "embedding file")->required();
  eval_nc->add("attrs", "sensitive attribute CSV");
  eval_nc->add("schema", "optional schema file");
  eval_nc->keys(kEvalKeys);
  eval_nc->add("out", "report JSON path");

  std::string lp_embedding;
  auto eval_lp = make_command(app, "eval-lp", "link prediction utility and fairness");
  eval_lp->app->add_option("--embedding", lp_embedding, "embedding trained on the split's train graph")->required();
  eval_lp->keys(kInputKeys);
  eval_lp->keys(kEvalKeys);
  eval_lp->add("out", "report JSON path");

  auto pipeline = make_command(app, "pipeline", "coarsen, embed, refine and evaluate");
  pipeline->keys(kInputKeys);
  pipeline->keys(kCoarsenKeys);
  pipeline->keys(kEmbedKeys);
  pipeline->keys(kRefineKeys);
  pipeline->keys(kEvalKeys);
  pipeline->add("task", "nc | lp");
  pipeline->add("out", "output directory");

  auto synth = make_command(app, "synth", "generate a planted-partition graph with attributes and labels");
  synth->keys(kSynthKeys);
  synth->add("out", "output directory");

  std::string thm_embedding, thm_attribute, thm_out;
  double thm_tol = 1e-3;
  auto theorem = make_command(app, "check-theorem1", "group mean-embedding gap versus its bound");
  theorem->app->add_option("--embedding", thm_embedding, "unit-row embedding file")->required();
  theorem->app->add_option("--attribute", thm_attribute, "attribute name (default: first)");
  theorem->app->add_option("--tol", thm_tol, "tolerance added to the bound");
  theorem->keys(kInputKeys);
  theorem->app->add_option("--out", thm_out, "report JSON path");

  std::string bench_levels = "0..4", bench_out;
  auto bench = make_command(app, "bench", "phase timings across coarsen levels");
  bench->keys(kInputKeys);
  bench->add(kCoarsenKeys[1].key, kCoarsenKeys[1].help);
  bench->keys(kEmbedKeys);
  bench->keys(kRefineKeys);
  bench->keys(kSynthKeys);
  bench->app->add_option("--levels", bench_levels, "level range a..b");
  bench->app->add_option("--out", bench_out, "CSV path (stdout when omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "error: " << e.what() << "\n\n";
    auto subs = app.get_subcommands();
    std::cerr << (subs.empty() ? app.help() : subs.front()->help());
    return 2;
  }

  try {
    fm::PipelineConfig cfg;
    if (*coarsen->app) {
      apply_all(coarsen->merged(), cfg);
      cfg.validate();
      auto g = fm::load_graph(require(cfg.edges, "edges"));
      auto s = fm::load_attributes(require(cfg.attrs, "attrs"), g, cfg.schema);
      auto h = fm::coarsen_hierarchy(g, s, cfg.levels, cfg.lambda_c);
      fm::save_hierarchy(require(cfg.out, "out"), h);
      for (std::size_t i = 0; i < h.levels.size(); ++i)
        std::cout << "level " << i << ": " << h.levels[i].graph.num_nodes() << " nodes, "
                  << h.levels[i].graph.num_edges() << " edges\n";
    } else if (*embed->app) {
      apply_all(embed->merged(), cfg);
      cfg.validate();
      auto g = fm::load_graph(require(cfg.edges, "edges"));
      auto e = fm::embed(g, cfg.embedder);
      fm::save_embedding(require(cfg.out, "out"), e, g.names());
    } else if (*refine->app) {
      apply_all(refine->merged(), cfg);
      cfg.validate();
      auto h = fm::load_hierarchy(refine_hierarchy);
      const auto& coarsest = h.coarsest();
      auto base = fm::align_embedding(fm::load_embedding(refine_embedding), coarsest.graph.names());
      const Eigen::MatrixXd ec = cfg.normalize_base ? fm::normalize_nonzero_rows(base.values) : base.values;
      auto tr = fm::train_refiner(coarsest.graph, coarsest.attrs, ec, cfg.refine);
      auto e0 = fm::refine_all(h, ec, tr.model);
      const fm::fs::path out = require(cfg.out, "out");
      fm::save_embedding(out / "embedding.txt", e0, h.levels[0].graph.names());
      fm::save_model(out / "model.txt", out / "model.json", tr.model, cfg.refine);
      fm::save_loss_trace(out / "loss_trace.csv", tr.trace);
    } else if (*eval_nc->app) {
      apply_all(eval_nc->merged(), cfg);
      cfg.validate();
      auto ne = fm::load_embedding(nc_embedding);
      // Node order comes from the embedding file.
      std::vector<fm::NamedEdge> none;
      auto g = fm::build_graph(none, ne.node_ids);
      auto s = fm::load_attributes(require(cfg.attrs, "attrs"), g, cfg.schema);
      auto ls = fm::load_labels(require(cfg.labels, "labels"), g);
      fm::NcConfig nc{cfg.split, 0, fm::detail::resolve_advantaged(cfg, ls), cfg.classifier};
      std::vector<fm::EvalReport> runs;
      for (int r = 0; r < cfg.runs; ++r) {
        nc.seed = cfg.seed + static_cast<std::uint64_t>(r);
        runs.push_back(fm::nc_evaluate(ne.embedding.values, ls.labels, fm::group_columns(s), nc).report);
      }
      fm::EvalReport mean;
      for (const auto& m : fm::summarize(runs)) mean.set(m.metric, m.mean);
      emit_json(fm::metrics_json(mean), cfg.out);
    } else if (*eval_lp->app) {
      apply_all(eval_lp->merged(), cfg);
      cfg.validate();
      auto g = fm::load_graph(require(cfg.edges, "edges"));
      auto s = fm::load_attributes(require(cfg.attrs, "attrs"), g, cfg.schema);
      auto e = fm::align_embedding(fm::load_embedding(lp_embedding), g.names());
      auto split = fm::lp_split(g, cfg.lp_ratio, cfg.seed);
      auto res = fm::lp_evaluate(e.values, split, fm::group_columns(s), cfg.classifier);
      emit_json(fm::metrics_json(res.report), cfg.out);
    } else if (*pipeline->app) {
      apply_all(pipeline->merged(), cfg);
      auto res = fm::run_pipeline(cfg);
      auto j = fm::metrics_json(res.report);
      std::cout << j.dump(2) << '\n';
    } else if (*synth->app) {
      fm::SyntheticSpec spec;
      apply_all(synth->merged(), cfg, &spec);
      auto sg = fm::generate_synthetic(spec);
      const fm::fs::path out = require(cfg.out, "out");
      fm::save_graph(out / "edges.txt", sg.graph);
      fm::save_attribute_table(out / "attrs.csv", sg.attributes);
      fm::save_labels(out / "labels.csv", sg.graph.names(), sg.label);
      std::cout << sg.graph.num_nodes() << " nodes, " << sg.graph.num_edges() << " edges\n";
    } else if (*theorem->app) {
      apply_all(theorem->merged(), cfg);
      auto g = fm::load_graph(require(cfg.edges, "edges"));
      auto s = fm::load_attributes(require(cfg.attrs, "attrs"), g, cfg.schema);
      auto e = fm::align_embedding(fm::load_embedding(thm_embedding), g.names());
      std::size_t k = 0;
      if (!thm_attribute.empty()) {
        auto found = s.find_attribute(thm_attribute);
        if (!found) throw fm::InputError("no attribute named '" + thm_attribute + "'");
        k = *found;
      }
      auto rep = fm::theorem1_check(e.values, s.groups(k), g, thm_tol);
      nlohmann::ordered_json j;
      j["attribute"] = s.blocks()[k].name;
      j["normalized"] = e.normalized;
      j["beta"] = rep.beta;
      auto pairs = nlohmann::ordered_json::array();
      for (const auto& p : rep.pairs)
        pairs.push_back({{"p", s.blocks()[k].values[static_cast<std::size_t>(p.p)]},
                         {"q", s.blocks()[k].values[static_cast<std::size_t>(p.q)]},
                         {"lhs", p.lhs},
                         {"bound", p.bound},
                         {"holds", p.holds}});
      j["pairs"] = pairs;
      j["all_hold"] = rep.all_hold;
      emit_json(j, thm_out);
    } else if (*bench->app) {
      fm::SyntheticSpec spec;
      apply_all(bench->merged(), cfg, &spec);
      auto [from, to] = parse_level_range(bench_levels);
      fm::Graph g;
      fm::AttributeMatrix s;
      if (!cfg.edges.empty()) {
        g = fm::load_graph(cfg.edges);
        s = fm::load_attributes(require(cfg.attrs, "attrs"), g, cfg.schema);
      } else {
        auto sg = fm::generate_synthetic(spec);
        g = sg.graph;
        s = fm::encode_one_hot(sg.attributes, fm::infer_schema(sg.attributes), g.names());
      }
      auto rows = fm::bench_levels(g, s, cfg, from, to);
      if (!bench_out.empty()) {
        auto out = fm::open_out(bench_out);
        fm::write_bench_csv(out, rows);
      }
      fm::write_bench_csv(std::cout, rows);
    }
  } catch (const fm::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return 3;
  } catch (const fm::InputError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
