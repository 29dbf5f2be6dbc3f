#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "mlfair/mlfair.hpp"
#include "test_util.hpp"

using namespace mlfair;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("mlfair_test_" + tag + "_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

SyntheticGraph small_synthetic(std::uint64_t seed = 1) {
  SyntheticSpec spec;
  spec.n = 300;
  spec.p_in = 0.08;
  spec.p_out = 0.01;
  spec.seed = seed;
  return generate_synthetic(spec);
}

void write_dataset(const fs::path& dir, const SyntheticGraph& sg) {
  save_graph(dir / "edges.txt", sg.graph);
  save_attribute_table(dir / "attrs.csv", sg.attributes);
  save_labels(dir / "labels.csv", sg.graph.names(), sg.label);
}

}  // namespace

TEST(Config, TextRoundTripIsIdempotent) {
  PipelineConfig c;
  c.edges = "a.txt";
  c.levels = 3;
  c.lambda_c = 0.25;
  c.refine.learning_rate = 0.00123;
  c.embedder.kind = EmbedderKind::deepwalk;
  c.positive_classes = {"yes", "maybe"};
  c.normalize_base = false;
  c.seed = 42;
  const auto text = to_text(c);
  auto back = parse_config(text);
  EXPECT_EQ(to_text(back), text);
  EXPECT_EQ(back.levels, 3);
  EXPECT_EQ(back.refine.learning_rate, 0.00123);
  EXPECT_EQ(back.positive_classes, c.positive_classes);
  EXPECT_EQ(back.embedder.seed, 42u);
}

TEST(Config, ParsingRules) {
  auto c = parse_config("# comment\n\nlevels = 4\nlevels=1\ngamma=0.3\n");
  EXPECT_EQ(c.levels, 1);
  EXPECT_EQ(c.refine.gamma, 0.3);
  EXPECT_THROW(parse_config("levles=2\n"), InputError);
  EXPECT_THROW(parse_config("levels=two\n"), InputError);
  EXPECT_THROW(parse_config("no equals sign\n"), InputError);
  EXPECT_THROW(parse_config("task=regression\n"), InputError);
  auto bad = parse_config("lambda_c=1.5\n");
  EXPECT_THROW(bad.validate(), InputError);
}

TEST(Config, Defaults) {
  PipelineConfig c;
  EXPECT_EQ(c.levels, 2);
  EXPECT_EQ(c.lambda_c, 0.5);
  EXPECT_EQ(c.refine.lambda_r, 0.5);
  EXPECT_EQ(c.refine.gamma, 0.5);
  EXPECT_EQ(c.refine.epochs, 200);
  EXPECT_EQ(c.refine.learning_rate, 1e-3);
  EXPECT_EQ(c.refine.layers, 2);
  EXPECT_EQ(c.embedder.dim, 128);
  EXPECT_NO_THROW(c.validate());
}

TEST(HierarchyIo, RoundTrip) {
  std::mt19937_64 rng(2);
  auto g = testutil::random_graph(rng, 50, 0.1, true);
  auto s = testutil::random_groups(rng, 50, 3);
  auto h = coarsen_hierarchy(g, s, 3, 0.5);
  TempDir tmp("hier");
  save_hierarchy(tmp.path / "h", h);
  auto back = load_hierarchy(tmp.path / "h");
  ASSERT_EQ(back.depth(), h.depth());
  EXPECT_EQ(back.lambda_c, h.lambda_c);
  for (std::size_t i = 0; i < h.levels.size(); ++i) {
    EXPECT_EQ(back.levels[i].graph.num_nodes(), h.levels[i].graph.num_nodes());
    EXPECT_EQ(back.levels[i].graph.names(), h.levels[i].graph.names());
    EXPECT_EQ(testutil::dense_adjacency(back.levels[i].graph), testutil::dense_adjacency(h.levels[i].graph));
    EXPECT_EQ(back.levels[i].attrs.counts(), h.levels[i].attrs.counts());
  }
  for (std::size_t i = 0; i < h.merges.size(); ++i) EXPECT_EQ(back.merges[i].parent, h.merges[i].parent);
}

TEST(ModelIo, RoundTripAndShapeCheck) {
  auto m = init_model(5, 3, 2, 9);
  TempDir tmp("model");
  RefineHyper hyper;
  save_model(tmp.path / "m.txt", tmp.path / "m.json", m, hyper);
  auto back = load_model(tmp.path / "m.txt", tmp.path / "m.json");
  ASSERT_EQ(back.depth(), 2u);
  for (std::size_t i = 0; i < 2; ++i) EXPECT_EQ(back.layers[i], m.layers[i]);

  std::ofstream(tmp.path / "m.txt") << "2 2\n1 2\n3 4\n";
  EXPECT_THROW(load_model(tmp.path / "m.txt", tmp.path / "m.json"), InputError);
  EXPECT_THROW(load_model(tmp.path / "missing.txt", tmp.path / "m.json"), InputError);
}

TEST(LabelsIo, NamesAndNumbers) {
  auto g = testutil::unit_graph(3, {{0, 1}, {1, 2}});
  TempDir tmp("labels");
  std::ofstream(tmp.path / "a.csv") << "node,label\n2,yes\n0,no\n1,yes\n";
  auto ls = load_labels(tmp.path / "a.csv", g);
  ASSERT_EQ(ls.labels.size(), 3u);
  EXPECT_EQ(ls.class_names[static_cast<std::size_t>(ls.labels[0])], "no");
  EXPECT_EQ(ls.labels[1], ls.labels[2]);

  save_labels(tmp.path / "b.csv", g.names(), {1, 0, 1});
  auto nb = load_labels(tmp.path / "b.csv", g);
  EXPECT_EQ(nb.labels, (std::vector<int>{1, 0, 1}));

  std::ofstream(tmp.path / "c.csv") << "0,1\n1,0\n";
  EXPECT_THROW(load_labels(tmp.path / "c.csv", g), InputError);
}

TEST(Synthetic, PerfectAttributeTieAndDeterminism) {
  SyntheticSpec spec;
  spec.n = 200;
  spec.blocks = 4;
  spec.rho = 1.0;
  auto sg = generate_synthetic(spec);
  for (std::size_t u = 0; u < 200; ++u) EXPECT_EQ(sg.group[u], sg.block[u] % 2);
  auto again = generate_synthetic(spec);
  EXPECT_EQ(testutil::dense_adjacency(again.graph), testutil::dense_adjacency(sg.graph));
  EXPECT_EQ(again.label, sg.label);
  spec.seed = 1;
  EXPECT_NE(generate_synthetic(spec).label, sg.label);
}

TEST(Synthetic, EqualProbabilitiesHaveNoCommunityStructure) {
  SyntheticSpec spec;
  spec.n = 1000;
  spec.blocks = 2;
  spec.p_in = 0.02;
  spec.p_out = 0.02;
  auto sg = generate_synthetic(spec);
  // Newman modularity of the block partition; near zero without structure.
  const double m = static_cast<double>(sg.graph.num_edges());
  double intra = 0.0;
  std::vector<double> deg_sum(2, 0.0);
  for (const auto& e : sg.graph.edges()) intra += sg.block[static_cast<std::size_t>(e.u)] == sg.block[static_cast<std::size_t>(e.v)] ? 1 : 0;
  for (std::size_t u = 0; u < 1000; ++u) deg_sum[static_cast<std::size_t>(sg.block[u])] += sg.graph.degree(static_cast<NodeId>(u));
  const double q = intra / m - (deg_sum[0] * deg_sum[0] + deg_sum[1] * deg_sum[1]) / (4 * m * m);
  EXPECT_NEAR(q, 0.0, 0.02);
  EXPECT_NEAR(m / (1000.0 * 999 / 2), 0.02, 0.002);
}

TEST(Synthetic, CrossRuleDecouplesLabelsFromGroups) {
  SyntheticSpec spec;
  spec.n = 800;
  spec.blocks = 4;
  spec.rho = 1.0;
  spec.label_noise = 0.0;
  spec.label_rule = "cross";
  auto sg = generate_synthetic(spec);
  for (std::size_t u = 0; u < 800; ++u) EXPECT_EQ(sg.label[u], sg.block[u] / 2);
  spec.label_rule = "diagonal";
  EXPECT_THROW(generate_synthetic(spec), InputError);
}

TEST(Pipeline, NoCoarseningBaseMatchesEmbedder) {
  auto sg = small_synthetic();
  auto s = encode_one_hot(sg.attributes, infer_schema(sg.attributes), sg.graph.names());
  PipelineConfig cfg;
  cfg.levels = 0;
  cfg.embedder.dim = 8;
  cfg.refine.epochs = 5;
  cfg.seed = 3;
  auto out = run_mlfair(sg.graph, s, cfg);
  auto direct = embed(sg.graph, {EmbedderKind::spectral, 8, 3, {}});
  EXPECT_TRUE(out.base.values == direct.values);
  EXPECT_EQ(out.embedding.rows(), 300);
  EXPECT_EQ(out.hierarchy.depth(), 0);
}

TEST(Pipeline, FileRunIsByteDeterministic) {
  TempDir tmp("pipe");
  write_dataset(tmp.path, small_synthetic());
  PipelineConfig cfg;
  cfg.edges = (tmp.path / "edges.txt").string();
  cfg.attrs = (tmp.path / "attrs.csv").string();
  cfg.labels = (tmp.path / "labels.csv").string();
  cfg.embedder.dim = 16;
  cfg.refine.epochs = 20;
  cfg.runs = 2;
  cfg.out = (tmp.path / "a").string();
  run_pipeline(cfg);
  cfg.out = (tmp.path / "b").string();
  run_pipeline(cfg);
  for (const char* f : {"report.json", "embedding.txt", "base_embedding.txt", "model.txt", "model.json",
                        "loss_trace.csv", "summary.csv", "hierarchy/merge_0.map"}) {
    ASSERT_TRUE(fs::exists(tmp.path / "a" / f)) << f;
    EXPECT_EQ(slurp(tmp.path / "a" / f), slurp(tmp.path / "b" / f)) << f;
  }
  EXPECT_TRUE(fs::exists(tmp.path / "a" / "timing.json"));
  EXPECT_FALSE(fs::exists(tmp.path / "a.partial"));
  EXPECT_EQ(slurp(tmp.path / "a" / "report.json").find("_s\""), std::string::npos);

  auto e = load_embedding(tmp.path / "a" / "embedding.txt");
  for (Eigen::Index r = 0; r < e.embedding.rows(); ++r) EXPECT_NEAR(e.embedding.values.row(r).norm(), 1.0, 1e-6);
}

TEST(Pipeline, LinkPredictionRun) {
  TempDir tmp("lp");
  write_dataset(tmp.path, small_synthetic(2));
  PipelineConfig cfg;
  cfg.task = Task::lp;
  cfg.edges = (tmp.path / "edges.txt").string();
  cfg.attrs = (tmp.path / "attrs.csv").string();
  cfg.embedder.dim = 16;
  cfg.refine.epochs = 10;
  auto res = run_pipeline(cfg);
  EXPECT_TRUE(res.report.has("auroc"));
  EXPECT_TRUE(res.report.has("delta_dp_lp"));
}

TEST(Pipeline, FailureLeavesNoOutput) {
  TempDir tmp("fail");
  PipelineConfig cfg;
  cfg.edges = (tmp.path / "missing.txt").string();
  cfg.attrs = (tmp.path / "missing.csv").string();
  cfg.labels = (tmp.path / "missing_labels.csv").string();
  cfg.out = (tmp.path / "out").string();
  EXPECT_THROW(run_pipeline(cfg), InputError);
  EXPECT_FALSE(fs::exists(tmp.path / "out"));
}
