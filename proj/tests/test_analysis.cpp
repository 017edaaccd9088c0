#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "straw/analysis.hpp"
#include "straw/charstream.hpp"

using namespace straw;
namespace fs = std::filesystem;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  REQUIRE(f.good());
  return std::string(std::istreambuf_iterator<char>(f), {});
}

fs::path fresh_dir(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("straw_an_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

ExperimentConfig tiny_cfg() {
  ExperimentConfig cfg;
  cfg.task = TaskKind::maze;
  cfg.agent = AgentKind::strawe;
  cfg.seed = 5;
  cfg.workers = 1;
  cfg.plan_horizon = 10;
  cfg.plan_filters = 3;
  cfg.xi_dim = 8;
  cfg.h_hidden = 8;
  cfg.channel_dim = 8;
  cfg.feature_dim = 12;
  cfg.conv_channels = 4;
  cfg.maze_size = 5;
  cfg.max_episode_steps = 30;
  return cfg;
}

void fresh_store(ParamStore& store, const ExperimentConfig& cfg) {
  Rng init(cfg.seed, 0);
  auto agent = make_agent(cfg, init);
  register_params(*agent, store);
  config_to_meta(cfg, store);
}

}  // namespace

TEST_CASE("walk endpoint distribution matches a hand case and sums to one") {
  // 4x4 open room: corridor is the 2x2 block, one step from (1,1) reaches
  // (1,2) or (2,1) with equal mass
  MazeWorld room = MazeWorld::open_room(4);
  auto p = walk_endpoint_distribution(room, 1, 1, 1);
  REQUIRE(p.size() == 16u);
  CHECK(p[1 * 4 + 2] == doctest::Approx(0.5));
  CHECK(p[2 * 4 + 1] == doctest::Approx(0.5));
  CHECK(p[1 * 4 + 1] == 0.0);

  // two steps: half the mass walks back to the start, conditioning removes it
  auto p2 = walk_endpoint_distribution(room, 1, 1, 2);
  CHECK(p2[1 * 4 + 1] == 0.0);
  CHECK(p2[2 * 4 + 2] == doctest::Approx(1.0));

  Rng rng(31, 0);
  MazeWorld m = MazeWorld::generate(9, rng);
  for (int walk : {1, 2, 5}) {
    auto q = walk_endpoint_distribution(m, m.agent_r, m.agent_c, walk);
    double sum = 0;
    for (double v : q) sum += v;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(q[static_cast<size_t>(m.agent_r) * m.size + m.agent_c] == 0.0);
  }

  CHECK_THROWS_AS(walk_endpoint_distribution(room, 0, 0, 1), ContractError);
}

TEST_CASE("optimal-return oracles at walk length one") {
  Rng rng(32, 0);
  MazeWorld m = MazeWorld::generate(11, rng);
  // every one-step endpoint is adjacent, so the optimal return is the goal
  // reward exactly, for the exact expectation and the sampled mean alike
  CHECK(expected_optimal_return_exact(m, 1) == doctest::Approx(0.1).epsilon(1e-6));
  Rng rng2(33, 0);
  CHECK(sampled_optimal_mean(7, 1, 64, 0.1f, rng2) == doctest::Approx(0.1).epsilon(1e-6));

  // longer walks cannot beat the goal reward
  CHECK(expected_optimal_return_exact(m, 4) <= 0.1 + 1e-12);

  // the random-policy floor is strictly worse than optimal
  Rng rng3(34, 0);
  double floor = sampled_random_policy_mean(7, 2, 32, 0.1f, 100, rng3);
  Rng rng4(34, 0);
  double opt = sampled_optimal_mean(7, 2, 32, 0.1f, rng4);
  CHECK(floor < opt);
}

TEST_CASE("commitment curve buckets and averages") {
  std::string text =
      "step,worker,episode_return,episode_length,replan_fraction,kl_mean,entropy,loss,lr\n"
      "0,0,0,1,1,0,0,0,0\n"
      "4,0,0,1,0.5,0,0,0,0\n"
      "5,0,0,1,0.25,0,0,0,0\n"
      "9,0,0,1,0.75,0,0,0,0\n"
      "23,0,0,1,0,0,0,0,0\n";
  CsvTable metrics = parse_csv(text);
  CsvTable curve = commitment_curve(metrics, 5);
  REQUIRE(curve.header == std::vector<std::string>{"epoch", "committed_fraction"});
  REQUIRE(curve.rows.size() == 3);
  // epoch 0: committed 0 and 0.5 -> 0.25; epoch 1: 0.75 and 0.25 -> 0.5; epoch 4: 1
  CHECK(curve.rows[0][0] == "0");
  CHECK(std::stod(curve.rows[0][1]) == doctest::Approx(0.25));
  CHECK(curve.rows[1][0] == "1");
  CHECK(std::stod(curve.rows[1][1]) == doctest::Approx(0.5));
  CHECK(curve.rows[2][0] == "4");
  CHECK(std::stod(curve.rows[2][1]) == doctest::Approx(1.0));

  // constant replan fraction maps to its complement
  std::string flat =
      "step,replan_fraction\n"
      "0,0.25\n10,0.25\n20,0.25\n";
  CsvTable fcurve = commitment_curve(parse_csv(flat), 100);
  REQUIRE(fcurve.rows.size() == 1);
  CHECK(std::stod(fcurve.rows[0][1]) == doctest::Approx(0.75));

  // malformed numbers are reported with their row
  std::string bad =
      "step,replan_fraction\n"
      "0,0.25\n"
      "oops,0.5\n";
  CHECK_THROWS_WITH_AS(commitment_curve(parse_csv(bad), 10), doctest::Contains("row 3"),
                       ContractError);

  CHECK_THROWS_AS(commitment_curve(parse_csv("a,b\n1,2\n"), 10), ContractError);
  CHECK_THROWS_AS(commitment_curve(metrics, 0), ContractError);
}

TEST_CASE("corpus n-gram ranking counts sliding windows") {
  CharStream s = CharStream::from_string("abababab");
  auto ranked = corpus_ngram_ranking(s.syms, 2);
  REQUIRE(ranked.size() == 2);
  CHECK(ranked[0].first == "ab");
  CHECK(ranked[0].second == 4);
  CHECK(ranked[1].first == "ba");
  CHECK(ranked[1].second == 3);

  // ties break lexicographically
  CharStream t = CharStream::from_string("xyxy");
  auto r2 = corpus_ngram_ranking(t.syms, 2);
  REQUIRE(r2.size() == 2);
  CHECK(r2[0].first == "xy");  // count 2 beats count 1
  auto r3 = corpus_ngram_ranking(t.syms, 4);
  REQUIRE(r3.size() == 1);
  CHECK(r3[0].first == "xyxy");

  // n longer than the corpus yields nothing
  CHECK(corpus_ngram_ranking(t.syms, 5).empty());
}

TEST_CASE("macro n-gram table layout") {
  MacroNgramResult res;
  res.macro_total = 10;
  res.rows.push_back({"abcd", 1, 3, 6, 40});
  res.rows.push_back({"bcda", 2, 0, 4, 0});
  CsvTable t = macro_ngrams_to_csv(res);
  REQUIRE(t.header ==
          std::vector<std::string>{"macro", "model_rank", "corpus_rank", "model_count",
                                   "corpus_count"});
  REQUIRE(t.rows.size() == 2);
  CHECK(t.rows[0][0] == "abcd");
  CHECK(t.rows[0][1] == "1");
  CHECK(t.rows[1][2] == "0");  // absent from the corpus
  CHECK(t.rows[1][3] == "4");
}

TEST_CASE("heatmap conventions on an always-replanning agent") {
  ExperimentConfig cfg = tiny_cfg();
  cfg.replan_mode = "every_step";
  ParamStore store;
  fresh_store(store, cfg);

  MazeWorld maze = MazeWorld::open_room(5);
  HeatmapResult hm = eval_heatmap(store, maze, 20, 99);
  REQUIRE(hm.size == 5);

  uint64_t visits = 0, events = 0;
  for (int r = 0; r < 5; ++r)
    for (int c = 0; c < 5; ++c) {
      visits += hm.visits_at(r, c);
      events += hm.events_at(r, c);
      if (maze.is_wall(r, c)) {
        CHECK(hm.visits_at(r, c) == 0);
        CHECK(hm.ratio(r, c) == 0.0);  // unvisited reports zero
      } else if (hm.visits_at(r, c) > 0) {
        CHECK(hm.ratio(r, c) == 1.0);  // every step replans
      }
    }
  CHECK(visits >= 20);  // at least one step per episode
  CHECK(events == visits);

  CsvTable t = heatmap_to_csv(hm, maze);
  REQUIRE(t.header == std::vector<std::string>{"row", "col", "events", "visits", "ratio"});
  CHECK(t.rows.size() == 9);  // corridor cells of the 5x5 room

  fs::path dir = fresh_dir("svg");
  std::string svg = (dir / "hm.svg").string();
  heatmap_write_svg(hm, maze, svg);
  std::string body = slurp(svg);
  CHECK(body.find("<svg") != std::string::npos);
  CHECK(body.find("</svg>") != std::string::npos);

  // geometry mismatches and non-planner agents are refused
  MazeWorld wrong = MazeWorld::open_room(7);
  CHECK_THROWS_AS(eval_heatmap(store, wrong, 1, 0), ContractError);
  ExperimentConfig ffcfg = tiny_cfg();
  ffcfg.agent = AgentKind::ff;
  ParamStore ffstore;
  fresh_store(ffstore, ffcfg);
  CHECK_THROWS_AS(eval_heatmap(ffstore, maze, 1, 0), ContractError);
}

TEST_CASE("macro n-grams over a tiny corpus produce consistent ranks") {
  ExperimentConfig cfg = tiny_cfg();
  cfg.task = TaskKind::text;
  cfg.agent = AgentKind::straw;  // the noisy channel is a grid-task feature
  cfg.corpus_path = "-";
  cfg.replan_mode = "every_step";  // macro-actions all length 1, so none of length 2
  ParamStore store;
  fresh_store(store, cfg);

  fs::path dir = fresh_dir("macro");
  std::string corpus = (dir / "corpus.txt").string();
  {
    std::ofstream f(corpus);
    for (int i = 0; i < 50; ++i) f << "the quick brown fox jumps over the lazy dog\n";
  }

  MacroNgramResult res = macro_ngrams(store, corpus, 2, 10, 42, 400);
  CHECK(res.empty_warning);
  CHECK(res.macro_total == 0);
  CHECK(res.rows.empty());

  // with stochastic gates some length-2 macro-actions appear
  ExperimentConfig cfg2 = tiny_cfg();
  cfg2.task = TaskKind::text;
  cfg2.agent = AgentKind::straw;
  cfg2.corpus_path = "-";
  cfg2.replan_mode = "random_0_4";
  ParamStore store2;
  fresh_store(store2, cfg2);
  MacroNgramResult r2 = macro_ngrams(store2, corpus, 2, 5, 42, 400);
  CHECK(!r2.rows.empty());
  CHECK(r2.macro_total > 0);
  for (size_t i = 0; i < r2.rows.size(); ++i) {
    CHECK(r2.rows[i].macro.size() == 2);
    CHECK(r2.rows[i].model_rank == static_cast<int>(i) + 1);
    CHECK(r2.rows[i].model_count > 0);
    if (i > 0) CHECK(r2.rows[i].model_count <= r2.rows[i - 1].model_count);
  }
}

TEST_CASE("text checkpoints rebuild their agents") {
  ExperimentConfig cfg = tiny_cfg();
  cfg.task = TaskKind::text;
  cfg.agent = AgentKind::lstm;
  cfg.corpus_path = "-";
  cfg.lstm_hidden = 12;
  ParamStore store;
  fresh_store(store, cfg);

  ExperimentConfig got;
  auto agent = agent_from_checkpoint(store, &got);
  REQUIRE(agent != nullptr);
  CHECK(got.task == TaskKind::text);
  CHECK(got.agent == AgentKind::lstm);
  bool all_equal = true;
  agent->for_each_param([&](const std::string& name, Tensor& v, Tensor&) {
    if (!(store.value(name) == v)) all_equal = false;
  });
  CHECK(all_equal);
}

TEST_CASE("curriculum comparison joins runs and refuses mismatches") {
  auto curri_cfg = [&](const fs::path& out) {
    ExperimentConfig cfg = tiny_cfg();
    cfg.total_steps = 200;
    cfg.epoch_size = 50;
    cfg.bptt_window = 10;
    cfg.curriculum = true;
    cfg.curriculum_start = 1;
    cfg.curriculum_increment_every = 100;
    cfg.curriculum_max = 2;
    cfg.outdir = out.string();
    return cfg;
  };
  fs::path d1 = fresh_dir("cc1"), d2 = fresh_dir("cc2");
  TrainResult r1 = train(curri_cfg(d1));
  TrainResult r2 = train(curri_cfg(d2));

  CurriculumCompareResult cc = curriculum_compare({r1.metrics_path, r2.metrics_path}, 64, 7);
  REQUIRE(cc.labels.size() == 2);
  CHECK(cc.labels[0] == "strawe");
  CHECK(cc.labels[1] == "strawe_2");  // duplicate agent kinds get numbered
  REQUIRE(cc.table.header.size() == 5);
  CHECK(cc.table.header[0] == "epoch");
  CHECK(cc.table.header[1] == "walk_length");
  CHECK(cc.table.header[2] == "return_strawe");
  CHECK(cc.table.header[3] == "return_strawe_2");
  CHECK(cc.table.header[4] == "optimal_return");
  REQUIRE(!cc.table.rows.empty());
  for (const auto& row : cc.table.rows) {
    int walk = std::stoi(row[1]);
    CHECK(walk >= 1);
    CHECK(walk <= 2);
  }

  // runs whose schedules differ are refused with both paths named
  fs::path d3 = fresh_dir("cc3");
  fs::copy_file(r1.metrics_path, d3 / "metrics.csv");
  ExperimentConfig other = curri_cfg(d3);
  other.curriculum_increment_every = 50;
  other.save((d3 / "run_config.txt").string());
  CHECK_THROWS_WITH_AS(
      curriculum_compare({r1.metrics_path, (d3 / "metrics.csv").string()}, 16, 7),
      doctest::Contains("curriculum schedules differ"), ContractError);

  // non-curriculum runs are refused
  fs::path d4 = fresh_dir("cc4");
  ExperimentConfig flat = tiny_cfg();
  flat.total_steps = 120;
  flat.epoch_size = 50;
  flat.bptt_window = 10;
  flat.outdir = d4.string();
  TrainResult r4 = train(flat);
  CHECK_THROWS_AS(curriculum_compare({r4.metrics_path}, 16, 7), ContractError);

  fs::path dir = fresh_dir("ccsvg");
  std::string svg = (dir / "cc.svg").string();
  curriculum_write_svg(cc, svg);
  std::string body = slurp(svg);
  CHECK(body.find("<svg") != std::string::npos);
  CHECK(body.find("optimal") != std::string::npos);
}
