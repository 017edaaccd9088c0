#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "straw/analysis.hpp"
#include "straw/gradcheck_suite.hpp"
#include "straw/training.hpp"

namespace {

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  STRAW_CHECK(static_cast<bool>(f), "cannot open file: " + path);
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

uint64_t analysis_seed() { return straw::apply_seed_override(1234); }

int run_gradcheck() {
  auto entries = straw::run_gradcheck_suite();
  bool all_ok = true;
  std::printf("%-18s %14s %11s  %s\n", "component", "max_rel_error", "threshold", "status");
  for (const auto& e : entries) {
    std::printf("%-18s %14.3e %11.0e  %s", e.name.c_str(), e.max_rel_error, e.threshold,
                e.pass ? "ok" : "FAIL");
    if (!e.pass) std::printf("  (worst: %s)", e.worst_param.c_str());
    std::printf("\n");
    all_ok = all_ok && e.pass;
  }
  return all_ok ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"STRAW: attentive planner training and plan analyses"};
  app.require_subcommand(1);

  std::string train_config;
  auto* c_train = app.add_subcommand("train", "run an experiment from a config file");
  c_train->add_option("config", train_config, "key=value config file")->required();

  std::string hm_ckpt, hm_maze, hm_csv = "heatmap.csv", hm_svg = "heatmap.svg";
  int hm_episodes = 100;
  auto* c_heat = app.add_subcommand("eval-heatmap",
                                    "replanning events per maze cell for a trained planner");
  c_heat->add_option("checkpoint", hm_ckpt, "trained planner checkpoint")->required();
  c_heat->add_option("maze", hm_maze, "fixed-geometry maze text file")->required();
  c_heat->add_option("--episodes", hm_episodes, "evaluation episodes");
  c_heat->add_option("--csv", hm_csv, "output csv path");
  c_heat->add_option("--svg", hm_svg, "output svg path");

  std::string mg_ckpt, mg_corpus, mg_out;
  int mg_n = 4, mg_top = 20;
  uint64_t mg_steps = 0;
  auto* c_macro = app.add_subcommand("macro-ngrams",
                                     "model macro-actions ranked against corpus n-grams");
  c_macro->add_option("checkpoint", mg_ckpt, "trained text checkpoint")->required();
  c_macro->add_option("corpus", mg_corpus, "text corpus file")->required();
  c_macro->add_option("--n", mg_n, "macro / n-gram length");
  c_macro->add_option("--top", mg_top, "rows to keep");
  c_macro->add_option("--steps", mg_steps, "cap on corpus positions walked (0: whole corpus)");
  c_macro->add_option("--out", mg_out, "also write the csv here");

  std::string cc_metrics, cc_out;
  uint64_t cc_epoch = 0;
  auto* c_commit = app.add_subcommand("commitment-curve",
                                      "per-epoch committed fraction from a metrics csv");
  c_commit->add_option("metrics", cc_metrics, "training metrics csv")->required();
  c_commit->add_option("--epoch-size", cc_epoch,
                       "steps per epoch (default: epoch_size from the sibling run_config.txt)");
  c_commit->add_option("--out", cc_out, "also write the csv here");

  std::vector<std::string> cmp_metrics;
  std::string cmp_csv = "curriculum_compare.csv", cmp_svg = "curriculum_compare.svg";
  int cmp_samples = 2000;
  auto* c_cmp = app.add_subcommand("curriculum-compare",
                                   "per-epoch returns of several runs against the optimal policy");
  c_cmp->add_option("metrics", cmp_metrics, "metrics csvs, one per run")->required();
  c_cmp->add_option("--samples", cmp_samples, "maze samples for the optimal-return column");
  c_cmp->add_option("--csv", cmp_csv, "output csv path");
  c_cmp->add_option("--svg", cmp_svg, "output svg path");

  app.add_subcommand("gradcheck", "finite-difference check of every backward pass");

  CLI11_PARSE(app, argc, argv);

  try {
    if (c_train->parsed()) {
      straw::ExperimentConfig cfg = straw::load_config(train_config);
      auto res = straw::train(cfg);
      std::printf("trained %llu env steps, %llu applies\n",
                  static_cast<unsigned long long>(res.env_steps),
                  static_cast<unsigned long long>(res.apply_count));
      std::printf("metrics:    %s\n", res.metrics_path.c_str());
      std::printf("checkpoint: %s\n", res.checkpoint_path.c_str());
      return 0;
    }
    if (c_heat->parsed()) {
      straw::ParamStore store;
      store.load(hm_ckpt);
      straw::MazeWorld maze = straw::MazeWorld::from_text(slurp(hm_maze));
      auto hm = straw::eval_heatmap(store, maze, hm_episodes, analysis_seed());
      straw::write_csv(straw::heatmap_to_csv(hm, maze), hm_csv);
      straw::heatmap_write_svg(hm, maze, hm_svg);
      uint64_t visits = 0, events = 0;
      for (auto v : hm.visits) visits += v;
      for (auto v : hm.events) events += v;
      std::printf("episodes=%d visits=%llu replan_events=%llu overall_ratio=%.6g\n", hm_episodes,
                  static_cast<unsigned long long>(visits),
                  static_cast<unsigned long long>(events),
                  visits ? static_cast<double>(events) / visits : 0.0);
      std::printf("wrote %s and %s\n", hm_csv.c_str(), hm_svg.c_str());
      return 0;
    }
    if (c_macro->parsed()) {
      straw::ParamStore store;
      store.load(mg_ckpt);
      auto res = straw::macro_ngrams(store, mg_corpus, mg_n, mg_top, analysis_seed(), mg_steps);
      if (res.empty_warning)
        std::fprintf(stderr, "warning: no macro-actions of length %d found\n", mg_n);
      auto table = straw::macro_ngrams_to_csv(res);
      std::fputs(straw::csv_to_string(table).c_str(), stdout);
      if (!mg_out.empty()) straw::write_csv(table, mg_out);
      return 0;
    }
    if (c_commit->parsed()) {
      uint64_t epoch = cc_epoch;
      if (epoch == 0) {
        auto cfg_path =
            std::filesystem::path(cc_metrics).parent_path() / "run_config.txt";
        STRAW_CHECK(std::filesystem::exists(cfg_path),
                    "pass --epoch-size or keep run_config.txt next to the metrics csv");
        epoch = straw::load_config(cfg_path.string()).epoch_size;
      }
      auto table = straw::commitment_curve(straw::read_csv(cc_metrics), epoch);
      std::fputs(straw::csv_to_string(table).c_str(), stdout);
      if (!cc_out.empty()) straw::write_csv(table, cc_out);
      return 0;
    }
    if (c_cmp->parsed()) {
      auto res = straw::curriculum_compare(cmp_metrics, cmp_samples, analysis_seed());
      std::fputs(straw::csv_to_string(res.table).c_str(), stdout);
      straw::write_csv(res.table, cmp_csv);
      straw::curriculum_write_svg(res, cmp_svg);
      std::printf("wrote %s and %s\n", cmp_csv.c_str(), cmp_svg.c_str());
      return 0;
    }
    if (app.got_subcommand("gradcheck")) return run_gradcheck();
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
