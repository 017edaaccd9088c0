#pragma once

#include <memory>
#include <string>
#include <vector>

#include "straw/csv.hpp"
#include "straw/maze.hpp"
#include "straw/training.hpp"

namespace straw {

// Rebuilds the agent a checkpoint was trained with and loads its weights.
// For text checkpoints the config's corpus path is left empty; callers that
// need it supply their own.
std::unique_ptr<AgentBase> agent_from_checkpoint(const ParamStore& store,
                                                 ExperimentConfig* cfg_out = nullptr);

// ---- replanning heatmap over a fixed-geometry maze ----

struct HeatmapResult {
  int size = 0;
  std::vector<uint64_t> events, visits;  // size*size, row major

  uint64_t events_at(int r, int c) const { return events[static_cast<size_t>(r) * size + c]; }
  uint64_t visits_at(int r, int c) const { return visits[static_cast<size_t>(r) * size + c]; }
  // unvisited cells report 0
  double ratio(int r, int c) const {
    uint64_t v = visits_at(r, c);
    return v == 0 ? 0.0 : static_cast<double>(events_at(r, c)) / static_cast<double>(v);
  }
};

// Runs episodes with stochastic gates and start/goal re-drawn uniformly per
// episode; counts per-cell visits and replanning events. Planner agents only.
HeatmapResult eval_heatmap(const ParamStore& store, const MazeWorld& maze, int episodes,
                           uint64_t seed);

CsvTable heatmap_to_csv(const HeatmapResult& hm, const MazeWorld& maze);
void heatmap_write_svg(const HeatmapResult& hm, const MazeWorld& maze, const std::string& path);

// ---- macro-action n-grams against corpus n-grams ----

struct MacroNgramRow {
  std::string macro;
  int model_rank = 0;   // 1-based among the model's length-n macro-actions
  int corpus_rank = 0;  // 1-based among corpus n-grams; 0 when absent
  uint64_t model_count = 0;
  uint64_t corpus_count = 0;
};

struct MacroNgramResult {
  std::vector<MacroNgramRow> rows;
  uint64_t macro_total = 0;  // length-n macro-actions observed
  bool empty_warning = false;
};

// Greedy decode over the corpus (teacher forced inputs, stochastic gates);
// macro-actions are the emitted runs between replanning steps. max_steps = 0
// walks the whole corpus once.
MacroNgramResult macro_ngrams(const ParamStore& store, const std::string& corpus_path, int n,
                              int top_k, uint64_t seed, uint64_t max_steps = 0);

// Overlapping sliding-window n-gram counts, ranked by count desc then gram.
std::vector<std::pair<std::string, uint64_t>> corpus_ngram_ranking(
    const std::vector<uint8_t>& syms, int n);

CsvTable macro_ngrams_to_csv(const MacroNgramResult& res);

// ---- commitment curve ----

// Buckets metrics rows by step / epoch_size; committed = 1 - replan_fraction.
CsvTable commitment_curve(const CsvTable& metrics, uint64_t epoch_size);

// ---- curriculum comparison ----

struct CurriculumCompareResult {
  CsvTable table;
  std::vector<std::string> labels;  // per input column label
};

// Joins per-epoch mean returns of several runs (metrics.csv paths; each must
// have a sibling run_config.txt) with the sampled optimal mean return for the
// epoch's walk length. Refuses runs whose schedules differ.
CurriculumCompareResult curriculum_compare(const std::vector<std::string>& metrics_paths,
                                           int optimal_samples, uint64_t seed);

void curriculum_write_svg(const CurriculumCompareResult& res, const std::string& path);

// ---- oracles and floors ----

// Exact endpoint distribution (size*size, row major) of a walk_length-step
// uniform-legal-neighbor walk from (r0, c0), conditioned on ending elsewhere.
std::vector<double> walk_endpoint_distribution(const MazeWorld& maze, int r0, int c0,
                                               int walk_length);

// Expectation of optimal_return over uniform agent placement and the walk
// goal distribution, on one fixed maze.
double expected_optimal_return_exact(const MazeWorld& maze, int walk_length);

// Mean optimal_return over freshly generated mazes with uniform agent and
// goal placed by walk (walk_length 0: uniform goal instead).
double sampled_optimal_mean(int maze_size, int walk_length, int samples, float reward_scale,
                            Rng& rng);

// Mean episode return of a uniform-random policy under the same distribution.
double sampled_random_policy_mean(int maze_size, int walk_length, int samples,
                                  float reward_scale, int max_steps, Rng& rng);

}  // namespace straw
