#pragma once

#include <map>
#include <string>

#include "straw/common.hpp"

namespace straw {

enum class TaskKind { maze, text };
enum class AgentKind { strawe, straw, lstm, ff };

struct ExperimentConfig {
  TaskKind task = TaskKind::maze;
  AgentKind agent = AgentKind::strawe;
  uint64_t seed = 0;
  int workers = 8;
  uint64_t total_steps = 1'000'000;
  uint64_t epoch_size = 50'000;
  int bptt_window = 40;
  float discount = 0.99f;
  float lr = 7e-4f;
  bool lr_anneal = true;
  bool sample_hyperparams = false;  // draw lr/entropy/kl/replan from their ranges
  float entropy_coef = 1e-3f;
  float kl_coef = 1e-5f;
  float replan_penalty = 1e-4f;
  float value_coef = 0.5f;
  std::string replan_mode = "learned";  // learned | every_step | random_0_4
  int plan_horizon = 500;
  int plan_filters = 10;
  int xi_dim = 64;
  int h_hidden = 64;
  int channel_dim = 128;
  int feature_dim = 128;
  int conv_channels = 16;
  std::string conv_padding = "same";  // same | valid
  int lstm_hidden = 128;
  float sigma_floor = 1e-6f;
  float commit_e = 40.0f;
  float rms_decay = 0.99f;
  float rms_eps = 0.1f;
  int maze_size = 11;
  float reward_scale = 0.1f;
  int max_episode_steps = 100;
  bool curriculum = false;
  int curriculum_start = 2;
  uint64_t curriculum_increment_every = 50'000;
  int curriculum_max = 10;
  std::string corpus_path;
  std::string outdir;
  uint64_t checkpoint_every = 0;  // 0: only at the end
  std::string resume_from;

  void validate() const;
  std::map<std::string, std::string> to_map() const;
  void save(const std::string& path) const;
};

// Flat key=value format, '#' starts a comment. Unknown keys and malformed
// lines are reported with their line number.
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig load_config(const std::string& path);

// Root-seed override honored by every CLI entry point.
extern const char* kSeedEnvVar;
uint64_t apply_seed_override(uint64_t configured);

}  // namespace straw
