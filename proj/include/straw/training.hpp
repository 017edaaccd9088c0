#pragma once

#include <fstream>
#include <mutex>
#include <string>
#include <vector>

#include "straw/agents.hpp"

namespace straw {

struct HyperParams {
  float lr = 7e-4f;
  float entropy_coef = 1e-3f;
  float kl_coef = 1e-5f;
  float replan_penalty = 1e-4f;
};

// lr and entropy weight from LogUniform(1e-4, 1e-3), coding cost from
// LogUniform(1e-7, 1e-4), replanning penalty from LogUniform(1e-6, 1e-2).
HyperParams sample_hyperparams(Rng& rng);

float clipf(float v, float lo, float hi);

// R_t = r_t + gamma * R_{t+1}, seeded with the bootstrap value past the end.
std::vector<float> discounted_returns(const std::vector<float>& rewards, float gamma,
                                      float bootstrap);

// Linear decay to exactly 0 at steps_done == total_steps.
float annealed_lr(float lr0, bool anneal, uint64_t steps_done, uint64_t total_steps);

int curriculum_walk_length(const ExperimentConfig& cfg, uint64_t env_steps);

// Scalar objective over one window: per step the actor-critic terms (or the
// next-symbol negative log-likelihood for text), plus the gated coding cost
// and the replanning penalty on steps whose gate came from the commitment
// plan. Exposed so tests can pin the arithmetic.
struct LossStep {
  std::vector<float> dist;
  int action = 0;
  float ret = 0;
  float adv = 0;  // already clipped
  float value = 0;
  float kl = 0;
  int gate = 0;
  bool from_commit = false;
  float replan_prob = 1;
};
double straw_total_loss(const std::vector<LossStep>& steps, const LearnHp& hp);

// Append-only per-episode CSV sink shared by all workers.
class MetricsLog {
 public:
  static const char* kHeader;

  explicit MetricsLog(const std::string& path);
  void append(uint64_t step, int worker, double episode_return, uint64_t episode_length,
              double replan_fraction, double kl_mean, double entropy, double loss, double lr);

 private:
  std::ofstream f_;
  std::mutex mu_;
};

// Checkpoints carry enough named scalars to rebuild the agent without the
// original config file.
void config_to_meta(const ExperimentConfig& cfg, ParamStore& store);
ExperimentConfig config_from_meta(const ParamStore& store);

struct TrainResult {
  std::string metrics_path;
  std::string checkpoint_path;
  uint64_t env_steps = 0;
  uint64_t apply_count = 0;
};

// Runs the full asynchronous training loop described by the config and
// writes run_config.txt, metrics.csv and checkpoints under cfg.outdir.
TrainResult train(const ExperimentConfig& cfg);

}  // namespace straw
