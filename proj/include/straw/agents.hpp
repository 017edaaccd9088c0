#pragma once

#include <memory>
#include <string>
#include <vector>

#include "straw/config.hpp"
#include "straw/param_store.hpp"
#include "straw/straw_net.hpp"

namespace straw {

ReplanMode parse_replan_mode(const std::string& s);

struct AgentStepOut {
  int action = 0;
  float value = 0;
  int gate = 1;
  float replan_prob = 1;
  float kl = 0;
  double entropy = 0;
  bool replan_from_commit = false;
};

struct RlStepLearn {
  float ret = 0;  // discounted return target
  float adv = 0;  // clip(ret - value, -1, 1), treated as a constant
};

struct LearnHp {
  float entropy_coef = 0;
  float value_coef = 0.5f;
  float kl_coef = 0;
  float replan_penalty = 0;
};

// Common surface for the planner and the reactive baselines. A window is the
// run of act() calls since the last begin_window(); windows never span
// episode boundaries, so callers flush (learn + begin_window) at terminals.
class AgentBase {
 public:
  virtual ~AgentBase() = default;

  virtual void for_each_param(const ParamVisitor<float>& fn) = 0;
  virtual void zero_grad() = 0;

  virtual void reset_episode() = 0;
  virtual void begin_window() = 0;
  virtual size_t window_len() const = 0;

  virtual AgentStepOut act(const Tensor& obs, Rng& rng) = 0;

  // Value estimate for bootstrapping a truncated window. Must leave episode
  // state and the recorded window untouched.
  virtual float bootstrap_value(const Tensor& next_obs) = 0;

  // Zero the gradients, backpropagate through the recorded window and return
  // the summed loss. steps/targets align 1:1 with the window's act() calls.
  virtual double learn_window_rl(const std::vector<RlStepLearn>& steps, const LearnHp& hp) = 0;
  virtual double learn_window_text(const std::vector<int>& targets, const LearnHp& hp) = 0;

  // How many times the observation pathway ran.
  virtual uint64_t feature_calls() const = 0;
};

class StrawAgent : public AgentBase {
 public:
  StrawAgent(const StrawNetConfig& cfg, ReplanMode mode, Rng& init_rng);

  void for_each_param(const ParamVisitor<float>& fn) override { net_.for_each_param(fn); }
  void zero_grad() override { net_.zero_grad(); }
  void reset_episode() override { net_.reset_episode(); }
  void begin_window() override;
  size_t window_len() const override { return aux_.size(); }
  AgentStepOut act(const Tensor& obs, Rng& rng) override;
  float bootstrap_value(const Tensor& next_obs) override;
  double learn_window_rl(const std::vector<RlStepLearn>& steps, const LearnHp& hp) override;
  double learn_window_text(const std::vector<int>& targets, const LearnHp& hp) override;
  uint64_t feature_calls() const override { return net_.extractor_calls; }

  StrawNet& net() { return net_; }
  const StrawNet& net() const { return net_; }
  ReplanMode mode() const { return mode_; }

  struct StepAux {
    int action = 0;
    float value = 0;
    float kl = 0;
    Tensor dist;
  };
  const std::vector<StepAux>& window() const { return aux_; }

 private:
  StrawNet net_;
  ReplanMode mode_;
  std::vector<StepAux> aux_;
};

// Reactive baseline: grid features straight into policy/value heads.
class FfAgent : public AgentBase {
 public:
  FfAgent(int actions, int obs_ch, int obs_h, int obs_w, int conv_ch, int feat_dim, Padding pad,
          Rng& init_rng);

  void for_each_param(const ParamVisitor<float>& fn) override;
  void zero_grad() override;
  void reset_episode() override {}
  void begin_window() override { win_.clear(); }
  size_t window_len() const override { return win_.size(); }
  AgentStepOut act(const Tensor& obs, Rng& rng) override;
  float bootstrap_value(const Tensor& next_obs) override;
  double learn_window_rl(const std::vector<RlStepLearn>& steps, const LearnHp& hp) override;
  double learn_window_text(const std::vector<int>&, const LearnHp&) override;
  uint64_t feature_calls() const override { return calls_; }

 private:
  GridFeaturesT<float> front_;
  LinearT<float> policy_, value_;
  int actions_;
  uint64_t calls_ = 0;

  struct StepRec {
    GridFeaturesT<float>::Trace conv;
    Tensor feat, dist;
    int action = 0;
    float value = 0;
  };
  std::vector<StepRec> win_;
};

// Recurrent baseline. Grid task: [features, one-hot previous action] feeds
// the cell. Text task: the one-hot symbol feeds the cell directly.
class LstmAgent : public AgentBase {
 public:
  static LstmAgent for_grid(int actions, int obs_ch, int obs_h, int obs_w, int conv_ch,
                            int feat_dim, Padding pad, int hidden, Rng& init_rng);
  static LstmAgent for_text(int vocab, int hidden, Rng& init_rng);

  void for_each_param(const ParamVisitor<float>& fn) override;
  void zero_grad() override;
  void reset_episode() override;
  void begin_window() override { win_.clear(); }
  size_t window_len() const override { return win_.size(); }
  AgentStepOut act(const Tensor& obs, Rng& rng) override;
  float bootstrap_value(const Tensor& next_obs) override;
  double learn_window_rl(const std::vector<RlStepLearn>& steps, const LearnHp& hp) override;
  double learn_window_text(const std::vector<int>& targets, const LearnHp& hp) override;
  uint64_t feature_calls() const override { return calls_; }

 private:
  LstmAgent() = default;

  Tensor make_input(const Tensor& obs, GridFeaturesT<float>::Trace* tr);

  bool grid_ = true;
  GridFeaturesT<float> front_;
  LstmCellT<float> lstm_;
  LinearT<float> policy_, value_;
  int actions_ = 0;
  int feat_dim_ = 0;
  uint64_t calls_ = 0;

  LstmCellT<float>::State state_;
  int prev_action_ = -1;

  struct StepRec {
    GridFeaturesT<float>::Trace conv;
    LstmCellT<float>::Trace lstm;
    Tensor h, dist;
    int action = 0;
    float value = 0;
  };
  std::vector<StepRec> win_;
};

StrawNetConfig net_config_from(const ExperimentConfig& cfg);
std::unique_ptr<AgentBase> make_agent(const ExperimentConfig& cfg, Rng& init_rng);

// Master-store plumbing shared by all workers.
void register_params(AgentBase& agent, ParamStore& store);
void pull_params(AgentBase& agent, const ParamStore& store);
void push_grads(AgentBase& agent, ParamStore& store, float lr, float decay, float eps);

}  // namespace straw
