#include "straw/agents.hpp"

#include <algorithm>
#include <map>

#include "straw/charstream.hpp"
#include "straw/maze.hpp"

namespace straw {

ReplanMode parse_replan_mode(const std::string& s) {
  if (s == "learned") return ReplanMode::learned;
  if (s == "every_step") return ReplanMode::every_step;
  if (s == "random_0_4") return ReplanMode::random_0_4;
  throw ContractError("unknown replan mode: " + s);
}

namespace {

double safe_nll(const Tensor& dist, int idx) {
  double p = std::max(static_cast<double>(dist[idx]), 1e-30);
  return -std::log(p);
}

}  // namespace

// ---- StrawAgent ----

StrawAgent::StrawAgent(const StrawNetConfig& cfg, ReplanMode mode, Rng& init_rng) : mode_(mode) {
  net_.init(cfg, init_rng);
  net_.begin_window();
}

void StrawAgent::begin_window() {
  net_.begin_window();
  aux_.clear();
}

AgentStepOut StrawAgent::act(const Tensor& obs, Rng& rng) {
  auto so = net_.step(obs, rng, mode_, /*record=*/true);
  AgentStepOut out;
  out.action = rng.categorical(so.dist.ptr(), so.dist.numel());
  out.value = so.value;
  out.gate = so.gate;
  out.replan_prob = so.replan_prob;
  out.kl = so.kl;
  out.entropy = entropy(so.dist.ptr(), so.dist.numel());
  out.replan_from_commit = net_.trace.back().from_commit;
  aux_.push_back({out.action, so.value, so.kl, std::move(so.dist)});
  return out;
}

float StrawAgent::bootstrap_value(const Tensor& next_obs) {
  (void)next_obs;  // the plan already carries the next step's value estimate
  return net_.next_value();
}

double StrawAgent::learn_window_rl(const std::vector<RlStepLearn>& steps, const LearnHp& hp) {
  STRAW_CHECK(steps.size() == aux_.size(), "learn: step count mismatch");
  STRAW_CHECK(aux_.size() == net_.trace.size(), "learn: recorded trace out of sync");
  zero_grad();
  size_t n = steps.size();
  std::vector<StrawNet::StepGrad> sig(n);
  double loss = 0.0;
  for (size_t t = 0; t < n; ++t) {
    const StepAux& a = aux_[t];
    size_t na = a.dist.numel();
    sig[t].dlogits.assign(na, 0.0f);
    nll_backward(a.dist.ptr(), na, a.action, steps[t].adv, sig[t].dlogits.data());
    entropy_backward(a.dist.ptr(), na, -hp.entropy_coef, sig[t].dlogits.data());
    sig[t].dvalue = 2.0f * hp.value_coef * (a.value - steps[t].ret);
    sig[t].dkl = hp.kl_coef;
    sig[t].dreplan_prob = hp.replan_penalty;

    double h = entropy(a.dist.ptr(), na);
    double vd = static_cast<double>(a.value) - steps[t].ret;
    loss += steps[t].adv * safe_nll(a.dist, a.action) - hp.entropy_coef * h +
            hp.value_coef * vd * vd + hp.kl_coef * a.kl;
    const auto& tr = net_.trace[t];
    if (tr.from_commit) loss += hp.replan_penalty * static_cast<double>(tr.replan_prob);
  }
  net_.backward_window(sig);
  return loss;
}

double StrawAgent::learn_window_text(const std::vector<int>& targets, const LearnHp& hp) {
  STRAW_CHECK(targets.size() == aux_.size(), "learn: target count mismatch");
  STRAW_CHECK(aux_.size() == net_.trace.size(), "learn: recorded trace out of sync");
  zero_grad();
  size_t n = targets.size();
  std::vector<StrawNet::StepGrad> sig(n);
  double nll = 0.0;
  for (size_t t = 0; t < n; ++t) {
    const StepAux& a = aux_[t];
    size_t na = a.dist.numel();
    STRAW_CHECK(targets[t] >= 0 && targets[t] < static_cast<int>(na), "learn: target out of range");
    sig[t].dlogits.assign(na, 0.0f);
    nll_backward(a.dist.ptr(), na, targets[t], 1.0f, sig[t].dlogits.data());
    sig[t].dreplan_prob = hp.replan_penalty;
    nll += safe_nll(a.dist, targets[t]);
  }
  net_.backward_window(sig);
  return nll;
}

// ---- FfAgent ----

FfAgent::FfAgent(int actions, int obs_ch, int obs_h, int obs_w, int conv_ch, int feat_dim,
                 Padding pad, Rng& init_rng)
    : actions_(actions) {
  front_.init(obs_ch, obs_h, obs_w, conv_ch, feat_dim, pad, init_rng);
  policy_.init(feat_dim, actions, init_rng);
  value_.init(feat_dim, 1, init_rng);
}

void FfAgent::for_each_param(const ParamVisitor<float>& fn) {
  front_.visit("front", fn);
  policy_.visit("policy", fn);
  value_.visit("value", fn);
}

void FfAgent::zero_grad() {
  front_.zero_grad();
  policy_.zero_grad();
  value_.zero_grad();
}

AgentStepOut FfAgent::act(const Tensor& obs, Rng& rng) {
  StepRec rec;
  rec.feat = front_.forward(obs, &rec.conv);
  calls_++;
  Tensor logits = policy_.forward(rec.feat);
  rec.dist = softmax(logits);
  rec.action = rng.categorical(rec.dist.ptr(), rec.dist.numel());
  rec.value = value_.forward(rec.feat)[0];

  AgentStepOut out;
  out.action = rec.action;
  out.value = rec.value;
  out.entropy = entropy(rec.dist.ptr(), rec.dist.numel());
  win_.push_back(std::move(rec));
  return out;
}

float FfAgent::bootstrap_value(const Tensor& next_obs) {
  Tensor feat = front_.forward(next_obs, nullptr);
  calls_++;
  return value_.forward(feat)[0];
}

double FfAgent::learn_window_rl(const std::vector<RlStepLearn>& steps, const LearnHp& hp) {
  STRAW_CHECK(steps.size() == win_.size(), "learn: step count mismatch");
  zero_grad();
  double loss = 0.0;
  for (size_t t = 0; t < win_.size(); ++t) {
    StepRec& rec = win_[t];
    size_t na = rec.dist.numel();
    Tensor dlogits({na});
    nll_backward(rec.dist.ptr(), na, rec.action, steps[t].adv, dlogits.ptr());
    entropy_backward(rec.dist.ptr(), na, -hp.entropy_coef, dlogits.ptr());
    Tensor dfeat({rec.feat.numel()});
    policy_.backward(rec.feat.ptr(), dlogits.ptr(), dfeat.ptr());
    float dval = 2.0f * hp.value_coef * (rec.value - steps[t].ret);
    value_.backward(rec.feat.ptr(), &dval, dfeat.ptr());
    front_.backward(rec.conv, dfeat);

    double h = entropy(rec.dist.ptr(), na);
    double vd = static_cast<double>(rec.value) - steps[t].ret;
    loss += steps[t].adv * safe_nll(rec.dist, rec.action) - hp.entropy_coef * h +
            hp.value_coef * vd * vd;
  }
  return loss;
}

double FfAgent::learn_window_text(const std::vector<int>&, const LearnHp&) {
  throw ContractError("the feedforward baseline has no text mode");
}

// ---- LstmAgent ----

LstmAgent LstmAgent::for_grid(int actions, int obs_ch, int obs_h, int obs_w, int conv_ch,
                              int feat_dim, Padding pad, int hidden, Rng& init_rng) {
  LstmAgent a;
  a.grid_ = true;
  a.actions_ = actions;
  a.feat_dim_ = feat_dim;
  a.front_.init(obs_ch, obs_h, obs_w, conv_ch, feat_dim, pad, init_rng);
  a.lstm_.init(static_cast<size_t>(feat_dim) + actions, hidden, init_rng);
  a.policy_.init(hidden, actions, init_rng);
  a.value_.init(hidden, 1, init_rng);
  a.reset_episode();
  return a;
}

LstmAgent LstmAgent::for_text(int vocab, int hidden, Rng& init_rng) {
  LstmAgent a;
  a.grid_ = false;
  a.actions_ = vocab;
  a.feat_dim_ = 0;
  a.lstm_.init(vocab, hidden, init_rng);
  a.policy_.init(hidden, vocab, init_rng);
  a.value_.init(hidden, 1, init_rng);
  a.reset_episode();
  return a;
}

void LstmAgent::for_each_param(const ParamVisitor<float>& fn) {
  if (grid_) front_.visit("front", fn);
  lstm_.visit("lstm", fn);
  policy_.visit("policy", fn);
  value_.visit("value", fn);
}

void LstmAgent::zero_grad() {
  if (grid_) front_.zero_grad();
  lstm_.zero_grad();
  policy_.zero_grad();
  value_.zero_grad();
}

void LstmAgent::reset_episode() {
  state_ = lstm_.zero_state();
  prev_action_ = -1;
}

Tensor LstmAgent::make_input(const Tensor& obs, GridFeaturesT<float>::Trace* tr) {
  if (!grid_) {
    STRAW_CHECK(obs.numel() == static_cast<size_t>(actions_), "lstm agent: symbol input size");
    return obs;
  }
  Tensor feat = front_.forward(obs, tr);
  calls_++;
  Tensor x({static_cast<size_t>(feat_dim_ + actions_)});
  std::copy(feat.data.begin(), feat.data.end(), x.data.begin());
  if (prev_action_ >= 0) x[feat_dim_ + prev_action_] = 1.0f;
  return x;
}

AgentStepOut LstmAgent::act(const Tensor& obs, Rng& rng) {
  StepRec rec;
  Tensor x = make_input(obs, &rec.conv);
  if (!grid_) calls_++;
  lstm_.step(x.ptr(), state_, &rec.lstm);
  rec.h = state_.h;
  Tensor logits = policy_.forward(state_.h);
  rec.dist = softmax(logits);
  rec.action = rng.categorical(rec.dist.ptr(), rec.dist.numel());
  rec.value = value_.forward(state_.h)[0];
  if (grid_) prev_action_ = rec.action;

  AgentStepOut out;
  out.action = rec.action;
  out.value = rec.value;
  out.entropy = entropy(rec.dist.ptr(), rec.dist.numel());
  win_.push_back(std::move(rec));
  return out;
}

float LstmAgent::bootstrap_value(const Tensor& next_obs) {
  Tensor x = make_input(next_obs, nullptr);
  LstmCellT<float>::State peek = state_;
  lstm_.step(x.ptr(), peek, nullptr);
  return value_.forward(peek.h)[0];
}

double LstmAgent::learn_window_rl(const std::vector<RlStepLearn>& steps, const LearnHp& hp) {
  STRAW_CHECK(steps.size() == win_.size(), "learn: step count mismatch");
  zero_grad();
  size_t hidden = lstm_.hidden;
  Tensor dh({hidden}), dc({hidden});
  double loss = 0.0;
  for (size_t t = win_.size(); t-- > 0;) {
    StepRec& rec = win_[t];
    size_t na = rec.dist.numel();
    Tensor dlogits({na});
    nll_backward(rec.dist.ptr(), na, rec.action, steps[t].adv, dlogits.ptr());
    entropy_backward(rec.dist.ptr(), na, -hp.entropy_coef, dlogits.ptr());
    policy_.backward(rec.h.ptr(), dlogits.ptr(), dh.ptr());
    float dval = 2.0f * hp.value_coef * (rec.value - steps[t].ret);
    value_.backward(rec.h.ptr(), &dval, dh.ptr());
    Tensor dx({lstm_.in});
    lstm_.backward(rec.lstm, dh, dc, dx.ptr());
    if (grid_) {
      Tensor dfeat({static_cast<size_t>(feat_dim_)});
      std::copy(dx.data.begin(), dx.data.begin() + feat_dim_, dfeat.data.begin());
      front_.backward(rec.conv, dfeat);
    }

    double h = entropy(rec.dist.ptr(), na);
    double vd = static_cast<double>(rec.value) - steps[t].ret;
    loss += steps[t].adv * safe_nll(rec.dist, rec.action) - hp.entropy_coef * h +
            hp.value_coef * vd * vd;
  }
  return loss;
}

double LstmAgent::learn_window_text(const std::vector<int>& targets, const LearnHp&) {
  STRAW_CHECK(!grid_, "grid-configured recurrent baseline cannot learn text");
  STRAW_CHECK(targets.size() == win_.size(), "learn: target count mismatch");
  zero_grad();
  size_t hidden = lstm_.hidden;
  Tensor dh({hidden}), dc({hidden});
  double nll = 0.0;
  for (size_t t = win_.size(); t-- > 0;) {
    StepRec& rec = win_[t];
    size_t na = rec.dist.numel();
    STRAW_CHECK(targets[t] >= 0 && targets[t] < static_cast<int>(na), "learn: target out of range");
    Tensor dlogits({na});
    nll_backward(rec.dist.ptr(), na, targets[t], 1.0f, dlogits.ptr());
    policy_.backward(rec.h.ptr(), dlogits.ptr(), dh.ptr());
    Tensor dx({lstm_.in});
    lstm_.backward(rec.lstm, dh, dc, dx.ptr());
    nll += safe_nll(rec.dist, targets[t]);
  }
  return nll;
}

// ---- wiring ----

StrawNetConfig net_config_from(const ExperimentConfig& cfg) {
  StrawNetConfig nc;
  nc.actions = cfg.task == TaskKind::maze ? MazeWorld::kActions : CharVocab::kSize;
  nc.horizon = cfg.plan_horizon;
  nc.filters = cfg.plan_filters;
  nc.xi_dim = cfg.xi_dim;
  nc.h_hidden = cfg.h_hidden;
  nc.noisy_channel = cfg.agent == AgentKind::strawe;
  nc.channel_dim = cfg.channel_dim;
  nc.sigma_floor = cfg.sigma_floor;
  nc.commit_e = cfg.commit_e;
  nc.front = cfg.task == TaskKind::maze ? FrontendKind::conv_grid : FrontendKind::lstm_chars;
  nc.obs_channels = 4;
  nc.obs_h = cfg.maze_size;
  nc.obs_w = cfg.maze_size;
  nc.conv_channels = cfg.conv_channels;
  nc.feature_dim = cfg.feature_dim;
  nc.conv_padding = cfg.conv_padding == "same" ? Padding::same : Padding::valid;
  nc.vocab = CharVocab::kSize;
  nc.lstm_hidden = cfg.lstm_hidden;
  return nc;
}

std::unique_ptr<AgentBase> make_agent(const ExperimentConfig& cfg, Rng& init_rng) {
  cfg.validate();
  Padding pad = cfg.conv_padding == "same" ? Padding::same : Padding::valid;
  switch (cfg.agent) {
    case AgentKind::strawe:
    case AgentKind::straw:
      return std::make_unique<StrawAgent>(net_config_from(cfg),
                                          parse_replan_mode(cfg.replan_mode), init_rng);
    case AgentKind::lstm:
      if (cfg.task == TaskKind::maze)
        return std::make_unique<LstmAgent>(
            LstmAgent::for_grid(MazeWorld::kActions, 4, cfg.maze_size, cfg.maze_size,
                                cfg.conv_channels, cfg.feature_dim, pad, cfg.lstm_hidden,
                                init_rng));
      return std::make_unique<LstmAgent>(
          LstmAgent::for_text(CharVocab::kSize, cfg.lstm_hidden, init_rng));
    case AgentKind::ff:
      STRAW_CHECK(cfg.task == TaskKind::maze, "the feedforward baseline has no text mode");
      return std::make_unique<FfAgent>(MazeWorld::kActions, 4, cfg.maze_size, cfg.maze_size,
                                       cfg.conv_channels, cfg.feature_dim, pad, init_rng);
  }
  throw ContractError("unknown agent kind");
}

void register_params(AgentBase& agent, ParamStore& store) {
  agent.for_each_param(
      [&](const std::string& name, Tensor& v, Tensor&) { store.init_param(name, v); });
}

void pull_params(AgentBase& agent, const ParamStore& store) {
  agent.for_each_param(
      [&](const std::string& name, Tensor& v, Tensor&) { store.read_into(name, v); });
}

// Global-norm gradient clip. Keeps rare outlier windows (long credit chains,
// channel blow-ups) from destabilizing the shared optimizer state.
constexpr float kGradClipNorm = 40.0f;

void push_grads(AgentBase& agent, ParamStore& store, float lr, float decay, float eps) {
  double sq = 0.0;
  agent.for_each_param([&](const std::string&, Tensor&, Tensor& g) {
    for (float v : g.data) sq += static_cast<double>(v) * v;
  });
  double norm = std::sqrt(sq);
  if (!std::isfinite(norm)) return;  // drop the window rather than poison the store
  if (norm > kGradClipNorm) {
    float s = static_cast<float>(kGradClipNorm / norm);
    agent.for_each_param([&](const std::string&, Tensor&, Tensor& g) {
      for (float& v : g.data) v *= s;
    });
  }
  std::map<std::string, const Tensor*> grads;
  agent.for_each_param([&](const std::string& name, Tensor&, Tensor& g) { grads[name] = &g; });
  store.apply(grads, lr, decay, eps);
}

}  // namespace straw
