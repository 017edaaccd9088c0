#include "straw/training.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <thread>

#include "straw/charstream.hpp"
#include "straw/maze.hpp"

namespace straw {

HyperParams sample_hyperparams(Rng& rng) {
  HyperParams hp;
  hp.lr = static_cast<float>(rng.log_uniform(1e-4, 1e-3));
  hp.entropy_coef = static_cast<float>(rng.log_uniform(1e-4, 1e-3));
  hp.kl_coef = static_cast<float>(rng.log_uniform(1e-7, 1e-4));
  hp.replan_penalty = static_cast<float>(rng.log_uniform(1e-6, 1e-2));
  return hp;
}

float clipf(float v, float lo, float hi) { return std::min(hi, std::max(lo, v)); }

std::vector<float> discounted_returns(const std::vector<float>& rewards, float gamma,
                                      float bootstrap) {
  STRAW_CHECK(gamma > 0.0f && gamma <= 1.0f, "discount must be in (0, 1]");
  std::vector<float> out(rewards.size());
  double acc = bootstrap;
  for (size_t i = rewards.size(); i-- > 0;) {
    acc = rewards[i] + static_cast<double>(gamma) * acc;
    out[i] = static_cast<float>(acc);
  }
  return out;
}

float annealed_lr(float lr0, bool anneal, uint64_t steps_done, uint64_t total_steps) {
  if (!anneal) return lr0;
  STRAW_CHECK(total_steps > 0, "annealing needs a positive horizon");
  if (steps_done >= total_steps) return 0.0f;
  double frac = 1.0 - static_cast<double>(steps_done) / static_cast<double>(total_steps);
  return static_cast<float>(lr0 * frac);
}

int curriculum_walk_length(const ExperimentConfig& cfg, uint64_t env_steps) {
  STRAW_CHECK(cfg.curriculum, "curriculum schedule queried while disabled");
  STRAW_CHECK(cfg.curriculum_increment_every > 0, "curriculum_increment_every must be positive");
  uint64_t w = static_cast<uint64_t>(cfg.curriculum_start) +
               env_steps / cfg.curriculum_increment_every;
  return static_cast<int>(std::min<uint64_t>(w, static_cast<uint64_t>(cfg.curriculum_max)));
}

double straw_total_loss(const std::vector<LossStep>& steps, const LearnHp& hp) {
  double total = 0.0;
  for (const auto& s : steps) {
    STRAW_CHECK(!s.dist.empty(), "loss: empty action distribution");
    STRAW_CHECK(s.action >= 0 && s.action < static_cast<int>(s.dist.size()),
                "loss: action out of range");
    double p = std::max(static_cast<double>(s.dist[s.action]), 1e-30);
    double h = entropy(s.dist.data(), s.dist.size());
    double vd = static_cast<double>(s.value) - s.ret;
    total += s.adv * -std::log(p) - hp.entropy_coef * h + hp.value_coef * vd * vd;
    if (s.gate == 1) total += hp.kl_coef * s.kl;
    if (s.from_commit) total += hp.replan_penalty * s.replan_prob;
  }
  return total;
}

// ---- metrics sink ----

const char* MetricsLog::kHeader =
    "step,worker,episode_return,episode_length,replan_fraction,kl_mean,entropy,loss,lr";

MetricsLog::MetricsLog(const std::string& path) {
  bool fresh = true;
  {
    std::ifstream probe(path, std::ios::binary | std::ios::ate);
    if (probe.good() && probe.tellg() > 0) fresh = false;
  }
  f_.open(path, std::ios::app);
  STRAW_CHECK(f_.good(), "cannot open metrics log: " + path);
  if (fresh) f_ << kHeader << "\n";
  f_.flush();
}

void MetricsLog::append(uint64_t step, int worker, double episode_return, uint64_t episode_length,
                        double replan_fraction, double kl_mean, double entropy, double loss,
                        double lr) {
  char buf[320];
  std::snprintf(buf, sizeof(buf), "%llu,%d,%.9g,%llu,%.9g,%.9g,%.9g,%.9g,%.9g",
                static_cast<unsigned long long>(step), worker, episode_return,
                static_cast<unsigned long long>(episode_length), replan_fraction, kl_mean, entropy,
                loss, lr);
  std::lock_guard<std::mutex> lock(mu_);
  f_ << buf << "\n";
  f_.flush();
}

// ---- checkpoint metadata ----

namespace {

double agent_code(AgentKind a) {
  switch (a) {
    case AgentKind::strawe: return 0;
    case AgentKind::straw: return 1;
    case AgentKind::lstm: return 2;
    case AgentKind::ff: return 3;
  }
  throw ContractError("unknown agent kind");
}

AgentKind agent_from_code(double c) {
  int i = static_cast<int>(c);
  STRAW_CHECK(i >= 0 && i <= 3, "checkpoint meta: bad agent code");
  return static_cast<AgentKind>(i);
}

double mode_code(const std::string& m) {
  if (m == "learned") return 0;
  if (m == "every_step") return 1;
  if (m == "random_0_4") return 2;
  throw ContractError("unknown replan mode: " + m);
}

std::string mode_from_code(double c) {
  int i = static_cast<int>(c);
  STRAW_CHECK(i >= 0 && i <= 2, "checkpoint meta: bad replan mode code");
  return i == 0 ? "learned" : i == 1 ? "every_step" : "random_0_4";
}

}  // namespace

void config_to_meta(const ExperimentConfig& cfg, ParamStore& store) {
  auto& m = store.meta;
  m["task"] = cfg.task == TaskKind::maze ? 0 : 1;
  m["agent"] = agent_code(cfg.agent);
  m["replan_mode"] = mode_code(cfg.replan_mode);
  m["plan_horizon"] = cfg.plan_horizon;
  m["plan_filters"] = cfg.plan_filters;
  m["xi_dim"] = cfg.xi_dim;
  m["h_hidden"] = cfg.h_hidden;
  m["channel_dim"] = cfg.channel_dim;
  m["feature_dim"] = cfg.feature_dim;
  m["conv_channels"] = cfg.conv_channels;
  m["conv_padding"] = cfg.conv_padding == "same" ? 0 : 1;
  m["lstm_hidden"] = cfg.lstm_hidden;
  m["sigma_floor"] = cfg.sigma_floor;
  m["commit_e"] = cfg.commit_e;
  m["maze_size"] = cfg.maze_size;
  m["reward_scale"] = cfg.reward_scale;
  m["max_episode_steps"] = cfg.max_episode_steps;
}

ExperimentConfig config_from_meta(const ParamStore& store) {
  auto get = [&](const char* k) {
    auto it = store.meta.find(k);
    STRAW_CHECK(it != store.meta.end(), std::string("checkpoint missing meta field: ") + k);
    return it->second;
  };
  ExperimentConfig cfg;
  cfg.task = get("task") == 0 ? TaskKind::maze : TaskKind::text;
  cfg.agent = agent_from_code(get("agent"));
  cfg.replan_mode = mode_from_code(get("replan_mode"));
  cfg.plan_horizon = static_cast<int>(get("plan_horizon"));
  cfg.plan_filters = static_cast<int>(get("plan_filters"));
  cfg.xi_dim = static_cast<int>(get("xi_dim"));
  cfg.h_hidden = static_cast<int>(get("h_hidden"));
  cfg.channel_dim = static_cast<int>(get("channel_dim"));
  cfg.feature_dim = static_cast<int>(get("feature_dim"));
  cfg.conv_channels = static_cast<int>(get("conv_channels"));
  cfg.conv_padding = get("conv_padding") == 0 ? "same" : "valid";
  cfg.lstm_hidden = static_cast<int>(get("lstm_hidden"));
  cfg.sigma_floor = static_cast<float>(get("sigma_floor"));
  cfg.commit_e = static_cast<float>(get("commit_e"));
  cfg.maze_size = static_cast<int>(get("maze_size"));
  cfg.reward_scale = static_cast<float>(get("reward_scale"));
  cfg.max_episode_steps = static_cast<int>(get("max_episode_steps"));
  return cfg;
}

// ---- workers ----

namespace {

struct ParallelGuard {
  bool prev = kernels::parallel_enabled();
  ~ParallelGuard() { kernels::set_parallel_enabled(prev); }
};

LearnHp learn_hp(const ExperimentConfig& cfg, const HyperParams& hp) {
  LearnHp lhp;
  lhp.entropy_coef = hp.entropy_coef;
  lhp.value_coef = cfg.value_coef;
  lhp.kl_coef = hp.kl_coef;
  lhp.replan_penalty = hp.replan_penalty;
  return lhp;
}

void maze_worker(int id, const ExperimentConfig& cfg, const HyperParams& hp, ParamStore& store,
                 MetricsLog& log) {
  Rng rng(cfg.seed, 1000 + static_cast<uint64_t>(id));
  Rng init_rng(cfg.seed, 2000 + static_cast<uint64_t>(id));
  auto agent = make_agent(cfg, init_rng);
  LearnHp lhp = learn_hp(cfg, hp);

  while (store.env_steps() < cfg.total_steps) {
    MazeWorld maze =
        MazeWorld::generate(cfg.maze_size, rng, cfg.reward_scale, cfg.max_episode_steps);
    if (cfg.curriculum) maze.place_goal_by_walk(curriculum_walk_length(cfg, store.env_steps()), rng);

    agent->reset_episode();
    pull_params(*agent, store);
    agent->begin_window();

    double ep_ret = 0, ep_kl = 0, ep_ent = 0, ep_loss = 0;
    uint64_t ep_len = 0, replans = 0;
    uint64_t gstep = store.env_steps();
    double last_lr = annealed_lr(hp.lr, cfg.lr_anneal, gstep, cfg.total_steps);
    std::vector<float> rewards, values;
    bool done = false;

    while (!done) {
      Tensor obs = maze.observation();
      AgentStepOut a = agent->act(obs, rng);
      auto sr = maze.step(a.action);
      gstep = store.add_env_step();
      rewards.push_back(sr.reward);
      values.push_back(a.value);
      ep_ret += sr.reward;
      ep_len++;
      replans += static_cast<uint64_t>(a.gate);
      ep_kl += a.kl;
      ep_ent += a.entropy;
      done = sr.done;

      if (static_cast<int>(rewards.size()) >= cfg.bptt_window || done) {
        float boot = done ? 0.0f : agent->bootstrap_value(maze.observation());
        std::vector<float> rets = discounted_returns(rewards, cfg.discount, boot);
        std::vector<RlStepLearn> steps(rets.size());
        for (size_t i = 0; i < rets.size(); ++i) {
          steps[i].ret = rets[i];
          steps[i].adv = clipf(rets[i] - values[i], -1.0f, 1.0f);
        }
        ep_loss += agent->learn_window_rl(steps, lhp);
        last_lr = annealed_lr(hp.lr, cfg.lr_anneal, gstep, cfg.total_steps);
        push_grads(*agent, store, last_lr, cfg.rms_decay, cfg.rms_eps);
        rewards.clear();
        values.clear();
        if (!done) {
          pull_params(*agent, store);
          agent->begin_window();
        }
      }
    }
    double n = static_cast<double>(ep_len);
    log.append(gstep, id, ep_ret, ep_len, replans / n, ep_kl / n, ep_ent / n, ep_loss / n,
               last_lr);
  }
}

void text_worker(int id, const ExperimentConfig& cfg, const HyperParams& hp, ParamStore& store,
                 MetricsLog& log) {
  Rng rng(cfg.seed, 1000 + static_cast<uint64_t>(id));
  Rng init_rng(cfg.seed, 2000 + static_cast<uint64_t>(id));
  auto agent = make_agent(cfg, init_rng);
  LearnHp lhp = learn_hp(cfg, hp);

  CharStream stream = CharStream::from_file(cfg.corpus_path);
  STRAW_CHECK(stream.size() >= 2, "corpus too small: " + cfg.corpus_path);
  // workers start at staggered corpus offsets
  stream.seek(stream.size() / static_cast<size_t>(cfg.workers) * static_cast<size_t>(id));

  agent->reset_episode();

  while (store.env_steps() < cfg.total_steps) {
    pull_params(*agent, store);
    agent->begin_window();
    std::vector<int> targets;
    targets.reserve(cfg.bptt_window);
    double ent_sum = 0;
    uint64_t replans = 0, gstep = 0;
    Tensor obs({static_cast<size_t>(CharVocab::kSize)});
    for (int t = 0; t < cfg.bptt_window; ++t) {
      auto [cur, nxt] = stream.next();
      obs.zero();
      obs[cur] = 1.0f;
      AgentStepOut a = agent->act(obs, rng);
      gstep = store.add_env_step();
      targets.push_back(nxt);
      ent_sum += a.entropy;
      replans += static_cast<uint64_t>(a.gate);
    }
    double nll = agent->learn_window_text(targets, lhp);
    float lr = annealed_lr(hp.lr, cfg.lr_anneal, gstep, cfg.total_steps);
    push_grads(*agent, store, lr, cfg.rms_decay, cfg.rms_eps);
    double n = static_cast<double>(targets.size());
    log.append(gstep, id, -nll / n, targets.size(), replans / n, 0.0, ent_sum / n, nll / n, lr);
  }
}

void verify_resume_geometry(const ExperimentConfig& cfg, const ParamStore& store) {
  ExperimentConfig mc = config_from_meta(store);
  STRAW_CHECK(mc.task == cfg.task, "resume: task differs from checkpoint");
  STRAW_CHECK(mc.agent == cfg.agent, "resume: agent differs from checkpoint");
  STRAW_CHECK(mc.plan_horizon == cfg.plan_horizon, "resume: plan_horizon differs");
  STRAW_CHECK(mc.plan_filters == cfg.plan_filters, "resume: plan_filters differs");
  STRAW_CHECK(mc.xi_dim == cfg.xi_dim, "resume: xi_dim differs");
  STRAW_CHECK(mc.h_hidden == cfg.h_hidden, "resume: h_hidden differs");
  STRAW_CHECK(mc.channel_dim == cfg.channel_dim, "resume: channel_dim differs");
  STRAW_CHECK(mc.feature_dim == cfg.feature_dim, "resume: feature_dim differs");
  STRAW_CHECK(mc.conv_channels == cfg.conv_channels, "resume: conv_channels differs");
  STRAW_CHECK(mc.conv_padding == cfg.conv_padding, "resume: conv_padding differs");
  STRAW_CHECK(mc.lstm_hidden == cfg.lstm_hidden, "resume: lstm_hidden differs");
  STRAW_CHECK(mc.maze_size == cfg.maze_size, "resume: maze_size differs");
}

}  // namespace

TrainResult train(const ExperimentConfig& cfg) {
  cfg.validate();
  STRAW_CHECK(!cfg.outdir.empty(), "training needs an outdir");
  std::filesystem::create_directories(cfg.outdir);

  HyperParams hp;
  hp.lr = cfg.lr;
  hp.entropy_coef = cfg.entropy_coef;
  hp.kl_coef = cfg.kl_coef;
  hp.replan_penalty = cfg.replan_penalty;
  if (cfg.sample_hyperparams) {
    Rng hrng(cfg.seed, 500);
    hp = sample_hyperparams(hrng);
  }

  Rng init_rng(cfg.seed, 0);
  auto master = make_agent(cfg, init_rng);
  ParamStore store;
  register_params(*master, store);
  config_to_meta(cfg, store);
  if (!cfg.resume_from.empty()) {
    store.load(cfg.resume_from);
    verify_resume_geometry(cfg, store);
    pull_params(*master, store);  // name/shape compatibility gate
    config_to_meta(cfg, store);
  }

  ExperimentConfig effective = cfg;
  effective.lr = hp.lr;
  effective.entropy_coef = hp.entropy_coef;
  effective.kl_coef = hp.kl_coef;
  effective.replan_penalty = hp.replan_penalty;
  effective.save(cfg.outdir + "/run_config.txt");

  std::string metrics_path = cfg.outdir + "/metrics.csv";
  MetricsLog log(metrics_path);

  ParallelGuard pguard;
  if (cfg.workers > 1) kernels::set_parallel_enabled(false);

  std::atomic<int> finished{0};
  std::atomic<bool> failed{false};
  std::mutex err_mu;
  std::string err_msg;

  auto body = [&](int id) {
    try {
      if (cfg.task == TaskKind::maze)
        maze_worker(id, cfg, hp, store, log);
      else
        text_worker(id, cfg, hp, store, log);
    } catch (const std::exception& e) {
      std::lock_guard<std::mutex> lk(err_mu);
      failed.store(true);
      if (!err_msg.empty()) err_msg += "\n";
      err_msg += "worker " + std::to_string(id) + ": " + e.what();
      std::cerr << "worker " << id << " terminated: " << e.what() << "\n";
    }
    finished.fetch_add(1);
  };

  std::vector<std::thread> threads;
  threads.reserve(static_cast<size_t>(cfg.workers));
  for (int i = 0; i < cfg.workers; ++i) threads.emplace_back(body, i);

  uint64_t next_mark = cfg.checkpoint_every;
  while (finished.load() < cfg.workers) {
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
    if (cfg.checkpoint_every > 0 && store.env_steps() >= next_mark) {
      char name[64];
      std::snprintf(name, sizeof(name), "/ckpt_%010llu.strw",
                    static_cast<unsigned long long>(next_mark));
      store.save(cfg.outdir + name);
      next_mark += cfg.checkpoint_every;
    }
  }
  for (auto& t : threads) t.join();
  if (failed.load()) throw ContractError("training aborted:\n" + err_msg);

  TrainResult res;
  res.metrics_path = metrics_path;
  res.checkpoint_path = cfg.outdir + "/ckpt_final.strw";
  store.save(res.checkpoint_path);
  res.env_steps = store.env_steps();
  res.apply_count = store.apply_count();
  return res;
}

}  // namespace straw
