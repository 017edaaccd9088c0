#include "straw/config.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>
#include <vector>

namespace straw {

const char* kSeedEnvVar = "STRAW_SEED";

uint64_t apply_seed_override(uint64_t configured) {
  const char* v = std::getenv(kSeedEnvVar);
  if (!v || !*v) return configured;
  char* end = nullptr;
  unsigned long long s = std::strtoull(v, &end, 10);
  STRAW_CHECK(end && *end == '\0', std::string(kSeedEnvVar) + " must be an unsigned integer");
  return static_cast<uint64_t>(s);
}

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

[[noreturn]] void bad_line(int line_no, const std::string& why) {
  std::ostringstream os;
  os << "config line " << line_no << ": " << why;
  throw ContractError(os.str());
}

struct Setter {
  std::function<void(ExperimentConfig&, const std::string&, int)> fn;
};

template <class T>
T parse_num(const std::string& v, int line_no, const char* what);

template <>
double parse_num<double>(const std::string& v, int line_no, const char* what) {
  char* end = nullptr;
  double x = std::strtod(v.c_str(), &end);
  if (!end || *end != '\0') bad_line(line_no, std::string("expected number for ") + what);
  return x;
}

template <>
long long parse_num<long long>(const std::string& v, int line_no, const char* what) {
  char* end = nullptr;
  long long x = std::strtoll(v.c_str(), &end, 10);
  if (!end || *end != '\0') bad_line(line_no, std::string("expected integer for ") + what);
  return x;
}

bool parse_bool(const std::string& v, int line_no, const char* what) {
  if (v == "1" || v == "true" || v == "yes") return true;
  if (v == "0" || v == "false" || v == "no") return false;
  bad_line(line_no, std::string("expected boolean for ") + what);
}

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> t;
    auto num = [&](const char* key, float ExperimentConfig::* f) {
      t[key] = {[key, f](ExperimentConfig& c, const std::string& v, int ln) {
        c.*f = static_cast<float>(parse_num<double>(v, ln, key));
      }};
    };
    auto integer = [&](const char* key, int ExperimentConfig::* f) {
      t[key] = {[key, f](ExperimentConfig& c, const std::string& v, int ln) {
        c.*f = static_cast<int>(parse_num<long long>(v, ln, key));
      }};
    };
    auto u64 = [&](const char* key, uint64_t ExperimentConfig::* f) {
      t[key] = {[key, f](ExperimentConfig& c, const std::string& v, int ln) {
        long long x = parse_num<long long>(v, ln, key);
        if (x < 0) bad_line(ln, std::string(key) + " must be non-negative");
        c.*f = static_cast<uint64_t>(x);
      }};
    };
    auto boolean = [&](const char* key, bool ExperimentConfig::* f) {
      t[key] = {[key, f](ExperimentConfig& c, const std::string& v, int ln) {
        c.*f = parse_bool(v, ln, key);
      }};
    };
    auto str = [&](const char* key, std::string ExperimentConfig::* f) {
      t[key] = {[f](ExperimentConfig& c, const std::string& v, int) { c.*f = v; }};
    };

    t["task"] = {[](ExperimentConfig& c, const std::string& v, int ln) {
      if (v == "maze")
        c.task = TaskKind::maze;
      else if (v == "text")
        c.task = TaskKind::text;
      else
        bad_line(ln, "task must be maze or text");
    }};
    t["agent"] = {[](ExperimentConfig& c, const std::string& v, int ln) {
      if (v == "strawe")
        c.agent = AgentKind::strawe;
      else if (v == "straw")
        c.agent = AgentKind::straw;
      else if (v == "lstm")
        c.agent = AgentKind::lstm;
      else if (v == "ff")
        c.agent = AgentKind::ff;
      else
        bad_line(ln, "agent must be strawe, straw, lstm or ff");
    }};
    u64("seed", &ExperimentConfig::seed);
    integer("workers", &ExperimentConfig::workers);
    u64("total_steps", &ExperimentConfig::total_steps);
    u64("epoch_size", &ExperimentConfig::epoch_size);
    integer("bptt_window", &ExperimentConfig::bptt_window);
    num("discount", &ExperimentConfig::discount);
    num("lr", &ExperimentConfig::lr);
    boolean("lr_anneal", &ExperimentConfig::lr_anneal);
    boolean("sample_hyperparams", &ExperimentConfig::sample_hyperparams);
    num("entropy_coef", &ExperimentConfig::entropy_coef);
    num("kl_coef", &ExperimentConfig::kl_coef);
    num("replan_penalty", &ExperimentConfig::replan_penalty);
    num("value_coef", &ExperimentConfig::value_coef);
    str("replan_mode", &ExperimentConfig::replan_mode);
    integer("plan_horizon", &ExperimentConfig::plan_horizon);
    integer("plan_filters", &ExperimentConfig::plan_filters);
    integer("xi_dim", &ExperimentConfig::xi_dim);
    integer("h_hidden", &ExperimentConfig::h_hidden);
    integer("channel_dim", &ExperimentConfig::channel_dim);
    integer("feature_dim", &ExperimentConfig::feature_dim);
    integer("conv_channels", &ExperimentConfig::conv_channels);
    str("conv_padding", &ExperimentConfig::conv_padding);
    integer("lstm_hidden", &ExperimentConfig::lstm_hidden);
    num("sigma_floor", &ExperimentConfig::sigma_floor);
    num("commit_e", &ExperimentConfig::commit_e);
    num("rms_decay", &ExperimentConfig::rms_decay);
    num("rms_eps", &ExperimentConfig::rms_eps);
    integer("maze_size", &ExperimentConfig::maze_size);
    num("reward_scale", &ExperimentConfig::reward_scale);
    integer("max_episode_steps", &ExperimentConfig::max_episode_steps);
    boolean("curriculum", &ExperimentConfig::curriculum);
    integer("curriculum_start", &ExperimentConfig::curriculum_start);
    u64("curriculum_increment_every", &ExperimentConfig::curriculum_increment_every);
    integer("curriculum_max", &ExperimentConfig::curriculum_max);
    str("corpus_path", &ExperimentConfig::corpus_path);
    str("outdir", &ExperimentConfig::outdir);
    u64("checkpoint_every", &ExperimentConfig::checkpoint_every);
    str("resume_from", &ExperimentConfig::resume_from);
    return t;
  }();
  return table;
}

}  // namespace

void ExperimentConfig::validate() const {
  STRAW_CHECK(workers >= 1, "workers must be >= 1");
  STRAW_CHECK(total_steps >= 1, "total_steps must be >= 1");
  STRAW_CHECK(epoch_size >= 1, "epoch_size must be >= 1");
  STRAW_CHECK(bptt_window >= 1, "bptt_window must be >= 1");
  STRAW_CHECK(discount > 0.0f && discount <= 1.0f, "discount must be in (0, 1]");
  STRAW_CHECK(plan_horizon >= 2, "plan_horizon must be >= 2");
  STRAW_CHECK(plan_filters >= 1, "plan_filters must be >= 1");
  STRAW_CHECK(replan_mode == "learned" || replan_mode == "every_step" ||
                  replan_mode == "random_0_4",
              "replan_mode must be learned, every_step or random_0_4");
  STRAW_CHECK(conv_padding == "same" || conv_padding == "valid",
              "conv_padding must be same or valid");
  STRAW_CHECK(maze_size >= 5 && maze_size % 2 == 1, "maze_size must be odd and >= 5");
  STRAW_CHECK(max_episode_steps >= 1, "max_episode_steps must be >= 1");
  STRAW_CHECK(curriculum_start >= 1, "curriculum_start must be >= 1");
  STRAW_CHECK(curriculum_max >= curriculum_start,
              "curriculum_max must be >= curriculum_start");
  if (task == TaskKind::text) {
    STRAW_CHECK(agent != AgentKind::strawe,
                "agent strawe is not available for task text (no noisy channel)");
    STRAW_CHECK(agent != AgentKind::ff, "task text needs a recurrent agent");
    STRAW_CHECK(!corpus_path.empty(), "missing required field for text task: corpus_path");
  }
}

std::map<std::string, std::string> ExperimentConfig::to_map() const {
  auto fmt = [](double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return std::string(buf);
  };
  std::map<std::string, std::string> m;
  m["task"] = task == TaskKind::maze ? "maze" : "text";
  m["agent"] = agent == AgentKind::strawe ? "strawe"
               : agent == AgentKind::straw ? "straw"
               : agent == AgentKind::lstm  ? "lstm"
                                           : "ff";
  m["seed"] = std::to_string(seed);
  m["workers"] = std::to_string(workers);
  m["total_steps"] = std::to_string(total_steps);
  m["epoch_size"] = std::to_string(epoch_size);
  m["bptt_window"] = std::to_string(bptt_window);
  m["discount"] = fmt(discount);
  m["lr"] = fmt(lr);
  m["lr_anneal"] = lr_anneal ? "1" : "0";
  m["sample_hyperparams"] = sample_hyperparams ? "1" : "0";
  m["entropy_coef"] = fmt(entropy_coef);
  m["kl_coef"] = fmt(kl_coef);
  m["replan_penalty"] = fmt(replan_penalty);
  m["value_coef"] = fmt(value_coef);
  m["replan_mode"] = replan_mode;
  m["plan_horizon"] = std::to_string(plan_horizon);
  m["plan_filters"] = std::to_string(plan_filters);
  m["xi_dim"] = std::to_string(xi_dim);
  m["h_hidden"] = std::to_string(h_hidden);
  m["channel_dim"] = std::to_string(channel_dim);
  m["feature_dim"] = std::to_string(feature_dim);
  m["conv_channels"] = std::to_string(conv_channels);
  m["conv_padding"] = conv_padding;
  m["lstm_hidden"] = std::to_string(lstm_hidden);
  m["sigma_floor"] = fmt(sigma_floor);
  m["commit_e"] = fmt(commit_e);
  m["rms_decay"] = fmt(rms_decay);
  m["rms_eps"] = fmt(rms_eps);
  m["maze_size"] = std::to_string(maze_size);
  m["reward_scale"] = fmt(reward_scale);
  m["max_episode_steps"] = std::to_string(max_episode_steps);
  m["curriculum"] = curriculum ? "1" : "0";
  m["curriculum_start"] = std::to_string(curriculum_start);
  m["curriculum_increment_every"] = std::to_string(curriculum_increment_every);
  m["curriculum_max"] = std::to_string(curriculum_max);
  if (!corpus_path.empty()) m["corpus_path"] = corpus_path;
  if (!outdir.empty()) m["outdir"] = outdir;
  m["checkpoint_every"] = std::to_string(checkpoint_every);
  if (!resume_from.empty()) m["resume_from"] = resume_from;
  return m;
}

void ExperimentConfig::save(const std::string& path) const {
  std::ofstream f(path, std::ios::trunc);
  STRAW_CHECK(f.good(), "cannot write config: " + path);
  for (const auto& [k, v] : to_map()) f << k << " = " << v << "\n";
}

ExperimentConfig parse_config_text(const std::string& text) {
  ExperimentConfig cfg;
  std::istringstream is(text);
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    line_no++;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    size_t eq = line.find('=');
    if (eq == std::string::npos) bad_line(line_no, "expected key = value");
    std::string key = trim(line.substr(0, eq));
    std::string val = trim(line.substr(eq + 1));
    if (key.empty()) bad_line(line_no, "empty key");
    auto it = setters().find(key);
    if (it == setters().end()) bad_line(line_no, "unknown key: " + key);
    it->second.fn(cfg, val, line_no);
  }
  cfg.seed = apply_seed_override(cfg.seed);
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream f(path);
  STRAW_CHECK(f.good(), "cannot open config: " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_config_text(ss.str());
}

}  // namespace straw
