#include "straw/analysis.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <deque>
#include <filesystem>
#include <map>
#include <set>

#include "straw/charstream.hpp"
#include "straw/svg.hpp"

namespace straw {

namespace {

std::string fmt9(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

double parse_double_field(const std::string& s, size_t row, const char* col) {
  char* end = nullptr;
  double v = std::strtod(s.c_str(), &end);
  if (!end || *end != '\0' || s.empty()) {
    std::ostringstream os;
    os << "metrics row " << row << ": bad number in column " << col << ": '" << s << "'";
    throw ContractError(os.str());
  }
  return v;
}

uint64_t parse_u64_field(const std::string& s, size_t row, const char* col) {
  char* end = nullptr;
  unsigned long long v = std::strtoull(s.c_str(), &end, 10);
  if (!end || *end != '\0' || s.empty()) {
    std::ostringstream os;
    os << "metrics row " << row << ": bad integer in column " << col << ": '" << s << "'";
    throw ContractError(os.str());
  }
  return static_cast<uint64_t>(v);
}

int argmax(const Tensor& t) {
  int best = 0;
  for (size_t i = 1; i < t.numel(); ++i)
    if (t[i] > t[best]) best = static_cast<int>(i);
  return best;
}

StrawAgent* planner_of(AgentBase* agent) {
  auto* sa = dynamic_cast<StrawAgent*>(agent);
  STRAW_CHECK(sa != nullptr, "this analysis needs a planner agent (straw or strawe checkpoint)");
  return sa;
}

// BFS move distances from (r0, c0) to every cell; -1 unreachable.
std::vector<int> bfs_distances(const MazeWorld& m, int r0, int c0) {
  std::vector<int> dist(static_cast<size_t>(m.size) * m.size, -1);
  std::deque<std::pair<int, int>> q;
  dist[static_cast<size_t>(r0) * m.size + c0] = 0;
  q.emplace_back(r0, c0);
  while (!q.empty()) {
    auto [r, c] = q.front();
    q.pop_front();
    int d = dist[static_cast<size_t>(r) * m.size + c];
    for (int k = 0; k < 4; ++k) {
      int nr = r + MazeWorld::dr[k], nc = c + MazeWorld::dc[k];
      if (!m.in_bounds(nr, nc) || m.is_wall(nr, nc)) continue;
      int& dd = dist[static_cast<size_t>(nr) * m.size + nc];
      if (dd < 0) {
        dd = d + 1;
        q.emplace_back(nr, nc);
      }
    }
  }
  return dist;
}

}  // namespace

std::unique_ptr<AgentBase> agent_from_checkpoint(const ParamStore& store,
                                                 ExperimentConfig* cfg_out) {
  ExperimentConfig cfg = config_from_meta(store);
  ExperimentConfig build = cfg;
  if (build.task == TaskKind::text) build.corpus_path = "-";  // satisfies validation only
  Rng init(0, 0);
  auto agent = make_agent(build, init);
  pull_params(*agent, store);
  if (cfg_out) *cfg_out = cfg;
  return agent;
}

// ---- heatmap ----

HeatmapResult eval_heatmap(const ParamStore& store, const MazeWorld& maze, int episodes,
                           uint64_t seed) {
  STRAW_CHECK(episodes >= 1, "heatmap needs at least one episode");
  ExperimentConfig cfg;
  auto agent = agent_from_checkpoint(store, &cfg);
  STRAW_CHECK(cfg.task == TaskKind::maze, "heatmap analysis needs a maze checkpoint");
  StrawAgent* sa = planner_of(agent.get());
  STRAW_CHECK(maze.size == cfg.maze_size,
              "maze size differs from the checkpoint's observation geometry");
  StrawNet& net = sa->net();

  HeatmapResult hm;
  hm.size = maze.size;
  hm.events.assign(static_cast<size_t>(maze.size) * maze.size, 0);
  hm.visits.assign(static_cast<size_t>(maze.size) * maze.size, 0);

  Rng rng(seed, 0);
  for (int ep = 0; ep < episodes; ++ep) {
    MazeWorld m = maze;  // fixed geometry, fresh placements
    m.reset_counter();
    m.place_uniform(rng);
    net.reset_episode();
    bool done = false;
    while (!done) {
      size_t cell = static_cast<size_t>(m.agent_r) * m.size + m.agent_c;
      Tensor obs = m.observation();
      auto out = net.step(obs, rng, sa->mode(), /*record=*/false);
      hm.visits[cell]++;
      if (out.gate == 1) hm.events[cell]++;
      int action = rng.categorical(out.dist.ptr(), out.dist.numel());
      done = m.step(action).done;
    }
  }
  return hm;
}

CsvTable heatmap_to_csv(const HeatmapResult& hm, const MazeWorld& maze) {
  STRAW_CHECK(hm.size == maze.size, "heatmap/maze size mismatch");
  CsvTable t;
  t.header = {"row", "col", "events", "visits", "ratio"};
  for (int r = 0; r < maze.size; ++r)
    for (int c = 0; c < maze.size; ++c) {
      if (maze.is_wall(r, c)) continue;
      t.rows.push_back({std::to_string(r), std::to_string(c), std::to_string(hm.events_at(r, c)),
                        std::to_string(hm.visits_at(r, c)), fmt9(hm.ratio(r, c))});
    }
  return t;
}

void heatmap_write_svg(const HeatmapResult& hm, const MazeWorld& maze, const std::string& path) {
  STRAW_CHECK(hm.size == maze.size, "heatmap/maze size mismatch");
  const double cell = 24.0, margin = 10.0, legend = 28.0;
  double w = margin * 2 + cell * maze.size;
  double h = margin * 2 + cell * maze.size + legend;
  SvgDoc doc(w, h);
  doc.rect(0, 0, w, h, "#ffffff");
  for (int r = 0; r < maze.size; ++r)
    for (int c = 0; c < maze.size; ++c) {
      double x = margin + c * cell, y = margin + r * cell;
      if (maze.is_wall(r, c)) {
        doc.rect(x, y, cell, cell, "#333333");
      } else {
        doc.rect(x, y, cell, cell, SvgDoc::heat_color(hm.ratio(r, c)), "#cccccc");
      }
    }
  doc.text(margin, margin + cell * maze.size + 18, "replan events / visits; white 0, red 1", 12,
           "#000");
  doc.write(path);
}

// ---- macro n-grams ----

std::vector<std::pair<std::string, uint64_t>> corpus_ngram_ranking(
    const std::vector<uint8_t>& syms, int n) {
  STRAW_CHECK(n >= 1, "n-gram length must be >= 1");
  std::map<std::string, uint64_t> counts;
  if (syms.size() >= static_cast<size_t>(n)) {
    std::string gram(static_cast<size_t>(n), '\0');
    for (size_t i = 0; i + n <= syms.size(); ++i) {
      for (int j = 0; j < n; ++j) gram[j] = CharVocab::decode(syms[i + j]);
      counts[gram]++;
    }
  }
  std::vector<std::pair<std::string, uint64_t>> ranked(counts.begin(), counts.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  return ranked;
}

MacroNgramResult macro_ngrams(const ParamStore& store, const std::string& corpus_path, int n,
                              int top_k, uint64_t seed, uint64_t max_steps) {
  STRAW_CHECK(n >= 1, "macro length must be >= 1");
  STRAW_CHECK(top_k >= 1, "top_k must be >= 1");
  ExperimentConfig cfg;
  auto agent = agent_from_checkpoint(store, &cfg);
  STRAW_CHECK(cfg.task == TaskKind::text, "macro analysis needs a text checkpoint");
  StrawAgent* sa = planner_of(agent.get());
  StrawNet& net = sa->net();

  CharStream stream = CharStream::from_file(corpus_path);
  STRAW_CHECK(stream.size() >= static_cast<size_t>(n), "corpus shorter than the n-gram length");
  uint64_t steps = stream.size();
  if (max_steps > 0) steps = std::min<uint64_t>(steps, max_steps);

  Rng rng(seed, 0);
  net.reset_episode();
  std::vector<int> gates, actions;
  gates.reserve(steps);
  actions.reserve(steps);
  Tensor obs({static_cast<size_t>(CharVocab::kSize)});
  stream.seek(0);
  for (uint64_t t = 0; t < steps; ++t) {
    auto [cur, nxt] = stream.next();
    (void)nxt;
    obs.zero();
    obs[cur] = 1.0f;
    auto out = net.step(obs, rng, sa->mode(), /*record=*/false);
    gates.push_back(out.gate);
    actions.push_back(argmax(out.dist));
  }

  auto macros = extract_macro_actions(gates, actions);
  std::map<std::string, uint64_t> counts;
  MacroNgramResult res;
  for (const auto& mac : macros) {
    if (static_cast<int>(mac.size()) != n) continue;
    std::string s(mac.size(), '\0');
    for (size_t j = 0; j < mac.size(); ++j) s[j] = CharVocab::decode(mac[j]);
    counts[s]++;
    res.macro_total++;
  }
  if (counts.empty()) {
    res.empty_warning = true;
    return res;
  }

  std::vector<std::pair<std::string, uint64_t>> ranked(counts.begin(), counts.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });

  auto corpus_ranked = corpus_ngram_ranking(stream.syms, n);
  std::map<std::string, std::pair<int, uint64_t>> corpus_lookup;
  for (size_t i = 0; i < corpus_ranked.size(); ++i)
    corpus_lookup[corpus_ranked[i].first] = {static_cast<int>(i) + 1, corpus_ranked[i].second};

  size_t keep = std::min<size_t>(ranked.size(), static_cast<size_t>(top_k));
  for (size_t i = 0; i < keep; ++i) {
    MacroNgramRow row;
    row.macro = ranked[i].first;
    row.model_rank = static_cast<int>(i) + 1;
    row.model_count = ranked[i].second;
    auto it = corpus_lookup.find(row.macro);
    if (it != corpus_lookup.end()) {
      row.corpus_rank = it->second.first;
      row.corpus_count = it->second.second;
    }
    res.rows.push_back(std::move(row));
  }
  return res;
}

CsvTable macro_ngrams_to_csv(const MacroNgramResult& res) {
  CsvTable t;
  t.header = {"macro", "model_rank", "corpus_rank", "model_count", "corpus_count"};
  for (const auto& r : res.rows)
    t.rows.push_back({r.macro, std::to_string(r.model_rank), std::to_string(r.corpus_rank),
                      std::to_string(r.model_count), std::to_string(r.corpus_count)});
  return t;
}

// ---- commitment curve ----

CsvTable commitment_curve(const CsvTable& metrics, uint64_t epoch_size) {
  STRAW_CHECK(epoch_size > 0, "epoch size must be positive");
  int si = metrics.column("step");
  int ri = metrics.column("replan_fraction");
  STRAW_CHECK(si >= 0, "metrics csv is missing the step column");
  STRAW_CHECK(ri >= 0, "metrics csv is missing the replan_fraction column");
  std::map<uint64_t, std::pair<double, uint64_t>> buckets;
  for (size_t i = 0; i < metrics.rows.size(); ++i) {
    uint64_t step = parse_u64_field(metrics.rows[i][si], i + 2, "step");
    double rf = parse_double_field(metrics.rows[i][ri], i + 2, "replan_fraction");
    auto& b = buckets[step / epoch_size];
    b.first += 1.0 - rf;
    b.second++;
  }
  CsvTable out;
  out.header = {"epoch", "committed_fraction"};
  for (const auto& [epoch, b] : buckets)
    out.rows.push_back(
        {std::to_string(epoch), fmt9(b.first / static_cast<double>(b.second))});
  return out;
}

// ---- curriculum comparison ----

namespace {

struct RunInfo {
  std::string metrics_path;
  ExperimentConfig cfg;
  std::map<uint64_t, std::pair<double, uint64_t>> by_epoch;  // sum, count of episode_return
};

void check_same(const char* what, double a, double b, const std::string& pa,
                const std::string& pb) {
  if (a != b) {
    std::ostringstream os;
    os << "curriculum schedules differ in " << what << " (" << a << " vs " << b << ") between "
       << pa << " and " << pb;
    throw ContractError(os.str());
  }
}

}  // namespace

CurriculumCompareResult curriculum_compare(const std::vector<std::string>& metrics_paths,
                                           int optimal_samples, uint64_t seed) {
  STRAW_CHECK(!metrics_paths.empty(), "need at least one metrics csv");
  STRAW_CHECK(optimal_samples >= 1, "need at least one optimal sample");

  std::vector<RunInfo> runs;
  for (const auto& p : metrics_paths) {
    RunInfo info;
    info.metrics_path = p;
    auto cfg_path = std::filesystem::path(p).parent_path() / "run_config.txt";
    STRAW_CHECK(std::filesystem::exists(cfg_path),
                "no run_config.txt next to metrics csv: " + p);
    info.cfg = load_config(cfg_path.string());
    STRAW_CHECK(info.cfg.task == TaskKind::maze, "curriculum comparison needs maze runs: " + p);
    STRAW_CHECK(info.cfg.curriculum, "run was trained without curriculum: " + p);

    CsvTable t = read_csv(p);
    int si = t.column("step"), ri = t.column("episode_return");
    STRAW_CHECK(si >= 0 && ri >= 0, "metrics csv is missing step/episode_return columns: " + p);
    for (size_t i = 0; i < t.rows.size(); ++i) {
      uint64_t step = parse_u64_field(t.rows[i][si], i + 2, "step");
      double ret = parse_double_field(t.rows[i][ri], i + 2, "episode_return");
      auto& b = info.by_epoch[step / info.cfg.epoch_size];
      b.first += ret;
      b.second++;
    }
    runs.push_back(std::move(info));
  }

  const RunInfo& ref = runs.front();
  for (size_t i = 1; i < runs.size(); ++i) {
    const RunInfo& r = runs[i];
    check_same("curriculum_start", ref.cfg.curriculum_start, r.cfg.curriculum_start,
               ref.metrics_path, r.metrics_path);
    check_same("curriculum_increment_every", static_cast<double>(ref.cfg.curriculum_increment_every),
               static_cast<double>(r.cfg.curriculum_increment_every), ref.metrics_path,
               r.metrics_path);
    check_same("curriculum_max", ref.cfg.curriculum_max, r.cfg.curriculum_max, ref.metrics_path,
               r.metrics_path);
    check_same("epoch_size", static_cast<double>(ref.cfg.epoch_size),
               static_cast<double>(r.cfg.epoch_size), ref.metrics_path, r.metrics_path);
    check_same("maze_size", ref.cfg.maze_size, r.cfg.maze_size, ref.metrics_path, r.metrics_path);
    check_same("reward_scale", ref.cfg.reward_scale, r.cfg.reward_scale, ref.metrics_path,
               r.metrics_path);
    check_same("max_episode_steps", ref.cfg.max_episode_steps, r.cfg.max_episode_steps,
               ref.metrics_path, r.metrics_path);
    check_same("total_steps", static_cast<double>(ref.cfg.total_steps),
               static_cast<double>(r.cfg.total_steps), ref.metrics_path, r.metrics_path);
  }

  CurriculumCompareResult res;
  for (const auto& r : runs) {
    std::string base = r.cfg.agent == AgentKind::strawe ? "strawe"
                       : r.cfg.agent == AgentKind::straw ? "straw"
                       : r.cfg.agent == AgentKind::lstm  ? "lstm"
                                                         : "ff";
    std::string label = base;
    int suffix = 2;
    while (std::find(res.labels.begin(), res.labels.end(), label) != res.labels.end())
      label = base + "_" + std::to_string(suffix++);
    res.labels.push_back(label);
  }

  // epochs covered by every run
  std::set<uint64_t> epochs;
  for (const auto& [e, b] : runs.front().by_epoch) epochs.insert(e);
  for (size_t i = 1; i < runs.size(); ++i) {
    std::set<uint64_t> keep;
    for (uint64_t e : epochs)
      if (runs[i].by_epoch.count(e)) keep.insert(e);
    epochs = std::move(keep);
  }

  res.table.header = {"epoch", "walk_length"};
  for (const auto& l : res.labels) res.table.header.push_back("return_" + l);
  res.table.header.push_back("optimal_return");

  std::map<int, double> optimal_cache;
  for (uint64_t e : epochs) {
    int walk = curriculum_walk_length(ref.cfg, e * ref.cfg.epoch_size);
    auto it = optimal_cache.find(walk);
    if (it == optimal_cache.end()) {
      Rng rng(seed, static_cast<uint64_t>(walk));
      it = optimal_cache
               .emplace(walk, sampled_optimal_mean(ref.cfg.maze_size, walk, optimal_samples,
                                                   ref.cfg.reward_scale, rng))
               .first;
    }
    std::vector<std::string> row{std::to_string(e), std::to_string(walk)};
    for (const auto& r : runs) {
      const auto& b = r.by_epoch.at(e);
      row.push_back(fmt9(b.first / static_cast<double>(b.second)));
    }
    row.push_back(fmt9(it->second));
    res.table.rows.push_back(std::move(row));
  }
  return res;
}

void curriculum_write_svg(const CurriculumCompareResult& res, const std::string& path) {
  const double w = 680, h = 420, ml = 60, mr = 150, mt = 20, mb = 40;
  SvgDoc doc(w, h);
  doc.rect(0, 0, w, h, "#ffffff");
  size_t ncols = res.table.header.size();
  size_t nseries = ncols - 2;  // returns plus the optimal column
  if (res.table.rows.empty()) {
    doc.text(ml, h / 2, "no shared epochs to plot", 14);
    doc.write(path);
    return;
  }
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (const auto& row : res.table.rows) {
    double e = std::strtod(row[0].c_str(), nullptr);
    xmin = std::min(xmin, e);
    xmax = std::max(xmax, e);
    for (size_t s = 0; s < nseries; ++s) {
      double v = std::strtod(row[2 + s].c_str(), nullptr);
      ymin = std::min(ymin, v);
      ymax = std::max(ymax, v);
    }
  }
  if (xmax == xmin) xmax = xmin + 1;
  if (ymax == ymin) ymax = ymin + 1;
  auto X = [&](double e) { return ml + (e - xmin) / (xmax - xmin) * (w - ml - mr); };
  auto Y = [&](double v) { return h - mb - (v - ymin) / (ymax - ymin) * (h - mt - mb); };

  doc.line(ml, h - mb, w - mr, h - mb, "#000", 1);
  doc.line(ml, mt, ml, h - mb, "#000", 1);
  doc.text(ml, h - mb + 24, "epoch " + fmt9(xmin) + " .. " + fmt9(xmax), 11);
  doc.text(6, mt + 10, "return " + fmt9(ymin) + " .. " + fmt9(ymax), 11);

  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                  "#ff7f0e", "#8c564b", "#e377c2"};
  for (size_t s = 0; s < nseries; ++s) {
    std::vector<std::pair<double, double>> pts;
    for (const auto& row : res.table.rows) {
      double e = std::strtod(row[0].c_str(), nullptr);
      double v = std::strtod(row[2 + s].c_str(), nullptr);
      pts.emplace_back(X(e), Y(v));
    }
    bool is_optimal = s == nseries - 1;
    std::string color = is_optimal ? "#000000" : palette[s % 7];
    doc.polyline(pts, color, is_optimal ? 2.0 : 1.5);
    std::string name = res.table.header[2 + s];
    doc.text(w - mr + 8, mt + 16 + 16 * static_cast<double>(s), name, 12, color);
  }
  doc.write(path);
}

// ---- oracles and floors ----

std::vector<double> walk_endpoint_distribution(const MazeWorld& maze, int r0, int c0,
                                               int walk_length) {
  STRAW_CHECK(walk_length >= 1, "walk length must be >= 1");
  STRAW_CHECK(maze.in_bounds(r0, c0) && !maze.is_wall(r0, c0), "walk start must be a corridor");
  size_t n = static_cast<size_t>(maze.size) * maze.size;
  std::vector<double> p(n, 0.0), q(n, 0.0);
  p[static_cast<size_t>(r0) * maze.size + c0] = 1.0;
  for (int s = 0; s < walk_length; ++s) {
    std::fill(q.begin(), q.end(), 0.0);
    for (int r = 0; r < maze.size; ++r)
      for (int c = 0; c < maze.size; ++c) {
        double mass = p[static_cast<size_t>(r) * maze.size + c];
        if (mass == 0.0) continue;
        int nbr[4], deg = 0;
        for (int k = 0; k < 4; ++k) {
          int nr = r + MazeWorld::dr[k], nc = c + MazeWorld::dc[k];
          if (maze.in_bounds(nr, nc) && !maze.is_wall(nr, nc))
            nbr[deg++] = nr * maze.size + nc;
        }
        STRAW_CHECK(deg > 0, "walk stuck: isolated corridor cell");
        double share = mass / deg;
        for (int k = 0; k < deg; ++k) q[static_cast<size_t>(nbr[k])] += share;
      }
    std::swap(p, q);
  }
  // walks ending at the start are re-drawn
  p[static_cast<size_t>(r0) * maze.size + c0] = 0.0;
  double sum = 0.0;
  for (double v : p) sum += v;
  STRAW_CHECK(sum > 0.0, "walk cannot leave the start cell");
  for (double& v : p) v /= sum;
  return p;
}

double expected_optimal_return_exact(const MazeWorld& maze, int walk_length) {
  auto cells = maze.corridor_cells();
  STRAW_CHECK(!cells.empty(), "maze has no corridor cells");
  double total = 0.0;
  for (auto [r0, c0] : cells) {
    auto p = walk_endpoint_distribution(maze, r0, c0, walk_length);
    auto dist = bfs_distances(maze, r0, c0);
    double e = 0.0;
    for (size_t i = 0; i < p.size(); ++i) {
      if (p[i] == 0.0) continue;
      STRAW_CHECK(dist[i] >= 0, "walk endpoint unreachable");
      e += p[i] * (-static_cast<double>(maze.reward_scale) * (dist[i] - 1) + maze.reward_scale);
    }
    total += e;
  }
  return total / static_cast<double>(cells.size());
}

double sampled_optimal_mean(int maze_size, int walk_length, int samples, float reward_scale,
                            Rng& rng) {
  STRAW_CHECK(samples >= 1, "need at least one sample");
  double acc = 0.0;
  for (int s = 0; s < samples; ++s) {
    MazeWorld m = MazeWorld::generate(maze_size, rng, reward_scale);
    if (walk_length >= 1) m.place_goal_by_walk(walk_length, rng);
    acc += m.optimal_return();
  }
  return acc / samples;
}

double sampled_random_policy_mean(int maze_size, int walk_length, int samples,
                                  float reward_scale, int max_steps, Rng& rng) {
  STRAW_CHECK(samples >= 1, "need at least one sample");
  double acc = 0.0;
  for (int s = 0; s < samples; ++s) {
    MazeWorld m = MazeWorld::generate(maze_size, rng, reward_scale, max_steps);
    if (walk_length >= 1) m.place_goal_by_walk(walk_length, rng);
    double ep = 0.0;
    bool done = false;
    while (!done) {
      auto res = m.step(static_cast<int>(rng.uniform_int(MazeWorld::kActions)));
      ep += res.reward;
      done = res.done;
    }
    acc += ep;
  }
  return acc / samples;
}

}  // namespace straw
