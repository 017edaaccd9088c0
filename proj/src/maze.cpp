#include "straw/maze.hpp"

#include <algorithm>
#include <deque>
#include <sstream>

namespace straw {

constexpr int MazeWorld::dr[4];
constexpr int MazeWorld::dc[4];

MazeWorld MazeWorld::generate(int size, Rng& rng, float reward_scale, int max_steps) {
  STRAW_CHECK(size >= 5 && size % 2 == 1, "maze size must be odd and >= 5");
  MazeWorld m;
  m.size = size;
  m.reward_scale = reward_scale;
  m.max_steps = max_steps;
  m.wall.assign(static_cast<size_t>(size) * size, 1);

  // iterative recursive-backtracker over the room lattice (odd coordinates)
  int rooms = (size - 1) / 2;
  auto room_cell = [&](int rr, int rc) { return std::pair<int, int>(2 * rr + 1, 2 * rc + 1); };
  std::vector<uint8_t> visited(static_cast<size_t>(rooms) * rooms, 0);
  std::vector<std::pair<int, int>> stack;
  int start_r = static_cast<int>(rng.uniform_int(rooms));
  int start_c = static_cast<int>(rng.uniform_int(rooms));
  stack.emplace_back(start_r, start_c);
  visited[static_cast<size_t>(start_r) * rooms + start_c] = 1;
  auto [sr, sc] = room_cell(start_r, start_c);
  m.wall[static_cast<size_t>(sr) * size + sc] = 0;

  while (!stack.empty()) {
    auto [rr, rc] = stack.back();
    int order[4] = {0, 1, 2, 3};
    for (int i = 3; i > 0; --i) std::swap(order[i], order[rng.uniform_int(i + 1)]);
    bool advanced = false;
    for (int oi = 0; oi < 4 && !advanced; ++oi) {
      int d = order[oi];
      int nr = rr + dr[d], nc = rc + dc[d];
      if (nr < 0 || nr >= rooms || nc < 0 || nc >= rooms) continue;
      if (visited[static_cast<size_t>(nr) * rooms + nc]) continue;
      visited[static_cast<size_t>(nr) * rooms + nc] = 1;
      auto [cr, cc] = room_cell(rr, rc);
      auto [tr, tc] = room_cell(nr, nc);
      m.wall[static_cast<size_t>((cr + tr) / 2) * size + (cc + tc) / 2] = 0;
      m.wall[static_cast<size_t>(tr) * size + tc] = 0;
      stack.emplace_back(nr, nc);
      advanced = true;
    }
    if (!advanced) stack.pop_back();
  }

  m.place_uniform(rng);
  return m;
}

MazeWorld MazeWorld::open_room(int size, float reward_scale, int max_steps) {
  STRAW_CHECK(size >= 3, "open room too small");
  MazeWorld m;
  m.size = size;
  m.reward_scale = reward_scale;
  m.max_steps = max_steps;
  m.wall.assign(static_cast<size_t>(size) * size, 0);
  for (int i = 0; i < size; ++i) {
    m.wall[static_cast<size_t>(0) * size + i] = 1;
    m.wall[static_cast<size_t>(size - 1) * size + i] = 1;
    m.wall[static_cast<size_t>(i) * size + 0] = 1;
    m.wall[static_cast<size_t>(i) * size + size - 1] = 1;
  }
  m.agent_r = m.agent_c = 1;
  m.goal_r = m.goal_c = size - 2;
  return m;
}

std::vector<std::pair<int, int>> MazeWorld::corridor_cells() const {
  std::vector<std::pair<int, int>> cells;
  for (int r = 0; r < size; ++r)
    for (int c = 0; c < size; ++c)
      if (!is_wall(r, c)) cells.emplace_back(r, c);
  return cells;
}

void MazeWorld::place_uniform(Rng& rng) {
  auto cells = corridor_cells();
  STRAW_CHECK(cells.size() >= 2, "maze needs at least two corridor cells");
  size_t ai = rng.uniform_int(cells.size());
  size_t gi = rng.uniform_int(cells.size() - 1);
  if (gi >= ai) gi++;
  agent_r = cells[ai].first;
  agent_c = cells[ai].second;
  goal_r = cells[gi].first;
  goal_c = cells[gi].second;
}

void MazeWorld::place_goal_by_walk(int walk_length, Rng& rng) {
  STRAW_CHECK(walk_length >= 1, "walk length must be >= 1");
  while (true) {
    int r = agent_r, c = agent_c;
    for (int s = 0; s < walk_length; ++s) {
      // uniform over legal neighbor moves (blocked directions re-sampled)
      int options[4], n = 0;
      for (int d = 0; d < 4; ++d) {
        int nr = r + dr[d], nc = c + dc[d];
        if (in_bounds(nr, nc) && !is_wall(nr, nc)) options[n++] = d;
      }
      STRAW_CHECK(n > 0, "walk stuck: isolated corridor cell");
      int d = options[rng.uniform_int(n)];
      r += dr[d];
      c += dc[d];
    }
    if (r != agent_r || c != agent_c) {
      goal_r = r;
      goal_c = c;
      return;
    }
  }
}

MazeWorld::StepResult MazeWorld::step(int action) {
  STRAW_CHECK(action >= 0 && action < kActions, "invalid action");
  STRAW_CHECK(steps_taken < max_steps, "episode already finished");
  StepResult res;
  steps_taken++;
  int nr = agent_r + dr[action], nc = agent_c + dc[action];
  if (!in_bounds(nr, nc) || is_wall(nr, nc)) {
    res.hit_wall = true;
    res.reward = -2.0f * reward_scale;
  } else {
    agent_r = nr;
    agent_c = nc;
    if (agent_r == goal_r && agent_c == goal_c) {
      res.reward = reward_scale;
      res.done = true;
    } else {
      res.reward = -reward_scale;
    }
  }
  if (!res.done && steps_taken >= max_steps) res.done = true;
  return res;
}

Tensor MazeWorld::observation() const {
  Tensor obs({4, static_cast<size_t>(size), static_cast<size_t>(size)});
  for (int r = 0; r < size; ++r) {
    for (int c = 0; c < size; ++c) {
      bool agent = (r == agent_r && c == agent_c);
      bool goal = (r == goal_r && c == goal_c);
      if (is_wall(r, c))
        obs(0, r, c) = 1.0f;
      else if (agent)
        obs(2, r, c) = 1.0f;
      else if (goal)
        obs(3, r, c) = 1.0f;
      else
        obs(1, r, c) = 1.0f;
    }
  }
  return obs;
}

int MazeWorld::shortest_path_len_from(int r0, int c0) const {
  std::vector<int> dist(static_cast<size_t>(size) * size, -1);
  std::deque<std::pair<int, int>> q;
  dist[static_cast<size_t>(r0) * size + c0] = 0;
  q.emplace_back(r0, c0);
  while (!q.empty()) {
    auto [r, c] = q.front();
    q.pop_front();
    int d = dist[static_cast<size_t>(r) * size + c];
    if (r == goal_r && c == goal_c) return d;
    for (int k = 0; k < 4; ++k) {
      int nr = r + dr[k], nc = c + dc[k];
      if (!in_bounds(nr, nc) || is_wall(nr, nc)) continue;
      size_t idx = static_cast<size_t>(nr) * size + nc;
      if (dist[idx] >= 0) continue;
      dist[idx] = d + 1;
      q.emplace_back(nr, nc);
    }
  }
  return -1;
}

int MazeWorld::shortest_path_len() const { return shortest_path_len_from(agent_r, agent_c); }

float MazeWorld::optimal_return() const {
  int len = shortest_path_len();
  STRAW_CHECK(len > 0, "goal unreachable or agent already on goal");
  return -reward_scale * static_cast<float>(len - 1) + reward_scale;
}

std::string MazeWorld::to_text() const {
  std::string out;
  out.reserve(static_cast<size_t>(size) * (size + 1));
  for (int r = 0; r < size; ++r) {
    for (int c = 0; c < size; ++c) {
      if (r == agent_r && c == agent_c)
        out += 'A';
      else if (r == goal_r && c == goal_c)
        out += 'G';
      else
        out += is_wall(r, c) ? '#' : '.';
    }
    out += '\n';
  }
  return out;
}

MazeWorld MazeWorld::from_text(const std::string& text, float reward_scale, int max_steps) {
  std::vector<std::string> lines;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line))
    if (!line.empty()) lines.push_back(line);
  STRAW_CHECK(!lines.empty(), "empty maze text");
  int size = static_cast<int>(lines.size());
  MazeWorld m;
  m.size = size;
  m.reward_scale = reward_scale;
  m.max_steps = max_steps;
  m.wall.assign(static_cast<size_t>(size) * size, 0);
  int agents = 0, goals = 0;
  for (int r = 0; r < size; ++r) {
    STRAW_CHECK(static_cast<int>(lines[r].size()) == size, "maze text must be square");
    for (int c = 0; c < size; ++c) {
      char ch = lines[r][c];
      switch (ch) {
        case '#': m.wall[static_cast<size_t>(r) * size + c] = 1; break;
        case '.': break;
        case 'A':
          m.agent_r = r;
          m.agent_c = c;
          agents++;
          break;
        case 'G':
          m.goal_r = r;
          m.goal_c = c;
          goals++;
          break;
        default: STRAW_CHECK(false, std::string("invalid maze character: ") + ch);
      }
    }
  }
  STRAW_CHECK(agents == 1, "maze text must contain exactly one agent");
  STRAW_CHECK(goals == 1, "maze text must contain exactly one goal");
  for (int i = 0; i < size; ++i) {
    STRAW_CHECK(m.is_wall(0, i) && m.is_wall(size - 1, i) && m.is_wall(i, 0) &&
                    m.is_wall(i, size - 1),
                "maze border must be wall");
  }
  return m;
}

}  // namespace straw
