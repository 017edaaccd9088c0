#pragma once

#include <string>
#include <vector>

#include "straw/rng.hpp"
#include "straw/tensor.hpp"

namespace straw {

// Four-connected grid maze. Odd cells of the lattice are rooms, generation
// carves a spanning tree between them, so corridors form a single connected
// component without cycles and the outer border stays wall.
struct MazeWorld {
  int size = 0;
  std::vector<uint8_t> wall;  // size*size, 1 = wall
  int agent_r = 0, agent_c = 0;
  int goal_r = 0, goal_c = 0;
  int steps_taken = 0;
  float reward_scale = 0.1f;
  int max_steps = 100;

  // actions: 0 north, 1 south, 2 east, 3 west
  static constexpr int kActions = 4;
  static constexpr int dr[4] = {-1, 1, 0, 0};
  static constexpr int dc[4] = {0, 0, 1, -1};

  bool is_wall(int r, int c) const { return wall[static_cast<size_t>(r) * size + c] != 0; }
  bool in_bounds(int r, int c) const { return r >= 0 && r < size && c >= 0 && c < size; }

  static MazeWorld generate(int size, Rng& rng, float reward_scale = 0.1f, int max_steps = 100);

  // Empty interior (every non-border cell corridor); used by tests.
  static MazeWorld open_room(int size, float reward_scale = 0.1f, int max_steps = 100);

  // Moves the goal to the endpoint of a uniform random walk over corridor
  // cells starting at the agent; re-walks until the endpoint differs from the
  // agent position.
  void place_goal_by_walk(int walk_length, Rng& rng);

  // Places agent and goal uniformly on distinct corridor cells.
  void place_uniform(Rng& rng);

  struct StepResult {
    float reward = 0;
    bool done = false;
    bool hit_wall = false;
  };
  StepResult step(int action);

  void reset_counter() { steps_taken = 0; }

  // Observation: 4 disjoint indicator planes (wall, corridor, agent, goal).
  Tensor observation() const;

  // BFS shortest path length in moves from agent to goal.
  int shortest_path_len() const;
  int shortest_path_len_from(int r, int c) const;

  // Return of an optimal policy: L-1 step penalties plus the goal reward.
  float optimal_return() const;

  std::vector<std::pair<int, int>> corridor_cells() const;

  std::string to_text() const;
  static MazeWorld from_text(const std::string& text, float reward_scale = 0.1f,
                             int max_steps = 100);
};

}  // namespace straw
