#pragma once

#include <array>
#include <queue>
#include <sstream>
#include <string>
#include <vector>

#include "offmmd/common.hpp"

namespace offmmd {

struct Cell {
  int x = 0;  // column, 0 = left
  int y = 0;  // row, 0 = top
  bool operator==(const Cell&) const = default;
};

enum class Action : int { kUp = 0, kDown = 1, kLeft = 2, kRight = 3, kStay = 4 };

inline constexpr int kNumGridActions = 5;

inline constexpr std::array<const char*, kNumGridActions> kActionNames = {"up", "down", "left",
                                                                          "right", "stay"};

inline Cell apply_move(Cell c, Action a) {
  switch (a) {
    case Action::kUp: return {c.x, c.y - 1};
    case Action::kDown: return {c.x, c.y + 1};
    case Action::kLeft: return {c.x - 1, c.y};
    case Action::kRight: return {c.x + 1, c.y};
    case Action::kStay: return c;
  }
  return c;
}

/// Gridworld layout. Cells outside the rectangle behave like walls.
struct GridSpec {
  int width = 0;
  int height = 0;
  std::vector<bool> walls;  // row-major, width * height
  std::vector<Cell> doors;
  Cell start;
  Cell target;
  int horizon = 1;

  bool inside(Cell c) const { return c.x >= 0 && c.y >= 0 && c.x < width && c.y < height; }
  bool is_wall(Cell c) const {
    return !inside(c) || walls[static_cast<std::size_t>(c.y) * width + c.x];
  }
  bool is_free(Cell c) const { return !is_wall(c); }

  /// Throws ConfigError when the layout breaks one of its invariants.
  void validate() const {
    if (width < 1 || height < 1) throw ConfigError("GridSpec: empty grid");
    if (walls.size() != static_cast<std::size_t>(width) * height) {
      throw ConfigError("GridSpec: wall mask has the wrong size");
    }
    if (horizon < 1) throw ConfigError("GridSpec: horizon must be >= 1");
    if (is_wall(start)) throw ConfigError("GridSpec: start cell is a wall");
    if (is_wall(target)) throw ConfigError("GridSpec: target cell is a wall");
    // Free cells must form one 4-connected component.
    std::vector<bool> seen(walls.size(), false);
    std::queue<Cell> frontier;
    frontier.push(start);
    seen[static_cast<std::size_t>(start.y) * width + start.x] = true;
    std::size_t reached = 1;
    while (!frontier.empty()) {
      const Cell c = frontier.front();
      frontier.pop();
      for (int a = 0; a < 4; ++a) {
        const Cell n = apply_move(c, static_cast<Action>(a));
        if (is_wall(n)) continue;
        const auto idx = static_cast<std::size_t>(n.y) * width + n.x;
        if (seen[idx]) continue;
        seen[idx] = true;
        ++reached;
        frontier.push(n);
      }
    }
    std::size_t free_cells = 0;
    for (bool w : walls) free_cells += w ? 0 : 1;
    if (reached != free_cells) throw ConfigError("GridSpec: free cells are not connected");
  }

  /// ASCII rendering in the map-file format.
  std::string to_ascii() const {
    std::ostringstream out;
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        const Cell c{x, y};
        if (c == start) out << 'S';
        else if (c == target) out << 'T';
        else out << (is_wall(c) ? '#' : '.');
      }
      out << '\n';
    }
    return out.str();
  }
};

/// Four rooms separated by a central cross of walls with one door per wall
/// segment. Start is the top-left cell, target the bottom-right cell.
inline GridSpec build_four_rooms(int width, int height, int horizon) {
  if (width < 5 || height < 5 || width % 2 == 0 || height % 2 == 0) {
    throw ConfigError("build_four_rooms: width and height must be odd and >= 5, got " +
                      std::to_string(width) + "x" + std::to_string(height));
  }
  if (horizon < 1) throw ConfigError("build_four_rooms: horizon must be >= 1");
  GridSpec grid;
  grid.width = width;
  grid.height = height;
  grid.horizon = horizon;
  grid.walls.assign(static_cast<std::size_t>(width) * height, false);
  const int cx = width / 2;
  const int cy = height / 2;
  for (int y = 0; y < height; ++y) grid.walls[static_cast<std::size_t>(y) * width + cx] = true;
  for (int x = 0; x < width; ++x) grid.walls[static_cast<std::size_t>(cy) * width + x] = true;
  // Door in the middle of each of the four wall segments.
  const int top_door = (cy - 1) / 2;
  const int bottom_door = cy + 1 + (height - cy - 2) / 2;
  const int left_door = (cx - 1) / 2;
  const int right_door = cx + 1 + (width - cx - 2) / 2;
  grid.doors = {{cx, top_door}, {cx, bottom_door}, {left_door, cy}, {right_door, cy}};
  for (const Cell& d : grid.doors) grid.walls[static_cast<std::size_t>(d.y) * width + d.x] = false;
  grid.start = {0, 0};
  grid.target = {width - 1, height - 1};
  grid.validate();
  return grid;
}

/// Parses the ASCII map format: '#' wall, '.' free, 'S' start, 'T' target,
/// 'D' door (free corridor cell). Rows must have equal length.
inline GridSpec parse_ascii_map(const std::string& text, int horizon) {
  std::vector<std::string> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    rows.push_back(line);
  }
  if (rows.empty()) throw ConfigError("parse_ascii_map: empty map");
  GridSpec grid;
  grid.width = static_cast<int>(rows.front().size());
  grid.height = static_cast<int>(rows.size());
  grid.horizon = horizon;
  grid.walls.assign(static_cast<std::size_t>(grid.width) * grid.height, false);
  bool has_start = false;
  bool has_target = false;
  for (int y = 0; y < grid.height; ++y) {
    if (static_cast<int>(rows[y].size()) != grid.width) {
      throw ConfigError("parse_ascii_map: row " + std::to_string(y) + " has a different length");
    }
    for (int x = 0; x < grid.width; ++x) {
      const char ch = rows[y][static_cast<std::size_t>(x)];
      switch (ch) {
        case '#': grid.walls[static_cast<std::size_t>(y) * grid.width + x] = true; break;
        case '.': break;
        case 'D': grid.doors.push_back({x, y}); break;
        case 'S':
          if (has_start) throw ConfigError("parse_ascii_map: more than one start cell");
          grid.start = {x, y};
          has_start = true;
          break;
        case 'T':
          if (has_target) throw ConfigError("parse_ascii_map: more than one target cell");
          grid.target = {x, y};
          has_target = true;
          break;
        default:
          throw ConfigError(std::string("parse_ascii_map: unexpected character '") + ch + "'");
      }
    }
  }
  if (!has_start) throw ConfigError("parse_ascii_map: missing start cell 'S'");
  if (!has_target) {
    // Exploration maps need no target; fall back to the last free cell.
    for (int i = static_cast<int>(grid.walls.size()) - 1; i >= 0; --i) {
      if (!grid.walls[static_cast<std::size_t>(i)]) {
        grid.target = {i % grid.width, i / grid.width};
        break;
      }
    }
  }
  grid.validate();
  return grid;
}

}  // namespace offmmd
