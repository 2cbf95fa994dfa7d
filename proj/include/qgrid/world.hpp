#pragma once

#include <array>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "qgrid/oracle.hpp"
#include "qgrid/util.hpp"

namespace qgrid {

enum class ObjType : int {
  Unseen = 0,
  Floor = 1,
  Wall = 2,
  Door = 3,
  Key = 4,
  Ball = 5,
  Box = 6,
  Tile = 7,    // colored floor tile, walkable
  Target = 8,  // goal square, walkable
  Cube = 9,
  Doll = 10,
  Kite = 11,
  Drum = 12,
  Robot = 13,
};
constexpr int kNumObjTypes = 14;

enum class Color : int {
  None = 0,
  Red = 1,
  Green = 2,
  Blue = 3,
  Purple = 4,
  Yellow = 5,
  Grey = 6,
};
constexpr int kNumColors = 7;  // including None

// door/box state; 0 for everything else
enum class ObjState : int { None = 0, Open = 1, Closed = 2, Locked = 3 };
constexpr int kNumObjStates = 4;

inline const char* color_word(Color c) {
  static const char* names[] = {"",     "red",    "green", "blue",
                                "purple", "yellow", "grey"};
  return names[static_cast<int>(c)];
}

inline const char* obj_word(ObjType t) {
  static const char* names[] = {"",     "floor", "wall", "door", "key",
                                "ball", "box",   "tile", "target", "cube",
                                "doll", "kite",  "drum", "robot"};
  return names[static_cast<int>(t)];
}

struct GridObject {
  ObjType type = ObjType::Floor;
  Color color = Color::None;
  ObjState state = ObjState::None;

  bool walkable() const {
    return type == ObjType::Floor || type == ObjType::Tile ||
           type == ObjType::Target ||
           (type == ObjType::Door && state == ObjState::Open);
  }
  bool see_through() const {
    return !(type == ObjType::Wall ||
             (type == ObjType::Door && state != ObjState::Open));
  }
};

class Grid {
 public:
  Grid() = default;
  Grid(int w, int h) : w_(w), h_(h), cells_(static_cast<size_t>(w) * h) {}

  int width() const { return w_; }
  int height() const { return h_; }
  bool in_bounds(const Cell& c) const {
    return c.x >= 0 && c.x < w_ && c.y >= 0 && c.y < h_;
  }
  GridObject& at(const Cell& c) { return cells_[idx(c)]; }
  const GridObject& at(const Cell& c) const { return cells_[idx(c)]; }

 private:
  size_t idx(const Cell& c) const {
    return static_cast<size_t>(c.y) * w_ + c.x;
  }
  int w_ = 0, h_ = 0;
  std::vector<GridObject> cells_;
};

// headings: 0 east, 1 south, 2 west, 3 north
inline Cell dir_vec(int dir) {
  static const Cell v[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
  return v[dir & 3];
}
inline Cell cell_add(const Cell& a, const Cell& b) {
  return {a.x + b.x, a.y + b.y};
}

enum class PhysicalAction : int {
  Left = 0,
  Right = 1,
  Forward = 2,
  Pickup = 3,
  Drop = 4,
  Toggle = 5,
  Done = 6,
};
constexpr int kNumPhysicalActions = 7;

inline const char* physical_action_word(int a) {
  static const char* names[] = {"left",   "right", "forward", "pickup",
                                "drop",   "toggle", "done"};
  return names[a];
}

struct Action {
  enum class Kind { Physical, Ask } kind = Kind::Physical;
  int physical = 0;  // PhysicalAction id
  Query query;

  static Action phys(int id) {
    Action a;
    a.kind = Kind::Physical;
    a.physical = id;
    return a;
  }
  static Action phys(PhysicalAction id) { return phys(static_cast<int>(id)); }
  static Action ask(Query q) {
    Action a;
    a.kind = Kind::Ask;
    a.query = std::move(q);
    return a;
  }
  bool is_ask() const { return kind == Kind::Ask; }
};

constexpr int kViewSize = 7;
constexpr int kViewChannels = 4;  // type, color, state, heading

// 7x7x4 egocentric crop, agent at the bottom-center looking up the view.
struct View {
  std::array<int, kViewSize * kViewSize * kViewChannels> data{};

  int& at(int vx, int vy, int ch) {
    return data[(vy * kViewSize + vx) * kViewChannels + ch];
  }
  int at(int vx, int vy, int ch) const {
    return data[(vy * kViewSize + vx) * kViewChannels + ch];
  }
};

// Visibility inside the crop: spread outward from the agent through
// see-through cells (8-connected); blocking cells are visible themselves
// but hide what is behind them.
namespace detail {
inline void spread_visibility(const std::array<GridObject, 49>& cells,
                              const std::array<bool, 49>& exists,
                              std::array<bool, 49>& visible) {
  visible.fill(false);
  std::vector<int> stack;
  int start = 6 * kViewSize + 3;  // agent cell
  visible[start] = true;
  stack.push_back(start);
  while (!stack.empty()) {
    int i = stack.back();
    stack.pop_back();
    if (!exists[i] || !cells[i].see_through()) continue;
    int x = i % kViewSize, y = i / kViewSize;
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        int nx = x + dx, ny = y + dy;
        if (nx < 0 || nx >= kViewSize || ny < 0 || ny >= kViewSize) continue;
        int j = ny * kViewSize + nx;
        if (!visible[j]) {
          visible[j] = true;
          stack.push_back(j);
        }
      }
    }
  }
}
}  // namespace detail

struct Carried {
  ObjType type = ObjType::Floor;
  Color color = Color::None;
};

// Renders the egocentric view for an agent at `pos` facing `dir`.
inline View render_view(const Grid& grid, const Cell& pos, int dir,
                        const std::optional<Carried>& carried) {
  const Cell fwd = dir_vec(dir);
  const Cell right = dir_vec(dir + 1);
  std::array<GridObject, 49> cells{};
  std::array<bool, 49> exists{};
  for (int vy = 0; vy < kViewSize; ++vy) {
    for (int vx = 0; vx < kViewSize; ++vx) {
      int ahead = (kViewSize - 1) - vy;
      int side = vx - kViewSize / 2;
      Cell w{pos.x + fwd.x * ahead + right.x * side,
             pos.y + fwd.y * ahead + right.y * side};
      int i = vy * kViewSize + vx;
      if (grid.in_bounds(w)) {
        exists[i] = true;
        cells[i] = grid.at(w);
      }
    }
  }
  std::array<bool, 49> visible{};
  detail::spread_visibility(cells, exists, visible);

  View v;
  for (int vy = 0; vy < kViewSize; ++vy) {
    for (int vx = 0; vx < kViewSize; ++vx) {
      int i = vy * kViewSize + vx;
      GridObject o;
      if (exists[i] && visible[i]) o = cells[i];
      else o = GridObject{ObjType::Unseen, Color::None, ObjState::None};
      if (vy == kViewSize - 1 && vx == kViewSize / 2 && carried)
        o = GridObject{carried->type, carried->color, ObjState::None};
      v.at(vx, vy, 0) = static_cast<int>(o.type);
      v.at(vx, vy, 1) = static_cast<int>(o.color);
      v.at(vx, vy, 2) = static_cast<int>(o.state);
      v.at(vx, vy, 3) = dir;
    }
  }
  return v;
}

}  // namespace qgrid
