#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "qgrid/lang.hpp"
#include "qgrid/oracle.hpp"
#include "qgrid/world.hpp"

namespace qgrid {

enum class TaskId : int {
  ObjectInBox = 0,
  Danger = 1,
  GoToFavorite = 2,
  OpenDoor = 3,
};

inline const char* task_name(TaskId t) {
  static const char* names[] = {"objectinbox", "danger", "gotofavorite",
                                "opendoor"};
  return names[static_cast<int>(t)];
}

inline std::optional<TaskId> task_from_name(const std::string& s) {
  for (int i = 0; i < 4; ++i)
    if (s == task_name(static_cast<TaskId>(i))) return static_cast<TaskId>(i);
  // short aliases
  if (s == "box") return TaskId::ObjectInBox;
  if (s == "favorite") return TaskId::GoToFavorite;
  if (s == "door") return TaskId::OpenDoor;
  return std::nullopt;
}

struct TaskGeometry {
  int table_qt;  // reference good-query count for the combination
  int rooms;
  int room_size;
  bool early_terminate;
};

// per-combination defaults, keyed by task bitmask
inline const TaskGeometry& default_geometry(int mask) {
  static const std::map<int, TaskGeometry> table = {
      {1, {3, 1, 9, true}},    // box
      {2, {1, 1, 7, true}},    // danger
      {4, {2, 9, 5, false}},   // favorite
      {8, {1, 2, 7, false}},   // door
      {3, {5, 2, 7, true}},    // box+danger
      {5, {4, 9, 5, true}},    // box+favorite
      {9, {5, 2, 7, true}},    // box+door
      {6, {3, 2, 7, true}},    // danger+favorite
      {10, {2, 2, 7, true}},   // danger+door
      {12, {4, 9, 5, false}},  // favorite+door
      {7, {5, 2, 7, true}},    // box+danger+favorite
      {11, {6, 3, 7, true}},   // box+danger+door
      {13, {5, 9, 5, true}},   // box+favorite+door
      {14, {4, 3, 7, true}},   // danger+favorite+door
      {15, {7, 9, 7, true}},   // all four
  };
  auto it = table.find(mask);
  if (it == table.end())
    throw std::invalid_argument("no default geometry for task mask");
  return it->second;
}

inline int task_mask(const std::vector<TaskId>& tasks) {
  int m = 0;
  for (TaskId t : tasks) m |= 1 << static_cast<int>(t);
  return m;
}

// Rooms on an R x C lattice with shared walls. room_size counts the full
// extent including the boundary walls, so the walkable interior spans
// room_size - 2 cells.
struct RoomLayout {
  int rows = 1, cols = 1, room_size = 7;

  int grid_w() const { return cols * (room_size - 1) + 1; }
  int grid_h() const { return rows * (room_size - 1) + 1; }
  int room_count() const { return rows * cols; }
  int interior_span() const { return room_size - 2; }

  Cell interior_origin(int room) const {
    int rr = room / cols, rc = room % cols;
    return {rc * (room_size - 1) + 1, rr * (room_size - 1) + 1};
  }
  int room_of(const Cell& c) const {  // interior cells only
    int rc = (c.x - 1) / (room_size - 1);
    int rr = (c.y - 1) / (room_size - 1);
    return rr * cols + rc;
  }
  int room_row(int room) const { return room / cols + 1; }  // 1-based
  int room_col(int room) const { return room % cols + 1; }

  struct DoorEdge {
    int room_a, room_b;
    Cell cell;
  };
  std::vector<DoorEdge> door_edges() const {
    std::vector<DoorEdge> edges;
    int half = (room_size - 1) / 2;
    for (int rr = 0; rr < rows; ++rr) {
      for (int rc = 0; rc < cols; ++rc) {
        int room = rr * cols + rc;
        if (rc + 1 < cols) {
          Cell c{(rc + 1) * (room_size - 1), rr * (room_size - 1) + half};
          edges.push_back({room, room + 1, c});
        }
        if (rr + 1 < rows) {
          Cell c{rc * (room_size - 1) + half, (rr + 1) * (room_size - 1)};
          edges.push_back({room, room + cols, c});
        }
      }
    }
    return edges;
  }
};

inline RoomLayout make_layout(int rooms, int room_size) {
  RoomLayout l;
  l.room_size = room_size;
  int r = 1;
  while (r * r < rooms) ++r;
  if (r * r == rooms) {
    l.rows = r;
    l.cols = r;
  } else {
    l.rows = 1;
    l.cols = rooms;
  }
  return l;
}

inline const std::vector<Color>& entity_colors() {
  static const std::vector<Color> c = {Color::Red,    Color::Green,
                                       Color::Blue,   Color::Purple,
                                       Color::Yellow, Color::Grey};
  return c;
}
inline const std::vector<Color>& tile_palette() {
  static const std::vector<Color> c = {Color::Yellow, Color::Blue};
  return c;
}
inline const std::vector<ObjType>& favorite_types() {
  static const std::vector<ObjType> t = {ObjType::Cube, ObjType::Doll,
                                         ObjType::Kite, ObjType::Drum,
                                         ObjType::Robot};
  return t;
}
inline const char* owner_word(int i) { return i == 0 ? "mary's" : "tim's"; }

inline const char* number_word(int n) {
  static const char* w[] = {"", "one", "two", "three"};
  return w[n];
}

struct BoxData {
  int owner;                 // index into owner_word
  Color toy_color[2];        // 0 = owner's ball
  Color box_color[2];
  Cell box_cell[2];
};

struct DangerData {
  Color danger_color;
  Color safe_color;
  Cell target;
  std::vector<Cell> ring;
};

struct FavoriteData {
  int owner;
  Color fav_color;
  ObjType fav_type;
  Cell fav_cell;
  int fav_room;
  struct Distractor {
    Color color;
    ObjType type;
    Cell cell;
    int room;
  };
  std::vector<Distractor> distractors;  // [0] doubles as the other owner's
};

struct DoorData {
  Color door_color;
  Cell door_cell;
  Color opener;
  Color key_color[3];
  Cell key_cell[3];
};

struct WorldInstance {
  RoomLayout layout;
  Grid grid;
  Cell agent_start;
  int agent_dir = 0;
  Utterance instruction;
  std::vector<TaskId> tasks;
  std::optional<BoxData> box;
  std::optional<DangerData> danger;
  std::optional<FavoriteData> favorite;
  std::optional<DoorData> door;

  bool has(TaskId t) const {
    return std::find(tasks.begin(), tasks.end(), t) != tasks.end();
  }
};

inline Utterance task_instruction(TaskId t, int owner) {
  switch (t) {
    case TaskId::ObjectInBox:
      return utt(std::string("find ") + owner_word(owner) + " toy");
    case TaskId::Danger:
      return utt("avoid danger zone and go to the green target square");
    case TaskId::GoToFavorite:
      return utt(std::string("go to ") + owner_word(owner) + " favorite toy");
    case TaskId::OpenDoor:
      return utt("find the key to the door");
  }
  return {};
}

namespace detail {

// Green marks the goal square, so distractor entities never wear it;
// otherwise a junk reply mentioning "green" can land in the instruction's
// note set through the danger instruction.
inline std::vector<Color> pick_distinct_colors(Rng& rng, size_t n,
                                               bool allow_green = false) {
  std::vector<Color> pool = entity_colors();
  if (!allow_green)
    pool.erase(std::find(pool.begin(), pool.end(), Color::Green));
  rng.shuffle(pool);
  pool.resize(n);
  return pool;
}

struct CellPool {
  // free interior cells per room, consumed as entities are placed
  std::vector<std::vector<Cell>> per_room;

  static CellPool build(const RoomLayout& l) {
    CellPool p;
    p.per_room.resize(l.room_count());
    for (int r = 0; r < l.room_count(); ++r) {
      Cell o = l.interior_origin(r);
      for (int dy = 0; dy < l.interior_span(); ++dy)
        for (int dx = 0; dx < l.interior_span(); ++dx)
          p.per_room[r].push_back({o.x + dx, o.y + dy});
    }
    return p;
  }

  void remove(const Cell& c) {
    for (auto& room : per_room) {
      auto it = std::find(room.begin(), room.end(), c);
      if (it != room.end()) {
        room.erase(it);
        return;
      }
    }
  }

  std::optional<Cell> take(Rng& rng, int room) {
    auto& cells = per_room[room];
    if (cells.empty()) return std::nullopt;
    size_t i = rng.uniform(cells.size());
    Cell c = cells[i];
    cells.erase(cells.begin() + i);
    return c;
  }
};

// rooms reachable from `from` walking the doorway graph minus one edge
inline std::vector<int> room_component(const RoomLayout& l, int from,
                                       const Cell& blocked_doorway) {
  auto edges = l.door_edges();
  std::vector<std::vector<int>> adj(l.room_count());
  for (const auto& e : edges) {
    if (e.cell == blocked_doorway) continue;
    adj[e.room_a].push_back(e.room_b);
    adj[e.room_b].push_back(e.room_a);
  }
  std::vector<bool> seen(l.room_count(), false);
  std::vector<int> stack = {from}, out;
  seen[from] = true;
  while (!stack.empty()) {
    int r = stack.back();
    stack.pop_back();
    out.push_back(r);
    for (int n : adj[r])
      if (!seen[n]) seen[n] = true, stack.push_back(n);
  }
  std::sort(out.begin(), out.end());
  return out;
}

inline std::vector<Cell> reachable_cells(const Grid& g, const Cell& start,
                                         Color danger_color, bool door_open) {
  std::vector<bool> seen(static_cast<size_t>(g.width()) * g.height(), false);
  auto idx = [&](const Cell& c) {
    return static_cast<size_t>(c.y) * g.width() + c.x;
  };
  auto passable = [&](const Cell& c) {
    const GridObject& o = g.at(c);
    if (o.type == ObjType::Tile && o.color == danger_color) return false;
    if (o.type == ObjType::Door) return door_open || o.state == ObjState::Open;
    return o.walkable();
  };
  std::vector<Cell> stack = {start}, out;
  seen[idx(start)] = true;
  while (!stack.empty()) {
    Cell c = stack.back();
    stack.pop_back();
    out.push_back(c);
    for (int d = 0; d < 4; ++d) {
      Cell n = cell_add(c, dir_vec(d));
      if (!g.in_bounds(n) || seen[idx(n)]) continue;
      if (!passable(n)) continue;
      seen[idx(n)] = true;
      stack.push_back(n);
    }
  }
  return out;
}

inline bool approachable(const std::vector<Cell>& reach, const Cell& target) {
  for (const Cell& c : reach)
    for (int d = 0; d < 4; ++d)
      if (cell_add(c, dir_vec(d)) == target) return true;
  return false;
}

inline bool contains_cell(const std::vector<Cell>& v, const Cell& c) {
  return std::find(v.begin(), v.end(), c) != v.end();
}

}  // namespace detail

// Samples a full episode world: layout, entity placement, per-episode
// name/color assignment. Retries until a solvable layout comes out.
inline WorldInstance sample_world(const std::vector<TaskId>& tasks, int rooms,
                                  int room_size, Rng& rng) {
  using namespace detail;
  if (tasks.empty() || tasks.size() > 4)
    throw std::invalid_argument("task list must have 1..4 entries");
  for (size_t i = 0; i < tasks.size(); ++i)
    for (size_t j = i + 1; j < tasks.size(); ++j)
      if (tasks[i] == tasks[j])
        throw std::invalid_argument("duplicate sub-task");

  RoomLayout layout = make_layout(rooms, room_size);
  bool has_danger =
      std::find(tasks.begin(), tasks.end(), TaskId::Danger) != tasks.end();
  if (has_danger && room_size < 7)
    throw std::invalid_argument("danger needs room_size >= 7");

  for (int attempt = 0; attempt < 200; ++attempt) {
    WorldInstance w;
    w.layout = layout;
    w.tasks = tasks;
    w.grid = Grid(layout.grid_w(), layout.grid_h());

    // walls on the lattice lines, floor elsewhere
    for (int y = 0; y < layout.grid_h(); ++y) {
      for (int x = 0; x < layout.grid_w(); ++x) {
        bool wall = (x % (layout.room_size - 1) == 0) ||
                    (y % (layout.room_size - 1) == 0);
        w.grid.at({x, y}) =
            wall ? GridObject{ObjType::Wall, Color::Grey, ObjState::None}
                 : GridObject{ObjType::Floor, Color::None, ObjState::None};
      }
    }
    for (const auto& e : layout.door_edges())
      w.grid.at(e.cell) = GridObject{ObjType::Floor, Color::None,
                                     ObjState::None};

    CellPool pool = CellPool::build(layout);
    std::vector<int> agent_rooms(layout.room_count());
    for (int r = 0; r < layout.room_count(); ++r) agent_rooms[r] = r;

    // danger: ring of tiles around the target square; placed first so the
    // ring cells are reserved before anything else lands on them
    if (w.has(TaskId::Danger)) {
      DangerData d;
      const auto& palette = tile_palette();
      d.danger_color = palette[rng.uniform(2)];
      d.safe_color = d.danger_color == palette[0] ? palette[1] : palette[0];
      int room = rng.uniform_int(0, layout.room_count() - 1);
      Cell o = layout.interior_origin(room);
      int span = layout.interior_span();
      // target keeps one interior cell of margin so the ring fits
      Cell t{o.x + rng.uniform_int(1, span - 2),
             o.y + rng.uniform_int(1, span - 2)};
      d.target = t;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx)
          if (dx || dy) d.ring.push_back({t.x + dx, t.y + dy});

      bool ok_colors = false;
      std::vector<Color> ring_colors(d.ring.size());
      for (int tries = 0; tries < 64 && !ok_colors; ++tries) {
        bool any_danger = false, edge_safe = false;
        for (size_t i = 0; i < d.ring.size(); ++i) {
          ring_colors[i] = palette[rng.uniform(2)];
          if (ring_colors[i] == d.danger_color) any_danger = true;
        }
        for (size_t i = 0; i < d.ring.size(); ++i) {
          bool is_edge = (d.ring[i].x == t.x) || (d.ring[i].y == t.y);
          if (is_edge && ring_colors[i] == d.safe_color) edge_safe = true;
        }
        ok_colors = any_danger && edge_safe;
      }
      if (!ok_colors) continue;

      w.grid.at(t) = GridObject{ObjType::Target, Color::Green, ObjState::None};
      pool.remove(t);
      for (size_t i = 0; i < d.ring.size(); ++i) {
        w.grid.at(d.ring[i]) =
            GridObject{ObjType::Tile, ring_colors[i], ObjState::None};
        pool.remove(d.ring[i]);
      }
      w.danger = d;
    }

    // open door: one doorway becomes a locked door
    if (w.has(TaskId::OpenDoor)) {
      DoorData d;
      auto edges = layout.door_edges();
      const auto& e = edges[rng.uniform(edges.size())];
      d.door_cell = e.cell;
      auto palette = pick_distinct_colors(rng, 4);
      d.door_color = palette[3];
      std::vector<Color> keys(palette.begin(), palette.begin() + 3);
      for (int i = 0; i < 3; ++i) d.key_color[i] = keys[i];
      d.opener = keys[rng.uniform(3)];
      w.grid.at(d.door_cell) =
          GridObject{ObjType::Door, d.door_color, ObjState::Locked};
      agent_rooms = room_component(layout, 0, d.door_cell);
      bool placed = true;
      for (int i = 0; i < 3; ++i) {
        int room = agent_rooms[rng.uniform(agent_rooms.size())];
        auto c = pool.take(rng, room);
        if (!c) {
          placed = false;
          break;
        }
        d.key_cell[i] = *c;
        w.grid.at(*c) = GridObject{ObjType::Key, d.key_color[i],
                                   ObjState::None};
      }
      if (!placed) continue;
      w.door = d;
    }

    // object in box: two suitcases in one room
    if (w.has(TaskId::ObjectInBox)) {
      BoxData b;
      b.owner = static_cast<int>(rng.uniform(2));
      // all four distinct, across classes too: a mirror box sharing a color
      // with the real ball would pull the mirror facts into the useful chain
      auto colors = pick_distinct_colors(rng, 4);
      b.toy_color[0] = colors[0];
      b.toy_color[1] = colors[1];
      b.box_color[0] = colors[2];
      b.box_color[1] = colors[3];
      int room = rng.uniform_int(0, layout.room_count() - 1);
      bool placed = true;
      for (int i = 0; i < 2; ++i) {
        auto c = pool.take(rng, room);
        if (!c) {
          placed = false;
          break;
        }
        b.box_cell[i] = *c;
        w.grid.at(*c) =
            GridObject{ObjType::Box, b.box_color[i], ObjState::Closed};
      }
      if (!placed) continue;
      w.box = b;
    }

    // go to favorite: the target toy plus scattered distractors
    if (w.has(TaskId::GoToFavorite)) {
      FavoriteData f;
      f.owner = static_cast<int>(rng.uniform(2));
      if (w.box) f.owner = w.box->owner;  // keep one protagonist per episode
      f.fav_color = rng.choice(entity_colors());
      f.fav_type = rng.choice(favorite_types());
      f.fav_room = rng.uniform_int(0, layout.room_count() - 1);
      auto c = pool.take(rng, f.fav_room);
      if (!c) continue;
      f.fav_cell = *c;
      w.grid.at(*c) = GridObject{f.fav_type, f.fav_color, ObjState::None};

      bool placed = true;
      int n_distractors = 3;
      std::vector<Color> dpool = entity_colors();
      dpool.erase(std::find(dpool.begin(), dpool.end(), Color::Green));
      std::set<std::pair<int, int>> used = {
          {static_cast<int>(f.fav_color), static_cast<int>(f.fav_type)}};
      for (int i = 0; i < n_distractors; ++i) {
        Color dc;
        ObjType dt;
        do {
          dc = rng.choice(dpool);
          dt = rng.choice(favorite_types());
          // the first distractor doubles as the other owner's favorite;
          // sharing the color or type with the real goal would merge its
          // description into the useful chain
        } while (used.count({static_cast<int>(dc), static_cast<int>(dt)}) ||
                 (i == 0 && (dc == f.fav_color || dt == f.fav_type)));
        used.insert({static_cast<int>(dc), static_cast<int>(dt)});
        int room = rng.uniform_int(0, layout.room_count() - 1);
        auto cc = pool.take(rng, room);
        if (!cc) {
          placed = false;
          break;
        }
        w.grid.at(*cc) = GridObject{dt, dc, ObjState::None};
        f.distractors.push_back({dc, dt, *cc, room});
      }
      if (!placed) continue;
      w.favorite = f;
    }

    // agent spawn: plain floor in a room on the unlocked side
    {
      int room = agent_rooms[rng.uniform(agent_rooms.size())];
      auto c = pool.take(rng, room);
      if (!c) continue;
      w.agent_start = *c;
      w.agent_dir = static_cast<int>(rng.uniform(4));
    }

    // feasibility: everything approachable on the right side of the door,
    // with danger tiles treated as impassable
    Color danger_color = w.danger ? w.danger->danger_color : Color::None;
    auto r0 = reachable_cells(w.grid, w.agent_start, danger_color, false);
    bool ok = true;
    if (w.door) {
      ok = ok && approachable(r0, w.door->door_cell);
      for (int i = 0; i < 3; ++i)
        ok = ok && approachable(r0, w.door->key_cell[i]);
    }
    auto r1 = w.door ? reachable_cells(w.grid, w.agent_start, danger_color,
                                       true)
                     : r0;
    if (w.box)
      for (int i = 0; i < 2; ++i)
        ok = ok && approachable(r1, w.box->box_cell[i]);
    if (w.danger) ok = ok && contains_cell(r1, w.danger->target);
    if (w.favorite) {
      ok = ok && approachable(r1, w.favorite->fav_cell);
      // spawning next to the goal toy would complete the sub-task for free
      for (int d = 0; d < 4; ++d)
        if (cell_add(w.agent_start, dir_vec(d)) == w.favorite->fav_cell)
          ok = false;
    }
    if (!ok) continue;

    // instruction in task order, joined by "and"
    std::vector<std::string> parts;
    for (TaskId t : tasks) {
      int owner = 0;
      if (t == TaskId::ObjectInBox) owner = w.box->owner;
      if (t == TaskId::GoToFavorite) owner = w.favorite->owner;
      for (auto& tok : task_instruction(t, owner).tokens)
        parts.push_back(tok);
      parts.push_back("and");
    }
    parts.pop_back();
    w.instruction = Utterance(parts);
    return w;
  }
  throw std::runtime_error("world sampling failed after 200 attempts");
}

// All knowledge facts for one sampled world: the useful chain per sub-task
// plus deliberately irrelevant facts about distractor entities.
inline KnowledgeBase build_knowledge_base(const WorldInstance& w) {
  KnowledgeBase kb;
  auto add = [&](const std::string& f, const std::string& a,
                 const std::string& n, const std::string& value, bool good,
                 std::optional<SpatialGuard> guard = std::nullopt) {
    KnowledgeFact fact;
    fact.key = Query{f, a, n};
    fact.value = utt(value);
    fact.guard = std::move(guard);
    kb.add(std::move(fact), good);
  };

  if (w.box) {
    const auto& b = *w.box;
    std::string owner = owner_word(b.owner);
    std::string other = owner_word(1 - b.owner);
    std::string tc = color_word(b.toy_color[0]);
    std::string bc = color_word(b.box_color[0]);
    add("what's", owner, "toy", owner + " toy is the " + tc + " ball", true);
    add("where's", tc, "ball", "the " + tc + " ball is in the " + bc + " box",
        true);
    add("what's", bc, "box", "in the " + bc + " box is the " + tc + " ball",
        true);
    // the mirrored facts speak of the other owner's toy by name; repeating
    // the ball-in-box wording would merge them into the useful chain
    // whenever entity colors collide across roles
    std::string tc2 = color_word(b.toy_color[1]);
    std::string bc2 = color_word(b.box_color[1]);
    add("what's", other, "toy", other + " toy is the " + tc2 + " one",
        false);
    add("where's", tc2, "ball", other + " toy is in the " + bc2 + " box",
        false);
    add("what's", bc2, "box", "in the " + bc2 + " box is " + other + " toy",
        false);
  }

  if (w.danger) {
    const auto& d = *w.danger;
    add("what's", "danger", "zone",
        std::string("the danger zone is ") + color_word(d.danger_color),
        true);
    for (Color c : tile_palette())
      add("what's", color_word(c), "tile",
          std::string("the ") + color_word(c) + " tile is a tile on the floor",
          false);
  }

  if (w.favorite) {
    const auto& f = *w.favorite;
    std::string owner = owner_word(f.owner);
    std::string other = owner_word(1 - f.owner);
    std::string fc = color_word(f.fav_color);
    std::string ft = obj_word(f.fav_type);
    add("what's", owner, "favorite",
        owner + " favorite is the " + fc + " " + ft, true);
    add("where's", fc, ft,
        owner + " favorite is in row " +
            number_word(w.layout.room_row(f.fav_room)) + " column " +
            number_word(w.layout.room_col(f.fav_room)),
        true);
    for (size_t i = 0; i < f.distractors.size(); ++i) {
      const auto& d = f.distractors[i];
      std::string dc = color_word(d.color);
      std::string dt = obj_word(d.type);
      if (i == 0)
        add("what's", other, "favorite",
            other + " favorite is the " + dc + " " + dt, false);
      // vague on purpose: precise coordinates would share row/column tokens
      // with the useful location reply and leak into its note set
      add("where's", dc, dt, "the " + dc + " " + dt + " is on the floor",
          false);
    }
  }

  if (w.door) {
    const auto& d = *w.door;
    add("what's", color_word(d.door_color), "door",
        std::string("the key to the door is the ") + color_word(d.opener) +
            " key",
        true, SpatialGuard{d.door_cell, 1, "door"});
    for (int i = 0; i < 3; ++i) {
      if (d.key_color[i] == d.opener) continue;
      add("what's", color_word(d.key_color[i]), "key",
          std::string("the ") + color_word(d.key_color[i]) + " key is small",
          false);
    }
  }

  return kb;
}

}  // namespace qgrid
