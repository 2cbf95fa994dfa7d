#pragma once

#include <deque>
#include <functional>
#include <optional>
#include <queue>
#include <vector>

#include "qgrid/env.hpp"

namespace qgrid {

namespace detail {

// shortest path over walkable cells, avoiding tiles of `avoid_tile`
// (Color::None means avoid every tile)
inline std::vector<Cell> bfs_path(
    const Grid& g, const Cell& from,
    const std::function<bool(const Cell&)>& is_goal,
    std::optional<Color> safe_tile) {
  auto passable = [&](const Cell& c) {
    const GridObject& o = g.at(c);
    if (o.type == ObjType::Tile)
      return safe_tile.has_value() && o.color == *safe_tile;
    return o.walkable();
  };
  int w = g.width(), h = g.height();
  std::vector<int> prev(static_cast<size_t>(w) * h, -2);
  auto idx = [&](const Cell& c) { return c.y * w + c.x; };
  std::queue<Cell> q;
  q.push(from);
  prev[idx(from)] = -1;
  while (!q.empty()) {
    Cell c = q.front();
    q.pop();
    if (is_goal(c)) {
      std::vector<Cell> path;
      Cell cur = c;
      while (!(cur == from)) {
        path.push_back(cur);
        int p = prev[idx(cur)];
        cur = {p % w, p / w};
      }
      std::reverse(path.begin(), path.end());
      return path;
    }
    for (int d = 0; d < 4; ++d) {
      Cell n = cell_add(c, dir_vec(d));
      if (!g.in_bounds(n) || prev[idx(n)] != -2) continue;
      if (!passable(n)) continue;
      prev[idx(n)] = idx(c);
      q.push(n);
    }
  }
  return {};
}

inline bool adjacent4(const Cell& a, const Cell& b) {
  for (int d = 0; d < 4; ++d)
    if (cell_add(a, dir_vec(d)) == b) return true;
  return false;
}

inline int heading_toward(const Cell& from, const Cell& to) {
  for (int d = 0; d < 4; ++d)
    if (cell_add(from, dir_vec(d)) == to) return d;
  return -1;
}

}  // namespace detail

// Reference policy for solvability checks: issues the useful query chain
// (reading replies from the observation stream), then walks shortest
// paths to finish every sub-task. It reads the grid for navigation but all
// task knowledge comes from oracle replies.
class ScriptedExpert {
 public:
  explicit ScriptedExpert(const Environment* env) : env_(env) {}

  Action act(const Observation& obs) {
    if (!started_) plan(obs);
    if (!obs.response.empty()) parse_response(obs.response);

    // ungated query chain, one per step; each link's slots come from the
    // previous reply
    if (!ungated_.empty()) {
      Step s = ungated_.front();
      ungated_.pop_front();
      last_asked_ = s;
      return Action::ask(build_query(s));
    }

    const WorldState& st = env_->state();
    const WorldInstance& inst = env_->instance();

    // door first: its fact only answers next to the door, and the lock can
    // gate everything else
    if (inst.door && !st.flag[static_cast<int>(TaskId::OpenDoor)]) {
      Action a;
      if (solve_door(st, inst, a)) return a;
    }
    if (inst.box && !st.flag[static_cast<int>(TaskId::ObjectInBox)]) {
      Action a;
      if (solve_box(st, inst, a)) return a;
    }
    if (inst.favorite && !st.flag[static_cast<int>(TaskId::GoToFavorite)]) {
      Action a;
      if (navigate(st, [&](const Cell& c) {
            return detail::adjacent4(c, inst.favorite->fav_cell);
          }, a))
        return a;
    }
    if (inst.danger && !st.flag[static_cast<int>(TaskId::Danger)]) {
      Action a;
      if (navigate(st, [&](const Cell& c) {
            return c == inst.danger->target;
          }, a))
        return a;
    }
    return Action::phys(PhysicalAction::Done);
  }

  // parsed knowledge, exposed for tests
  std::optional<Color> danger_color() const { return danger_color_; }
  std::optional<Color> opener() const { return opener_; }

 private:
  enum class Step {
    None,
    AskDanger,
    AskOwnerToy,
    AskBallLocation,
    AskBoxContent,
    AskOwnerFavorite,
    AskFavoriteLocation,
    AskDoor,
  };

  void plan(const Observation& obs) {
    started_ = true;
    for (const auto& tok : obs.instruction.tokens)
      if (tok == "mary's" || tok == "tim's") {
        owner_ = tok;
        break;
      }
    const WorldInstance& inst = env_->instance();
    if (inst.danger) ungated_.push_back(Step::AskDanger);
    if (inst.box) {
      ungated_.push_back(Step::AskOwnerToy);
      ungated_.push_back(Step::AskBallLocation);
      ungated_.push_back(Step::AskBoxContent);
    }
    if (inst.favorite) {
      ungated_.push_back(Step::AskOwnerFavorite);
      ungated_.push_back(Step::AskFavoriteLocation);
    }
  }

  Query build_query(Step s) const {
    switch (s) {
      case Step::AskDanger:
        return {"what's", "danger", "zone"};
      case Step::AskOwnerToy:
        return {"what's", owner_, "toy"};
      case Step::AskBallLocation:
        return {"where's", color_word(*toy_color_), "ball"};
      case Step::AskBoxContent:
        return {"what's", color_word(*box_color_), "box"};
      case Step::AskOwnerFavorite:
        return {"what's", owner_, "favorite"};
      case Step::AskFavoriteLocation:
        return {"where's", color_word(*fav_color_), obj_word(*fav_type_)};
      case Step::AskDoor:
        return {"what's", color_word(door_color_), "door"};
      default:
        return {"what's", "danger", "zone"};
    }
  }

  void parse_response(const Utterance& r) {
    std::optional<Color> last_color;
    std::optional<ObjType> fav_type;
    for (const auto& tok : r.tokens) {
      for (Color c : entity_colors())
        if (tok == color_word(c)) last_color = c;
      for (ObjType t : favorite_types())
        if (tok == obj_word(t)) fav_type = t;
    }
    switch (last_asked_) {
      case Step::AskDanger:
        danger_color_ = last_color;
        break;
      case Step::AskOwnerToy:
        toy_color_ = last_color;
        break;
      case Step::AskBallLocation:
        box_color_ = last_color;
        break;
      case Step::AskOwnerFavorite:
        fav_color_ = last_color;
        fav_type_ = fav_type;
        break;
      case Step::AskDoor:
        opener_ = last_color;
        break;
      default:
        break;
    }
    last_asked_ = Step::None;
  }

  std::optional<Color> safe_tile() const {
    if (!env_->instance().danger) return std::nullopt;
    if (!danger_color_) return std::nullopt;  // before the reply: avoid all
    return danger_color_ == tile_palette()[0] ? tile_palette()[1]
                                              : tile_palette()[0];
  }

  bool navigate(const WorldState& st,
                const std::function<bool(const Cell&)>& goal, Action& out) {
    if (goal(st.agent)) return false;  // already there
    auto path = detail::bfs_path(st.grid, st.agent, goal, safe_tile());
    if (path.empty()) return false;
    int want = detail::heading_toward(st.agent, path.front());
    if (want == st.dir) out = Action::phys(PhysicalAction::Forward);
    else if ((st.dir + 1) % 4 == want) out = Action::phys(PhysicalAction::Right);
    else out = Action::phys(PhysicalAction::Left);
    return true;
  }

  // walk next to `obj`, face it, then emit `interact`
  bool approach_and(const WorldState& st, const Cell& obj, Action interact,
                    Action& out) {
    if (detail::adjacent4(st.agent, obj)) {
      int want = detail::heading_toward(st.agent, obj);
      if (want == st.dir) {
        out = interact;
      } else if ((st.dir + 1) % 4 == want) {
        out = Action::phys(PhysicalAction::Right);
      } else {
        out = Action::phys(PhysicalAction::Left);
      }
      return true;
    }
    return navigate(st, [&](const Cell& c) {
      return detail::adjacent4(c, obj);
    }, out);
  }

  bool solve_door(const WorldState& st, const WorldInstance& inst,
                  Action& out) {
    const DoorData& d = *inst.door;
    door_color_ = d.door_color;  // visible on the door itself
    if (!door_asked_) {
      if (detail::adjacent4(st.agent, d.door_cell)) {
        door_asked_ = true;
        last_asked_ = Step::AskDoor;
        out = Action::ask(build_query(Step::AskDoor));
        return true;
      }
      return approach_and(st, d.door_cell, Action::phys(PhysicalAction::Done),
                          out);
    }
    if (!opener_) {
      out = Action::phys(PhysicalAction::Done);  // reply arrives next step
      return true;
    }
    bool carrying_opener = st.carried &&
                           st.carried->type == ObjType::Key &&
                           st.carried->color == *opener_;
    if (!carrying_opener) {
      for (int i = 0; i < 3; ++i) {
        if (d.key_color[i] != *opener_) continue;
        return approach_and(st, d.key_cell[i],
                            Action::phys(PhysicalAction::Pickup), out);
      }
      return false;
    }
    return approach_and(st, d.door_cell, Action::phys(PhysicalAction::Toggle),
                        out);
  }

  bool solve_box(const WorldState& st, const WorldInstance& inst,
                 Action& out) {
    if (!box_color_) return false;
    for (int i = 0; i < 2; ++i) {
      if (inst.box->box_color[i] != *box_color_) continue;
      return approach_and(st, inst.box->box_cell[i],
                          Action::phys(PhysicalAction::Toggle), out);
    }
    return false;
  }

  const Environment* env_;
  bool started_ = false;
  std::string owner_ = "mary's";
  std::deque<Step> ungated_;
  Step last_asked_ = Step::None;
  bool door_asked_ = false;
  Color door_color_ = Color::None;
  std::optional<Color> danger_color_;
  std::optional<Color> toy_color_;
  std::optional<Color> box_color_;
  std::optional<Color> fav_color_;
  std::optional<ObjType> fav_type_;
  std::optional<Color> opener_;
};

// Convenience: run the expert on one episode, return success.
struct ExpertEpisode {
  bool success = false;
  int length = 0;
  int queries = 0;
};

inline ExpertEpisode run_expert_episode(Environment& env, uint64_t seed) {
  Observation obs = env.reset(seed);
  ScriptedExpert expert(&env);
  ExpertEpisode ep;
  while (!env.done()) {
    Action a = expert.act(obs);
    if (a.is_ask()) ++ep.queries;
    StepResult r = env.step(a);
    obs = r.observation;
    ep.length = env.t();
  }
  ep.success = env.success();
  return ep;
}

}  // namespace qgrid
