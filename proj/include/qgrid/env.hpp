#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "qgrid/oracle.hpp"
#include "qgrid/tasks.hpp"
#include "qgrid/world.hpp"

namespace qgrid {

struct RewardShaping {
  double success_base = 1.0;
  double step_decay = 0.9;  // payoff = base - decay * t / H
};

struct EnvConfig {
  std::vector<TaskId> tasks = {TaskId::Danger};
  int rooms = 1;
  int room_size = 7;
  bool early_terminate = true;
  uint64_t seed = 0;
  RewardShaping reward;
  std::optional<int> qt_override;  // pins |Q_t| for metrics when set

  int horizon() const { return rooms * room_size * room_size; }
};

// Per-combination defaults, geometry and termination per the task table.
inline EnvConfig compose(const std::vector<TaskId>& tasks) {
  if (tasks.empty() || tasks.size() > 4)
    throw std::invalid_argument("compose: need 1..4 sub-tasks");
  for (size_t i = 0; i < tasks.size(); ++i)
    for (size_t j = i + 1; j < tasks.size(); ++j)
      if (tasks[i] == tasks[j])
        throw std::invalid_argument("compose: duplicate sub-task");
  const TaskGeometry& g = default_geometry(task_mask(tasks));
  EnvConfig cfg;
  cfg.tasks = tasks;
  cfg.rooms = g.rooms;
  cfg.room_size = g.room_size;
  cfg.early_terminate = g.early_terminate;
  return cfg;
}

inline EnvConfig compose_named(const std::vector<std::string>& names) {
  std::vector<TaskId> tasks;
  for (const auto& n : names) {
    auto t = task_from_name(n);
    if (!t) throw std::invalid_argument("unknown task: " + n);
    tasks.push_back(*t);
  }
  return compose(tasks);
}

struct Observation {
  View view;
  Utterance response;     // empty unless the previous action was a query
  Utterance instruction;  // constant within the episode
};

struct StepInfo {
  bool success = false;
  bool box_done = false;
  bool danger_done = false;
  bool favorite_done = false;
  bool door_done = false;
  bool response_was_informative = false;
};

struct StepResult {
  Observation observation;
  double reward_env = 0.0;
  bool done = false;
  StepInfo info;
};

struct WorldState {
  Grid grid;
  Cell agent;
  int dir = 0;
  std::optional<Carried> carried;
  int t = 0;
  bool flag[4] = {false, false, false, false};  // indexed by TaskId
  bool done = false;
  bool success = false;
};

// One queryable grid-world episode stream. reset() samples a fresh world
// and knowledge base; step() advances physical dynamics or routes a query
// through the oracle, delivering the reply with the next observation.
class Environment {
 public:
  explicit Environment(EnvConfig cfg) : cfg_(std::move(cfg)), rng_(1) {}

  const EnvConfig& config() const { return cfg_; }
  int horizon() const { return cfg_.horizon(); }

  Observation reset(uint64_t seed) {
    rng_ = Rng(seed);
    inst_ = sample_world(cfg_.tasks, cfg_.rooms, cfg_.room_size, rng_);
    kb_ = build_knowledge_base(inst_);
    if (cfg_.qt_override) kb_.override_good_count(*cfg_.qt_override);
    st_ = WorldState{};
    st_.grid = inst_.grid;
    st_.agent = inst_.agent_start;
    st_.dir = inst_.agent_dir;
    pending_response_ = Utterance{};
    return observe();
  }

  StepResult step(const Action& a) {
    if (st_.done) throw std::logic_error("step after episode end");
    StepResult r;
    ++st_.t;
    pending_response_ = Utterance{};
    bool mistake = false;

    if (a.kind == Action::Kind::Ask) {
      // physical state untouched; reply arrives with the next observation
      pending_response_ = kb_.answer(a.query, st_.agent);
      r.info.response_was_informative =
          !(pending_response_ == unknown_reply());
    } else {
      apply_physical(a.physical, mistake);
    }

    update_flags();
    bool all_done = true;
    for (TaskId t : inst_.tasks)
      all_done = all_done && st_.flag[static_cast<int>(t)];

    if (mistake && cfg_.early_terminate) {
      st_.done = true;
    } else if (all_done) {
      st_.done = true;
      st_.success = true;
      r.reward_env = cfg_.reward.success_base -
                     cfg_.reward.step_decay * static_cast<double>(st_.t) /
                         horizon();
    } else if (st_.t >= horizon()) {
      st_.done = true;
    }

    r.done = st_.done;
    r.info.success = st_.success;
    r.info.box_done = st_.flag[0];
    r.info.danger_done = st_.flag[1];
    r.info.favorite_done = st_.flag[2];
    r.info.door_done = st_.flag[3];
    r.observation = observe();
    return r;
  }

  Observation observe() const {
    Observation o;
    o.view = render_view(st_.grid, st_.agent, st_.dir, st_.carried);
    o.response = pending_response_;
    o.instruction = inst_.instruction;
    return o;
  }

  const WorldState& state() const { return st_; }
  const WorldInstance& instance() const { return inst_; }
  const KnowledgeBase& knowledge() const { return kb_; }
  bool done() const { return st_.done; }
  bool success() const { return st_.success; }
  int t() const { return st_.t; }

 private:
  void apply_physical(int id, bool& mistake) {
    auto act = static_cast<PhysicalAction>(id);
    Cell front = cell_add(st_.agent, dir_vec(st_.dir));
    bool front_in = st_.grid.in_bounds(front);
    switch (act) {
      case PhysicalAction::Left:
        st_.dir = (st_.dir + 3) % 4;
        break;
      case PhysicalAction::Right:
        st_.dir = (st_.dir + 1) % 4;
        break;
      case PhysicalAction::Forward: {
        if (front_in && st_.grid.at(front).walkable()) {
          st_.agent = front;
          const GridObject& under = st_.grid.at(front);
          if (inst_.danger && under.type == ObjType::Tile &&
              under.color == inst_.danger->danger_color)
            mistake = true;
        }
        break;
      }
      case PhysicalAction::Pickup: {
        if (!front_in || st_.carried) break;
        GridObject& o = st_.grid.at(front);
        if (o.type == ObjType::Key || o.type == ObjType::Ball) {
          st_.carried = Carried{o.type, o.color};
          o = GridObject{ObjType::Floor, Color::None, ObjState::None};
        }
        break;
      }
      case PhysicalAction::Drop: {
        if (!front_in || !st_.carried) break;
        GridObject& o = st_.grid.at(front);
        if (o.type == ObjType::Floor) {
          o = GridObject{st_.carried->type, st_.carried->color,
                         ObjState::None};
          st_.carried.reset();
        }
        break;
      }
      case PhysicalAction::Toggle: {
        if (!front_in) break;
        GridObject& o = st_.grid.at(front);
        if (o.type == ObjType::Box && o.state == ObjState::Closed) {
          o.state = ObjState::Open;
          if (inst_.box) {
            if (front == inst_.box->box_cell[0])
              st_.flag[static_cast<int>(TaskId::ObjectInBox)] = true;
            else if (front == inst_.box->box_cell[1])
              mistake = true;
          }
        } else if (o.type == ObjType::Door && o.state == ObjState::Locked) {
          if (st_.carried && st_.carried->type == ObjType::Key && inst_.door &&
              st_.carried->color == inst_.door->opener) {
            o.state = ObjState::Open;
            st_.flag[static_cast<int>(TaskId::OpenDoor)] = true;
          }
        }
        break;
      }
      case PhysicalAction::Done:
        break;
    }
  }

  void update_flags() {
    if (inst_.danger && st_.agent == inst_.danger->target)
      st_.flag[static_cast<int>(TaskId::Danger)] = true;
    if (inst_.favorite) {
      for (int d = 0; d < 4; ++d)
        if (cell_add(st_.agent, dir_vec(d)) == inst_.favorite->fav_cell)
          st_.flag[static_cast<int>(TaskId::GoToFavorite)] = true;
    }
  }

  EnvConfig cfg_;
  Rng rng_;
  WorldInstance inst_;
  KnowledgeBase kb_;
  WorldState st_;
  Utterance pending_response_;
};

}  // namespace qgrid
