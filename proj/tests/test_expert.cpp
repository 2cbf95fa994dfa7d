#include <catch2/catch_amalgamated.hpp>

#include "qgrid/expert.hpp"

using namespace qgrid;

namespace {

void check_expert(const std::vector<TaskId>& tasks, int episodes,
                  uint64_t seed0) {
  Environment env(compose(tasks));
  int wins = 0;
  for (int i = 0; i < episodes; ++i) {
    auto ep = run_expert_episode(env, seed0 + i);
    if (!ep.success) {
      INFO("failing seed " << seed0 + i);
      CHECK(ep.success);
    }
    wins += ep.success;
    CHECK(ep.length <= env.horizon());
  }
  CHECK(wins == episodes);
}

}  // namespace

TEST_CASE("expert solves every level-1 task") {
  check_expert({TaskId::ObjectInBox}, 80, 10000);
  check_expert({TaskId::Danger}, 80, 20000);
  check_expert({TaskId::GoToFavorite}, 80, 30000);
  check_expert({TaskId::OpenDoor}, 80, 40000);
}

TEST_CASE("expert solves level-2 compositions") {
  check_expert({TaskId::ObjectInBox, TaskId::OpenDoor}, 50, 50000);
  check_expert({TaskId::Danger, TaskId::GoToFavorite}, 50, 60000);
  check_expert({TaskId::GoToFavorite, TaskId::OpenDoor}, 50, 70000);
  check_expert({TaskId::ObjectInBox, TaskId::Danger}, 50, 80000);
  check_expert({TaskId::Danger, TaskId::OpenDoor}, 50, 90000);
  check_expert({TaskId::ObjectInBox, TaskId::GoToFavorite}, 50, 95000);
}

TEST_CASE("expert issues exactly the useful queries on danger") {
  Environment env(compose({TaskId::Danger}));
  auto ep = run_expert_episode(env, 123);
  CHECK(ep.success);
  CHECK(ep.queries == 1);
}

TEST_CASE("expert issues the three-hop chain on object-in-box") {
  Environment env(compose({TaskId::ObjectInBox}));
  auto ep = run_expert_episode(env, 321);
  CHECK(ep.success);
  CHECK(ep.queries == 3);
}

TEST_CASE("expert queries the door only when standing next to it") {
  Environment env(compose({TaskId::OpenDoor}));
  Observation obs = env.reset(77);
  ScriptedExpert expert(&env);
  while (!env.done()) {
    Action a = expert.act(obs);
    if (a.is_ask()) {
      CHECK(chebyshev(env.state().agent, env.instance().door->door_cell) <=
            1);
    }
    obs = env.step(a).observation;
  }
  CHECK(env.success());
}
