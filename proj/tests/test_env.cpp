#include <catch2/catch_amalgamated.hpp>

#include "qgrid/env.hpp"
#include "qgrid/expert.hpp"

using namespace qgrid;

TEST_CASE("horizon is rooms times squared room size") {
  CHECK(compose({TaskId::ObjectInBox, TaskId::OpenDoor}).horizon() == 98);
  CHECK(compose({TaskId::GoToFavorite}).horizon() == 225);
  CHECK(compose({TaskId::ObjectInBox}).horizon() == 81);
  CHECK(compose({TaskId::Danger}).horizon() == 49);
}

TEST_CASE("compose applies the per-combination defaults") {
  auto c = compose({TaskId::Danger, TaskId::GoToFavorite});
  CHECK(c.rooms == 2);
  CHECK(c.room_size == 7);
  CHECK(c.early_terminate);

  auto d = compose({TaskId::GoToFavorite, TaskId::OpenDoor});
  CHECK(d.rooms == 9);
  CHECK(d.room_size == 5);
  CHECK_FALSE(d.early_terminate);

  CHECK(compose({TaskId::Danger}).rooms == 1);
  CHECK_THROWS_AS(compose({TaskId::Danger, TaskId::Danger}),
                  std::invalid_argument);
  CHECK_THROWS_AS(compose({}), std::invalid_argument);
}

TEST_CASE("composite instruction concatenates sub-task instructions") {
  Environment env(compose({TaskId::OpenDoor, TaskId::ObjectInBox}));
  auto obs = env.reset(3);
  std::string text = obs.instruction.text();
  std::string owner = owner_word(env.instance().box->owner);
  CHECK(text == "find the key to the door and find " + owner + " toy");
}

TEST_CASE("danger reset produces the documented instruction and geometry") {
  Environment env(compose({TaskId::Danger}));
  auto obs = env.reset(7);
  CHECK(obs.instruction.text() ==
        "avoid danger zone and go to the green target square");
  CHECK(env.instance().layout.grid_w() == 7);
  CHECK(env.instance().layout.grid_h() == 7);

  Environment fav(compose({TaskId::GoToFavorite}));
  fav.reset(7);
  CHECK(fav.instance().layout.room_count() == 9);
  CHECK(fav.instance().layout.grid_w() == 13);
}

TEST_CASE("same seed reproduces the world exactly") {
  Environment a(compose({TaskId::ObjectInBox, TaskId::Danger}));
  Environment b(compose({TaskId::ObjectInBox, TaskId::Danger}));
  auto oa = a.reset(99);
  auto ob = b.reset(99);
  CHECK(oa.instruction == ob.instruction);
  CHECK(oa.view.data == ob.view.data);
  CHECK(a.instance().agent_start == b.instance().agent_start);
  CHECK(a.knowledge().fact_count() == b.knowledge().fact_count());
  for (const auto& [k, f] : a.knowledge().facts())
    CHECK(b.knowledge().facts().at(k).value == f.value);

  auto oc = a.reset(100);
  bool differs = !(oc.view.data == ob.view.data) ||
                 !(oc.instruction == ob.instruction);
  CHECK(differs);
}

TEST_CASE("forward into a wall leaves the agent in place") {
  Environment env(compose({TaskId::Danger}));
  env.reset(11);
  // face the nearest wall by brute force: rotate until the front cell is
  // a wall, then try to walk into it
  for (int i = 0; i < 4; ++i) {
    Cell front = cell_add(env.state().agent, dir_vec(env.state().dir));
    if (env.state().grid.at(front).type == ObjType::Wall) break;
    env.step(Action::phys(PhysicalAction::Left));
  }
  Cell before = env.state().agent;
  Cell front = cell_add(before, dir_vec(env.state().dir));
  if (env.state().grid.at(front).type == ObjType::Wall) {
    auto r = env.step(Action::phys(PhysicalAction::Forward));
    CHECK(env.state().agent == before);
    CHECK(r.reward_env == 0.0);
    CHECK_FALSE(r.done);
  }
}

TEST_CASE("stepping on a danger tile ends the episode without reward") {
  // find a seed where a danger tile is directly reachable, then walk on it
  for (uint64_t seed = 1; seed < 200; ++seed) {
    Environment env(compose({TaskId::Danger}));
    env.reset(seed);
    const auto& d = *env.instance().danger;
    Cell danger_cell{-1, -1};
    for (const auto& c : d.ring)
      if (env.state().grid.at(c).color == d.danger_color) danger_cell = c;
    REQUIRE(danger_cell.x >= 0);  // ring always has a danger tile

    // navigate next to it using the expert's path machinery
    auto path = detail::bfs_path(
        env.state().grid, env.state().agent,
        [&](const Cell& c) { return detail::adjacent4(c, danger_cell); },
        d.safe_color);
    if (path.empty()) continue;
    path.push_back(danger_cell);
    bool dead = false;
    for (const Cell& next : path) {
      while (detail::heading_toward(env.state().agent, next) !=
             env.state().dir)
        env.step(Action::phys(PhysicalAction::Right));
      auto r = env.step(Action::phys(PhysicalAction::Forward));
      if (r.done) {
        CHECK(env.state().agent == danger_cell);
        CHECK_FALSE(r.info.success);
        CHECK(r.reward_env == 0.0);
        dead = true;
        break;
      }
    }
    CHECK(dead);
    return;
  }
  FAIL("no usable seed found");
}

TEST_CASE("queries leave the physical state untouched and reply next step") {
  Environment env(compose({TaskId::Danger}));
  auto obs = env.reset(21);
  CHECK(obs.response.empty());

  auto before = env.state();
  auto r = env.step(Action::ask({"what's", "danger", "zone"}));
  CHECK(env.state().agent == before.agent);
  CHECK(env.state().dir == before.dir);
  CHECK(env.state().grid.at({1, 1}).type == before.grid.at({1, 1}).type);
  CHECK(env.t() == before.t + 1);
  CHECK(r.observation.response ==
        utt(std::string("the danger zone is ") +
            color_word(env.instance().danger->danger_color)));
  CHECK(r.info.response_was_informative);

  // a miss answers with the fallback and counts as uninformative
  auto r2 = env.step(Action::ask({"what's", "red", "lamp"}));
  CHECK(r2.observation.response == unknown_reply());
  CHECK_FALSE(r2.info.response_was_informative);

  // physical actions clear the response field
  auto r3 = env.step(Action::phys(PhysicalAction::Left));
  CHECK(r3.observation.response.empty());
}

TEST_CASE("stepping a finished episode throws") {
  Environment env(compose({TaskId::Danger}));
  env.reset(5);
  while (!env.done()) env.step(Action::phys(PhysicalAction::Done));
  CHECK(env.t() == env.horizon());
  CHECK_THROWS_AS(env.step(Action::phys(PhysicalAction::Done)),
                  std::logic_error);
}

TEST_CASE("episode reward is zero or within the success band") {
  // random walks over assorted seeds; positive reward only on the final
  // successful step
  Rng rng(4242);
  for (int trial = 0; trial < 40; ++trial) {
    Environment env(compose({TaskId::GoToFavorite}));
    env.reset(1000 + trial);
    while (!env.done()) {
      Action a = rng.bernoulli(0.1)
                     ? Action::ask({"what's", "danger", "zone"})
                     : Action::phys(rng.uniform_int(0, 6));
      auto r = env.step(a);
      if (r.reward_env != 0.0) {
        CHECK(r.done);
        CHECK(r.info.success);
        CHECK(r.reward_env >= 0.1);
        CHECK(r.reward_env < 1.0);
      }
    }
  }
}

TEST_CASE("view geometry: empty room center shows floor, walls occlude") {
  Environment env(compose({TaskId::ObjectInBox}));
  env.reset(13);

  // facing a wall at distance 1: the wall row is visible, beyond is unseen
  const auto& g = env.state().grid;
  Grid plain(9, 9);
  for (int y = 0; y < 9; ++y)
    for (int x = 0; x < 9; ++x)
      plain.at({x, y}) =
          (x == 0 || y == 0 || x == 8 || y == 8)
              ? GridObject{ObjType::Wall, Color::Grey, ObjState::None}
              : GridObject{ObjType::Floor, Color::None, ObjState::None};
  (void)g;

  View v = render_view(plain, {4, 1}, 3, std::nullopt);  // facing north
  // row 5 of the view is the wall directly ahead
  CHECK(v.at(3, 5, 0) == static_cast<int>(ObjType::Wall));
  // everything beyond the wall is unseen
  for (int vy = 0; vy < 5; ++vy)
    for (int vx = 0; vx < 7; ++vx) {
      INFO("vx=" << vx << " vy=" << vy);
      CHECK(v.at(vx, vy, 0) == static_cast<int>(ObjType::Unseen));
    }
  // heading channel broadcasts the direction
  for (int vy = 0; vy < 7; ++vy)
    for (int vx = 0; vx < 7; ++vx) CHECK(v.at(vx, vy, 3) == 3);

  View center = render_view(plain, {4, 4}, 3, std::nullopt);
  CHECK(center.at(3, 6, 0) == static_cast<int>(ObjType::Floor));
  CHECK(center.at(3, 3, 0) == static_cast<int>(ObjType::Floor));
}

TEST_CASE("rotating the agent matches rotating a world-frame crop") {
  // oracle: take the north-facing view from the same cell and rotate the
  // 7x7 patch on paper, then compare against the renderer's west view.
  Grid g(9, 9);
  Rng rng(555);
  for (int y = 0; y < 9; ++y)
    for (int x = 0; x < 9; ++x) {
      bool border = x == 0 || y == 0 || x == 8 || y == 8;
      if (border)
        g.at({x, y}) = {ObjType::Wall, Color::Grey, ObjState::None};
      else if (rng.bernoulli(0.2))
        g.at({x, y}) = {ObjType::Ball,
                        static_cast<Color>(rng.uniform_int(1, 6)),
                        ObjState::None};
      else
        g.at({x, y}) = {ObjType::Floor, Color::None, ObjState::None};
    }

  // Build the expected west-facing view from world coordinates directly:
  // view (vx, vy) with heading west maps to world offsets
  //   ahead = 6 - vy (towards -x), side = vx - 3 (towards -y).
  Cell pos{4, 4};
  View west = render_view(g, pos, 2, std::nullopt);
  for (int vy = 0; vy < 7; ++vy)
    for (int vx = 0; vx < 7; ++vx) {
      Cell w{pos.x - (6 - vy), pos.y - (vx - 3)};
      if (!g.in_bounds(w)) continue;
      int got = west.at(vx, vy, 0);
      if (got == static_cast<int>(ObjType::Unseen)) continue;  // occluded
      CHECK(got == static_cast<int>(g.at(w).type));
      CHECK(west.at(vx, vy, 1) == static_cast<int>(g.at(w).color));
    }
}
