#include <catch2/catch_amalgamated.hpp>

#include "qgrid/env.hpp"
#include "qgrid/notebook.hpp"
#include "qgrid/oracle.hpp"
#include "qgrid/tasks.hpp"

using namespace qgrid;

namespace {

WorldInstance sample(const std::vector<TaskId>& tasks, uint64_t seed) {
  EnvConfig cfg = compose(tasks);
  Rng rng(seed);
  return sample_world(cfg.tasks, cfg.rooms, cfg.room_size, rng);
}

}  // namespace

TEST_CASE("answer returns fact values, unknown otherwise") {
  auto w = sample({TaskId::Danger}, 5);
  auto kb = build_knowledge_base(w);
  Cell anywhere{1, 1};

  Utterance reply = kb.answer({"what's", "danger", "zone"}, anywhere);
  CHECK(reply ==
        utt(std::string("the danger zone is ") +
            color_word(w.danger->danger_color)));
  CHECK(kb.answer({"where's", "red", "kite"}, anywhere) == unknown_reply());
  CHECK(unknown_reply().tokens ==
        std::vector<std::string>{"i", "don't", "know"});
}

TEST_CASE("guarded facts answer only near their anchor") {
  auto w = sample({TaskId::OpenDoor}, 9);
  auto kb = build_knowledge_base(w);
  const auto& d = *w.door;
  Query q{"what's", color_word(d.door_color), "door"};

  Cell far{d.door_cell.x + 3, d.door_cell.y};
  CHECK(kb.answer(q, far) == unknown_reply());

  Cell near{d.door_cell.x, d.door_cell.y + 1};
  CHECK(kb.answer(q, near) ==
        utt(std::string("the key to the door is the ") +
            color_word(d.opener) + " key"));
}

TEST_CASE("good-query counts match the per-task table") {
  CHECK(build_knowledge_base(sample({TaskId::ObjectInBox}, 1)).good_count() ==
        3);
  CHECK(build_knowledge_base(sample({TaskId::Danger}, 2)).good_count() == 1);
  CHECK(build_knowledge_base(sample({TaskId::GoToFavorite}, 3)).good_count() ==
        2);
  CHECK(build_knowledge_base(sample({TaskId::OpenDoor}, 4)).good_count() == 1);
  // composite sets are unions of the sub-task sets
  CHECK(build_knowledge_base(sample({TaskId::Danger, TaskId::GoToFavorite}, 5))
            .good_count() == 3);
}

TEST_CASE("good queries answer somewhere, and values stay in-vocabulary") {
  Vocabulary v = Vocabulary::default_vocab();
  for (uint64_t seed = 1; seed <= 30; ++seed) {
    for (auto tasks :
         {std::vector<TaskId>{TaskId::ObjectInBox}, {TaskId::Danger},
          {TaskId::GoToFavorite}, {TaskId::OpenDoor},
          {TaskId::ObjectInBox, TaskId::OpenDoor},
          {TaskId::Danger, TaskId::GoToFavorite}}) {
      auto w = sample(tasks, seed);
      auto kb = build_knowledge_base(w);
      for (const auto& [key, fact] : kb.facts()) {
        CHECK(v.slot_valid(key));
        REQUIRE_FALSE(fact.value.empty());
        for (const auto& tok : fact.value.tokens) CHECK(v.contains(tok));
      }
      for (const auto& tok : w.instruction.tokens) CHECK(v.contains(tok));
      for (const auto& q : kb.good_queries()) {
        Cell pos = kb.facts().at(q).guard ? kb.facts().at(q).guard->anchor
                                          : Cell{1, 1};
        Cell near{pos.x, pos.y + (kb.facts().at(q).guard ? 1 : 0)};
        CHECK_FALSE(kb.answer(q, near) == unknown_reply());
      }
    }
  }
}

TEST_CASE("reshuffling changes values but preserves structure") {
  auto w1 = sample({TaskId::ObjectInBox}, 100);
  auto w2 = sample({TaskId::ObjectInBox}, 101);
  auto k1 = build_knowledge_base(w1);
  auto k2 = build_knowledge_base(w2);
  CHECK(k1.fact_count() == k2.fact_count());
  CHECK(k1.good_queries().size() == k2.good_queries().size());
}

// The useful chain must merge into the instruction set when replies arrive
// in dependency order; the deliberately irrelevant facts must not creep in
// through any query the pointer can actually reach.
TEST_CASE("good replies chain into the task set; reachable junk stays out") {
  Vocabulary vocab = Vocabulary::default_vocab();
  SimilarityConfig sim;

  for (uint64_t seed = 1; seed <= 25; ++seed) {
    for (auto tasks :
         {std::vector<TaskId>{TaskId::ObjectInBox}, {TaskId::Danger},
          {TaskId::GoToFavorite}, {TaskId::OpenDoor},
          {TaskId::ObjectInBox, TaskId::Danger},
          {TaskId::Danger, TaskId::GoToFavorite}}) {
      auto w = sample(tasks, seed);
      auto kb = build_knowledge_base(w);
      auto nb = Notebook::init(w.instruction);

      // fixed-point closure over every query the pointer can reach: slot
      // words from A_0, or the whole slot vocabulary when A_0 has none
      std::set<Query> asked;
      bool grew = true;
      while (grew) {
        grew = false;
        std::set<std::string> adj_support, noun_support;
        for (const auto& u : nb.task_set())
          for (const auto& t : u.tokens) {
            if (vocab.is_adj(t)) adj_support.insert(t);
            if (vocab.is_noun(t)) noun_support.insert(t);
          }
        if (adj_support.empty())
          adj_support.insert(vocab.adjectives.begin(), vocab.adjectives.end());
        if (noun_support.empty())
          noun_support.insert(vocab.nouns.begin(), vocab.nouns.end());
        for (const auto& f : vocab.func_words) {
          for (const auto& a : vocab.adjectives) {
            if (!adj_support.count(a)) continue;
            for (const auto& n : vocab.nouns) {
              if (!noun_support.count(n)) continue;
              Query q{f, a, n};
              if (asked.count(q)) continue;
              asked.insert(q);
              // answer from the most permissive position (guard anchor)
              auto it = kb.facts().find(q);
              Cell pos =
                  it != kb.facts().end() && it->second.guard
                      ? Cell{it->second.guard->anchor.x,
                             it->second.guard->anchor.y + 1}
                      : Cell{1, 1};
              Utterance r = kb.answer(q, pos);
              size_t before = nb.task_set().size();
              nb.insert(r, sim);
              if (nb.task_set().size() != before) grew = true;
            }
          }
        }
      }

      // everything that joined A_0 is either the instruction, a good fact
      // value, or the fallback — never an irrelevant fact value
      for (const auto& u : nb.task_set()) {
        if (u == w.instruction) continue;
        bool is_good_value = false;
        for (const auto& q : kb.good_queries()) {
          if (kb.facts().at(q).value == u) is_good_value = true;
        }
        INFO("task set entry: " << u.text());
        CHECK(is_good_value);
      }
      // and every good value did join
      for (const auto& q : kb.good_queries()) {
        INFO("good value: " << kb.facts().at(q).value.text());
        CHECK(nb.task_set_contains(kb.facts().at(q).value));
      }
    }
  }
}
