#include <catch2/catch_amalgamated.hpp>

#include "qgrid/notebook.hpp"
#include "qgrid/util.hpp"

using namespace qgrid;

namespace {

// brute-force oracle: connected components of the pairwise Sim >= alpha graph
std::set<std::set<Utterance>> component_partition(
    const std::vector<Utterance>& items, const SimilarityConfig& cfg) {
  size_t n = items.size();
  std::vector<size_t> parent(n);
  for (size_t i = 0; i < n; ++i) parent[i] = i;
  std::function<size_t(size_t)> find = [&](size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (size_t i = 0; i < n; ++i)
    for (size_t j = i + 1; j < n; ++j)
      if (similarity(items[i], items[j], cfg) >= cfg.alpha)
        parent[find(i)] = find(j);
  std::map<size_t, std::set<Utterance>> groups;
  for (size_t i = 0; i < n; ++i) groups[find(i)].insert(items[i]);
  std::set<std::set<Utterance>> out;
  for (auto& [k, g] : groups) out.insert(g);
  return out;
}

Utterance random_utterance(Rng& rng, int max_len = 5) {
  static const std::vector<std::string> words = {
      "red",  "ball", "box",  "key",  "door", "toy",
      "zone", "cube", "grey", "blue", "row",  "find"};
  int n = rng.uniform_int(1, max_len);
  std::vector<std::string> t;
  for (int i = 0; i < n; ++i) t.push_back(rng.choice(words));
  return Utterance(t);
}

}  // namespace

TEST_CASE("notebook initialization") {
  auto nb = Notebook::init(utt("find mary's toy"));
  CHECK(nb.set_count() == 1);
  CHECK(nb.task_set() == std::vector<Utterance>{utt("find mary's toy")});
  CHECK_THROWS_AS(Notebook::init(Utterance{}), std::invalid_argument);
}

TEST_CASE("similarity is the overlap coefficient on filtered n-grams") {
  SimilarityConfig cfg;
  // {find, mary's, toy} vs {mary's, toy, red, ball}: 2 shared / min(3, 4)
  CHECK(similarity(utt("find mary's toy"), utt("mary's toy is the red ball"),
                   cfg) == Catch::Approx(2.0 / 3.0));
  CHECK(similarity(utt("find mary's toy"), utt("find mary's toy"), cfg) ==
        1.0);
  CHECK(similarity(utt("find mary's toy"), utt("danger zone"), cfg) == 0.0);
  CHECK(similarity(utt("the a is"), utt("find mary's toy"), cfg) == 0.0);

  SimilarityConfig bi;
  bi.ngram = 2;
  CHECK(similarity(utt("find mary's toy"), utt("mary's toy is the red ball"),
                   bi) == Catch::Approx(0.5));
}

TEST_CASE("insert merges related sets and appends unrelated ones") {
  SimilarityConfig cfg;
  auto nb = Notebook::init(utt("find mary's toy"));

  nb.insert(utt("mary's toy is the red ball"), cfg);
  CHECK(nb.set_count() == 1);
  CHECK(nb.task_set_contains(utt("mary's toy is the red ball")));

  nb.insert(utt("i don't know"), cfg);
  CHECK(nb.set_count() == 2);
  CHECK_FALSE(nb.task_set_contains(utt("i don't know")));

  // bridging utterance unites previously separate sets
  auto nb2 = Notebook::init(utt("find mary's toy"));
  nb2.insert(utt("the red ball is in the grey box"), cfg);  // unrelated yet
  CHECK(nb2.set_count() == 2);
  nb2.insert(utt("mary's toy is the red ball"), cfg);  // related to both
  CHECK(nb2.set_count() == 1);
  CHECK(nb2.task_set().size() == 3);

  // duplicate insert is a membership no-op
  auto before = nb2.task_set();
  nb2.insert(utt("mary's toy is the red ball"), cfg);
  CHECK(nb2.task_set() == before);
}

TEST_CASE("task_set always holds the instruction and never shrinks") {
  SimilarityConfig cfg;
  Rng rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    Utterance v0 = random_utterance(rng);
    auto nb = Notebook::init(v0);
    size_t prev = 1;
    for (int i = 0; i < 10; ++i) {
      nb.insert(random_utterance(rng), cfg);
      CHECK(nb.task_set_contains(v0));
      CHECK(nb.task_set().size() >= prev);
      prev = nb.task_set().size();
    }
  }
}

TEST_CASE("sets stay pairwise disjoint under random inserts") {
  SimilarityConfig cfg;
  Rng rng(23);
  for (int trial = 0; trial < 200; ++trial) {
    auto nb = Notebook::init(random_utterance(rng));
    for (int i = 0; i < 8; ++i) nb.insert(random_utterance(rng), cfg);
    std::set<Utterance> seen;
    size_t total = 0;
    for (size_t s = 0; s < nb.set_count(); ++s) {
      for (const auto& u : nb.set_at(s)) seen.insert(u);
      total += nb.set_at(s).size();
    }
    CHECK(seen.size() == total);
  }
}

TEST_CASE("final partition equals connected components, any insert order") {
  SimilarityConfig cfg;
  Rng rng(42);
  for (int trial = 0; trial < 300; ++trial) {
    Utterance v0 = random_utterance(rng);
    std::vector<Utterance> inserts;
    int n = rng.uniform_int(0, 9);
    for (int i = 0; i < n; ++i) inserts.push_back(random_utterance(rng));

    std::vector<Utterance> all = {v0};
    for (const auto& u : inserts)
      if (std::find(all.begin(), all.end(), u) == all.end()) all.push_back(u);
    auto expected = component_partition(all, cfg);

    rng.shuffle(inserts);
    auto nb = Notebook::init(v0);
    for (const auto& u : inserts) nb.insert(u, cfg);
    CHECK(nb.partition() == expected);
  }
}
