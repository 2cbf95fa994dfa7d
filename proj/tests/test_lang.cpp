#include <catch2/catch_amalgamated.hpp>

#include "qgrid/lang.hpp"
#include "qgrid/util.hpp"

using namespace qgrid;

TEST_CASE("default vocabulary matches the environment statistics") {
  Vocabulary v = Vocabulary::default_vocab();
  CHECK(v.func_words.size() == 2);
  CHECK(v.adjectives.size() == 22);
  CHECK(v.nouns.size() == 24);
  CHECK(v.word_count() == 62);

  // slot groups pairwise disjoint
  for (const auto& w : v.func_words) {
    CHECK_FALSE(v.is_adj(w));
    CHECK_FALSE(v.is_noun(w));
  }
  for (const auto& w : v.adjectives) CHECK_FALSE(v.is_noun(w));
  for (const auto& w : v.stopwords) CHECK(v.contains(w));
}

TEST_CASE("tokenize keeps apostrophes, drops other punctuation") {
  CHECK(tokenize("Find Mary's toy!").tokens ==
        std::vector<std::string>{"find", "mary's", "toy"});
  CHECK(tokenize("avoid danger zone, and go").tokens ==
        std::vector<std::string>{"avoid", "danger", "zone", "and", "go"});
  CHECK(tokenize("").tokens.empty());
}

TEST_CASE("format_query emits the three-token template") {
  CHECK(format_query({"where's", "red", "ball"}).text() == "where's red ball");
  CHECK(format_query({"what's", "danger", "zone"}).text() ==
        "what's danger zone");
  CHECK(format_query({"what's", "mary's", "toy"}).text() ==
        "what's mary's toy");
}

TEST_CASE("parse_query handles stopwords, order, and errors") {
  Vocabulary v = Vocabulary::default_vocab();

  auto r = parse_query(utt("where's the red ball"), v);
  REQUIRE(r.ok());
  CHECK(*r.query == Query{"where's", "red", "ball"});

  r = parse_query(utt("where's ball"), v);
  CHECK_FALSE(r.ok());
  CHECK(r.error == ParseErrorKind::MissingSlot);
  CHECK(r.detail == "adj");

  r = parse_query(utt("where's red ball"), v);
  REQUIRE(r.ok());
  CHECK(*r.query == Query{"where's", "red", "ball"});

  // order-tolerant
  r = parse_query(utt("red ball where's"), v);
  REQUIRE(r.ok());
  CHECK(*r.query == Query{"where's", "red", "ball"});

  r = parse_query(utt("where's red xyzzy"), v);
  CHECK(r.error == ParseErrorKind::UnknownToken);

  r = parse_query(utt("where's red blue ball"), v);
  CHECK(r.error == ParseErrorKind::DuplicateSlot);
}

TEST_CASE("format then parse is the identity over the whole query space") {
  Vocabulary v = Vocabulary::default_vocab();
  int count = 0;
  for (const auto& f : v.func_words)
    for (const auto& a : v.adjectives)
      for (const auto& n : v.nouns) {
        Query q{f, a, n};
        auto r = parse_query(format_query(q), v);
        REQUIRE(r.ok());
        REQUIRE(*r.query == q);
        ++count;
      }
  CHECK(count == 2 * 22 * 24);
}

TEST_CASE("ngram_set enumerates filtered n-grams") {
  Vocabulary v = Vocabulary::default_vocab();
  auto u = utt("find mary's toy");
  CHECK(ngram_set(u, 1, v.stopwords) ==
        std::set<std::string>{"find", "mary's", "toy"});
  CHECK(ngram_set(u, 2, v.stopwords) ==
        std::set<std::string>{"find mary's", "mary's toy"});
  CHECK(ngram_set(Utterance{}, 1, v.stopwords).empty());
  CHECK(ngram_set(utt("toy"), 2, v.stopwords).empty());
}

TEST_CASE("unigram set is invariant to stopword insertion") {
  Vocabulary v = Vocabulary::default_vocab();
  Rng rng(7);
  std::vector<std::string> content = {"find", "mary's", "toy", "red",
                                      "ball", "danger", "zone"};
  std::vector<std::string> stops(v.stopwords.begin(), v.stopwords.end());
  for (int trial = 0; trial < 200; ++trial) {
    int n = rng.uniform_int(1, 5);
    std::vector<std::string> base;
    for (int i = 0; i < n; ++i) base.push_back(rng.choice(content));
    auto expected = ngram_set(Utterance(base), 1, v.stopwords);

    std::vector<std::string> padded;
    for (const auto& w : base) {
      while (rng.bernoulli(0.4)) padded.push_back(rng.choice(stops));
      padded.push_back(w);
    }
    while (rng.bernoulli(0.4)) padded.push_back(rng.choice(stops));
    CHECK(ngram_set(Utterance(padded), 1, v.stopwords) == expected);
  }
}
