#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "qgrid/util.hpp"

namespace qgrid {

// A token sequence, already lowercased. An empty utterance stands for
// "no response this step".
struct Utterance {
  std::vector<std::string> tokens;

  Utterance() = default;
  explicit Utterance(std::vector<std::string> t) : tokens(std::move(t)) {}

  bool empty() const { return tokens.empty(); }
  size_t size() const { return tokens.size(); }
  std::string text() const { return join(tokens); }

  bool operator==(const Utterance& o) const { return tokens == o.tokens; }
  bool operator<(const Utterance& o) const { return tokens < o.tokens; }
};

// lowercase, split on whitespace, strip punctuation except apostrophes
inline Utterance tokenize(const std::string& text) {
  std::string cleaned;
  cleaned.reserve(text.size());
  for (char c : text) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    bool keep = (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') ||
                c == '\'' || c == ' ' || c == '\t' || c == '\n';
    cleaned.push_back(keep ? c : ' ');
  }
  return Utterance(split_ws(cleaned));
}

inline Utterance utt(const std::string& text) { return tokenize(text); }

struct Query {
  std::string func;
  std::string adj;
  std::string noun;

  bool operator==(const Query& o) const {
    return func == o.func && adj == o.adj && noun == o.noun;
  }
  bool operator<(const Query& o) const {
    if (func != o.func) return func < o.func;
    if (adj != o.adj) return adj < o.adj;
    return noun < o.noun;
  }
  std::string text() const { return func + " " + adj + " " + noun; }
};

// Word lists for the three query slots plus the glue words used by
// instructions and oracle replies. Slot vocabularies are pairwise disjoint.
class Vocabulary {
 public:
  std::vector<std::string> func_words;
  std::vector<std::string> adjectives;
  std::vector<std::string> nouns;
  std::vector<std::string> other;  // glue words: stopwords, verbs, fallback reply
  std::set<std::string> stopwords;

  static Vocabulary default_vocab() {
    Vocabulary v;
    v.func_words = {"what's", "where's"};
    v.adjectives = {"red",    "green", "blue",  "purple", "yellow", "grey",
                    "mary's", "tim's", "danger", "orange", "pink",   "brown",
                    "white",  "black", "cyan",   "big",    "small",  "old",
                    "new",    "one",   "two",    "three"};
    v.nouns = {"ball",   "box",    "key",    "door",  "toy",    "zone",
               "square", "tile",   "room",   "wall",  "favorite", "target",
               "floor",  "cube",   "doll",   "kite",  "drum",   "robot",
               "puzzle", "chest",  "row",    "column", "table",  "lamp"};
    v.other = {"the", "a",  "an",   "is", "to",    "and",  "in",
               "on",  "find", "avoid", "go", "i",     "don't", "know"};
    v.stopwords = {"the", "a", "an", "is", "to", "and", "in", "on"};
    v.rebuild_index();
    return v;
  }

  void rebuild_index() {
    words_.clear();
    slot_of_.clear();
    id_of_.clear();
    auto add_group = [&](const std::vector<std::string>& g, int slot) {
      for (const auto& w : g) {
        words_.insert(w);
        if (slot >= 0) slot_of_[w] = slot;
        if (!id_of_.count(w)) {
          id_of_[w] = static_cast<int>(ordered_.size());
          ordered_.push_back(w);
        }
      }
    };
    ordered_.clear();
    add_group(func_words, 0);
    add_group(adjectives, 1);
    add_group(nouns, 2);
    add_group(other, -1);
  }

  const std::set<std::string>& words() const { return words_; }
  size_t word_count() const { return words_.size(); }

  bool is_func(const std::string& w) const { return slot_is(w, 0); }
  bool is_adj(const std::string& w) const { return slot_is(w, 1); }
  bool is_noun(const std::string& w) const { return slot_is(w, 2); }
  bool contains(const std::string& w) const { return words_.count(w) > 0; }
  bool is_stopword(const std::string& w) const { return stopwords.count(w) > 0; }

  // -1 if not a slot word
  int slot_of(const std::string& w) const {
    auto it = slot_of_.find(w);
    return it == slot_of_.end() ? -1 : it->second;
  }

  // stable id over func+adj+noun+other, for embeddings
  int id(const std::string& w) const {
    auto it = id_of_.find(w);
    return it == id_of_.end() ? -1 : it->second;
  }
  const std::vector<std::string>& ordered_words() const { return ordered_; }

  int adj_index(const std::string& w) const { return index_in(adjectives, w); }
  int noun_index(const std::string& w) const { return index_in(nouns, w); }
  int func_index(const std::string& w) const { return index_in(func_words, w); }

  bool slot_valid(const Query& q) const {
    return is_func(q.func) && is_adj(q.adj) && is_noun(q.noun);
  }

 private:
  bool slot_is(const std::string& w, int s) const {
    auto it = slot_of_.find(w);
    return it != slot_of_.end() && it->second == s;
  }
  static int index_in(const std::vector<std::string>& g, const std::string& w) {
    auto it = std::find(g.begin(), g.end(), w);
    return it == g.end() ? -1 : static_cast<int>(it - g.begin());
  }
  std::set<std::string> words_;
  std::map<std::string, int> slot_of_;
  std::map<std::string, int> id_of_;
  std::vector<std::string> ordered_;
};

inline Utterance format_query(const Query& q) {
  return Utterance({q.func, q.adj, q.noun});
}

enum class ParseErrorKind {
  None,
  MissingSlot,
  UnknownToken,
  AmbiguousSlot,
  DuplicateSlot,
};

struct ParseResult {
  std::optional<Query> query;
  ParseErrorKind error = ParseErrorKind::None;
  std::string detail;

  bool ok() const { return query.has_value(); }
};

// Inverse of format_query, tolerant to stopwords and token order.
inline ParseResult parse_query(const Utterance& u, const Vocabulary& v) {
  ParseResult res;
  std::optional<std::string> slots[3];
  static const char* slot_names[3] = {"func", "adj", "noun"};
  for (const auto& tok : u.tokens) {
    if (v.is_stopword(tok)) continue;
    int matches = 0;
    int slot = -1;
    if (v.is_func(tok)) ++matches, slot = 0;
    if (v.is_adj(tok)) ++matches, slot = 1;
    if (v.is_noun(tok)) ++matches, slot = 2;
    if (matches == 0) {
      res.error = ParseErrorKind::UnknownToken;
      res.detail = tok;
      return res;
    }
    if (matches > 1) {
      // slot vocabularies are disjoint; hitting this means a broken vocab
      res.error = ParseErrorKind::AmbiguousSlot;
      res.detail = tok;
      return res;
    }
    if (slots[slot]) {
      res.error = ParseErrorKind::DuplicateSlot;
      res.detail = std::string(slot_names[slot]) + ": " + tok;
      return res;
    }
    slots[slot] = tok;
  }
  for (int s = 0; s < 3; ++s) {
    if (!slots[s]) {
      res.error = ParseErrorKind::MissingSlot;
      res.detail = slot_names[s];
      return res;
    }
  }
  res.query = Query{*slots[0], *slots[1], *slots[2]};
  return res;
}

// Deduplicated contiguous n-grams of the stopword-filtered sequence.
inline std::set<std::string> ngram_set(const Utterance& u, int n,
                                       const std::set<std::string>& stopwords) {
  std::vector<std::string> kept;
  for (const auto& t : u.tokens)
    if (!stopwords.count(t)) kept.push_back(t);
  std::set<std::string> out;
  if (static_cast<int>(kept.size()) < n) return out;
  for (size_t i = 0; i + n <= kept.size(); ++i) {
    std::string g = kept[i];
    for (int k = 1; k < n; ++k) g += " " + kept[i + k];
    out.insert(g);
  }
  return out;
}

}  // namespace qgrid
