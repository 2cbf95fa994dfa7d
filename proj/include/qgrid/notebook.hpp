#pragma once

#include <algorithm>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "qgrid/lang.hpp"

namespace qgrid {

struct SimilarityConfig {
  int ngram = 1;  // 1 or 2
  double alpha = 0.5;
  std::set<std::string> stopwords =
      Vocabulary::default_vocab().stopwords;
};

// Overlap coefficient on stopword-filtered n-gram sets. Zero when either
// side has no n-grams left.
inline double similarity(const Utterance& u, const Utterance& v,
                         const SimilarityConfig& cfg) {
  auto gu = ngram_set(u, cfg.ngram, cfg.stopwords);
  auto gv = ngram_set(v, cfg.ngram, cfg.stopwords);
  if (gu.empty() || gv.empty()) return 0.0;
  size_t inter = 0;
  for (const auto& g : gu)
    if (gv.count(g)) ++inter;
  return static_cast<double>(inter) /
         static_cast<double>(std::min(gu.size(), gv.size()));
}

// A collection of disjoint note sets. The set holding the instruction keeps
// index 0 forever; it is the only set the agent reads.
class Notebook {
 public:
  Notebook() = default;

  static Notebook init(const Utterance& instruction) {
    if (instruction.empty())
      throw std::invalid_argument("notebook: empty instruction");
    Notebook f;
    f.sets_.push_back({instruction});
    return f;
  }

  // Merge rule: gather every set containing an utterance similar to v,
  // union them together with v at the smallest involved index; otherwise
  // open a fresh set. Re-inserting a known utterance is a membership no-op
  // but still merges any sets it connects.
  void insert(const Utterance& v, const SimilarityConfig& cfg) {
    if (v.empty()) return;
    std::vector<size_t> related;
    for (size_t j = 0; j < sets_.size(); ++j) {
      for (const auto& u : sets_[j]) {
        if (similarity(v, u, cfg) >= cfg.alpha) {
          related.push_back(j);
          break;
        }
      }
    }
    if (related.empty()) {
      sets_.push_back({v});
      return;
    }
    size_t k = related.front();
    auto& target = sets_[k];
    for (size_t i = 1; i < related.size(); ++i) {
      for (auto& u : sets_[related[i]]) push_unique(target, u);
      sets_[related[i]].clear();
    }
    push_unique(target, v);
    // drop emptied sets, preserving relative order (index 0 never empties)
    sets_.erase(std::remove_if(sets_.begin(), sets_.end(),
                               [](const auto& s) { return s.empty(); }),
                sets_.end());
  }

  // The instruction-connected set A_0, in insertion order.
  const std::vector<Utterance>& task_set() const { return sets_.front(); }

  bool task_set_contains(const Utterance& v) const {
    const auto& a0 = sets_.front();
    return std::find(a0.begin(), a0.end(), v) != a0.end();
  }

  size_t set_count() const { return sets_.size(); }
  const std::vector<Utterance>& set_at(size_t i) const { return sets_[i]; }

  // partition as a set of sets, for equivalence checks
  std::set<std::set<Utterance>> partition() const {
    std::set<std::set<Utterance>> p;
    for (const auto& s : sets_) p.insert(std::set<Utterance>(s.begin(), s.end()));
    return p;
  }

 private:
  static void push_unique(std::vector<Utterance>& s, const Utterance& v) {
    if (std::find(s.begin(), s.end(), v) == s.end()) s.push_back(v);
  }
  std::vector<std::vector<Utterance>> sets_;
};

}  // namespace qgrid
