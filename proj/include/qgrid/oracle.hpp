#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "qgrid/lang.hpp"

namespace qgrid {

struct Cell {
  int x = 0;
  int y = 0;
  bool operator==(const Cell& o) const { return x == o.x && y == o.y; }
  bool operator<(const Cell& o) const {
    return x != o.x ? x < o.x : y < o.y;
  }
};

inline int chebyshev(const Cell& a, const Cell& b) {
  int dx = a.x > b.x ? a.x - b.x : b.x - a.x;
  int dy = a.y > b.y ? a.y - b.y : b.y - a.y;
  return dx > dy ? dx : dy;
}

// Location gate: the fact only answers when the agent stands within
// `radius` (Chebyshev) of the anchor cell.
struct SpatialGuard {
  Cell anchor;
  int radius = 1;
  std::string entity;  // label for inspection output

  bool satisfied(const Cell& agent) const {
    return chebyshev(agent, anchor) <= radius;
  }
};

struct KnowledgeFact {
  Query key;
  Utterance value;
  std::optional<SpatialGuard> guard;
};

inline const Utterance& unknown_reply() {
  static const Utterance r({"i", "don't", "know"});
  return r;
}

// Per-episode knowledge source. Immutable once built; answering is a total
// function over slot-valid queries.
class KnowledgeBase {
 public:
  void add(KnowledgeFact f, bool good) {
    if (good) good_.insert(f.key);
    facts_[f.key] = std::move(f);
  }

  const Utterance& answer(const Query& q, const Cell& agent_pos) const {
    auto it = facts_.find(q);
    if (it == facts_.end()) return unknown_reply();
    const auto& f = it->second;
    if (f.guard && !f.guard->satisfied(agent_pos)) return unknown_reply();
    return f.value;
  }

  const std::set<Query>& good_queries() const { return good_; }
  bool is_good(const Query& q) const { return good_.count(q) > 0; }

  // |Q_t| used by metrics; normally the good-set size, but a task config
  // may pin a different count.
  size_t good_count() const {
    return good_count_override_ ? *good_count_override_ : good_.size();
  }
  void override_good_count(size_t n) { good_count_override_ = n; }

  size_t fact_count() const { return facts_.size(); }
  const std::map<Query, KnowledgeFact>& facts() const { return facts_; }

 private:
  std::map<Query, KnowledgeFact> facts_;
  std::set<Query> good_;
  std::optional<size_t> good_count_override_;
};

}  // namespace qgrid
