#pragma once

#include <cmath>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "qgrid/lang.hpp"

namespace qgrid {

struct EpisodeRecord {
  bool success = false;
  int length = 0;
  std::vector<Query> queries;  // every issuance, duplicates included
  std::set<Query> good_set;    // the episode's useful queries
  size_t good_count = 0;       // |Q_t|; defaults to good_set.size()

  size_t qt() const { return good_count ? good_count : good_set.size(); }
};

struct QueryQuality {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// precision = distinct good / total issued, recall = distinct good / |Q_t|,
// f1 their harmonic mean. No queries at all scores (0, 0, 0).
inline QueryQuality query_quality(const EpisodeRecord& rec) {
  if (rec.qt() == 0) throw std::invalid_argument("empty good-query set");
  std::set<Query> good_seen;
  for (const auto& q : rec.queries)
    if (rec.good_set.count(q)) good_seen.insert(q);
  size_t n_g = good_seen.size();
  size_t n_tot = rec.queries.size();
  if (n_g > n_tot) throw std::logic_error("more good queries than queries");
  // a pinned |Q_t| below the actual good-set size caps the numerator
  if (n_g > rec.qt()) n_g = rec.qt();
  QueryQuality q;
  if (n_tot == 0) return q;
  q.precision = static_cast<double>(n_g) / static_cast<double>(n_tot);
  q.recall = static_cast<double>(n_g) / static_cast<double>(rec.qt());
  if (q.precision + q.recall > 0)
    q.f1 = 2.0 * q.precision * q.recall / (q.precision + q.recall);
  return q;
}

struct Report {
  size_t episodes = 0;
  double success_mean = 0.0, success_std = 0.0;
  double length_mean = 0.0, length_std = 0.0;
  double precision_mean = 0.0, recall_mean = 0.0, f1_mean = 0.0;
  std::map<int, int> query_histogram;  // queries per episode -> episode count
};

inline Report aggregate_report(const std::vector<EpisodeRecord>& records) {
  if (records.empty()) throw std::invalid_argument("no episode records");
  Report rep;
  rep.episodes = records.size();
  double n = static_cast<double>(records.size());
  double s = 0, s2 = 0, l = 0, l2 = 0;
  for (const auto& r : records) {
    double succ = r.success ? 1.0 : 0.0;
    s += succ;
    s2 += succ * succ;
    l += r.length;
    l2 += static_cast<double>(r.length) * r.length;
    QueryQuality q = query_quality(r);
    rep.precision_mean += q.precision;
    rep.recall_mean += q.recall;
    rep.f1_mean += q.f1;
    rep.query_histogram[static_cast<int>(r.queries.size())] += 1;
  }
  rep.success_mean = s / n;
  rep.length_mean = l / n;
  double sv = s2 / n - rep.success_mean * rep.success_mean;
  double lv = l2 / n - rep.length_mean * rep.length_mean;
  rep.success_std = std::sqrt(sv > 0 ? sv : 0);
  rep.length_std = std::sqrt(lv > 0 ? lv : 0);
  rep.precision_mean /= n;
  rep.recall_mean /= n;
  rep.f1_mean /= n;
  return rep;
}

inline std::string render_report_text(const Report& r) {
  std::ostringstream os;
  os.precision(4);
  os << "episodes            " << r.episodes << "\n";
  os << "success rate        " << r.success_mean << " +/- " << r.success_std
     << "\n";
  os << "episode length      " << r.length_mean << " +/- " << r.length_std
     << "\n";
  os << "query precision     " << r.precision_mean << "\n";
  os << "query recall        " << r.recall_mean << "\n";
  os << "query f1            " << r.f1_mean << "\n";
  os << "queries/episode histogram\n";
  for (const auto& [k, v] : r.query_histogram)
    os << "  " << k << ": " << v << "\n";
  return os.str();
}

inline std::string render_report_csv(const Report& r) {
  std::ostringstream os;
  os.precision(10);
  os << "episodes,success_mean,success_std,length_mean,length_std,"
        "precision,recall,f1\n";
  os << r.episodes << "," << r.success_mean << "," << r.success_std << ","
     << r.length_mean << "," << r.length_std << "," << r.precision_mean << ","
     << r.recall_mean << "," << r.f1_mean << "\n";
  os << "query_count,episodes\n";
  for (const auto& [k, v] : r.query_histogram) os << k << "," << v << "\n";
  return os.str();
}

}  // namespace qgrid
