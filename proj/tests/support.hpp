#pragma once
// Fixture builders and brute-force oracles shared by the unit and acceptance
// tests. The oracles avoid the library's bitmask tricks: they work on sorted
// index vectors and plain loops.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "msar/cohort.hpp"
#include "msar/comorbidity.hpp"
#include "msar/ingest.hpp"
#include "msar/msar.hpp"
#include "msar/random.hpp"
#include "msar/rules.hpp"

namespace msar::testing {

// 2020-01-01T00:00:00Z
inline constexpr std::int64_t kBase = 1577836800;

inline Timestamp at_day(std::int64_t day, std::int64_t hour = 0) {
  return Timestamp{kBase + day * kSecondsPerDay + hour * 3600};
}

inline VisitRecord make_visit(const std::string& id, Timestamp admit, Timestamp discharge, VisitClass cls,
                              bool elective = false, std::vector<std::string> codes = {}) {
  VisitRecord v;
  v.patient_id = id;
  v.admit_time = admit;
  v.discharge_time = discharge;
  v.visit_class = cls;
  v.elective = elective;
  v.diagnosis_codes = std::move(codes);
  return v;
}

/// ED visit from 08:00 to 12:00 on `day`.
inline VisitRecord ed_visit(const std::string& id, std::int64_t day, std::vector<std::string> codes = {}) {
  return make_visit(id, at_day(day, 8), at_day(day, 12), VisitClass::ED, false, std::move(codes));
}

/// Inpatient stay admitted at 10:00 on `day`, discharged at 10:00 `los` days later.
inline VisitRecord inpatient_visit(const std::string& id, std::int64_t day, std::int64_t los = 2,
                                   bool elective = false, std::vector<std::string> codes = {}) {
  return make_visit(id, at_day(day, 10), at_day(day + los, 10), VisitClass::Inpatient, elective,
                    std::move(codes));
}

inline CategoryIndex cat(std::string_view id) { return *find_category(id); }

inline ComorbiditySet set_of(std::initializer_list<std::string_view> ids) {
  ComorbiditySet s;
  for (auto id : ids) s.insert(cat(id));
  return s;
}

inline RuleKey key_of(std::initializer_list<std::string_view> ids) { return RuleKey(set_of(ids)); }

// ---- counting oracle --------------------------------------------------------

struct OracleCount {
  std::int64_t total = 0;
  std::int64_t recurrent = 0;
};

/// All n-combinations of {0, ..., universe-1} as sorted vectors.
inline std::vector<std::vector<int>> combinations(int universe, int n) {
  std::vector<std::vector<int>> out;
  std::vector<int> cur;
  auto rec = [&](auto&& self, int start) -> void {
    if (static_cast<int>(cur.size()) == n) {
      out.push_back(cur);
      return;
    }
    for (int c = start; c < universe; ++c) {
      cur.push_back(c);
      self(self, c + 1);
      cur.pop_back();
    }
  };
  rec(rec, 0);
  return out;
}

/// Counts, for every n-subset of the first `universe` categories, the rows
/// containing all of its members. Subsets held by fewer than min_count rows
/// are omitted.
inline std::map<std::vector<int>, OracleCount> oracle_rules(const std::vector<TrainingRow>& rows, int universe,
                                                            int n, int min_count) {
  std::map<std::vector<int>, OracleCount> out;
  for (const auto& combo : combinations(universe, n)) {
    OracleCount c;
    for (const auto& r : rows) {
      bool all = true;
      for (int m : combo) all = all && r.comorbidities.contains(static_cast<CategoryIndex>(m));
      if (all) {
        ++c.total;
        if (r.is_recurrent) ++c.recurrent;
      }
    }
    if (c.total >= min_count) out[combo] = c;
  }
  return out;
}

inline std::vector<int> as_indices(RuleKey k) {
  std::vector<int> v;
  for (auto m : k.members()) v.push_back(m);
  return v;
}

// ---- graph oracle -----------------------------------------------------------

struct OracleEdge {
  std::vector<int> a, b;
  double delta_c = 0, delta_s = 0;
  friend bool operator<(const OracleEdge& x, const OracleEdge& y) {
    return std::tie(x.a, x.b) < std::tie(y.a, y.b);
  }
};

/// Tests every pair for an intersection of exactly n-1 members; orientation
/// puts the higher z-confidence first, then the higher z-support, then the
/// lexicographically smaller member list.
inline std::vector<OracleEdge> oracle_edges(const RuleTable& table) {
  std::vector<OracleEdge> out;
  const auto& rules = table.rules();
  for (std::size_t i = 0; i < rules.size(); ++i) {
    for (std::size_t j = i + 1; j < rules.size(); ++j) {
      const auto mi = as_indices(rules[i].key);
      const auto mj = as_indices(rules[j].key);
      std::vector<int> common;
      std::set_intersection(mi.begin(), mi.end(), mj.begin(), mj.end(), std::back_inserter(common));
      if (static_cast<int>(common.size()) != table.n() - 1) continue;
      const RuleStats* x = &rules[i];
      const RuleStats* y = &rules[j];
      bool x_first;
      if (x->z_confidence != y->z_confidence) x_first = x->z_confidence > y->z_confidence;
      else if (x->z_support != y->z_support) x_first = x->z_support > y->z_support;
      else x_first = as_indices(x->key) < as_indices(y->key);
      if (!x_first) std::swap(x, y);
      out.push_back({as_indices(x->key), as_indices(y->key), x->z_confidence - y->z_confidence,
                     x->z_support - y->z_support});
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

inline double oracle_delta_max(const std::vector<OracleEdge>& edges) {
  double m = -INFINITY;
  for (const auto& e : edges) m = std::max({m, e.delta_c, e.delta_s});
  return m;
}

// ---- objective oracle -------------------------------------------------------

/// Sum over edges of (w_c (dmax - dc) + w_s (dmax - ds))^2 with w_s = 1 - w_c.
inline double oracle_objective(const SimilarityGraph& g, double w_c) {
  const double dmax = *g.delta_max;
  const double w_s = 1.0 - w_c;
  double sum = 0;
  for (const auto& e : g.edges) {
    const double sim = w_c * (dmax - e.delta_c) + w_s * (dmax - e.delta_s);
    sum += sim * sim;
  }
  return sum;
}

/// Graph with `edges` edges whose deltas are uniform in [lo, hi]. Keys are
/// placeholders; the solver only reads the deltas.
inline SimilarityGraph random_graph(Rng& rng, int edges, double lo = -2.0, double hi = 4.0) {
  SimilarityGraph g;
  double dmax = -INFINITY;
  for (int i = 0; i < edges; ++i) {
    SimilarityEdge e;
    e.delta_c = lo + (hi - lo) * rng.uniform();
    e.delta_s = lo + (hi - lo) * rng.uniform();
    dmax = std::max({dmax, e.delta_c, e.delta_s});
    g.edges.push_back(e);
  }
  g.delta_max = dmax;
  return g;
}

// ---- random training rows ---------------------------------------------------

inline std::vector<TrainingRow> random_rows(Rng& rng, int count, int universe, double density,
                                            double recurrent_rate = 0.4) {
  std::vector<TrainingRow> rows;
  for (int i = 0; i < count; ++i) {
    TrainingRow r;
    r.patient_id = "R" + std::to_string(i);
    for (int c = 0; c < universe; ++c) {
      if (rng.bernoulli(density)) r.comorbidities.insert(static_cast<CategoryIndex>(c));
    }
    r.is_recurrent = rng.bernoulli(recurrent_rate);
    rows.push_back(std::move(r));
  }
  return rows;
}

// ---- trade-off fixtures -----------------------------------------------------

inline RuleStats stats_of(RuleKey key, double confidence, double support, std::int64_t total_rows) {
  RuleStats r;
  r.key = key;
  r.confidence = confidence;
  r.support = support;
  r.count_total = std::llround(support * static_cast<double>(total_rows));
  r.count_recurrent = std::llround(confidence * static_cast<double>(r.count_total));
  return r;
}

/// Four unrelated triplets that set the population statistics.
inline std::vector<RuleStats> filler_rules(std::int64_t total_rows) {
  const double conf[] = {0.6524, 0.7001, 0.6619, 0.7096};
  const double supp[] = {0.0057, 0.0290, 0.0174, 0.0348};
  const RuleKey keys[] = {key_of({"AIDS", "ALCOHOL", "ANEMDEF"}), key_of({"ARTH", "BLDLOSS", "CHF"}),
                          key_of({"CHRNLUNG", "COAG", "DEPRESS"}), key_of({"DM", "DMCX", "DRUG"})};
  std::vector<RuleStats> out;
  for (int i = 0; i < 4; ++i) out.push_back(stats_of(keys[i], conf[i], supp[i], total_rows));
  return out;
}

inline constexpr std::int64_t kTradeoffRows = 1000000;

inline RuleKey tradeoff_p() { return key_of({"HTN", "PERIVASC", "WGHTLOSS"}); }
inline RuleKey tradeoff_q() { return key_of({"LYTES", "PERIVASC", "WGHTLOSS"}); }

/// P: higher confidence, lower support. Q: slightly lower confidence, nearly
/// three times the support. Normalized over six rules.
inline RuleTable tradeoff_table_a() {
  auto rules = filler_rules(kTradeoffRows);
  rules.push_back(stats_of(tradeoff_p(), 0.681, 0.00871, kTradeoffRows));
  rules.push_back(stats_of(tradeoff_q(), 0.675, 0.0244, kTradeoffRows));
  return z_normalize(RuleTable(3, kTradeoffRows, 5, std::move(rules)));
}

inline RuleKey tradeoff_b_high() { return key_of({"AIDS", "COAG", "PSYCH"}); }
inline RuleKey tradeoff_b_low() { return key_of({"AIDS", "COAG", "RENLFAIL"}); }

/// Two rare rules whose supports barely differ.
inline RuleTable tradeoff_table_b() {
  auto rules = filler_rules(kTradeoffRows);
  rules.push_back(stats_of(tradeoff_b_high(), 0.819, 0.000156, kTradeoffRows));
  rules.push_back(stats_of(tradeoff_b_low(), 0.748, 0.000198, kTradeoffRows));
  return z_normalize(RuleTable(3, kTradeoffRows, 5, std::move(rules)));
}

inline WeightSolution fixed_weights(double w_c) {
  WeightSolution w;
  w.w_c = w_c;
  w.w_s = 1.0 - w_c;
  return w;
}

}  // namespace msar::testing
