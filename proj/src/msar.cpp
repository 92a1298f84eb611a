#include "msar/msar.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "msar/error.hpp"
#include "subsets.hpp"

namespace msar {
namespace {

// True when rule x sits on the `a` side of an edge with rule y.
bool orient_first(const RuleStats& x, const RuleStats& y) {
  if (x.z_confidence != y.z_confidence) return x.z_confidence > y.z_confidence;
  if (x.z_support != y.z_support) return x.z_support > y.z_support;
  return x.key < y.key;
}

struct EdgeTerms {
  std::vector<double> a;  // dmax - delta_c
  std::vector<double> b;  // dmax - delta_s
};

EdgeTerms edge_terms(const SimilarityGraph& graph) {
  if (graph.edges.empty() || !graph.delta_max) throw NoEdgesError();
  const double dmax = *graph.delta_max;
  EdgeTerms t;
  t.a.reserve(graph.edges.size());
  t.b.reserve(graph.edges.size());
  for (const auto& e : graph.edges) {
    t.a.push_back(dmax - e.delta_c);
    t.b.push_back(dmax - e.delta_s);
  }
  return t;
}

// sum_e (w a_e + (1 - w) b_e)^2, written as b + w (a - b) so that a flat
// objective (a == b) evaluates to exactly the same value for every w.
double objective_at(const EdgeTerms& t, double w) {
  double sum = 0.0;
  const std::size_t m = t.a.size();
  for (std::size_t i = 0; i < m; ++i) {
    const double sim = t.b[i] + w * (t.a[i] - t.b[i]);
    sum += sim * sim;
  }
  return sum;
}

WeightSolution make_solution(const EdgeTerms& t, double w_c, bool degenerate) {
  WeightSolution s;
  s.w_c = w_c;
  s.w_s = 1.0 - w_c;
  s.objective = objective_at(t, w_c);
  s.degenerate = degenerate;
  return s;
}

}  // namespace

SimilarityGraph build_similarity_graph(const RuleTable& table) {
  if (!table.normalized()) throw Error("similarity graph needs a z-normalized rule table");
  SimilarityGraph g;
  const auto& rules = table.rules();
  for (const auto& r : rules) g.vertices.push_back(r.key);
  if (rules.size() < 2) return g;

  // (n-1)-subset -> rules containing it. std::map keeps bucket order fixed.
  std::map<std::uint32_t, std::vector<std::size_t>> buckets;
  for (std::size_t i = 0; i < rules.size(); ++i) {
    const std::uint32_t mask = rules[i].key.bits();
    for (std::uint32_t b = mask; b != 0; b &= b - 1) {
      buckets[mask & ~(b & (~b + 1))].push_back(i);
    }
  }
  for (const auto& [sub, members] : buckets) {
    for (std::size_t x = 0; x < members.size(); ++x) {
      for (std::size_t y = x + 1; y < members.size(); ++y) {
        const RuleStats* p = &rules[members[x]];
        const RuleStats* q = &rules[members[y]];
        if (!orient_first(*p, *q)) std::swap(p, q);
        g.edges.push_back({p->key, q->key, p->z_confidence - q->z_confidence, p->z_support - q->z_support});
      }
    }
  }
  std::sort(g.edges.begin(), g.edges.end(), [](const SimilarityEdge& l, const SimilarityEdge& r) {
    if (l.a != r.a) return l.a < r.a;
    return l.b < r.b;
  });
  if (!g.edges.empty()) {
    double dmax = -INFINITY;
    for (const auto& e : g.edges) dmax = std::max({dmax, e.delta_c, e.delta_s});
    g.delta_max = dmax;
  }
  return g;
}

double similarity_objective(const SimilarityGraph& graph, double w_c) {
  return objective_at(edge_terms(graph), w_c);
}

double similarity_objective_slope(const SimilarityGraph& graph, double w_c) {
  const EdgeTerms t = edge_terms(graph);
  double slope = 0.0;
  for (std::size_t i = 0; i < t.a.size(); ++i) {
    const double d = t.a[i] - t.b[i];
    slope += 2.0 * d * (t.b[i] + w_c * d);
  }
  return slope;
}

WeightSolution solve_weights(const SimilarityGraph& graph) {
  const EdgeTerms t = edge_terms(graph);
  double dd = 0.0;
  double bd = 0.0;
  for (std::size_t i = 0; i < t.a.size(); ++i) {
    const double d = t.a[i] - t.b[i];
    dd += d * d;
    bd += t.b[i] * d;
  }
  if (dd == 0.0) return make_solution(t, 0.5, true);
  return make_solution(t, std::clamp(-bd / dd, 0.0, 1.0), false);
}

WeightSolution grid_search_weights(const SimilarityGraph& graph, double step) {
  if (!(step > 0.0 && step <= 0.01)) throw ConfigError("grid step must be in (0, 0.01]");
  const EdgeTerms t = edge_terms(graph);
  const auto points = static_cast<std::int64_t>(std::floor(1.0 / step + 1e-9));
  double best_w = 0.0;
  double best_f = objective_at(t, 0.0);
  auto visit = [&](double w) {
    const double f = objective_at(t, w);
    if (f < best_f) {
      best_f = f;
      best_w = w;
    }
  };
  for (std::int64_t i = 1; i <= points; ++i) visit(std::min(1.0, static_cast<double>(i) * step));
  if (static_cast<double>(points) * step < 1.0) visit(1.0);
  return make_solution(t, best_w, false);
}

RuleTable score_rules(RuleTable table, const WeightSolution& weights) {
  if (!table.normalized()) throw Error("scoring needs a z-normalized rule table");
  for (auto& r : table.mutable_rules()) {
    r.msar_score = weights.w_c * r.z_confidence + weights.w_s * r.z_support;
  }
  return table;
}

Explanation explain_patient(ComorbiditySet patient_set, const RuleTable& scored, int k) {
  Explanation out;
  const int n = scored.n();
  const auto members = patient_set.members();
  if (n < 1 || static_cast<int>(members.size()) < n) return out;

  std::vector<RankedRule> candidates;
  detail::for_each_subset(members, n, [&](std::uint32_t mask) {
    if (const RuleStats* r = scored.find(RuleKey(ComorbiditySet(mask)))) {
      if (!r->msar_score) throw Error("rule " + r->key.to_string() + " has no msar_score");
      candidates.push_back({r->key, *r->msar_score, r->confidence, r->support});
    }
  });
  if (candidates.empty()) return out;

  std::sort(candidates.begin(), candidates.end(), [](const RankedRule& l, const RankedRule& r) {
    if (l.msar_score != r.msar_score) return l.msar_score > r.msar_score;
    if (l.confidence != r.confidence) return l.confidence > r.confidence;
    return l.key < r.key;
  });
  if (k > 0 && candidates.size() > static_cast<std::size_t>(k)) candidates.resize(static_cast<std::size_t>(k));
  out.status = ExplainStatus::Ok;
  out.top_comorbidities = candidates.front().key.members();
  out.ranked = std::move(candidates);
  return out;
}

}  // namespace msar
