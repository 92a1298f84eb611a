#include "msar/eval.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "msar/error.hpp"
#include "msar/random.hpp"

namespace msar {
namespace {

std::vector<const RuleStats*> top_rules(const RuleTable& scored, double top_fraction) {
  if (!(top_fraction > 0.0 && top_fraction <= 1.0)) throw ConfigError("top_fraction must be in (0, 1]");
  if (scored.empty()) throw EmptyInputError("comorbidity frequency of an empty rule table");
  // The epsilon keeps e.g. 0.259 * 1000 from rounding up to 260.
  const auto k = static_cast<std::size_t>(std::ceil(top_fraction * static_cast<double>(scored.size()) - 1e-9));
  if (k == 0) throw EmptyInputError("top_fraction selects no rules");

  std::vector<const RuleStats*> order;
  for (const auto& r : scored.rules()) {
    if (!r.msar_score) throw Error("rule " + r.key.to_string() + " has no msar_score");
    order.push_back(&r);
  }
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                    [](const RuleStats* a, const RuleStats* b) {
                      if (*a->msar_score != *b->msar_score) return *a->msar_score > *b->msar_score;
                      return a->key < b->key;
                    });
  order.resize(k);
  return order;
}

struct RboSums {
  double agreement = 0.0;  // sum of p^(d-1) overlap_d / d
  double weights = 0.0;    // sum of p^(d-1)
};

RboSums rbo_sums(std::span<const CategoryIndex> a, std::span<const CategoryIndex> b, double p) {
  if (a.empty() || b.empty()) throw EmptyInputError("rbo of an empty list");
  if (!(p > 0.0 && p < 1.0)) throw Error("rbo persistence p must be in (0, 1)");
  std::array<bool, 256> in_a{}, in_b{};
  auto check_unique = [](std::span<const CategoryIndex> list) {
    std::array<bool, 256> seen{};
    for (auto x : list) {
      if (seen[x]) throw Error("rbo input list has duplicates");
      seen[x] = true;
    }
  };
  check_unique(a);
  check_unique(b);

  const std::size_t depth = std::max(a.size(), b.size());
  double overlap = 0.0;
  double weight = 1.0;
  RboSums sums;
  for (std::size_t d = 1; d <= depth; ++d) {
    if (d <= a.size()) {
      const auto x = a[d - 1];
      in_a[x] = true;
      if (in_b[x]) overlap += 1.0;
    }
    if (d <= b.size()) {
      const auto y = b[d - 1];
      in_b[y] = true;
      if (in_a[y]) overlap += 1.0;
    }
    sums.agreement += weight * (overlap / static_cast<double>(d));
    sums.weights += weight;
    weight *= p;
  }
  return sums;
}

}  // namespace

double rbo(std::span<const CategoryIndex> a, std::span<const CategoryIndex> b, double p) {
  const RboSums s = rbo_sums(a, b, p);
  return s.agreement / s.weights;
}

double rbo_agreement(std::span<const CategoryIndex> a, std::span<const CategoryIndex> b, double p) {
  return (1.0 - p) * rbo_sums(a, b, p).agreement;
}

CategoryFrequencies comorbidity_frequency(const RuleTable& scored, double top_fraction) {
  const auto selected = top_rules(scored, top_fraction);
  std::array<std::size_t, kNumCategories> counts{};
  for (const auto* r : selected) {
    for (auto c : r->key.members()) ++counts[c];
  }
  CategoryFrequencies freq{};
  for (std::size_t c = 0; c < kNumCategories; ++c) {
    freq[c] = static_cast<double>(counts[c]) / static_cast<double>(selected.size());
  }
  return freq;
}

std::vector<CategoryIndex> rank_comorbidities(const RuleTable& scored, double top_fraction) {
  const auto selected = top_rules(scored, top_fraction);
  std::array<std::size_t, kNumCategories> counts{};
  std::array<double, kNumCategories> best{};
  best.fill(-INFINITY);
  for (const auto* r : selected) {
    for (auto c : r->key.members()) {
      ++counts[c];
      best[c] = std::max(best[c], *r->msar_score);
    }
  }
  std::vector<CategoryIndex> ranked;
  for (std::size_t c = 0; c < kNumCategories; ++c) {
    if (counts[c] > 0) ranked.push_back(static_cast<CategoryIndex>(c));
  }
  std::sort(ranked.begin(), ranked.end(), [&](CategoryIndex x, CategoryIndex y) {
    if (counts[x] != counts[y]) return counts[x] > counts[y];
    if (best[x] != best[y]) return best[x] > best[y];
    return x < y;
  });
  return ranked;
}

std::vector<TrainingRow> subsample_fold(std::span<const TrainingRow> rows, int fold, double fraction,
                                        std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw ConfigError("sample_fraction must be in (0, 1]");
  const std::uint64_t salt = mix64(seed ^ mix64(static_cast<std::uint64_t>(fold) + 1));
  std::vector<std::pair<std::uint64_t, const TrainingRow*>> keyed;
  keyed.reserve(rows.size());
  for (const auto& r : rows) keyed.emplace_back(mix64(salt ^ fnv1a64(r.patient_id)), &r);

  const auto take = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(rows.size()) + 1e-9));
  auto by_key = [](const auto& x, const auto& y) {
    if (x.first != y.first) return x.first < y.first;
    return x.second->patient_id < y.second->patient_id;
  };
  std::nth_element(keyed.begin(), keyed.begin() + static_cast<std::ptrdiff_t>(take), keyed.end(), by_key);
  keyed.resize(take);

  std::vector<TrainingRow> out;
  out.reserve(take);
  for (const auto& [_, r] : keyed) out.push_back(*r);
  std::sort(out.begin(), out.end(),
            [](const TrainingRow& x, const TrainingRow& y) { return x.patient_id < y.patient_id; });
  return out;
}

std::vector<FoldResult> cross_validate(std::span<const TrainingRow> rows, const CrossValidationParams& params) {
  if (rows.size() < 100) throw EmptyInputError("cross-validation needs at least 100 rows");
  if (params.folds < 1) throw ConfigError("folds must be >= 1");

  std::vector<FoldResult> results(static_cast<std::size_t>(params.folds));
  auto run_fold = [&](int f) {
    FoldResult& res = results[static_cast<std::size_t>(f)];
    res.fold_index = f;
    try {
      const auto sample = subsample_fold(rows, f, params.sample_fraction, params.seed);
      res.train_rows = sample.size();
      const MiningParams& m = params.mining;
      RuleTable table = z_normalize(enumerate_rules(sample, m.n, m.min_count));
      res.rule_count = table.size();
      const SimilarityGraph graph = build_similarity_graph(table);
      res.weights = solve_weights(graph);
      res.delta_max = *graph.delta_max;
      table = score_rules(std::move(table), res.weights);
      res.frequencies = comorbidity_frequency(table, m.top_fraction);
      res.ranked_comorbidities = rank_comorbidities(table, m.top_fraction);
      res.ok = true;
    } catch (const Error& e) {
      res.ok = false;
      res.error = e.what();
    }
  };

  const unsigned workers = std::max(1U, std::min<unsigned>(params.threads, static_cast<unsigned>(params.folds)));
  if (workers == 1) {
    for (int f = 0; f < params.folds; ++f) run_fold(f);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (int f = static_cast<int>(w); f < params.folds; f += static_cast<int>(workers)) run_fold(f);
      });
    }
  }
  return results;
}

CohortSummary summarize_cohort(const Dataset& dataset, const CohortConfig& config) {
  if (dataset.empty()) throw EmptyInputError("cannot summarize an empty dataset");
  config.validate();
  std::size_t recurrent = 0, readmit = 0, inpatient = 0, ed = 0, counted = 0;
  for (const auto& p : dataset.patients()) {
    ++counted;
    if (p.empty()) continue;
    const auto f = identify_recurrent(p, last_visit_time(p), config);
    recurrent += f.is_recurrent;
    readmit += f.readmit_30d;
    inpatient += f.inpatient_frequent;
    ed += f.ed_frequent;
  }
  const double n = static_cast<double>(counted);
  CohortSummary s;
  s.total_patients = counted;
  s.recurrent_fraction = static_cast<double>(recurrent) / n;
  s.readmit_30d_rate = static_cast<double>(readmit) / n;
  s.inpatient_recurrent_rate = static_cast<double>(inpatient) / n;
  s.ed_recurrent_rate = static_cast<double>(ed) / n;
  s.ed_recurrent_fraction_of_recurrent = recurrent ? static_cast<double>(ed) / static_cast<double>(recurrent) : 0.0;
  return s;
}

}  // namespace msar
