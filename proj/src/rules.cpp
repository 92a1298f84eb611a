#include "msar/rules.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "msar/error.hpp"
#include "subsets.hpp"

namespace msar {
namespace {

template <typename Fn>
void parallel_chunks(std::size_t count, unsigned threads, Fn&& fn) {
  threads = std::max(1U, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(count, 1))));
  if (threads == 1) {
    fn(0U, std::size_t{0}, count);
    return;
  }
  std::vector<std::jthread> workers;
  for (unsigned t = 0; t < threads; ++t) {
    const std::size_t begin = count * t / threads;
    const std::size_t end = count * (t + 1) / threads;
    workers.emplace_back([&fn, t, begin, end] { fn(t, begin, end); });
  }
}

}  // namespace

bool operator<(RuleKey a, RuleKey b) {
  const std::uint32_t x = a.bits() ^ b.bits();
  if (x == 0) return false;
  const int k = std::countr_zero(x);
  // Members below k agree. The side holding k has the smaller next element,
  // unless the other side has no further members (it is then a prefix).
  if ((a.bits() >> k) & 1U) return (b.bits() >> k) != 0;
  return (a.bits() >> k) == 0;
}

RuleKey RuleKey::parse(std::string_view joined) {
  ComorbiditySet set;
  std::size_t start = 0;
  while (start <= joined.size()) {
    const auto end = std::min(joined.find(';', start), joined.size());
    const auto id = joined.substr(start, end - start);
    const auto c = find_category(id);
    if (!c) throw ParseError("unknown category '" + std::string(id) + "' in rule key");
    if (set.contains(*c)) throw ParseError("repeated category '" + std::string(id) + "' in rule key");
    set.insert(*c);
    start = end + 1;
  }
  return RuleKey(set);
}

std::string RuleKey::to_string() const {
  std::string out;
  for (auto m : members()) {
    if (!out.empty()) out += ';';
    out += category_id(m);
  }
  return out;
}

RuleTable::RuleTable(int n, std::int64_t total_rows, int min_count, std::vector<RuleStats> rules)
    : n_(n), total_rows_(total_rows), min_count_(min_count), rules_(std::move(rules)) {
  std::sort(rules_.begin(), rules_.end(), [](const RuleStats& a, const RuleStats& b) { return a.key < b.key; });
  reindex();
}

void RuleTable::reindex() {
  index_.clear();
  index_.reserve(rules_.size());
  for (std::size_t i = 0; i < rules_.size(); ++i) {
    if (!index_.emplace(rules_[i].key.bits(), i).second) {
      throw Error("duplicate rule key " + rules_[i].key.to_string());
    }
  }
}

bool RuleTable::scored() const {
  return !rules_.empty() &&
         std::all_of(rules_.begin(), rules_.end(), [](const RuleStats& r) { return r.msar_score.has_value(); });
}

const RuleStats* RuleTable::find(RuleKey key) const {
  const auto it = index_.find(key.bits());
  return it == index_.end() ? nullptr : &rules_[it->second];
}

TrainingRows build_training_rows(const Dataset& dataset, const CohortConfig& cohort_config,
                                 const MappingTable& table, AsOfPolicy policy,
                                 CollectOptions collect, unsigned threads) {
  cohort_config.validate();
  const auto& patients = dataset.patients();
  TrainingRows out;
  out.rows.resize(patients.size());
  std::vector<std::size_t> unmatched(std::max(1U, threads), 0);

  parallel_chunks(patients.size(), threads, [&](unsigned t, std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const PatientHistory& h = patients[i];
      TrainingRow& row = out.rows[i];
      row.patient_id = h.patient_id();
      std::optional<Timestamp> as_of;
      if (std::holds_alternative<FixedTime>(policy)) {
        as_of = std::get<FixedTime>(policy).as_of;
      } else if (!h.empty()) {
        as_of = last_visit_time(h);
      }
      if (!as_of) continue;
      const auto mapped = collect_comorbidities(h, *as_of, table, collect);
      row.comorbidities = mapped.categories;
      unmatched[t] += mapped.unmatched;
      row.is_recurrent = identify_recurrent(h, *as_of, cohort_config).is_recurrent;
    }
  });
  for (auto u : unmatched) out.unmatched_codes += u;
  return out;
}

RuleCounter::RuleCounter(int n) : n_(n) {
  if (n < 1 || n > static_cast<int>(kNumCategories)) throw ConfigError("tuple size n must be in [1, 30]");
}

void RuleCounter::add(const TrainingRow& row) {
  ++rows_;
  if (static_cast<int>(row.comorbidities.size()) < n_) return;
  detail::for_each_subset(row.comorbidities.members(), n_, [&](std::uint32_t mask) {
    auto& c = counts_[mask];
    ++c.total;
    if (row.is_recurrent) ++c.recurrent;
  });
}

void RuleCounter::add(std::span<const TrainingRow> rows) {
  for (const auto& r : rows) add(r);
}

void RuleCounter::merge(const RuleCounter& other) {
  if (other.n_ != n_) throw Error("cannot merge rule counters of different tuple sizes");
  rows_ += other.rows_;
  for (const auto& [mask, c] : other.counts_) {
    auto& mine = counts_[mask];
    mine.total += c.total;
    mine.recurrent += c.recurrent;
  }
}

RuleTable RuleCounter::finalize(int min_count) const {
  if (min_count < 1) throw ConfigError("min_count must be >= 1");
  std::vector<RuleStats> rules;
  for (const auto& [mask, c] : counts_) {
    if (c.total < min_count) continue;
    RuleStats r;
    r.key = RuleKey(ComorbiditySet(mask));
    r.count_total = c.total;
    r.count_recurrent = c.recurrent;
    r.confidence = static_cast<double>(c.recurrent) / static_cast<double>(c.total);
    r.support = static_cast<double>(c.total) / static_cast<double>(rows_);
    rules.push_back(r);
  }
  return RuleTable(n_, rows_, min_count, std::move(rules));
}

RuleTable enumerate_rules(std::span<const TrainingRow> rows, int n, int min_count, unsigned threads) {
  if (min_count < 1) throw ConfigError("min_count must be >= 1");
  RuleCounter total(n);
  threads = std::max(1U, threads);
  std::vector<RuleCounter> partial(threads, RuleCounter(n));
  parallel_chunks(rows.size(), threads, [&](unsigned t, std::size_t begin, std::size_t end) {
    partial[t].add(rows.subspan(begin, end - begin));
  });
  for (const auto& p : partial) total.merge(p);
  return total.finalize(min_count);
}

RuleTable z_normalize(RuleTable table) {
  auto& rules = table.mutable_rules();
  if (rules.size() < 2) throw EmptyInputError("z-normalization needs at least two rules");
  const double count = static_cast<double>(rules.size());

  // A constant column can round to a tiny non-zero spread, so test it directly.
  auto moments = [&](auto get, const char* name) {
    const auto [lo, hi] = std::minmax_element(rules.begin(), rules.end(),
                                              [&](const RuleStats& x, const RuleStats& y) { return get(x) < get(y); });
    if (get(*lo) == get(*hi)) throw DegenerateNormalizationError(name);
    double sum = 0.0;
    for (const auto& r : rules) sum += get(r);
    const double mean = sum / count;
    double ss = 0.0;
    for (const auto& r : rules) {
      const double d = get(r) - mean;
      ss += d * d;
    }
    return std::pair{mean, std::sqrt(ss / count)};
  };
  const auto [mc, sc] = moments([](const RuleStats& r) { return r.confidence; }, "confidence");
  const auto [ms, ss] = moments([](const RuleStats& r) { return r.support; }, "support");

  for (auto& r : rules) {
    r.z_confidence = (r.confidence - mc) / sc;
    r.z_support = (r.support - ms) / ss;
  }
  table.set_normalized(true);
  return table;
}

std::optional<RuleKey> ar_select(const RuleTable& table, double tau, std::span<const RuleKey> candidates) {
  const RuleStats* best = nullptr;
  auto consider = [&](const RuleStats& r) {
    if (r.support < tau) return;
    if (!best || r.confidence > best->confidence ||
        (r.confidence == best->confidence &&
         (r.support > best->support || (r.support == best->support && r.key < best->key)))) {
      best = &r;
    }
  };
  if (candidates.empty()) {
    for (const auto& r : table.rules()) consider(r);
  } else {
    for (const auto& k : candidates) {
      if (const auto* r = table.find(k)) consider(*r);
    }
  }
  return best ? std::optional<RuleKey>(best->key) : std::nullopt;
}

Quartiles quartiles(std::vector<double> values) {
  if (values.empty()) throw EmptyInputError("quartiles of an empty sample");
  std::sort(values.begin(), values.end());
  auto at = [&](double p) {
    const double h = (static_cast<double>(values.size()) - 1.0) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
  };
  return {values.front(), at(0.25), at(0.5), at(0.75), values.back()};
}

std::vector<TupleSizeRange> tuple_size_ranges(std::span<const TrainingRow> rows, std::span<const int> sizes,
                                              int min_count, unsigned threads) {
  std::vector<TupleSizeRange> out;
  for (int n : sizes) {
    const RuleTable t = enumerate_rules(rows, n, min_count, threads);
    if (t.empty()) continue;
    std::vector<double> conf, supp;
    for (const auto& r : t.rules()) {
      conf.push_back(r.confidence);
      supp.push_back(r.support);
    }
    out.push_back({n, t.size(), quartiles(std::move(conf)), quartiles(std::move(supp))});
  }
  return out;
}

}  // namespace msar
