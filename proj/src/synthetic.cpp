#include "msar/synthetic.hpp"

#include <algorithm>
#include <cmath>

#include "msar/error.hpp"
#include "msar/random.hpp"

namespace msar {
namespace {

constexpr std::int64_t kHour = 3600;
constexpr std::int64_t kDay = kSecondsPerDay;
// 2016-01-01T00:00:00Z
constexpr std::int64_t kEpochStart = 1451606400;

struct PlannedVisit {
  VisitClass visit_class;
  bool elective;
  std::int64_t duration;
  std::int64_t gap_before;  // discharge of the previous visit -> this admission
};

double recurrence_probability(const SyntheticConfig& cfg, ComorbiditySet set) {
  const double b = cfg.baseline_recurrence_probability;
  double logit_sum = 0.0;
  for (auto c : set.members()) logit_sum += cfg.recurrence_logit[c];
  if (b <= 0.0) return 0.0;
  if (b >= 1.0) return 1.0;
  const double z = std::log(b / (1.0 - b)) + logit_sum;
  return 1.0 / (1.0 + std::exp(-z));
}

PlannedVisit casual_visit(Rng& rng, std::int64_t gap_before) {
  const bool ed = rng.bernoulli(0.65);
  return {ed ? VisitClass::ED : VisitClass::Inpatient, !ed && rng.bernoulli(0.3),
          ed ? rng.uniform_int(kHour, 12 * kHour) : rng.uniform_int(kDay, 7 * kDay), gap_before};
}

// Admissions at least 100 days apart: never a readmission and never more
// than four visits inside any one-year window.
std::int64_t spaced_gap(Rng& rng) { return rng.uniform_int(100 * kDay, 400 * kDay); }

std::vector<PlannedVisit> plan_non_recurrent(Rng& rng, const SyntheticConfig& cfg) {
  const auto k = rng.uniform_int(cfg.min_visits, cfg.max_visits);
  std::vector<PlannedVisit> plan;
  for (std::int64_t i = 0; i < k; ++i) plan.push_back(casual_visit(rng, i == 0 ? 0 : spaced_gap(rng)));
  return plan;
}

std::vector<PlannedVisit> plan_recurrent(Rng& rng) {
  std::vector<PlannedVisit> plan;
  const double pattern = rng.uniform();
  if (pattern < 0.45) {
    // Readmission pair, discharge -> admit under 30 calendar days.
    const auto k = rng.uniform_int(2, 4);
    const auto short_at = rng.uniform_int(1, k - 1);
    for (std::int64_t i = 0; i < k; ++i) {
      const std::int64_t gap = i == 0 ? 0 : i == short_at ? rng.uniform_int(kHour, 29 * kDay) : spaced_gap(rng);
      plan.push_back(casual_visit(rng, gap));
    }
  } else if (pattern < 0.85) {
    // 5-7 ED visits; each step is at most 55.5 days so all fall in one year.
    const auto k = rng.uniform_int(5, 7);
    for (std::int64_t i = 0; i < k; ++i) {
      plan.push_back({VisitClass::ED, false, rng.uniform_int(kHour, 12 * kHour),
                      i == 0 ? 0 : rng.uniform_int(10 * kDay, 55 * kDay)});
    }
  } else {
    // 5-6 non-elective inpatient stays; each step is at most 67 days.
    const auto k = rng.uniform_int(5, 6);
    for (std::int64_t i = 0; i < k; ++i) {
      plan.push_back({VisitClass::Inpatient, false, rng.uniform_int(kDay, 7 * kDay),
                      i == 0 ? 0 : rng.uniform_int(35 * kDay, 60 * kDay)});
    }
  }
  return plan;
}

using CodePool = std::array<std::vector<std::string>, kNumCategories>;

// Codes that resolve to each category under `table`, untagged where possible.
CodePool build_code_pool(const MappingTable& table) {
  CodePool pool;
  for (const auto& entry : table.entries()) {
    bool any = false;
    for (const std::string& code : {entry.prefix, entry.prefix + "0", entry.prefix + "9"}) {
      if (table.lookup(code) == entry.category) {
        pool[entry.category].push_back(code);
        any = true;
      }
    }
    if (!any) pool[entry.category].push_back(inverse_code(entry));
  }
  for (auto& codes : pool) {
    std::sort(codes.begin(), codes.end());
    codes.erase(std::unique(codes.begin(), codes.end()), codes.end());
  }
  return pool;
}

std::vector<std::string> filler_codes(const MappingTable& table) {
  std::vector<std::string> out;
  for (const char* code : {"Z0000", "R51", "S0100", "J069", "M545", "R079", "Z23"}) {
    if (!table.lookup(code)) out.emplace_back(code);
  }
  return out;
}

template <typename T>
const T& pick(Rng& rng, const std::vector<T>& v) {
  return v[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(v.size()) - 1))];
}

}  // namespace

void SyntheticConfig::validate() const {
  if (num_patients < 1) throw ConfigError("num_patients must be >= 1");
  auto prob = [](double p, const std::string& what) {
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError(what + " must be a probability in [0,1]");
  };
  for (std::size_t c = 0; c < kNumCategories; ++c) {
    prob(base_prevalence[c], "base_prevalence[" + std::string(category_id(static_cast<CategoryIndex>(c))) + "]");
    if (!std::isfinite(recurrence_logit[c])) throw ConfigError("recurrence_logit must be finite");
  }
  prob(baseline_recurrence_probability, "baseline_recurrence_probability");
  prob(filler_code_probability, "filler_code_probability");
  if (min_visits < 1 || max_visits < min_visits) throw ConfigError("visit range must satisfy 1 <= min_visits <= max_visits");
}

SyntheticConfig SyntheticConfig::stationary_default() {
  struct Row {
    std::string_view id;
    double prevalence;
    double logit;
  };
  // Prevalence and recurrence tend to rise together; DRUG is rare with a
  // large effect.
  // clang-format off
  static constexpr Row kRows[] = {
      {"AIDS", 0.175, -0.04},     {"ALCOHOL", 0.245, 0.17},   {"ANEMDEF", 0.205, -0.03},
      {"ARTH", 0.259, 0.18},      {"BLDLOSS", 0.264, 0.12},   {"CHF", 0.135, -0.1},
      {"CHRNLUNG", 0.123, -0.14}, {"COAG", 0.313, 0.18},      {"DEPRESS", 0.18, -0.15},
      {"DM", 0.174, -0.15},       {"DMCX", 0.349, 0.44},      {"DRUG", 0.0075, 4.5},
      {"HTN", 0.312, 0.28},       {"HTNCX", 0.23, 0.01},      {"HYPOTHY", 0.267, 0.14},
      {"LIVER", 0.155, -0.16},    {"LYMPH", 0.266, 0.11},     {"LYTES", 0.32, 0.29},
      {"METS", 0.24, 0.09},       {"NEURO", 0.29, 0.28},      {"OBESE", 0.274, 0.2},
      {"PARA", 0.135, -0.1},      {"PERIVASC", 0.294, 0.28},  {"PSYCH", 0.256, 0.21},
      {"PULMCIRC", 0.189, -0.02}, {"RENLFAIL", 0.127, -0.27}, {"TUMOR", 0.319, 0.34},
      {"ULCER", 0.229, 0.14},     {"VALVE", 0.285, 0.27},     {"WGHTLOSS", 0.322, 0.29},
  };
  // clang-format on
  SyntheticConfig cfg;
  cfg.num_patients = 500;
  cfg.baseline_recurrence_probability = 0.1;
  for (const auto& r : kRows) {
    const auto c = *find_category(r.id);
    cfg.base_prevalence[c] = r.prevalence;
    cfg.recurrence_logit[c] = r.logit;
  }
  return cfg;
}

SyntheticPopulation generate_synthetic_population(const SyntheticConfig& config, const MappingTable& table) {
  config.validate();
  const CodePool pool = build_code_pool(table);
  for (std::size_t c = 0; c < kNumCategories; ++c) {
    if (config.base_prevalence[c] > 0.0 && pool[c].empty()) {
      throw ConfigError("mapping table has no codes for category " +
                        std::string(category_id(static_cast<CategoryIndex>(c))));
    }
  }
  const std::vector<std::string> fillers = filler_codes(table);

  int width = 6;
  for (int n = config.num_patients; n >= 1000000; n /= 10) ++width;

  SyntheticPopulation out;
  for (int i = 0; i < config.num_patients; ++i) {
    Rng rng(mix64(config.seed ^ mix64(static_cast<std::uint64_t>(i) + 1)));
    std::string id = std::to_string(i + 1);
    id = "P" + std::string(static_cast<std::size_t>(std::max(0, width - static_cast<int>(id.size()))), '0') + id;

    ComorbiditySet set;
    for (std::size_t c = 0; c < kNumCategories; ++c) {
      if (rng.bernoulli(config.base_prevalence[c])) set.insert(static_cast<CategoryIndex>(c));
    }
    const bool recurrent = rng.bernoulli(recurrence_probability(config, set));
    const auto plan = recurrent ? plan_recurrent(rng) : plan_non_recurrent(rng, config);

    std::vector<VisitRecord> visits;
    Timestamp t{kEpochStart + rng.uniform_int(0, 2 * 365 * kDay)};
    for (const auto& p : plan) {
      VisitRecord v;
      v.patient_id = id;
      v.admit_time = t.plus_seconds(p.gap_before);
      v.discharge_time = v.admit_time.plus_seconds(p.duration);
      v.visit_class = p.visit_class;
      v.elective = p.elective;
      t = v.discharge_time;
      visits.push_back(std::move(v));
    }

    // Category codes go on the most recent visits inside the lookback year.
    const Timestamp as_of = visits.back().admit_time;
    std::vector<std::size_t> recent;
    for (std::size_t k = visits.size(); k-- > 0 && recent.size() < 3;) {
      if (visits[k].admit_time > as_of.plus_days(-365)) recent.push_back(k);
    }
    const auto members = set.members();
    for (auto c : members) {
      auto& v = visits[pick(rng, recent)];
      v.diagnosis_codes.push_back(pick(rng, pool[c]));
    }
    for (std::size_t k = 0; k + recent.size() < visits.size(); ++k) {
      if (!members.empty() && rng.bernoulli(0.5)) {
        visits[k].diagnosis_codes.push_back(pick(rng, pool[pick(rng, members)]));
      }
    }
    for (auto& v : visits) {
      if (!fillers.empty() && rng.bernoulli(config.filler_code_probability)) {
        v.diagnosis_codes.push_back(pick(rng, fillers));
      }
      std::sort(v.diagnosis_codes.begin(), v.diagnosis_codes.end());
    }
    out.dataset.add_patient(PatientHistory(id, std::move(visits)));
    out.drawn_sets.push_back(set);
    out.drawn_recurrent.push_back(recurrent);
  }
  out.dataset.provenance = "synthetic seed=" + std::to_string(config.seed) +
                           " patients=" + std::to_string(config.num_patients);
  return out;
}

Dataset generate_synthetic(const SyntheticConfig& config, const MappingTable& table) {
  return generate_synthetic_population(config, table).dataset;
}

}  // namespace msar
