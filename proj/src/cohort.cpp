#include "msar/cohort.hpp"

#include <optional>

#include "msar/error.hpp"

namespace msar {

void CohortConfig::validate() const {
  if (readmit_window_days < 1 || visit_window_days < 1 || inpatient_threshold < 1 || ed_threshold < 1) {
    throw ConfigError("cohort thresholds and windows must all be >= 1");
  }
}

bool flag_thirty_day_readmission(const PatientHistory& history, Timestamp as_of,
                                 const CohortConfig& config) {
  const auto& visits = history.visits();
  for (std::size_t j = 1; j < visits.size(); ++j) {
    const Timestamp admit = visits[j].admit_time;
    if (admit > as_of) break;
    // Closest earlier discharge that is not after this admission.
    std::optional<Timestamp> prior;
    for (std::size_t i = 0; i < j; ++i) {
      const Timestamp d = visits[i].discharge_time;
      if (d <= admit && (!prior || d > *prior)) prior = d;
    }
    if (prior && admit.day_number() - prior->day_number() <= config.readmit_window_days) {
      return true;
    }
  }
  return false;
}

int count_window_visits(const PatientHistory& history, VisitClass visit_class,
                        bool exclude_elective, Timestamp as_of, int window_days) {
  const Timestamp start = as_of.plus_days(-window_days);
  int count = 0;
  for (const auto& v : history.visits()) {
    if (v.admit_time <= start || v.admit_time > as_of) continue;
    if (v.visit_class != visit_class) continue;
    if (exclude_elective && v.elective) continue;
    ++count;
  }
  return count;
}

RecurrenceFlags identify_recurrent(const PatientHistory& history, Timestamp as_of,
                                   const CohortConfig& config) {
  RecurrenceFlags f;
  f.readmit_30d = flag_thirty_day_readmission(history, as_of, config);
  f.inpatient_frequent = count_window_visits(history, VisitClass::Inpatient, true, as_of,
                                             config.visit_window_days) > config.inpatient_threshold;
  f.ed_frequent = count_window_visits(history, VisitClass::ED, false, as_of,
                                      config.visit_window_days) > config.ed_threshold;
  f.is_recurrent = f.readmit_30d || f.inpatient_frequent || f.ed_frequent;
  return f;
}

Timestamp last_visit_time(const PatientHistory& history) {
  if (history.empty()) throw EmptyInputError("patient '" + history.patient_id() + "' has no visits");
  return history.visits().back().admit_time;
}

}  // namespace msar
