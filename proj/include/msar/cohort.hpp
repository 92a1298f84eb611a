#pragma once

#include "msar/ingest.hpp"

namespace msar {

/// Recurrent-patient thresholds. Frequency thresholds are strict: a patient
/// is flagged when the count is greater than the threshold.
struct CohortConfig {
  int readmit_window_days = 30;
  int visit_window_days = 365;
  int inpatient_threshold = 4;
  int ed_threshold = 4;

  /// Throws ConfigError if any value is below 1.
  void validate() const;
};

struct RecurrenceFlags {
  bool readmit_30d = false;
  bool inpatient_frequent = false;
  bool ed_frequent = false;
  bool is_recurrent = false;

  friend bool operator==(const RecurrenceFlags&, const RecurrenceFlags&) = default;
};

/// True iff some visit admitted at or before `as_of` starts within the
/// readmission window (calendar days, inclusive) after the discharge of an
/// earlier visit. ED and inpatient visits share one timeline. A visit admitted
/// before an earlier visit's discharge (a transfer) does not pair with it.
bool flag_thirty_day_readmission(const PatientHistory& history, Timestamp as_of,
                                 const CohortConfig& config);

/// Visits of `visit_class` with admit time in (as_of - window_days, as_of],
/// optionally skipping elective ones.
int count_window_visits(const PatientHistory& history, VisitClass visit_class,
                        bool exclude_elective, Timestamp as_of, int window_days);

RecurrenceFlags identify_recurrent(const PatientHistory& history, Timestamp as_of,
                                   const CohortConfig& config);

/// Admit time of the patient's final visit. Requires a non-empty history.
Timestamp last_visit_time(const PatientHistory& history);

}  // namespace msar
