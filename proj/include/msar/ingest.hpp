#pragma once

#include <cstddef>
#include <istream>
#include <string>
#include <string_view>
#include <vector>

#include "msar/timestamp.hpp"

namespace msar {

enum class VisitClass { ED, Inpatient };

std::string_view to_string(VisitClass c);

/// One hospital encounter.
struct VisitRecord {
  std::string patient_id;
  Timestamp admit_time;
  Timestamp discharge_time;
  VisitClass visit_class = VisitClass::ED;
  bool elective = false;
  std::vector<std::string> diagnosis_codes;  // normalized, see normalize_code()

  friend bool operator==(const VisitRecord&, const VisitRecord&) = default;
};

/// Uppercases and strips whitespace and dots: " f11.20 " -> "F1120".
/// An optional `ICD9:` / `ICD10:` version tag is kept (uppercased).
std::string normalize_code(std::string_view raw);

/// All visits of one patient, ordered by admit time, then discharge time,
/// then the remaining fields, so input row order never matters.
class PatientHistory {
public:
  PatientHistory() = default;
  PatientHistory(std::string patient_id, std::vector<VisitRecord> visits);

  const std::string& patient_id() const { return patient_id_; }
  const std::vector<VisitRecord>& visits() const { return visits_; }
  bool empty() const { return visits_.empty(); }

  /// Inserts keeping the ordering; throws Error if the id differs.
  void add(VisitRecord visit);

  friend bool operator==(const PatientHistory&, const PatientHistory&) = default;

private:
  std::string patient_id_;
  std::vector<VisitRecord> visits_;
};

/// Collection of patient histories with unique ids, kept ordered by id.
class Dataset {
public:
  const std::vector<PatientHistory>& patients() const { return patients_; }
  std::size_t size() const { return patients_.size(); }
  bool empty() const { return patients_.empty(); }

  const PatientHistory* find(std::string_view patient_id) const;

  /// Throws Error on a duplicate patient id.
  void add_patient(PatientHistory history);

  std::string provenance;

  /// Patient collections are compared; provenance is metadata.
  friend bool operator==(const Dataset& a, const Dataset& b) { return a.patients_ == b.patients_; }

private:
  std::vector<PatientHistory> patients_;
};

/// Fails on any duplicate patient id between the two.
Dataset merge_datasets(const Dataset& a, const Dataset& b);

enum class VisitFormat { CSV, JSONL };

struct ParseReport {
  std::vector<std::string> warnings;
  std::size_t rows_read = 0;
  std::size_t duplicates_removed = 0;
};

/// Parses visit rows. Lines starting with `#` are comments. Every rejected
/// row is collected; if any row is rejected a ParseError listing all of them
/// (by 1-based data-row number and file line) is thrown. Exact duplicate rows
/// produce a warning and are kept once.
Dataset parse_visits(std::istream& source, VisitFormat format, ParseReport* report = nullptr);
Dataset parse_visits(std::string_view text, VisitFormat format, ParseReport* report = nullptr);

/// Canonical serialization: patients by id, visits in history order.
std::string serialize_visits(const Dataset& dataset, VisitFormat format);

inline constexpr std::string_view kVisitCsvHeader =
    "patient_id,admit_time,discharge_time,visit_class,elective,diagnosis_codes";

}  // namespace msar
