#include "msar/ingest.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

#include <json.hpp>

#include "csv.hpp"
#include "msar/error.hpp"

namespace msar {
namespace {

// Content order used for visits: admit, discharge, then the remaining fields,
// so that any input permutation of the same rows yields the same history.
bool visit_less(const VisitRecord& a, const VisitRecord& b) {
  return std::tie(a.admit_time, a.discharge_time, a.visit_class, a.elective, a.diagnosis_codes) <
         std::tie(b.admit_time, b.discharge_time, b.visit_class, b.elective, b.diagnosis_codes);
}

std::string upper(std::string_view s) {
  std::string out(s);
  for (auto& ch : out) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

VisitClass parse_visit_class(std::string_view text) {
  const std::string u = upper(trim(text));
  if (u == "ED") return VisitClass::ED;
  if (u == "INPATIENT") return VisitClass::Inpatient;
  throw ParseError("unknown visit_class '" + std::string(text) + "'");
}

bool parse_bool(std::string_view text) {
  const std::string u = upper(trim(text));
  if (u == "1" || u == "TRUE") return true;
  if (u == "0" || u == "FALSE") return false;
  throw ParseError("malformed elective flag '" + std::string(text) + "'");
}

std::vector<std::string> split_codes(std::string_view joined) {
  std::vector<std::string> codes;
  std::size_t start = 0;
  while (start <= joined.size()) {
    const auto end = std::min(joined.find(';', start), joined.size());
    std::string code = normalize_code(joined.substr(start, end - start));
    if (!code.empty()) codes.push_back(std::move(code));
    start = end + 1;
  }
  return codes;
}

void check_times(const VisitRecord& v) {
  if (v.discharge_time < v.admit_time) {
    throw ParseError("discharge_time precedes admit_time");
  }
}

Timestamp parse_time_field(std::string_view text, std::string_view column) {
  try {
    return parse_timestamp(trim(text));
  } catch (const ParseError& e) {
    throw ParseError(std::string(e.what()) + " in " + std::string(column));
  }
}

struct RowSink {
  std::map<std::string, std::vector<VisitRecord>> by_patient;
  std::vector<std::string> errors;

  void reject(std::size_t row, std::size_t line, std::string_view reason) {
    std::ostringstream os;
    os << "row " << row << " (line " << line << "): " << reason;
    errors.push_back(os.str());
  }

  Dataset finish(ParseReport& report) {
    if (!errors.empty()) {
      std::ostringstream os;
      os << errors.size() << " rejected row" << (errors.size() == 1 ? "" : "s") << ":";
      for (const auto& e : errors) os << "\n  " << e;
      throw ParseError(os.str());
    }
    Dataset dataset;
    for (auto& [id, visits] : by_patient) {
      std::stable_sort(visits.begin(), visits.end(), visit_less);
      const auto before = visits.size();
      visits.erase(std::unique(visits.begin(), visits.end()), visits.end());
      const auto removed = before - visits.size();
      if (removed > 0) {
        report.duplicates_removed += removed;
        report.warnings.push_back("patient '" + id + "': " + std::to_string(removed) +
                                  " duplicate row(s) removed");
      }
      dataset.add_patient(PatientHistory(id, std::move(visits)));
    }
    return dataset;
  }
};

bool skip_line(std::string_view line) {
  const auto t = trim(line);
  return t.empty() || t.front() == '#';
}

constexpr std::array<std::string_view, 6> kColumns = {
    "patient_id", "admit_time", "discharge_time", "visit_class", "elective", "diagnosis_codes"};

Dataset parse_csv(std::istream& in, ParseReport& report) {
  RowSink sink;
  std::string raw;
  std::size_t line_no = 0;
  std::size_t row_no = 0;
  std::array<std::size_t, kColumns.size()> col{};
  std::size_t width = 0;
  bool have_header = false;
  std::vector<std::string> fields;

  while (std::getline(in, raw)) {
    ++line_no;
    const std::string_view line = csv::chomp(raw);
    if (skip_line(line)) continue;

    if (!have_header) {
      if (!csv::split(line, fields)) throw ParseError("unterminated quote in header (line " + std::to_string(line_no) + ")");
      width = fields.size();
      for (std::size_t c = 0; c < kColumns.size(); ++c) {
        const auto it = std::find_if(fields.begin(), fields.end(),
                                     [&](const std::string& f) { return trim(f) == kColumns[c]; });
        if (it == fields.end()) {
          throw ParseError("missing required column '" + std::string(kColumns[c]) + "' (line " +
                           std::to_string(line_no) + ")");
        }
        col[c] = static_cast<std::size_t>(it - fields.begin());
      }
      for (const auto& f : fields) {
        if (std::find(kColumns.begin(), kColumns.end(), trim(f)) == kColumns.end()) {
          report.warnings.push_back("ignoring unknown column '" + f + "'");
        }
      }
      have_header = true;
      continue;
    }

    ++row_no;
    ++report.rows_read;
    if (!csv::split(line, fields)) {
      sink.reject(row_no, line_no, "unterminated quote");
      continue;
    }
    if (fields.size() != width) {
      sink.reject(row_no, line_no,
                  "expected " + std::to_string(width) + " fields, found " + std::to_string(fields.size()));
      continue;
    }
    try {
      VisitRecord v;
      v.patient_id = std::string(trim(fields[col[0]]));
      if (v.patient_id.empty()) throw ParseError("empty patient_id");
      v.admit_time = parse_time_field(fields[col[1]], "admit_time");
      v.discharge_time = parse_time_field(fields[col[2]], "discharge_time");
      v.visit_class = parse_visit_class(fields[col[3]]);
      v.elective = parse_bool(fields[col[4]]);
      v.diagnosis_codes = split_codes(fields[col[5]]);
      check_times(v);
      sink.by_patient[v.patient_id].push_back(std::move(v));
    } catch (const ParseError& e) {
      sink.reject(row_no, line_no, e.what());
    }
  }
  return sink.finish(report);
}

Dataset parse_jsonl(std::istream& in, ParseReport& report) {
  using nlohmann::json;
  RowSink sink;
  std::string raw;
  std::size_t line_no = 0;
  std::size_t row_no = 0;
  std::set<std::string> warned;

  while (std::getline(in, raw)) {
    ++line_no;
    const std::string_view line = csv::chomp(raw);
    if (skip_line(line)) continue;
    ++row_no;
    ++report.rows_read;
    try {
      const json obj = json::parse(line);
      if (!obj.is_object()) throw ParseError("line is not a JSON object");
      for (const auto& [key, _] : obj.items()) {
        if (std::find(kColumns.begin(), kColumns.end(), key) == kColumns.end() &&
            warned.insert(key).second) {
          report.warnings.push_back("ignoring unknown field '" + key + "'");
        }
      }
      auto field = [&](std::string_view name) -> const json& {
        const auto it = obj.find(std::string(name));
        if (it == obj.end()) throw ParseError("missing required field '" + std::string(name) + "'");
        return *it;
      };
      auto string_field = [&](std::string_view name) {
        const json& f = field(name);
        if (!f.is_string()) throw ParseError("field '" + std::string(name) + "' must be a string");
        return f.get<std::string>();
      };

      VisitRecord v;
      v.patient_id = std::string(trim(string_field("patient_id")));
      if (v.patient_id.empty()) throw ParseError("empty patient_id");
      v.admit_time = parse_time_field(string_field("admit_time"), "admit_time");
      v.discharge_time = parse_time_field(string_field("discharge_time"), "discharge_time");
      v.visit_class = parse_visit_class(string_field("visit_class"));
      const json& elective = field("elective");
      if (elective.is_boolean()) {
        v.elective = elective.get<bool>();
      } else if (elective.is_number_integer() || elective.is_string()) {
        v.elective = parse_bool(elective.is_string() ? elective.get<std::string>() : elective.dump());
      } else {
        throw ParseError("malformed elective flag");
      }
      const json& codes = field("diagnosis_codes");
      if (codes.is_string()) {
        v.diagnosis_codes = split_codes(codes.get<std::string>());
      } else if (codes.is_array()) {
        for (const auto& c : codes) {
          if (!c.is_string()) throw ParseError("diagnosis_codes entries must be strings");
          std::string code = normalize_code(c.get<std::string>());
          if (!code.empty()) v.diagnosis_codes.push_back(std::move(code));
        }
      } else {
        throw ParseError("diagnosis_codes must be an array or a ';'-joined string");
      }
      check_times(v);
      sink.by_patient[v.patient_id].push_back(std::move(v));
    } catch (const json::exception& e) {
      sink.reject(row_no, line_no, std::string("invalid JSON: ") + e.what());
    } catch (const ParseError& e) {
      sink.reject(row_no, line_no, e.what());
    }
  }
  return sink.finish(report);
}

}  // namespace

std::string_view to_string(VisitClass c) { return c == VisitClass::ED ? "ED" : "INPATIENT"; }

std::string normalize_code(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  for (char ch : raw) {
    if (std::isspace(static_cast<unsigned char>(ch)) || ch == '.') continue;
    out.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(ch))));
  }
  return out;
}

PatientHistory::PatientHistory(std::string patient_id, std::vector<VisitRecord> visits)
    : patient_id_(std::move(patient_id)), visits_(std::move(visits)) {
  for (const auto& v : visits_) {
    if (v.patient_id != patient_id_) {
      throw Error("visit for '" + v.patient_id + "' in history of '" + patient_id_ + "'");
    }
  }
  std::stable_sort(visits_.begin(), visits_.end(), visit_less);
}

void PatientHistory::add(VisitRecord visit) {
  if (visit.patient_id != patient_id_) {
    throw Error("visit for '" + visit.patient_id + "' in history of '" + patient_id_ + "'");
  }
  const auto pos = std::upper_bound(visits_.begin(), visits_.end(), visit, visit_less);
  visits_.insert(pos, std::move(visit));
}

const PatientHistory* Dataset::find(std::string_view patient_id) const {
  const auto it = std::lower_bound(
      patients_.begin(), patients_.end(), patient_id,
      [](const PatientHistory& h, std::string_view id) { return h.patient_id() < id; });
  return it != patients_.end() && it->patient_id() == patient_id ? &*it : nullptr;
}

void Dataset::add_patient(PatientHistory history) {
  const auto it = std::lower_bound(patients_.begin(), patients_.end(), history.patient_id(),
                                   [](const PatientHistory& h, const std::string& id) {
                                     return h.patient_id() < id;
                                   });
  if (it != patients_.end() && it->patient_id() == history.patient_id()) {
    throw Error("duplicate patient_id '" + history.patient_id() + "'");
  }
  patients_.insert(it, std::move(history));
}

Dataset merge_datasets(const Dataset& a, const Dataset& b) {
  Dataset out = a;
  for (const auto& p : b.patients()) out.add_patient(p);
  out.provenance = a.provenance + (b.provenance.empty() ? "" : "+" + b.provenance);
  return out;
}

Dataset parse_visits(std::istream& source, VisitFormat format, ParseReport* report) {
  ParseReport local;
  ParseReport& r = report ? *report : local;
  return format == VisitFormat::CSV ? parse_csv(source, r) : parse_jsonl(source, r);
}

Dataset parse_visits(std::string_view text, VisitFormat format, ParseReport* report) {
  std::istringstream in{std::string(text)};
  return parse_visits(in, format, report);
}

std::string serialize_visits(const Dataset& dataset, VisitFormat format) {
  std::string out;
  if (format == VisitFormat::CSV) {
    out += kVisitCsvHeader;
    out += '\n';
    for (const auto& p : dataset.patients()) {
      for (const auto& v : p.visits()) {
        std::string codes;
        for (std::size_t i = 0; i < v.diagnosis_codes.size(); ++i) {
          if (i) codes += ';';
          codes += v.diagnosis_codes[i];
        }
        out += csv::join({v.patient_id, format_timestamp(v.admit_time),
                          format_timestamp(v.discharge_time), std::string(to_string(v.visit_class)),
                          v.elective ? "true" : "false", codes});
        out += '\n';
      }
    }
  } else {
    for (const auto& p : dataset.patients()) {
      for (const auto& v : p.visits()) {
        // ordered_json keeps the column order of the CSV schema.
        nlohmann::ordered_json obj;
        obj["patient_id"] = v.patient_id;
        obj["admit_time"] = format_timestamp(v.admit_time);
        obj["discharge_time"] = format_timestamp(v.discharge_time);
        obj["visit_class"] = to_string(v.visit_class);
        obj["elective"] = v.elective;
        obj["diagnosis_codes"] = v.diagnosis_codes;
        out += obj.dump();
        out += '\n';
      }
    }
  }
  return out;
}

}  // namespace msar
