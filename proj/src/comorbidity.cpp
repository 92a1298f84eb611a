#include "msar/comorbidity.hpp"

#include <algorithm>
#include <sstream>

#include "csv.hpp"
#include "msar/error.hpp"

namespace msar {
namespace {

constexpr std::array<ComorbidityCategory, kNumCategories> kRegistry = {{
    {"AIDS", "AIDS/HIV"},
    {"ALCOHOL", "Alcohol abuse"},
    {"ANEMDEF", "Deficiency anemias"},
    {"ARTH", "Rheumatoid arthritis/collagen vascular diseases"},
    {"BLDLOSS", "Blood loss anemia"},
    {"CHF", "Congestive heart failure"},
    {"CHRNLUNG", "Chronic pulmonary disease"},
    {"COAG", "Coagulopathy"},
    {"DEPRESS", "Depression"},
    {"DM", "Diabetes, uncomplicated"},
    {"DMCX", "Diabetes, complicated"},
    {"DRUG", "Drug abuse"},
    {"HTN", "Hypertension, uncomplicated"},
    {"HTNCX", "Hypertension, complicated"},
    {"HYPOTHY", "Hypothyroidism"},
    {"LIVER", "Liver disease"},
    {"LYMPH", "Lymphoma"},
    {"LYTES", "Fluid and electrolyte disorders"},
    {"METS", "Metastatic cancer"},
    {"NEURO", "Other neurological disorders"},
    {"OBESE", "Obesity"},
    {"PARA", "Paralysis"},
    {"PERIVASC", "Peripheral vascular disease"},
    {"PSYCH", "Psychoses"},
    {"PULMCIRC", "Pulmonary circulation disorders"},
    {"RENLFAIL", "Renal failure"},
    {"TUMOR", "Solid tumor without metastasis"},
    {"ULCER", "Peptic ulcer disease excluding bleeding"},
    {"VALVE", "Valvular disease"},
    {"WGHTLOSS", "Weight loss"},
}};

static_assert(kNumCategories <= 32, "ComorbiditySet stores categories in 32 bits");

constexpr std::string_view kTag9 = "ICD9:";
constexpr std::string_view kTag10 = "ICD10:";

std::optional<CategoryIndex> longest_prefix(const std::map<std::string, CategoryIndex, std::less<>>& m,
                                            std::string_view code) {
  for (std::size_t len = code.size(); len > 0; --len) {
    const auto it = m.find(code.substr(0, len));
    if (it != m.end()) return it->second;
  }
  return std::nullopt;
}

}  // namespace

const std::array<ComorbidityCategory, kNumCategories>& category_registry() { return kRegistry; }

std::optional<CategoryIndex> find_category(std::string_view id) {
  const auto it = std::lower_bound(kRegistry.begin(), kRegistry.end(), id,
                                   [](const ComorbidityCategory& c, std::string_view v) { return c.id < v; });
  if (it == kRegistry.end() || it->id != id) return std::nullopt;
  return static_cast<CategoryIndex>(it - kRegistry.begin());
}

std::string_view category_id(CategoryIndex index) { return kRegistry.at(index).id; }

ComorbiditySet ComorbiditySet::of(std::initializer_list<CategoryIndex> members) {
  ComorbiditySet s;
  for (auto m : members) s.insert(m);
  return s;
}

ComorbiditySet ComorbiditySet::from_ids(const std::vector<std::string>& ids) {
  ComorbiditySet s;
  for (const auto& id : ids) {
    const auto c = find_category(id);
    if (!c) throw Error("unknown comorbidity category '" + id + "'");
    s.insert(*c);
  }
  return s;
}

std::vector<CategoryIndex> ComorbiditySet::members() const {
  std::vector<CategoryIndex> out;
  out.reserve(size());
  for (std::uint32_t b = bits_; b != 0; b &= b - 1) {
    out.push_back(static_cast<CategoryIndex>(std::countr_zero(b)));
  }
  return out;
}

std::vector<std::string> ComorbiditySet::ids() const {
  std::vector<std::string> out;
  for (auto m : members()) out.emplace_back(category_id(m));
  return out;
}

void MappingTable::add(IcdVersion version, std::string prefix, CategoryIndex category) {
  auto& m = version == IcdVersion::ICD9 ? icd9_ : icd10_;
  if (!m.emplace(prefix, category).second) {
    throw ParseError(std::string("duplicate mapping key (") +
                     (version == IcdVersion::ICD9 ? "ICD9" : "ICD10") + ", " + prefix + ")");
  }
}

std::optional<CategoryIndex> MappingTable::lookup(IcdVersion version, std::string_view code) const {
  return longest_prefix(version == IcdVersion::ICD9 ? icd9_ : icd10_, code);
}

std::optional<CategoryIndex> MappingTable::lookup(std::string_view code) const {
  if (code.starts_with(kTag9)) return lookup(IcdVersion::ICD9, code.substr(kTag9.size()));
  if (code.starts_with(kTag10)) return lookup(IcdVersion::ICD10, code.substr(kTag10.size()));
  if (code.empty()) return std::nullopt;
  if (code.front() >= '0' && code.front() <= '9') return lookup(IcdVersion::ICD9, code);
  if (auto c = lookup(IcdVersion::ICD10, code)) return c;
  return lookup(IcdVersion::ICD9, code);
}

std::size_t MappingTable::size() const { return icd9_.size() + icd10_.size(); }

std::vector<MappingTable::Entry> MappingTable::entries() const {
  std::vector<Entry> out;
  out.reserve(size());
  for (const auto& [p, c] : icd9_) out.push_back({IcdVersion::ICD9, p, c});
  for (const auto& [p, c] : icd10_) out.push_back({IcdVersion::ICD10, p, c});
  return out;
}

MappingTable load_mapping(std::istream& source) {
  MappingTable table;
  std::string raw;
  std::vector<std::string> fields;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(source, raw)) {
    ++line_no;
    const auto line = csv::chomp(raw);
    if (line.empty() || line.front() == '#') continue;
    const std::string where = "mapping line " + std::to_string(line_no);
    if (!csv::split(line, fields)) throw ParseError("unterminated quote on " + where);
    if (!have_header) {
      if (fields != std::vector<std::string>{"icd_version", "code_prefix", "category_id"}) {
        throw ParseError("mapping header must be 'icd_version,code_prefix,category_id' (" + where + ")");
      }
      have_header = true;
      continue;
    }
    if (fields.size() != 3) throw ParseError("expected 3 fields on " + where);
    IcdVersion version;
    if (fields[0] == "ICD9") {
      version = IcdVersion::ICD9;
    } else if (fields[0] == "ICD10") {
      version = IcdVersion::ICD10;
    } else {
      throw ParseError("unknown icd_version '" + fields[0] + "' on " + where);
    }
    const std::string prefix = normalize_code(fields[1]);
    if (prefix.empty()) throw ParseError("empty code_prefix on " + where);
    const auto category = find_category(fields[2]);
    if (!category) throw ParseError("unknown category_id '" + fields[2] + "' on " + where);
    try {
      table.add(version, prefix, *category);
    } catch (const ParseError& e) {
      throw ParseError(std::string(e.what()) + " on " + where);
    }
  }
  if (table.size() == 0) throw ParseError("mapping table is empty");
  return table;
}

MappingTable load_mapping(std::string_view text) {
  std::istringstream in{std::string(text)};
  return load_mapping(in);
}

const MappingTable& bundled_mapping() {
  static const MappingTable table = load_mapping(bundled_mapping_csv());
  return table;
}

std::string inverse_code(const MappingTable::Entry& entry) {
  return std::string(entry.version == IcdVersion::ICD9 ? kTag9 : kTag10) + entry.prefix;
}

MappedCodes map_codes(const std::vector<std::string>& codes, const MappingTable& table) {
  MappedCodes out;
  for (const auto& code : codes) {
    if (const auto c = table.lookup(code)) {
      out.categories.insert(*c);
    } else {
      ++out.unmatched;
    }
  }
  return out;
}

MappedCodes collect_comorbidities(const PatientHistory& history, Timestamp as_of,
                                  const MappingTable& table, CollectOptions options) {
  MappedCodes out;
  const Timestamp window_start = as_of.plus_days(-options.lookback_days);
  int taken = 0;
  const auto& visits = history.visits();
  for (auto it = visits.rbegin(); it != visits.rend() && taken < options.max_visits; ++it) {
    if (it->admit_time > as_of) continue;
    if (it->admit_time <= window_start) break;
    const auto mapped = map_codes(it->diagnosis_codes, table);
    out.categories.merge(mapped.categories);
    out.unmatched += mapped.unmatched;
    ++taken;
  }
  return out;
}

}  // namespace msar
