#include "msar/pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "csv.hpp"
#include "msar/error.hpp"
#include "msar/random.hpp"

namespace msar {
namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

int as_int(const json& v, std::string_view key) {
  if (!v.is_number_integer()) throw ConfigError("config key '" + std::string(key) + "' must be an integer");
  const auto x = v.get<long long>();
  if (x < INT32_MIN || x > INT32_MAX) throw ConfigError("config key '" + std::string(key) + "' is out of range");
  return static_cast<int>(x);
}

double as_real(const json& v, std::string_view key) {
  if (!v.is_number()) throw ConfigError("config key '" + std::string(key) + "' must be a number");
  return v.get<double>();
}

std::string as_string(const json& v, std::string_view key) {
  if (!v.is_string()) throw ConfigError("config key '" + std::string(key) + "' must be a string");
  return v.get<std::string>();
}

std::uint64_t as_seed(const json& v, std::string_view key) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer() && v.get<long long>() >= 0) return static_cast<std::uint64_t>(v.get<long long>());
  throw ConfigError("config key '" + std::string(key) + "' must be a non-negative integer");
}

void apply_json(PipelineConfig& c, std::string_view key, const json& v) {
  auto category_suffix = [&](std::string_view prefix) -> std::optional<CategoryIndex> {
    if (!key.starts_with(prefix)) return std::nullopt;
    const auto id = key.substr(prefix.size());
    const auto idx = find_category(id);
    if (!idx) throw ConfigError("unknown comorbidity category '" + std::string(id) + "' in config key");
    return idx;
  };

  if (key == "visits") c.visits_path = as_string(v, key);
  else if (key == "mapping") c.mapping_path = as_string(v, key);
  else if (key == "out_dir") c.out_dir = as_string(v, key);
  else if (key == "as_of") {
    if (v.is_null()) c.as_of.reset();
    else c.as_of = parse_timestamp(as_string(v, key));
  }
  else if (key == "seed") c.seed = as_seed(v, key);
  else if (key == "threads") {
    const int t = as_int(v, key);
    if (t < 1) throw ConfigError("threads must be >= 1");
    c.threads = static_cast<unsigned>(t);
  }
  else if (key == "cohort.readmit_window_days") c.cohort.readmit_window_days = as_int(v, key);
  else if (key == "cohort.visit_window_days") c.cohort.visit_window_days = as_int(v, key);
  else if (key == "cohort.inpatient_threshold") c.cohort.inpatient_threshold = as_int(v, key);
  else if (key == "cohort.ed_threshold") c.cohort.ed_threshold = as_int(v, key);
  else if (key == "collect.lookback_days") c.collect.lookback_days = as_int(v, key);
  else if (key == "collect.max_visits") c.collect.max_visits = as_int(v, key);
  else if (key == "mining.n") c.mining.n = as_int(v, key);
  else if (key == "mining.min_count") c.mining.min_count = as_int(v, key);
  else if (key == "mining.top_fraction") c.mining.top_fraction = as_real(v, key);
  else if (key == "eval.rbo_p") c.rbo_p = as_real(v, key);
  else if (key == "cv.folds") c.folds = as_int(v, key);
  else if (key == "cv.sample_fraction") c.sample_fraction = as_real(v, key);
  else if (key == "synthetic.num_patients") c.synthetic.num_patients = as_int(v, key);
  else if (key == "synthetic.baseline_recurrence_probability") c.synthetic.baseline_recurrence_probability = as_real(v, key);
  else if (key == "synthetic.min_visits") c.synthetic.min_visits = as_int(v, key);
  else if (key == "synthetic.max_visits") c.synthetic.max_visits = as_int(v, key);
  else if (key == "synthetic.filler_code_probability") c.synthetic.filler_code_probability = as_real(v, key);
  else if (auto p = category_suffix("synthetic.prevalence.")) c.synthetic.base_prevalence[*p] = as_real(v, key);
  else if (auto l = category_suffix("synthetic.logit.")) c.synthetic.recurrence_logit[*l] = as_real(v, key);
  else if (key == "explain.patient_id") c.explain_patient_id = as_string(v, key);
  else if (key == "explain.comorbidities") c.explain_comorbidities = as_string(v, key);
  else if (key == "explain.top_k") c.explain_top_k = as_int(v, key);
  else throw ConfigError("unknown config key '" + std::string(key) + "'");
}

std::string read_whole(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputNotFoundError(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool ends_with_icase(std::string_view s, std::string_view suffix) {
  if (s.size() < suffix.size()) return false;
  return std::equal(suffix.begin(), suffix.end(), s.end() - static_cast<std::ptrdiff_t>(suffix.size()),
                    [](char a, char b) { return std::tolower(static_cast<unsigned char>(a)) == b; });
}

std::string bool01(bool b) { return b ? "1" : "0"; }

std::vector<std::string> category_ids(const std::vector<CategoryIndex>& cats) {
  std::vector<std::string> out;
  for (auto c : cats) out.emplace_back(category_id(c));
  return out;
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double stddev_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size()));
}

}  // namespace

std::string_view tool_version() { return MSAR_VERSION; }

void PipelineConfig::validate() const {
  cohort.validate();
  if (collect.lookback_days < 1 || collect.max_visits < 1) {
    throw ConfigError("collect.lookback_days and collect.max_visits must be >= 1");
  }
  if (mining.n < 1 || mining.n > static_cast<int>(kNumCategories)) throw ConfigError("mining.n must be in [1, 30]");
  if (mining.min_count < 1) throw ConfigError("mining.min_count must be >= 1");
  if (!(mining.top_fraction > 0.0 && mining.top_fraction <= 1.0)) {
    throw ConfigError("mining.top_fraction must be in (0, 1]");
  }
  if (!(rbo_p > 0.0 && rbo_p < 1.0)) throw ConfigError("eval.rbo_p must be in (0, 1)");
  if (folds < 1) throw ConfigError("cv.folds must be >= 1");
  if (!(sample_fraction > 0.0 && sample_fraction <= 1.0)) throw ConfigError("cv.sample_fraction must be in (0, 1]");
  if (threads < 1) throw ConfigError("threads must be >= 1");
  synthetic.validate();
}

std::string PipelineConfig::canonical_json() const {
  json j = json::object();  // std::map-backed: keys come out sorted
  j["visits"] = visits_path;
  j["mapping"] = mapping_path;
  j["as_of"] = as_of ? json(format_timestamp(*as_of)) : json(nullptr);
  j["seed"] = seed;
  j["cohort.readmit_window_days"] = cohort.readmit_window_days;
  j["cohort.visit_window_days"] = cohort.visit_window_days;
  j["cohort.inpatient_threshold"] = cohort.inpatient_threshold;
  j["cohort.ed_threshold"] = cohort.ed_threshold;
  j["collect.lookback_days"] = collect.lookback_days;
  j["collect.max_visits"] = collect.max_visits;
  j["mining.n"] = mining.n;
  j["mining.min_count"] = mining.min_count;
  j["mining.top_fraction"] = mining.top_fraction;
  j["eval.rbo_p"] = rbo_p;
  j["cv.folds"] = folds;
  j["cv.sample_fraction"] = sample_fraction;
  j["synthetic.num_patients"] = synthetic.num_patients;
  j["synthetic.baseline_recurrence_probability"] = synthetic.baseline_recurrence_probability;
  j["synthetic.min_visits"] = synthetic.min_visits;
  j["synthetic.max_visits"] = synthetic.max_visits;
  j["synthetic.filler_code_probability"] = synthetic.filler_code_probability;
  for (std::size_t c = 0; c < kNumCategories; ++c) {
    const std::string id(category_id(static_cast<CategoryIndex>(c)));
    j["synthetic.prevalence." + id] = synthetic.base_prevalence[c];
    j["synthetic.logit." + id] = synthetic.recurrence_logit[c];
  }
  j["explain.patient_id"] = explain_patient_id;
  j["explain.comorbidities"] = explain_comorbidities;
  j["explain.top_k"] = explain_top_k;
  return j.dump();
}

std::string PipelineConfig::hash() const {
  std::ostringstream ss;
  ss << std::hex << std::setw(16) << std::setfill('0') << fnv1a64(canonical_json());
  return ss.str();
}

std::string PipelineConfig::provenance() const {
  return "msar " + std::string(tool_version()) + " config=" + hash() + " seed=" + std::to_string(seed);
}

void apply_config_value(PipelineConfig& config, std::string_view key, const std::string& json_value) {
  json v = json::parse(json_value, nullptr, false);
  if (v.is_discarded()) v = json_value;  // bare words are strings
  apply_json(config, key, v);
}

PipelineConfig load_pipeline_config(std::istream& source, PipelineConfig base) {
  json j = json::parse(source, nullptr, false, true);
  if (j.is_discarded()) throw ConfigError("config file is not valid JSON");
  if (!j.is_object()) throw ConfigError("config file must hold a JSON object of dotted keys");
  for (const auto& [key, value] : j.items()) {
    if (value.is_object()) throw ConfigError("config key '" + key + "' must be flat (use dotted keys)");
    apply_json(base, key, value);
  }
  return base;
}

PipelineConfig load_pipeline_config_file(const std::string& path, PipelineConfig base) {
  std::istringstream in(read_whole(path));
  return load_pipeline_config(in, std::move(base));
}

void write_rule_table(std::ostream& out, const RuleTable& table, std::string_view provenance) {
  out << "# " << provenance << '\n';
  out << "# n=" << table.n() << " total_rows=" << table.total_rows() << " min_count=" << table.min_count()
      << " normalized=" << (table.normalized() ? 1 : 0) << '\n';
  out << kRuleCsvHeader << '\n';
  for (const auto& r : table.rules()) {
    out << r.key.to_string() << ',' << r.count_total << ',' << r.count_recurrent << ','
        << csv::format_real(r.confidence) << ',' << csv::format_real(r.support) << ','
        << csv::format_real(r.z_confidence) << ',' << csv::format_real(r.z_support) << ','
        << (r.msar_score ? csv::format_real(*r.msar_score) : std::string()) << '\n';
  }
}

RuleTable read_rule_table(std::istream& in) {
  std::optional<int> n;
  std::optional<long long> total_rows, min_count;
  bool normalized = false;
  bool header_seen = false;
  std::vector<RuleStats> rules;
  std::string raw;
  std::vector<std::string> fields;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string_view line = csv::chomp(raw);
    const std::string where = "rule table line " + std::to_string(line_no);
    if (line.empty()) continue;
    if (line.front() == '#') {
      std::istringstream meta{std::string(line.substr(1))};
      std::string token;
      while (meta >> token) {
        const auto eq = token.find('=');
        if (eq == std::string::npos) continue;
        const auto name = token.substr(0, eq);
        const auto value = std::string_view(token).substr(eq + 1);
        if (name == "n") n = static_cast<int>(csv::parse_integer(value, where + " n"));
        else if (name == "total_rows") total_rows = csv::parse_integer(value, where + " total_rows");
        else if (name == "min_count") min_count = csv::parse_integer(value, where + " min_count");
        else if (name == "normalized") normalized = value == "1";
      }
      continue;
    }
    if (!header_seen) {
      if (line != kRuleCsvHeader) throw ParseError(where + ": expected header '" + std::string(kRuleCsvHeader) + "'");
      header_seen = true;
      continue;
    }
    if (!csv::split(line, fields) || fields.size() != 8) throw ParseError(where + ": expected 8 fields");
    RuleStats r;
    r.key = RuleKey::parse(fields[0]);
    r.count_total = csv::parse_integer(fields[1], where + " count_total");
    r.count_recurrent = csv::parse_integer(fields[2], where + " count_recurrent");
    r.confidence = csv::parse_real(fields[3], where + " confidence");
    r.support = csv::parse_real(fields[4], where + " support");
    r.z_confidence = csv::parse_real(fields[5], where + " z_confidence");
    r.z_support = csv::parse_real(fields[6], where + " z_support");
    if (!fields[7].empty()) r.msar_score = csv::parse_real(fields[7], where + " msar_score");
    if (n && static_cast<int>(r.key.size()) != *n) throw ParseError(where + ": rule size differs from n");
    rules.push_back(std::move(r));
  }
  if (!header_seen) throw ParseError("rule table has no header");
  if (!n || !total_rows || !min_count) throw ParseError("rule table lacks the '# n=.. total_rows=.. min_count=..' line");
  RuleTable table(*n, *total_rows, static_cast<int>(*min_count), std::move(rules));
  table.set_normalized(normalized);
  return table;
}

void write_weights(std::ostream& out, const WeightsFile& w, const PipelineConfig& config) {
  ordered_json j;
  j["w_c"] = w.weights.w_c;
  j["w_s"] = w.weights.w_s;
  j["delta_max"] = w.delta_max;
  j["objective"] = w.weights.objective;
  j["degenerate"] = w.weights.degenerate;
  j["provenance"] = {{"tool", "msar"},
                     {"version", std::string(tool_version())},
                     {"config_hash", config.hash()},
                     {"seed", config.seed}};
  out << j.dump(2) << '\n';
}

WeightsFile read_weights(std::istream& in) {
  const json j = json::parse(in, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw ParseError("weights file is not a JSON object");
  auto num = [&](const char* key) {
    if (!j.contains(key) || !j[key].is_number()) throw ParseError(std::string("weights file lacks numeric '") + key + "'");
    return j[key].get<double>();
  };
  WeightsFile w;
  w.weights.w_c = num("w_c");
  w.weights.w_s = num("w_s");
  w.weights.objective = num("objective");
  w.delta_max = num("delta_max");
  w.weights.degenerate = j.value("degenerate", false);
  return w;
}

Dataset read_visits_file(const std::string& path, ParseReport* report) {
  const std::string text = read_whole(path);
  const bool jsonl = ends_with_icase(path, ".jsonl") || ends_with_icase(path, ".json");
  try {
    Dataset d = parse_visits(text, jsonl ? VisitFormat::JSONL : VisitFormat::CSV, report);
    d.provenance = path;
    return d;
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what());
  }
}

MappingTable read_mapping_file(const std::string& path) {
  try {
    return load_mapping(read_whole(path));
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what());
  }
}

std::string_view to_string(Stage stage) {
  switch (stage) {
    case Stage::Generate: return "generate";
    case Stage::Identify: return "identify";
    case Stage::Mine: return "mine";
    case Stage::Weights: return "weights";
    case Stage::Score: return "score";
    case Stage::Explain: return "explain";
    case Stage::Evaluate: return "evaluate";
    case Stage::Summarize: return "summarize";
  }
  return "?";
}

namespace {

class Runner {
public:
  Runner(const PipelineConfig& config, std::ostream* log) : cfg_(config), out_dir_(config.out_dir), log_(log) {
    if (!cfg_.mapping_path.empty()) {
      loaded_mapping_ = read_mapping_file(cfg_.mapping_path);
      mapping_ = &*loaded_mapping_;
    }
  }

  void run(Stage s) {
    note(std::string("stage ") + std::string(to_string(s)));
    switch (s) {
      case Stage::Generate: generate(); break;
      case Stage::Identify: identify(); break;
      case Stage::Mine: mine(); break;
      case Stage::Weights: weights_stage(); break;
      case Stage::Score: score(); break;
      case Stage::Explain: explain(); break;
      case Stage::Evaluate: evaluate(); break;
      case Stage::Summarize: summarize(); break;
    }
  }

  PipelineReport report;

private:
  void note(const std::string& msg) {
    if (log_) *log_ << msg << '\n';
  }

  void warn(const std::string& msg) {
    report.warnings.push_back(msg);
    note("warning: " + msg);
  }

  std::string header() const { return "# " + cfg_.provenance() + "\n"; }

  void write(const char* name, const std::string& body) {
    fs::create_directories(out_dir_);
    const fs::path path = out_dir_ / name;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    out << body;
    if (!out.flush()) throw Error("failed writing " + path.string());
    report.written.push_back(path.string());
    note("wrote " + path.string());
  }

  const Dataset& dataset() {
    if (!dataset_) {
      if (cfg_.visits_path.empty()) {
        throw ConfigError("no visits input: set \"visits\" in the config or pass --visits");
      }
      ParseReport pr;
      dataset_ = read_visits_file(cfg_.visits_path, &pr);
      for (const auto& w : pr.warnings) warn(cfg_.visits_path + ": " + w);
      note("read " + std::to_string(dataset_->size()) + " patients from " + cfg_.visits_path);
    }
    return *dataset_;
  }

  AsOfPolicy policy() const {
    if (cfg_.as_of) return FixedTime{*cfg_.as_of};
    return LastVisit{};
  }

  const std::vector<TrainingRow>& rows() {
    if (!rows_) {
      rows_ = build_training_rows(dataset(), cfg_.cohort, *mapping_, policy(), cfg_.collect, cfg_.threads);
      if (rows_->unmatched_codes > 0) {
        note(std::to_string(rows_->unmatched_codes) + " diagnosis codes matched no comorbidity category");
      }
    }
    return rows_->rows;
  }

  std::string input_path(const char* name, std::string_view producer) const {
    const fs::path p = out_dir_ / name;
    if (!fs::exists(p)) {
      throw InputNotFoundError(p.string() + " (run '" + std::string(producer) + "' first)");
    }
    return p.string();
  }

  const RuleTable& rules() {
    if (!rules_) {
      std::istringstream in(read_whole(input_path(files::kRules, "mine")));
      rules_ = read_rule_table(in);
    }
    return *rules_;
  }

  const WeightsFile& weights() {
    if (!weights_) {
      std::istringstream in(read_whole(input_path(files::kWeights, "weights")));
      weights_ = read_weights(in);
    }
    return *weights_;
  }

  const RuleTable& scored() {
    if (!scored_) {
      std::istringstream in(read_whole(input_path(files::kScoredRules, "score")));
      scored_ = read_rule_table(in);
      if (!scored_->scored()) throw ParseError("scored rule table has rules without msar_score");
    }
    return *scored_;
  }

  void generate() {
    SyntheticConfig sc = cfg_.synthetic;
    sc.seed = cfg_.seed;
    dataset_ = generate_synthetic(sc, *mapping_);
    rows_.reset();
    write(files::kVisits, header() + serialize_visits(*dataset_, VisitFormat::CSV));
  }

  void identify() {
    std::ostringstream out;
    out << header() << kFlagsCsvHeader << '\n';
    std::size_t recurrent = 0;
    for (const auto& p : dataset().patients()) {
      const Timestamp as_of = cfg_.as_of ? *cfg_.as_of : last_visit_time(p);
      const auto f = identify_recurrent(p, as_of, cfg_.cohort);
      recurrent += f.is_recurrent;
      out << csv::escape(p.patient_id()) << ',' << bool01(f.readmit_30d) << ',' << bool01(f.inpatient_frequent)
          << ',' << bool01(f.ed_frequent) << ',' << bool01(f.is_recurrent) << '\n';
    }
    note(std::to_string(recurrent) + " of " + std::to_string(dataset().size()) + " patients recurrent");
    write(files::kFlags, out.str());
  }

  void mine() {
    const auto& r = rows();
    RuleTable table = enumerate_rules(r, cfg_.mining.n, cfg_.mining.min_count, cfg_.threads);
    note(std::to_string(table.size()) + " rules of size " + std::to_string(cfg_.mining.n) +
         " with count >= " + std::to_string(cfg_.mining.min_count));
    if (table.size() < 2) {
      throw EmptyInputError("rules: only " + std::to_string(table.size()) +
                            " rule(s) reached mining.min_count; lower it or add patients");
    }
    table = z_normalize(std::move(table));
    std::ostringstream out;
    write_rule_table(out, table, cfg_.provenance());
    write(files::kRules, out.str());
    rules_ = std::move(table);
    scored_.reset();

    // Per-category confidence and support.
    const RuleTable singles = enumerate_rules(r, 1, 1, cfg_.threads);
    std::ostringstream scatter;
    scatter << header() << "category,count_total,count_recurrent,confidence,support\n";
    for (const auto& s : singles.rules()) {
      scatter << category_id(s.key.members().front()) << ',' << s.count_total << ',' << s.count_recurrent << ','
              << csv::format_real(s.confidence) << ',' << csv::format_real(s.support) << '\n';
    }
    write(files::kScatter, scatter.str());

    const int sizes[] = {1, 2, 3};
    std::ostringstream ranges;
    ranges << header() << "n,rule_count";
    for (const char* stat : {"confidence", "support"}) {
      for (const char* q : {"min", "q1", "median", "q3", "max"}) ranges << ',' << stat << '_' << q;
    }
    ranges << '\n';
    for (const auto& t : tuple_size_ranges(r, sizes, cfg_.mining.min_count, cfg_.threads)) {
      ranges << t.n << ',' << t.rule_count;
      for (const Quartiles& q : {t.confidence, t.support}) {
        for (double v : {q.min, q.q1, q.median, q.q3, q.max}) ranges << ',' << csv::format_real(v);
      }
      ranges << '\n';
    }
    write(files::kTupleRanges, ranges.str());
  }

  void weights_stage() {
    const SimilarityGraph graph = build_similarity_graph(rules());
    WeightsFile w;
    w.weights = solve_weights(graph);
    w.delta_max = *graph.delta_max;
    note(std::to_string(graph.edges.size()) + " similarity edges; w_c=" + csv::format_real(w.weights.w_c));
    if (w.weights.degenerate) warn("flat similarity objective; weights set to 0.5/0.5");
    std::ostringstream out;
    write_weights(out, w, cfg_);
    write(files::kWeights, out.str());
    weights_ = w;
  }

  void score() {
    RuleTable table = score_rules(rules(), weights().weights);
    std::ostringstream out;
    write_rule_table(out, table, cfg_.provenance());
    write(files::kScoredRules, out.str());

    const auto freq = comorbidity_frequency(table, cfg_.mining.top_fraction);
    std::vector<CategoryIndex> order = rank_comorbidities(table, cfg_.mining.top_fraction);
    for (std::size_t c = 0; c < kNumCategories; ++c) {
      if (freq[c] == 0.0) order.push_back(static_cast<CategoryIndex>(c));
    }
    std::ostringstream top;
    top << header() << "category,frequency\n";
    for (auto c : order) top << category_id(c) << ',' << csv::format_real(freq[c]) << '\n';
    write(files::kTopFrequencies, top.str());
    scored_ = std::move(table);
  }

  std::string explain_line(const json& patient_id, ComorbiditySet set) {
    const Explanation e = explain_patient(set, scored(), cfg_.explain_top_k);
    ordered_json j;
    j["patient_id"] = patient_id;
    j["comorbidities"] = category_ids(set.members());
    j["status"] = e.status == ExplainStatus::Ok ? "ok" : "no_rule";
    j["top_comorbidities"] = category_ids(e.top_comorbidities);
    ordered_json ranked = ordered_json::array();
    for (const auto& r : e.ranked) {
      ranked.push_back({{"rule", r.key.to_string()},
                        {"msar_score", r.msar_score},
                        {"confidence", r.confidence},
                        {"support", r.support}});
    }
    j["ranked"] = std::move(ranked);
    return j.dump() + "\n";
  }

  void explain() {
    std::string body = header();
    if (!cfg_.explain_comorbidities.empty()) {
      body += explain_line(nullptr, RuleKey::parse(cfg_.explain_comorbidities).set());
    } else {
      const Dataset& d = dataset();
      auto one = [&](const PatientHistory& p) {
        const Timestamp as_of = cfg_.as_of ? *cfg_.as_of : last_visit_time(p);
        return explain_line(p.patient_id(), collect_comorbidities(p, as_of, *mapping_, cfg_.collect).categories);
      };
      if (!cfg_.explain_patient_id.empty()) {
        const PatientHistory* p = d.find(cfg_.explain_patient_id);
        if (!p) throw Error("patient '" + cfg_.explain_patient_id + "' is not in " + cfg_.visits_path);
        body += one(*p);
      } else {
        for (const auto& p : d.patients()) body += one(p);
      }
    }
    write(files::kExplain, body);
  }

  void evaluate() {
    CrossValidationParams params;
    params.folds = cfg_.folds;
    params.sample_fraction = cfg_.sample_fraction;
    params.seed = cfg_.seed;
    params.mining = cfg_.mining;
    params.threads = cfg_.threads;
    const auto results = cross_validate(rows(), params);

    std::vector<const FoldResult*> ok;
    std::string folds = header();
    std::ostringstream cvw;
    cvw << header() << "fold,w_c,w_s,objective\n";
    for (const auto& f : results) {
      ordered_json j;
      j["fold"] = f.fold_index;
      j["ok"] = f.ok;
      if (!f.ok) {
        j["error"] = f.error;
        warn("fold " + std::to_string(f.fold_index) + " failed: " + f.error);
        cvw << f.fold_index << ",,,\n";
      } else {
        ok.push_back(&f);
        j["train_rows"] = f.train_rows;
        j["rule_count"] = f.rule_count;
        j["delta_max"] = f.delta_max;
        j["w_c"] = f.weights.w_c;
        j["w_s"] = f.weights.w_s;
        j["objective"] = f.weights.objective;
        j["degenerate"] = f.weights.degenerate;
        j["ranked_comorbidities"] = category_ids(f.ranked_comorbidities);
        cvw << f.fold_index << ',' << csv::format_real(f.weights.w_c) << ',' << csv::format_real(f.weights.w_s)
            << ',' << csv::format_real(f.weights.objective) << '\n';
      }
      folds += j.dump() + "\n";
    }
    if (ok.empty()) throw Error("every cross-validation fold failed; first error: " + results.front().error);

    std::ostringstream rbo_csv;
    rbo_csv << header() << "fold";
    for (const auto* f : ok) rbo_csv << ',' << f->fold_index;
    rbo_csv << '\n';
    std::vector<double> pairwise;
    for (std::size_t i = 0; i < ok.size(); ++i) {
      rbo_csv << ok[i]->fold_index;
      for (std::size_t k = 0; k < ok.size(); ++k) {
        const double v = rbo(ok[i]->ranked_comorbidities, ok[k]->ranked_comorbidities, cfg_.rbo_p);
        if (k > i) pairwise.push_back(v);
        rbo_csv << ',' << csv::format_real(v);
      }
      rbo_csv << '\n';
    }

    std::ostringstream freq;
    freq << header() << "category,mean_frequency,stddev_frequency,nonzero_folds,folds\n";
    for (std::size_t c = 0; c < kNumCategories; ++c) {
      std::vector<double> v;
      std::size_t nonzero = 0;
      for (const auto* f : ok) {
        v.push_back(f->frequencies[c]);
        nonzero += f->frequencies[c] > 0.0;
      }
      freq << category_id(static_cast<CategoryIndex>(c)) << ',' << csv::format_real(mean_of(v)) << ','
           << csv::format_real(stddev_of(v)) << ',' << nonzero << ',' << ok.size() << '\n';
    }

    std::vector<double> wc;
    for (const auto* f : ok) wc.push_back(f->weights.w_c);
    std::ostringstream msg;
    msg << ok.size() << "/" << results.size() << " folds ok; w_c mean " << mean_of(wc) << " stddev "
        << stddev_of(wc);
    if (!pairwise.empty()) msg << "; mean pairwise rbo " << mean_of(pairwise);
    note(msg.str());

    write(files::kFolds, folds);
    write(files::kCvWeights, cvw.str());
    write(files::kRboMatrix, rbo_csv.str());
    write(files::kCvFrequencies, freq.str());
  }

  void summarize() {
    const CohortSummary s = summarize_cohort(dataset(), cfg_.cohort);
    std::ostringstream out;
    out << header()
        << "total_patients,recurrent_fraction,readmit_30d_rate,inpatient_recurrent_rate,ed_recurrent_rate,"
           "ed_recurrent_fraction_of_recurrent\n"
        << s.total_patients << ',' << csv::format_real(s.recurrent_fraction) << ','
        << csv::format_real(s.readmit_30d_rate) << ',' << csv::format_real(s.inpatient_recurrent_rate) << ','
        << csv::format_real(s.ed_recurrent_rate) << ',' << csv::format_real(s.ed_recurrent_fraction_of_recurrent)
        << '\n';
    write(files::kCohortSummary, out.str());
  }

  const PipelineConfig& cfg_;
  fs::path out_dir_;
  std::ostream* log_;
  std::optional<MappingTable> loaded_mapping_;
  const MappingTable* mapping_ = &bundled_mapping();
  std::optional<Dataset> dataset_;
  std::optional<TrainingRows> rows_;
  std::optional<RuleTable> rules_;
  std::optional<WeightsFile> weights_;
  std::optional<RuleTable> scored_;
};

}  // namespace

PipelineReport run_pipeline(const PipelineConfig& config, std::vector<Stage> stages, std::ostream* log) {
  config.validate();
  std::sort(stages.begin(), stages.end());
  stages.erase(std::unique(stages.begin(), stages.end()), stages.end());
  const bool generates = !stages.empty() && stages.front() == Stage::Generate;
  if (!config.visits_path.empty() && !generates && !fs::exists(config.visits_path)) {
    throw InputNotFoundError(config.visits_path);
  }
  Runner runner(config, log);
  for (Stage s : stages) runner.run(s);
  return std::move(runner.report);
}

}  // namespace msar
