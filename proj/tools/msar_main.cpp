// Command-line front end: one subcommand per pipeline stage, plus `run`.

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "msar/error.hpp"
#include "msar/pipeline.hpp"

namespace {

enum ExitCode { kOk = 0, kFailure = 1, kMissingInput = 2, kDegenerate = 3 };

struct SharedFlags {
  std::optional<std::string> config;
  std::optional<std::string> visits;
  std::optional<std::string> mapping;
  std::optional<std::string> out_dir;
  std::optional<std::string> as_of;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::vector<std::string> overrides;  // KEY=VALUE
  bool quiet = false;

  std::optional<int> patients;
  std::optional<int> n;
  std::optional<int> min_count;
  std::optional<double> top_fraction;
  std::optional<int> folds;
  std::optional<double> sample_fraction;
  std::optional<std::string> patient_id;
  std::optional<std::string> comorbidities;
  std::optional<int> top_k;
};

void add_shared(CLI::App* cmd, SharedFlags& f) {
  cmd->add_option("--config", f.config, "Flat JSON config with dotted keys");
  cmd->add_option("--visits", f.visits, "Visit file (.csv, or .jsonl)");
  cmd->add_option("--mapping", f.mapping, "ICD-to-category mapping CSV (default: bundled)");
  cmd->add_option("--out-dir", f.out_dir, "Directory for outputs and stage inputs");
  cmd->add_option("--as-of", f.as_of, "Fixed evaluation time (default: each patient's last visit)");
  cmd->add_option("--seed", f.seed, "Seed for generation and cross-validation");
  cmd->add_option("--threads", f.threads, "Worker threads (outputs do not depend on it)")->check(CLI::PositiveNumber);
  cmd->add_option("--set", f.overrides, "Override a config key, KEY=VALUE (repeatable)");
  cmd->add_flag("-q,--quiet", f.quiet, "Suppress progress messages");
}

msar::PipelineConfig build_config(const SharedFlags& f) {
  msar::PipelineConfig c;
  if (f.config) c = msar::load_pipeline_config_file(*f.config);
  for (const auto& kv : f.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) throw msar::ConfigError("--set expects KEY=VALUE, got '" + kv + "'");
    msar::apply_config_value(c, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (f.visits) c.visits_path = *f.visits;
  if (f.mapping) c.mapping_path = *f.mapping;
  if (f.out_dir) c.out_dir = *f.out_dir;
  if (f.as_of) c.as_of = msar::parse_timestamp(*f.as_of);
  if (f.seed) c.seed = *f.seed;
  if (f.threads) c.threads = static_cast<unsigned>(*f.threads);
  if (f.patients) c.synthetic.num_patients = *f.patients;
  if (f.n) c.mining.n = *f.n;
  if (f.min_count) c.mining.min_count = *f.min_count;
  if (f.top_fraction) c.mining.top_fraction = *f.top_fraction;
  if (f.folds) c.folds = *f.folds;
  if (f.sample_fraction) c.sample_fraction = *f.sample_fraction;
  if (f.patient_id) c.explain_patient_id = *f.patient_id;
  if (f.comorbidities) c.explain_comorbidities = *f.comorbidities;
  if (f.top_k) c.explain_top_k = *f.top_k;
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Recurrent-patient identification and comorbidity rule mining"};
  app.set_version_flag("--version", std::string(msar::tool_version()));
  app.require_subcommand(1);

  SharedFlags flags;
  std::vector<msar::Stage> stages;

  auto stage_cmd = [&](const char* name, const char* help, std::vector<msar::Stage> run) {
    CLI::App* cmd = app.add_subcommand(name, help);
    add_shared(cmd, flags);
    cmd->callback([&stages, run] { stages = run; });
    return cmd;
  };

  using msar::Stage;
  auto* gen = stage_cmd("generate", "Write a synthetic visit population to visits.csv", {Stage::Generate});
  gen->add_option("--patients", flags.patients, "Number of synthetic patients")->check(CLI::PositiveNumber);

  stage_cmd("identify", "Flag recurrent patients (flags.csv)", {Stage::Identify});

  auto* mine = stage_cmd("mine", "Enumerate and z-normalize comorbidity rules (rules.csv)", {Stage::Mine});
  mine->add_option("-n,--n", flags.n, "Rule size");
  mine->add_option("--min-count", flags.min_count, "Minimum patients per rule");

  stage_cmd("weights", "Learn confidence/support weights from rules.csv (weights.json)", {Stage::Weights});

  auto* score = stage_cmd("score", "Score rules and aggregate top-rule frequencies", {Stage::Score});
  score->add_option("--top-fraction", flags.top_fraction, "Share of best-scoring rules to aggregate");

  auto* explain = stage_cmd("explain", "Rank the scored rules matching a patient (explain.jsonl)", {Stage::Explain});
  explain->add_option("--patient-id", flags.patient_id, "Explain one patient from the visit file");
  explain->add_option("--comorbidities", flags.comorbidities, "Explain an ad-hoc set, e.g. DRUG;HTN;LYTES");
  explain->add_option("-k,--top-k", flags.top_k, "Rules to list per patient (<= 0: all)");

  auto* evaluate = stage_cmd("evaluate", "Cross-validate weights and comorbidity rankings", {Stage::Evaluate});
  evaluate->add_option("--folds", flags.folds, "Number of subsamples");
  evaluate->add_option("--sample-fraction", flags.sample_fraction, "Share of patients per subsample");
  evaluate->add_option("--top-fraction", flags.top_fraction, "Share of best-scoring rules to aggregate");

  stage_cmd("summarize", "Cohort recurrence rates (cohort_summary.csv)", {Stage::Summarize});

  auto* run = stage_cmd("run", "identify, mine, weights, score, explain, evaluate and summarize",
                        {Stage::Identify, Stage::Mine, Stage::Weights, Stage::Score, Stage::Explain,
                         Stage::Evaluate, Stage::Summarize});
  bool with_generate = false;
  run->add_flag("--generate", with_generate, "Generate a synthetic population first");
  run->add_option("--patients", flags.patients, "Number of synthetic patients")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  if (with_generate) stages.push_back(Stage::Generate);

  try {
    const msar::PipelineConfig config = build_config(flags);
    const auto report = msar::run_pipeline(config, stages, flags.quiet ? nullptr : &std::cerr);
    (void)report;
    return kOk;
  } catch (const msar::InputNotFoundError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kMissingInput;
  } catch (const msar::DegenerateNormalizationError& e) {
    std::cerr << "error: rules: " << e.what() << '\n';
    return kDegenerate;
  } catch (const msar::NoEdgesError& e) {
    std::cerr << "error: msar: " << e.what() << '\n';
    return kDegenerate;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
}
