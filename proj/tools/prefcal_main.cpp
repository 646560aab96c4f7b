// prefcal: build, evaluate and stress-test probabilistic pairwise autoraters.
//
// Subcommands:
//   aggregate  - turn raw annotator votes into preference targets
//   evaluate   - alignment / performance / calibration metric suite
//   bias       - positional-bias report from paired orientation runs
//   calibrate  - temperature / contextual / batch calibration
//   simulate   - GRPO-style tabular policy training + consistency report
//   winrate    - mean predicted win rate, optionally vs a human reference
//
// Record files are line-delimited JSON; see docs/formats.md.

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "prefcal/calibrate.hpp"
#include "prefcal/core.hpp"
#include "prefcal/estimate.hpp"
#include "prefcal/metrics.hpp"
#include "prefcal/parse.hpp"
#include "prefcal/records.hpp"
#include "prefcal/rlsim.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace prefcal;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitNumerical = 2;
constexpr int kExitTolerance = 3;

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

std::string now_iso8601() {
  std::time_t t = std::time(nullptr);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

struct ManifestScope {
  RunManifest manifest;
  fs::path out_dir;

  ManifestScope(const std::string& command, const fs::path& dir)
      : out_dir(dir) {
    manifest.command = command;
    manifest.version = kToolkitVersion;
    manifest.started_at = now_iso8601();
    fs::create_directories(out_dir);
  }
  void add_input(const std::string& path) {
    manifest.input_digests[path] = file_digest(path);
  }
  void finish(const json& config, std::uint64_t seed) {
    manifest.config_json = config.dump();
    manifest.seed = seed;
    manifest.finished_at = now_iso8601();
    write_manifest(manifest, (out_dir / "run_manifest.json").string());
  }
};

/// Resolves targets for the comparison records: explicit target, else
/// aggregated votes.
std::map<std::string, PreferenceTarget> target_index(
    const std::vector<ComparisonInstance>& instances) {
  std::map<std::string, PreferenceTarget> index;
  for (const ComparisonInstance& inst : instances) {
    if (inst.target) {
      index[inst.id] = *inst.target;
    } else if (!inst.votes.empty()) {
      index[inst.id] = aggregate_votes(inst.votes);
    }
  }
  return index;
}

int cmd_aggregate(const std::string& input, const std::string& output,
                  const std::string& out_dir) {
  ManifestScope scope("aggregate", out_dir);
  scope.add_input(input);
  std::vector<ComparisonInstance> instances = read_comparisons(input);
  std::vector<std::string> empty_ids;
  for (ComparisonInstance& inst : instances) {
    if (inst.votes.empty()) {
      if (empty_ids.size() < 10) empty_ids.push_back(inst.id);
      continue;
    }
    inst.target = aggregate_votes(inst.votes);
  }
  if (!empty_ids.empty()) {
    std::cerr << "aggregate: records without votes:";
    for (const std::string& id : empty_ids) std::cerr << " " << id;
    std::cerr << "\n";
    return kExitValidation;
  }
  write_comparisons(output, instances);
  scope.finish(json{{"input", input}, {"output", output}}, 0);
  std::cout << "aggregated " << instances.size() << " records -> " << output
            << "\n";
  return kExitOk;
}

struct ResolvedPredictions {
  std::vector<std::string> ids;
  std::vector<double> preds;
  std::size_t n_raw_parsed = 0;
  std::size_t n_raw_unparsable = 0;
};

/// Pulls a usable p_orig out of each prediction line, going through the
/// report parser for raw-text records. Unparsable raw texts are dropped and
/// counted.
ResolvedPredictions resolve_predictions(const std::vector<PredictionLine>& lines,
                                        const OutputGrammar& grammar) {
  ResolvedPredictions out;
  for (const PredictionLine& line : lines) {
    if (line.p_orig) {
      out.ids.push_back(line.id);
      out.preds.push_back(*line.p_orig);
      continue;
    }
    if (line.raw_text) {
      ParsedReport report = parse_report(*line.raw_text, grammar);
      if (report.parsable()) {
        ++out.n_raw_parsed;
        out.ids.push_back(line.id);
        out.preds.push_back(report.probability());
      } else {
        ++out.n_raw_unparsable;
      }
      continue;
    }
    throw std::domain_error("prediction " + line.id +
                            " has neither p_orig nor raw_text");
  }
  return out;
}

int cmd_evaluate(const std::string& pred_path, const std::string& comp_path,
                 double tie_band, int bins, const OutputGrammar& grammar,
                 const std::string& out_dir) {
  ManifestScope scope("evaluate", out_dir);
  scope.add_input(pred_path);
  scope.add_input(comp_path);

  std::vector<ComparisonInstance> comparisons = read_comparisons(comp_path);
  std::map<std::string, PreferenceTarget> targets = target_index(comparisons);
  std::vector<PredictionLine> lines = read_predictions(pred_path);
  ResolvedPredictions resolved = resolve_predictions(lines, grammar);

  std::vector<std::string> unmatched;
  std::vector<double> preds;
  std::vector<PreferenceTarget> matched_targets;
  for (std::size_t i = 0; i < resolved.ids.size(); ++i) {
    auto it = targets.find(resolved.ids[i]);
    if (it == targets.end()) {
      if (unmatched.size() < 10) unmatched.push_back(resolved.ids[i]);
      continue;
    }
    preds.push_back(resolved.preds[i]);
    matched_targets.push_back(it->second);
  }
  if (!unmatched.empty()) {
    std::cerr << "evaluate: prediction ids missing from comparisons:";
    for (const std::string& id : unmatched) std::cerr << " " << id;
    std::cerr << "\n";
    return kExitValidation;
  }
  if (preds.empty()) {
    std::cerr << "evaluate: no usable predictions\n";
    return kExitValidation;
  }

  EvalReport report = evaluate(preds, matched_targets, tie_band, bins);
  double parsability = 1.0;
  if (resolved.n_raw_parsed + resolved.n_raw_unparsable > 0) {
    parsability = static_cast<double>(resolved.n_raw_parsed) /
                  static_cast<double>(resolved.n_raw_parsed +
                                      resolved.n_raw_unparsable);
  }

  fs::path dir(out_dir);
  {
    std::ofstream csv(dir / "eval_report.csv");
    csv << "mse,agreement,precision_macro,recall_macro,f1_macro,ece,brier,"
           "n_total,n_calibration,tie_band,bins,parsability\n";
    csv << fmt_double(report.mse) << "," << fmt_double(report.agreement) << ","
        << fmt_double(report.precision_macro) << ","
        << fmt_double(report.recall_macro) << ","
        << fmt_double(report.f1_macro) << "," << fmt_double(report.ece) << ","
        << fmt_double(report.brier) << "," << report.n_total << ","
        << report.n_calibration << "," << fmt_double(report.tie_band) << ","
        << report.bins << "," << fmt_double(parsability) << "\n";
  }
  {
    std::ofstream md(dir / "eval_report.md");
    md << "| Alignment | Performance | | | | Calibration | |\n";
    md << "|---|---|---|---|---|---|---|\n";
    md << "| MSE | Agr. | P | R | F1 | ECE | Brier |\n";
    md << "| " << fmt_double(report.mse) << " | "
       << fmt_double(report.agreement) << " | "
       << fmt_double(report.precision_macro) << " | "
       << fmt_double(report.recall_macro) << " | "
       << fmt_double(report.f1_macro) << " | " << fmt_double(report.ece)
       << " | " << fmt_double(report.brier) << " |\n\n";
    md << "n_total: " << report.n_total
       << ", n_calibration (ties skipped): " << report.n_calibration
       << ", tie_band: " << fmt_double(report.tie_band)
       << ", bins: " << report.bins
       << ", parsability: " << fmt_double(parsability) << "\n";
  }
  {
    auto [cal_preds, cal_labels] = select_calibration_subset(preds, matched_targets);
    std::ofstream rel(dir / "reliability.csv");
    rel << "bin,lo,hi,count,weight,accuracy,confidence\n";
    if (!cal_preds.empty()) {
      std::vector<ReliabilityBin> series =
          reliability_diagram(cal_preds, cal_labels, bins);
      for (std::size_t b = 0; b < series.size(); ++b) {
        rel << b + 1 << "," << fmt_double(series[b].lo) << ","
            << fmt_double(series[b].hi) << "," << series[b].count << ","
            << fmt_double(series[b].weight) << ","
            << fmt_double(series[b].accuracy) << ","
            << fmt_double(series[b].confidence) << "\n";
      }
    }
  }
  scope.finish(json{{"predictions", pred_path},
                    {"comparisons", comp_path},
                    {"tie_band", tie_band},
                    {"bins", bins},
                    {"prob_tag", grammar.prob_tag},
                    {"occurrence",
                     grammar.occurrence == OutputGrammar::Occurrence::Last
                         ? "last"
                         : "first"}},
               0);
  std::cout << "MSE " << fmt_double(report.mse) << "  Agr "
            << fmt_double(report.agreement) << "  F1 "
            << fmt_double(report.f1_macro) << "  ECE "
            << fmt_double(report.ece) << "  Brier "
            << fmt_double(report.brier) << "  (n=" << report.n_total
            << ", cal n=" << report.n_calibration
            << ", parsability=" << fmt_double(parsability) << ")\n";
  return kExitOk;
}

int cmd_bias(const std::string& pred_path, double tie_band,
             const std::string& out_dir) {
  ManifestScope scope("bias", out_dir);
  scope.add_input(pred_path);
  std::vector<PredictionLine> lines = read_predictions(pred_path);
  std::vector<PredictionRecord> records;
  records.reserve(lines.size());
  for (const PredictionLine& line : lines) {
    PredictionRecord rec;
    rec.id = line.id;
    if (!line.p_orig) {
      std::cerr << "bias: record " << line.id << " missing p_orig\n";
      return kExitValidation;
    }
    rec.p_orig = *line.p_orig;
    rec.p_swap = line.p_swap;
    records.push_back(std::move(rec));
  }
  BiasReport report = bias_report(records, tie_band);
  BoxStats box = box_stats(report.deviations);

  fs::path dir(out_dir);
  {
    std::ofstream csv(dir / "bias_report.csv");
    csv << "consistency,expected_abs_symmetry_deviation,n,min,q1,median,q3,"
           "max,mean,tie_band\n";
    csv << fmt_double(report.consistency) << ","
        << fmt_double(report.expected_abs_symmetry_deviation) << ","
        << report.deviations.size() << "," << fmt_double(box.min) << ","
        << fmt_double(box.q1) << "," << fmt_double(box.median) << ","
        << fmt_double(box.q3) << "," << fmt_double(box.max) << ","
        << fmt_double(box.mean) << "," << fmt_double(tie_band) << "\n";
  }
  {
    std::ofstream csv(dir / "deviations.csv");
    csv << "id,p_orig,p_swap,symmetry_deviation\n";
    for (std::size_t i = 0; i < records.size(); ++i) {
      csv << records[i].id << "," << fmt_double(records[i].p_orig) << ","
          << fmt_double(*records[i].p_swap) << ","
          << fmt_double(report.deviations[i]) << "\n";
    }
  }
  {
    std::ofstream md(dir / "bias_report.md");
    md << "| Consistency | E\\|SD\\| | min | q1 | median | q3 | max | mean |\n";
    md << "|---|---|---|---|---|---|---|---|\n";
    md << "| " << fmt_double(report.consistency) << " | "
       << fmt_double(report.expected_abs_symmetry_deviation) << " | "
       << fmt_double(box.min) << " | " << fmt_double(box.q1) << " | "
       << fmt_double(box.median) << " | " << fmt_double(box.q3) << " | "
       << fmt_double(box.max) << " | " << fmt_double(box.mean) << " |\n";
  }
  scope.finish(json{{"predictions", pred_path}, {"tie_band", tie_band}}, 0);
  std::cout << "consistency " << fmt_double(report.consistency) << "  E|SD| "
            << fmt_double(report.expected_abs_symmetry_deviation) << "  (n="
            << report.deviations.size() << ")\n";
  return kExitOk;
}

ProbPair pair_for(const PredictionLine& line) {
  if (line.z_a && line.z_b) {
    double p = logit_to_prob(LogitPair(*line.z_a, *line.z_b));
    return {1.0 - p, p};
  }
  if (line.p_orig) return {1.0 - *line.p_orig, *line.p_orig};
  throw std::domain_error("record " + line.id + " has neither logits nor p_orig");
}

int cmd_calibrate(const std::string& pred_path,
                  const std::optional<std::string>& labels_path,
                  const std::string& method, const std::string& probe_id,
                  const std::string& out_dir) {
  ManifestScope scope("calibrate", out_dir);
  scope.add_input(pred_path);
  std::vector<PredictionLine> lines = read_predictions(pred_path);
  fs::path dir(out_dir);
  std::vector<PredictionLine> calibrated;
  json config{{"predictions", pred_path}, {"method", method}};

  if (method == "temperature") {
    if (!labels_path) {
      std::cerr << "calibrate: temperature scaling needs a comparisons file "
                   "for labels\n";
      return kExitValidation;
    }
    scope.add_input(*labels_path);
    config["labels"] = *labels_path;
    std::map<std::string, PreferenceTarget> targets =
        target_index(read_comparisons(*labels_path));
    std::vector<LogitPair> fit_pairs;
    std::vector<int> fit_labels;
    for (const PredictionLine& line : lines) {
      if (!line.z_a || !line.z_b) {
        std::cerr << "calibrate: record " << line.id << " has no logits\n";
        return kExitValidation;
      }
      auto it = targets.find(line.id);
      if (it == targets.end()) continue;  // held-out or unlabeled
      VerdictClass v = discretize_target(it->second);
      if (v == VerdictClass::Tie) continue;
      fit_pairs.emplace_back(*line.z_a, *line.z_b);
      fit_labels.push_back(v == VerdictClass::BBetter ? 1 : 0);
    }
    TemperatureModel model = fit_temperature(fit_pairs, fit_labels);
    save_temperature_model(model, (dir / "temperature.txt").string());
    for (const PredictionLine& line : lines) {
      PredictionLine out;
      out.id = line.id;
      out.p_orig = apply_temperature(LogitPair(*line.z_a, *line.z_b), model);
      calibrated.push_back(std::move(out));
    }
    std::cout << "temperature " << fmt_double(model.temperature) << "  nll "
              << fmt_double(model.fit_nll)
              << (model.boundary_hit ? "  (boundary hit)" : "") << "\n";
  } else if (method == "contextual") {
    auto probe_it =
        std::find_if(lines.begin(), lines.end(),
                     [&](const PredictionLine& l) { return l.id == probe_id; });
    if (probe_it == lines.end()) {
      std::cerr << "calibrate: contextual calibration needs a probe record "
                   "with id \""
                << probe_id << "\"\n";
      return kExitValidation;
    }
    ProbPair probe = pair_for(*probe_it);
    config["probe_id"] = probe_id;
    {
      std::ofstream bias_file(dir / "bias.txt");
      bias_file.precision(17);
      bias_file << "method = contextual\nprobe_a = " << probe.p_a
                << "\nprobe_b = " << probe.p_b << "\n";
    }
    for (const PredictionLine& line : lines) {
      if (line.id == probe_id) continue;
      PredictionLine out;
      out.id = line.id;
      out.p_orig = contextual_calibrate(probe, pair_for(line));
      calibrated.push_back(std::move(out));
    }
  } else if (method == "batch") {
    std::vector<ProbPair> batch;
    batch.reserve(lines.size());
    for (const PredictionLine& line : lines) batch.push_back(pair_for(line));
    auto [bias, outputs] = batch_calibrate(batch);
    {
      std::ofstream bias_file(dir / "bias.txt");
      bias_file.precision(17);
      bias_file << "method = batch\nbias_a = " << bias.b_a
                << "\nbias_b = " << bias.b_b << "\n";
    }
    for (std::size_t i = 0; i < lines.size(); ++i) {
      PredictionLine out;
      out.id = lines[i].id;
      out.p_orig = outputs[i];
      calibrated.push_back(std::move(out));
    }
  } else {
    std::cerr << "calibrate: unknown method " << method << "\n";
    return kExitValidation;
  }

  write_predictions((dir / "calibrated.jsonl").string(), calibrated);
  scope.finish(config, 0);
  std::cout << "wrote " << calibrated.size() << " calibrated predictions\n";
  return kExitOk;
}

int cmd_simulate(const std::optional<std::string>& pop_config,
                 const std::optional<std::string>& grpo_config,
                 std::optional<std::uint64_t> seed_flag,
                 const std::optional<std::string>& reward_flag, double epsilon,
                 const std::string& out_dir) {
  ManifestScope scope("simulate", out_dir);

  PopulationSpec pop_spec;  // default: 11 grid contexts, m=10
  if (pop_config) {
    scope.add_input(*pop_config);
    pop_spec = load_population_spec(*pop_config);
  }
  SimulationSpec sim;  // default: the consistency-verification setup
  sim.grpo.group_size = 32;
  sim.grpo.groups_per_step = 4;
  sim.grpo.kl_beta = 0.0;
  sim.grpo.learning_rate = 0.15;
  sim.grpo.steps = 5000;
  sim.grpo.seed = 7;
  sim.grpo.label_mode = LabelMode::Probabilistic;
  sim.grpo.sampler = GroupSampler::Systematic;
  if (grpo_config) {
    scope.add_input(*grpo_config);
    sim = load_simulation_spec(*grpo_config);
  }
  if (reward_flag) {
    if (*reward_flag == "brier") sim.grpo.reward.kind = RewardKind::Brier;
    else if (*reward_flag == "log") sim.grpo.reward.kind = RewardKind::Log;
    else {
      std::cerr << "simulate: unknown reward " << *reward_flag << "\n";
      return kExitValidation;
    }
    sim.grpo.reward.epsilon = epsilon;
  }
  if (seed_flag) {
    sim.grpo.seed = *seed_flag;
  } else if (!grpo_config) {
    if (const char* env = std::getenv("PREFCAL_SEED")) {
      sim.grpo.seed = std::strtoull(env, nullptr, 10);
    }
  }
  if (sim.grpo.reward.kind == RewardKind::Log && !sim.tolerances_explicit) {
    // Log optimum sits at clip(p*, eps, 1-eps); by default allow one grid
    // step of slack around it.
    sim.tolerances.max_mode_gap =
        std::min(sim.tolerances.max_mode_gap, sim.grid_step + 1e-12);
  }

  AnnotatorPopulation population = make_population(pop_spec);
  ReportGrid grid = ReportGrid::regular(sim.grid_step);
  fs::path dir(out_dir);
  try {
    PolicyTable initial = init_policy(population.contexts, grid, sim.init);
    TrainResult result = train(population, grid, sim.grpo, &initial);
    ConsistencyReport report = consistency_report(
        result.policy, population, sim.grpo.reward, grid, sim.tolerances);

    {
      std::ofstream trace(dir / "trace.csv");
      trace << "step,reward,parsability,gap,entropy\n";
      for (const TraceRow& row : result.trace.rows) {
        trace << row.step << "," << fmt_double(row.mean_reward) << ","
              << fmt_double(row.parsability) << ","
              << fmt_double(row.mean_abs_gap) << ","
              << fmt_double(row.entropy) << "\n";
      }
    }
    {
      std::ofstream csv(dir / "consistency.csv");
      csv << "context,p_star,mode,mode_mass,mode_gap,parsability,entropy\n";
      for (const ConsistencyRow& row : report.rows) {
        csv << row.context_id << "," << fmt_double(row.p_star) << ","
            << (row.mode_unparsable ? std::string("unparsable")
                                    : fmt_double(row.mode_report))
            << "," << fmt_double(row.mode_mass) << ","
            << fmt_double(row.mode_gap) << "," << fmt_double(row.parsability)
            << "," << fmt_double(row.entropy) << "\n";
      }
    }
    {
      std::ofstream md(dir / "consistency.md");
      md << "| context | p* | mode | mode mass | gap | parsability |\n";
      md << "|---|---|---|---|---|---|\n";
      for (const ConsistencyRow& row : report.rows) {
        md << "| " << row.context_id << " | " << fmt_double(row.p_star)
           << " | "
           << (row.mode_unparsable ? std::string("unparsable")
                                   : fmt_double(row.mode_report))
           << " | " << fmt_double(row.mode_mass) << " | "
           << fmt_double(row.mode_gap) << " | " << fmt_double(row.parsability)
           << " |\n";
      }
      md << "\nmax gap " << fmt_double(report.max_mode_gap) << " (tol "
         << fmt_double(report.tolerances.max_mode_gap) << "), min mode mass "
         << fmt_double(report.min_mode_mass) << " (tol "
         << fmt_double(report.tolerances.min_mode_mass)
         << "), min parsability " << fmt_double(report.min_parsability)
         << " (tol " << fmt_double(report.tolerances.min_parsability)
         << ")\n\nresult: " << (report.pass ? "PASS" : "FAIL") << "\n";
    }
    json config{{"population",
                 {{"contexts", pop_spec.context_count},
                  {"m", pop_spec.votes_per_context},
                  {"seed", pop_spec.seed}}},
                {"grpo",
                 {{"group_size", sim.grpo.group_size},
                  {"groups_per_step", sim.grpo.groups_per_step},
                  {"clip_eps", sim.grpo.clip_eps},
                  {"kl_beta", sim.grpo.kl_beta},
                  {"learning_rate", sim.grpo.learning_rate},
                  {"steps", sim.grpo.steps},
                  {"seed", sim.grpo.seed},
                  {"reward",
                   sim.grpo.reward.kind == RewardKind::Brier ? "brier" : "log"},
                  {"epsilon", sim.grpo.reward.epsilon},
                  {"grid_step", sim.grid_step}}}};
    scope.finish(config, sim.grpo.seed);
    std::cout << (report.pass ? "PASS" : "FAIL") << ": max gap "
              << fmt_double(report.max_mode_gap) << ", min mode mass "
              << fmt_double(report.min_mode_mass) << ", min parsability "
              << fmt_double(report.min_parsability) << "\n";
    return report.pass ? kExitOk : kExitTolerance;
  } catch (const NumericalError& e) {
    std::cerr << "simulate: numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  }
}

int cmd_winrate(const std::string& pred_path, std::optional<double> reference,
                const std::string& out_dir) {
  ManifestScope scope("winrate", out_dir);
  scope.add_input(pred_path);
  std::vector<PredictionLine> lines = read_predictions(pred_path);
  std::vector<double> preds;
  for (const PredictionLine& line : lines) {
    if (!line.p_orig) {
      std::cerr << "winrate: record " << line.id << " missing p_orig\n";
      return kExitValidation;
    }
    preds.push_back(*line.p_orig);
  }
  double rate = win_rate(preds);
  fs::path dir(out_dir);
  {
    std::ofstream out(dir / "winrate.csv");
    out << "win_rate,n";
    if (reference) out << ",reference,abs_error";
    out << "\n" << fmt_double(rate) << "," << preds.size();
    if (reference) {
      out << "," << fmt_double(*reference) << ","
          << fmt_double(std::fabs(rate - *reference));
    }
    out << "\n";
  }
  json config{{"predictions", pred_path}};
  if (reference) config["reference"] = *reference;
  scope.finish(config, 0);
  std::cout << "win rate " << fmt_double(rate) << " (n=" << preds.size() << ")";
  if (reference) {
    std::cout << "  reference " << fmt_double(*reference) << "  abs error "
              << fmt_double(std::fabs(rate - *reference));
  }
  std::cout << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"prefcal: probabilistic pairwise autorater toolkit"};
  app.require_subcommand(1);

  std::string out_dir = ".";
  app.add_option("--out-dir", out_dir, "directory for reports and manifests")
      ->capture_default_str();

  // aggregate
  auto* agg = app.add_subcommand("aggregate", "votes -> preference targets");
  std::string agg_in, agg_out;
  agg->add_option("input", agg_in, "comparisons file")->required();
  agg->add_option("--out", agg_out, "output comparisons file")->required();

  // evaluate
  auto* eval = app.add_subcommand("evaluate", "metric suite vs targets");
  std::string eval_preds, eval_comps;
  double tie_band = 0.05;
  int bins = 10;
  std::string prob_tag = "prob_rb_better";
  std::string occurrence = "last";
  eval->add_option("predictions", eval_preds, "predictions file")->required();
  eval->add_option("comparisons", eval_comps, "comparisons file with targets")
      ->required();
  eval->add_option("--tie-band", tie_band, "half-width of the Tie band")
      ->capture_default_str();
  eval->add_option("--bins", bins, "ECE bin count")->capture_default_str();
  eval->add_option("--prob-tag", prob_tag, "probability tag name")
      ->capture_default_str();
  eval->add_option("--occurrence", occurrence, "first|last tag occurrence")
      ->capture_default_str();

  // bias
  auto* bias = app.add_subcommand("bias", "positional-bias report");
  std::string bias_preds;
  double bias_tie_band = 0.05;
  bias->add_option("predictions", bias_preds,
                   "predictions file with p_orig and p_swap")
      ->required();
  bias->add_option("--tie-band", bias_tie_band, "half-width of the Tie band")
      ->capture_default_str();

  // calibrate
  auto* cal = app.add_subcommand("calibrate", "post-hoc calibration");
  std::string cal_preds, cal_method = "temperature";
  std::optional<std::string> cal_labels;
  std::string probe_id = "__probe__";
  cal->add_option("predictions", cal_preds, "predictions file with logits")
      ->required();
  cal->add_option("labels", cal_labels,
                  "comparisons file with targets (temperature only)");
  cal->add_option("--method", cal_method, "temperature|contextual|batch")
      ->capture_default_str();
  cal->add_option("--probe-id", probe_id,
                  "id of the content-free probe record (contextual)")
      ->capture_default_str();

  // simulate
  auto* sim = app.add_subcommand("simulate", "GRPO policy simulation");
  std::optional<std::string> pop_config, grpo_config, reward_flag;
  std::optional<std::uint64_t> seed_flag;
  double epsilon = 1e-3;
  sim->add_option("--pop-config", pop_config, "population config JSON");
  sim->add_option("--grpo-config", grpo_config, "GRPO config JSON");
  sim->add_option("--seed", seed_flag,
                  "override seed (PREFCAL_SEED is the fallback)");
  sim->add_option("--reward", reward_flag, "brier|log");
  sim->add_option("--epsilon", epsilon, "Log reward clip")
      ->capture_default_str();

  // winrate
  auto* win = app.add_subcommand("winrate", "mean predicted win rate");
  std::string win_preds;
  std::optional<double> reference;
  win->add_option("predictions", win_preds, "predictions file")->required();
  win->add_option("--reference", reference, "human win rate to compare");

  CLI11_PARSE(app, argc, argv);

  try {
    if (agg->parsed()) return cmd_aggregate(agg_in, agg_out, out_dir);
    if (eval->parsed()) {
      OutputGrammar grammar;
      grammar.prob_tag = prob_tag;
      if (occurrence == "first") {
        grammar.occurrence = OutputGrammar::Occurrence::First;
      } else if (occurrence != "last") {
        std::cerr << "evaluate: --occurrence must be first or last\n";
        return kExitValidation;
      }
      return cmd_evaluate(eval_preds, eval_comps, tie_band, bins, grammar,
                          out_dir);
    }
    if (bias->parsed()) return cmd_bias(bias_preds, bias_tie_band, out_dir);
    if (cal->parsed()) {
      return cmd_calibrate(cal_preds, cal_labels, cal_method, probe_id,
                           out_dir);
    }
    if (sim->parsed()) {
      return cmd_simulate(pop_config, grpo_config, seed_flag, reward_flag,
                          epsilon, out_dir);
    }
    if (win->parsed()) return cmd_winrate(win_preds, reference, out_dir);
  } catch (const RecordParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  }
  return kExitOk;
}
