#include "prefcal/records.hpp"

#include <cstdio>
#include <fstream>

#include "json.hpp"

namespace prefcal {

using nlohmann::json;

const char* const kToolkitVersion = "0.1.0";

namespace {

json parse_line(const std::string& line, std::size_t lineno) {
  json j = json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    throw RecordParseError("malformed JSON record", lineno);
  }
  return j;
}

std::string require_id(const json& j, std::size_t lineno) {
  if (!j.contains("id")) throw RecordParseError("record missing id", lineno);
  if (j["id"].is_string()) return j["id"].get<std::string>();
  if (j["id"].is_number_integer()) return std::to_string(j["id"].get<long>());
  throw RecordParseError("record id must be a string or integer", lineno);
}

double require_probability(const json& v, const char* field,
                           std::size_t lineno) {
  if (!v.is_number()) {
    throw RecordParseError(std::string(field) + " must be a number", lineno);
  }
  double p = v.get<double>();
  if (!(p >= 0.0 && p <= 1.0)) {
    throw RecordParseError(std::string(field) + " out of [0, 1]", lineno);
  }
  return p;
}

}  // namespace

std::vector<ComparisonInstance> read_comparisons(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::vector<ComparisonInstance> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j = parse_line(line, lineno);
    ComparisonInstance inst;
    inst.id = require_id(j, lineno);
    inst.question = j.value("question", std::string());
    inst.response_a = j.value("response_a", std::string());
    inst.response_b = j.value("response_b", std::string());
    if (j.contains("votes")) {
      if (!j["votes"].is_array()) {
        throw RecordParseError("votes must be an array", lineno);
      }
      for (const json& v : j["votes"]) {
        if (v.is_string() && v.get<std::string>() == "tie") {
          // Tie votes are split so the estimator sees only binary labels.
          inst.votes.push_back(0);
          inst.votes.push_back(1);
        } else if (v.is_number()) {
          double x = v.get<double>();
          if (x == 0.0 || x == 1.0) {
            inst.votes.push_back(static_cast<int>(x));
          } else if (x == 0.5) {
            inst.votes.push_back(0);
            inst.votes.push_back(1);
          } else {
            throw RecordParseError("vote values must be 0, 1, 0.5 or \"tie\"",
                                   lineno);
          }
        } else {
          throw RecordParseError("vote values must be 0, 1, 0.5 or \"tie\"",
                                 lineno);
        }
      }
    }
    if (j.contains("p_hat")) {
      PreferenceTarget t;
      t.p_hat = require_probability(j["p_hat"], "p_hat", lineno);
      t.m = j.value("m", static_cast<int>(inst.votes.size()));
      if (t.m < 1) throw RecordParseError("m must be >= 1", lineno);
      t.variance_estimate =
          j.value("variance", t.p_hat * (1.0 - t.p_hat) / t.m);
      inst.target = t;
    }
    try {
      validate_instance(inst);
    } catch (const std::invalid_argument& e) {
      throw RecordParseError(e.what(), lineno);
    }
    out.push_back(std::move(inst));
  }
  return out;
}

void write_comparisons(const std::string& path,
                       std::span<const ComparisonInstance> instances) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  for (const ComparisonInstance& inst : instances) {
    json j;
    j["id"] = inst.id;
    j["question"] = inst.question;
    j["response_a"] = inst.response_a;
    j["response_b"] = inst.response_b;
    j["votes"] = inst.votes;
    if (inst.target) {
      j["p_hat"] = inst.target->p_hat;
      j["m"] = inst.target->m;
      j["variance"] = inst.target->variance_estimate;
    }
    out << j.dump() << "\n";
  }
}

std::vector<PredictionLine> read_predictions(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::vector<PredictionLine> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j = parse_line(line, lineno);
    PredictionLine rec;
    rec.id = require_id(j, lineno);
    if (j.contains("p_orig")) {
      rec.p_orig = require_probability(j["p_orig"], "p_orig", lineno);
    }
    if (j.contains("p_swap")) {
      rec.p_swap = require_probability(j["p_swap"], "p_swap", lineno);
    }
    if (j.contains("z_a") != j.contains("z_b")) {
      throw RecordParseError("z_a and z_b must appear together", lineno);
    }
    if (j.contains("z_a")) {
      if (!j["z_a"].is_number() || !j["z_b"].is_number()) {
        throw RecordParseError("logits must be numbers", lineno);
      }
      rec.z_a = j["z_a"].get<double>();
      rec.z_b = j["z_b"].get<double>();
    }
    if (j.contains("raw_text")) {
      if (!j["raw_text"].is_string()) {
        throw RecordParseError("raw_text must be a string", lineno);
      }
      rec.raw_text = j["raw_text"].get<std::string>();
    }
    out.push_back(std::move(rec));
  }
  return out;
}

void write_predictions(const std::string& path,
                       std::span<const PredictionLine> lines) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  for (const PredictionLine& rec : lines) {
    json j;
    j["id"] = rec.id;
    if (rec.p_orig) j["p_orig"] = *rec.p_orig;
    if (rec.p_swap) j["p_swap"] = *rec.p_swap;
    if (rec.z_a) j["z_a"] = *rec.z_a;
    if (rec.z_b) j["z_b"] = *rec.z_b;
    if (rec.raw_text) j["raw_text"] = *rec.raw_text;
    out << j.dump() << "\n";
  }
}

std::string file_digest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[4096];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
  }
  char hex[17];
  std::snprintf(hex, sizeof(hex), "%016llx",
                static_cast<unsigned long long>(h));
  return std::string("fnv1a64:") + hex;
}

void write_manifest(const RunManifest& manifest, const std::string& path) {
  json j;
  j["command"] = manifest.command;
  j["config"] = json::parse(manifest.config_json, nullptr, false);
  if (j["config"].is_discarded()) j["config"] = manifest.config_json;
  j["seed"] = manifest.seed;
  j["input_digests"] = manifest.input_digests;
  j["toolkit_version"] = manifest.version;
  j["started_at"] = manifest.started_at;
  j["finished_at"] = manifest.finished_at;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << "\n";
}

PopulationSpec load_population_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    throw std::runtime_error("malformed population config: " + path);
  }
  PopulationSpec spec;
  spec.context_count = j.value("contexts", spec.context_count);
  spec.votes_per_context = j.value("m", spec.votes_per_context);
  spec.seed = j.value("seed", spec.seed);
  if (j.contains("law")) {
    const json& law = j["law"];
    if (law.is_string() && law.get<std::string>() == "grid") {
      spec.law = GridLaw{};
    } else if (law.is_object() && law.contains("beta")) {
      BetaLaw b;
      b.a = law["beta"].at(0).get<double>();
      b.b = law["beta"].at(1).get<double>();
      spec.law = b;
    } else {
      throw std::runtime_error("population law must be \"grid\" or {\"beta\": [a,b]}");
    }
  }
  if (j.contains("model")) {
    const json& m = j["model"];
    if (m.is_string() && m.get<std::string>() == "stable") {
      spec.model = StableAnnotators{};
    } else if (m.is_object() && m.contains("noisy")) {
      spec.model = NoisyAnnotators{m["noisy"].get<double>()};
    } else {
      throw std::runtime_error(
          "annotator model must be \"stable\" or {\"noisy\": concentration}");
    }
  }
  return spec;
}

SimulationSpec load_simulation_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    throw std::runtime_error("malformed simulation config: " + path);
  }
  SimulationSpec spec;
  GrpoConfig& g = spec.grpo;
  g.group_size = j.value("group_size", g.group_size);
  g.groups_per_step = j.value("groups_per_step", g.groups_per_step);
  g.clip_eps = j.value("clip_eps", g.clip_eps);
  g.kl_beta = j.value("kl_beta", g.kl_beta);
  g.learning_rate = j.value("learning_rate", g.learning_rate);
  g.steps = j.value("steps", g.steps);
  g.seed = j.value("seed", g.seed);
  if (j.contains("reward")) {
    std::string r = j["reward"].get<std::string>();
    if (r == "brier") g.reward.kind = RewardKind::Brier;
    else if (r == "log") g.reward.kind = RewardKind::Log;
    else throw std::runtime_error("reward must be \"brier\" or \"log\"");
  }
  g.reward.epsilon = j.value("epsilon", g.reward.epsilon);
  if (j.contains("label_mode")) {
    std::string m = j["label_mode"].get<std::string>();
    if (m == "binary") g.label_mode = LabelMode::Binary;
    else if (m == "probabilistic") g.label_mode = LabelMode::Probabilistic;
    else throw std::runtime_error("label_mode must be \"binary\" or \"probabilistic\"");
  }
  if (j.contains("label_draw")) {
    std::string d = j["label_draw"].get<std::string>();
    if (d == "group") g.label_draw = LabelDraw::PerGroup;
    else if (d == "sample") g.label_draw = LabelDraw::PerSample;
    else throw std::runtime_error("label_draw must be \"group\" or \"sample\"");
  }
  if (j.contains("sampler")) {
    std::string s = j["sampler"].get<std::string>();
    if (s == "iid") g.sampler = GroupSampler::Iid;
    else if (s == "stratified") g.sampler = GroupSampler::Stratified;
    else if (s == "systematic") g.sampler = GroupSampler::Systematic;
    else throw std::runtime_error(
        "sampler must be \"iid\", \"stratified\" or \"systematic\"");
  }
  spec.grid_step = j.value("grid_step", spec.grid_step);
  if (j.contains("init")) {
    const json& init = j["init"];
    if (init.is_string()) {
      std::string s = init.get<std::string>();
      if (s == "uniform") spec.init = PolicyInit::uniform();
      else if (s == "peaked_unparsable") spec.init = PolicyInit::peaked_unparsable();
      else throw std::runtime_error("init must be \"uniform\", \"peaked_unparsable\" or {\"peaked\": p}");
    } else if (init.is_object() && init.contains("peaked")) {
      spec.init = PolicyInit::peaked_at(init["peaked"].get<double>());
    } else {
      throw std::runtime_error("init must be \"uniform\", \"peaked_unparsable\" or {\"peaked\": p}");
    }
  }
  if (j.contains("tolerances")) {
    spec.tolerances_explicit = true;
    const json& t = j["tolerances"];
    spec.tolerances.max_mode_gap =
        t.value("max_mode_gap", spec.tolerances.max_mode_gap);
    spec.tolerances.min_mode_mass =
        t.value("min_mode_mass", spec.tolerances.min_mode_mass);
    spec.tolerances.min_parsability =
        t.value("min_parsability", spec.tolerances.min_parsability);
  }
  return spec;
}

}  // namespace prefcal
