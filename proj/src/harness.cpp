#include "lta/harness.hpp"

#include <fstream>
#include <map>
#include <sstream>

#include "lta/checkpoint.hpp"
#include "lta/error.hpp"

namespace lta {

namespace fs = std::filesystem;
using nlohmann::json;

void ExperimentConfig::sync() {
  h3m.N = N;
  icvae.N = N;
  icvae.Z = Z;
  if (data_path.empty()) {
    h3m.T = grammar.T;
    h3m.D = grammar.feature_dim;
  }
}

void ExperimentConfig::validate() const {
  require(N >= 1 && Z >= 1 && K >= 1, ErrorCode::kInvalidArgument,
          "N, Z and K must be >= 1");
  require(eval_windows >= 0, ErrorCode::kInvalidArgument, "eval_windows must be >= 0");
  if (data_path.empty()) grammar.validate();
  h3m.validate();
  icvae.validate();
}

json ExperimentConfig::to_json() const {
  return {{"data_path", data_path},
          {"grammar", grammar.to_json()},
          {"N", N},
          {"Z", Z},
          {"K", K},
          {"eval_windows", eval_windows},
          {"h3m", h3m.to_json()},
          {"icvae", icvae.to_json()},
          {"seed", seed},
          {"out_dir", out_dir},
          {"oracle_obs", oracle_obs},
          {"h3m_checkpoint", h3m_checkpoint},
          {"icvae_checkpoint", icvae_checkpoint}};
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  ExperimentConfig c;
  if (!j.is_object()) fail(ErrorCode::kMalformed, "experiment config must be an object");
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "data_path") c.data_path = value.get<std::string>();
      else if (key == "grammar") c.grammar = GrammarConfig::from_json(value);
      else if (key == "N") c.N = value.get<int>();
      else if (key == "Z") c.Z = value.get<int>();
      else if (key == "K") c.K = value.get<int>();
      else if (key == "eval_windows") c.eval_windows = value.get<int>();
      else if (key == "h3m") c.h3m = H3MConfig::from_json(value);
      else if (key == "icvae") c.icvae = ICVAEConfig::from_json(value);
      else if (key == "seed") c.seed = value.get<std::uint64_t>();
      else if (key == "out_dir") c.out_dir = value.get<std::string>();
      else if (key == "oracle_obs") c.oracle_obs = value.get<bool>();
      else if (key == "h3m_checkpoint") c.h3m_checkpoint = value.get<std::string>();
      else if (key == "icvae_checkpoint") c.icvae_checkpoint = value.get<std::string>();
      else fail(ErrorCode::kInvalidArgument, "config: unknown key '" + key + "'");
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::kMalformed, std::string("config: ") + e.what());
  }
  c.sync();
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::from_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kMissingFile, "cannot open config " + path.string());
  try {
    return from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    fail(ErrorCode::kMalformed, path.string() + ": " + e.what());
  }
}

std::string ExperimentConfig::hash() const {
  json j = to_json();
  j.erase("out_dir");
  return config_hash(j);
}

PreparedData prepare_data(const ExperimentConfig& config) {
  PreparedData data;
  if (config.data_path.empty()) {
    GrammarConfig g = config.grammar;
    g.seed = derive_seed(config.seed, "data");
    SyntheticData synth = synth_generate(g);
    data.vocab = synth.vocab;
    data.train = std::move(synth.train);
    data.eval = std::move(synth.eval);
  } else {
    const fs::path root(config.data_path);
    require(fs::is_directory(root / "train") && fs::is_directory(root / "eval"),
            ErrorCode::kMissingFile,
            "data root " + root.string() + " must contain train/ and eval/");
    data.train = load_dataset(root / "train");
    data.vocab = data.train.vocab;
    data.eval = load_dataset(root / "eval", &data.vocab);
  }
  data.bags = build_context_bags(data.train.records, data.vocab);
  return data;
}

std::vector<AnticipationExample> eval_windows(const ExperimentConfig& config,
                                              const Dataset& eval) {
  auto windows = make_windows(eval, config.N, config.Z, config.N + config.Z);
  if (config.eval_windows > 0 &&
      windows.size() > static_cast<std::size_t>(config.eval_windows)) {
    windows.resize(static_cast<std::size_t>(config.eval_windows));
  }
  return windows;
}

// --- predictions -------------------------------------------------------------

namespace {

json sequence_json(const ActionSequence& seq) {
  json out = json::array();
  for (const auto& a : seq) out.push_back({a.verb, a.noun});
  return out;
}

ActionSequence sequence_from_json(const json& j) {
  ActionSequence seq;
  for (const auto& pair : j) {
    if (!pair.is_array() || pair.size() != 2)
      fail(ErrorCode::kMalformed, "action must be a [verb, noun] pair");
    seq.push_back({pair[0].get<int>(), pair[1].get<int>()});
  }
  return seq;
}

struct VideoSpan {
  std::size_t begin = 0;
  std::size_t length = 0;
  int first_index = 0;
};

std::map<std::string, VideoSpan> index_videos(const Dataset& ds) {
  std::map<std::string, VideoSpan> out;
  for (std::size_t i = 0; i < ds.records.size(); ++i) {
    auto [it, inserted] = out.try_emplace(ds.records[i].video_id);
    if (inserted) {
      it->second.begin = i;
      it->second.first_index = ds.records[i].clip_index;
    }
    ++it->second.length;
  }
  return out;
}

}  // namespace

json PredictionRecord::to_json() const {
  json cands = json::array();
  for (const auto& c : candidates) cands.push_back(sequence_json(c));
  json j = {{"example_id", example_id}, {"intention", intention}, {"candidates", cands}};
  if (h3m) {
    j["h3m"] = {{"intention", h3m->intention_top5},
                {"verbs", h3m->verb_top5},
                {"nouns", h3m->noun_top5},
                {"observed", sequence_json(h3m->actions)}};
  }
  return j;
}

PredictionRecord PredictionRecord::from_json(const json& j) {
  PredictionRecord r;
  try {
    r.example_id = j.at("example_id").get<std::string>();
    r.intention = j.at("intention").get<int>();
    for (const auto& c : j.at("candidates")) r.candidates.push_back(sequence_from_json(c));
    if (j.contains("h3m")) {
      const auto& h = j.at("h3m");
      H3MPrediction p;
      p.intention_top5 = h.at("intention").get<std::vector<int>>();
      p.verb_top5 = h.at("verbs").get<std::vector<std::vector<int>>>();
      p.noun_top5 = h.at("nouns").get<std::vector<std::vector<int>>>();
      p.actions = sequence_from_json(h.at("observed"));
      require(!p.intention_top5.empty(), ErrorCode::kMalformed, "empty intention ranking");
      p.intention = p.intention_top5.front();
      r.h3m = std::move(p);
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::kMalformed, std::string("prediction record: ") + e.what());
  }
  return r;
}

void write_predictions(const std::vector<PredictionRecord>& predictions,
                       const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::kMissingFile, "cannot write " + path.string());
  for (const auto& p : predictions) out << p.to_json().dump() << '\n';
}

std::vector<PredictionRecord> read_predictions(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kMissingFile, "cannot open predictions " + path.string());
  std::vector<PredictionRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      out.push_back(PredictionRecord::from_json(json::parse(line)));
    } catch (const json::parse_error& e) {
      fail(ErrorCode::kMalformed, path.string() + ": " + e.what());
    }
  }
  return out;
}

// --- training ----------------------------------------------------------------

H3M train_h3m_model(const ExperimentConfig& config, const PreparedData& data,
                    TrainingLog* log) {
  H3MConfig cfg = config.h3m;
  cfg.N = config.N;
  cfg.T = data.train.T;
  cfg.D = data.train.D;
  const auto windows = make_windows(data.train, config.N, config.Z, 1);
  require(!windows.empty(), ErrorCode::kEmptyDataset, "no training windows");
  H3M model(cfg, VocabSizes::of(data.vocab), derive_seed(config.seed, "init.h3m"));
  TrainingLog l = h3m_train(model, data.train, windows, derive_seed(config.seed, "h3m"));
  if (log != nullptr) *log = std::move(l);
  return model;
}

ICVAE train_icvae_model(const ExperimentConfig& config, const PreparedData& data,
                        TrainingLog* log) {
  ICVAEConfig cfg = config.icvae;
  cfg.N = config.N;
  cfg.Z = config.Z;
  const auto windows = make_windows(data.train, config.N, config.Z, 1);
  require(!windows.empty(), ErrorCode::kEmptyDataset, "no training windows");
  ICVAE model(cfg, VocabSizes::of(data.vocab), derive_seed(config.seed, "init.icvae"));
  TrainingLog l = icvae_train(model, windows, derive_seed(config.seed, "icvae"));
  if (log != nullptr) *log = std::move(l);
  return model;
}

std::vector<PredictionRecord> predict(const ExperimentConfig& config, const H3M* h3m,
                                      const ICVAE& icvae, const Dataset& eval,
                                      const std::vector<AnticipationExample>& examples) {
  require(icvae.config().N == config.N, ErrorCode::kInvalidArgument,
          "N mismatch: generator trained with N=" + std::to_string(icvae.config().N) +
              ", experiment uses N=" + std::to_string(config.N));
  const bool use_h3m = h3m != nullptr && !config.oracle_obs;
  if (use_h3m) {
    require(h3m->config().N == config.N, ErrorCode::kInvalidArgument,
            "N mismatch: classifier trained with N=" + std::to_string(h3m->config().N) +
                ", experiment uses N=" + std::to_string(config.N));
  }
  const std::uint64_t gen_root = derive_seed(config.seed, "generation");
  std::vector<PredictionRecord> out;
  out.reserve(examples.size());
  for (const auto& ex : examples) {
    PredictionRecord rec;
    rec.example_id = ex.id();
    ActionSequence observed = ex.observed_actions;
    int intention = ex.intention;
    if (use_h3m) {
      const auto clips = observed_matrices(eval, ex);
      const auto valid = observed_valid_rows(eval, ex);
      H3MPrediction p = h3m->infer(clips, valid);
      observed = p.actions;
      intention = p.intention;
      rec.h3m = std::move(p);
    }
    rec.intention = intention;
    rec.candidates = icvae.generate(observed, intention, config.Z, config.K,
                                    derive_seed(gen_root, rec.example_id));
    out.push_back(std::move(rec));
  }
  return out;
}

MetricsReport evaluate_predictions(const std::vector<PredictionRecord>& predictions,
                                   const Dataset& truth, const ContextBags& bags) {
  require(!predictions.empty(), ErrorCode::kEmptyEvaluation, "empty evaluation set");
  const auto videos = index_videos(truth);
  std::vector<std::vector<ActionSequence>> candidates;
  std::vector<ActionSequence> truths;
  std::vector<int> intentions;
  std::vector<ClassifiedExample> classified;
  bool all_classified = true;

  for (const auto& p : predictions) {
    const auto hash = p.example_id.rfind('#');
    require(hash != std::string::npos, ErrorCode::kMalformed,
            "example id '" + p.example_id + "' lacks '#<clip>'");
    const std::string video = p.example_id.substr(0, hash);
    int future_start = 0;
    try {
      future_start = std::stoi(p.example_id.substr(hash + 1));
    } catch (const std::exception&) {
      fail(ErrorCode::kMalformed, "bad clip index in example id '" + p.example_id + "'");
    }
    const auto it = videos.find(video);
    require(it != videos.end(), ErrorCode::kUnknownLabel,
            "example id refers to unknown video '" + video + "'");
    require(!p.candidates.empty(), ErrorCode::kMalformed, "record without candidates");
    const VideoSpan& span = it->second;
    const int Z = static_cast<int>(p.candidates.front().size());
    const int offset = future_start - span.first_index;
    require(offset >= 0 && offset + Z <= static_cast<int>(span.length),
            ErrorCode::kMalformed, "example '" + p.example_id + "' exceeds its video");

    ActionSequence future;
    for (int t = 0; t < Z; ++t) future.push_back(truth.records[span.begin + offset + t].label);
    const int true_intention = truth.records[span.begin].intention_id;
    candidates.push_back(p.candidates);
    truths.push_back(std::move(future));
    intentions.push_back(true_intention);

    if (!p.h3m) {
      all_classified = false;
      continue;
    }
    const int n = static_cast<int>(p.h3m->verb_top5.size());
    require(offset - n >= 0, ErrorCode::kMalformed,
            "example '" + p.example_id + "' has no room for its observed clips");
    ClassifiedExample c;
    c.verb_ranked = p.h3m->verb_top5;
    c.noun_ranked = p.h3m->noun_top5;
    c.predicted_intention = p.h3m->intention;
    c.true_intention = true_intention;
    for (int t = 0; t < n; ++t)
      c.truth.push_back(truth.records[span.begin + offset - n + t].label);
    classified.push_back(std::move(c));
  }

  MetricsReport report = evaluate_candidates(candidates, truths, intentions, bags);
  if (all_classified) report.accuracy = accuracy_by_intention_correctness(classified);
  return report;
}

// --- pipeline ------------------------------------------------------------------

namespace {

json report_config(const ExperimentConfig& config, bool no_intention) {
  return {{"N", config.N},
          {"Z", config.Z},
          {"K", config.K},
          {"seed", config.seed},
          {"oracle_obs", config.oracle_obs},
          {"no_intention", no_intention},
          {"config_hash", config.hash()},
          {"eval_protocol", "non-overlapping windows, stride N+Z"}};
}

}  // namespace

PipelineResult run_pipeline(const ExperimentConfig& config, const PreparedData& data,
                            const H3M* h3m, const ICVAE& icvae) {
  const auto examples = eval_windows(config, data.eval);
  require(!examples.empty(), ErrorCode::kEmptyEvaluation, "empty evaluation set");
  PipelineResult result;
  result.predictions = predict(config, h3m, icvae, data.eval, examples);
  result.report = evaluate_predictions(result.predictions, data.eval, data.bags);
  result.report.config = report_config(config, icvae.config().no_intention);
  return result;
}

PipelineResult run_pipeline(const ExperimentConfig& config) {
  const PreparedData data = prepare_data(config);
  std::optional<H3M> h3m;
  if (!config.h3m_checkpoint.empty()) {
    h3m.emplace(H3M::load(config.h3m_checkpoint));
  } else if (!config.oracle_obs) {
    h3m.emplace(train_h3m_model(config, data));
  }
  const ICVAE icvae = config.icvae_checkpoint.empty()
                          ? train_icvae_model(config, data)
                          : ICVAE::load(config.icvae_checkpoint);
  return run_pipeline(config, data, h3m ? &*h3m : nullptr, icvae);
}

std::vector<AblationRow> ablate_n(const ExperimentConfig& config,
                                  const std::vector<int>& n_values) {
  require(!n_values.empty(), ErrorCode::kInvalidArgument, "no N values given");
  const PreparedData data = prepare_data(config);
  std::vector<AblationRow> rows;
  for (int n : n_values) {
    ExperimentConfig cfg = config;
    cfg.N = n;
    cfg.oracle_obs = true;
    cfg.sync();
    try {
      cfg.validate();
      const ICVAE icvae = train_icvae_model(cfg, data);
      rows.push_back({n, run_pipeline(cfg, data, nullptr, icvae).report});
    } catch (const Error& e) {
      throw Error(e.code(), "ablate-n at N=" + std::to_string(n) + ": " + e.what());
    }
  }
  return rows;
}

json ablate_n_json(const std::vector<AblationRow>& rows) {
  json table = json::array();
  for (const auto& r : rows) table.push_back({{"N", r.N}, {"report", r.report.to_json()}});
  return {{"rows", table},
          {"reference",
           {{"source", "Ego4D LTA, generator on ground-truth observed actions; "
                       "display only, not reproducible at desk scale"},
            {"verb", {{"1", 0.7246}, {"2", 0.7105}, {"4", 0.7011}, {"6", 0.7035}, {"8", 0.7147}}},
            {"noun", {{"1", 0.7509}, {"2", 0.6432}, {"4", 0.5920}, {"6", 0.5899}, {"8", 0.6588}}}}}};
}

IntentionAblation ablate_intention(const ExperimentConfig& config) {
  const PreparedData data = prepare_data(config);
  std::optional<H3M> h3m;
  if (!config.h3m_checkpoint.empty()) {
    h3m.emplace(H3M::load(config.h3m_checkpoint));
  } else if (!config.oracle_obs) {
    h3m.emplace(train_h3m_model(config, data));
  }
  const H3M* classifier = h3m ? &*h3m : nullptr;

  ExperimentConfig conditioned = config;
  conditioned.icvae.no_intention = false;
  ExperimentConfig unconditioned = config;
  unconditioned.icvae.no_intention = true;

  IntentionAblation result;
  {
    const ICVAE model = train_icvae_model(conditioned, data);
    result.conditioned = run_pipeline(conditioned, data, classifier, model).report;
    ExperimentConfig oracle = conditioned;
    oracle.oracle_obs = true;
    result.conditioned_oracle = run_pipeline(oracle, data, nullptr, model).report;
  }
  {
    const ICVAE model = train_icvae_model(unconditioned, data);
    result.unconditioned = run_pipeline(unconditioned, data, classifier, model).report;
  }
  return result;
}

json ablate_intention_json(const IntentionAblation& r) {
  const auto& c = r.conditioned;
  const auto& u = r.unconditioned;
  return {{"conditioned", c.to_json()},
          {"no_intention", u.to_json()},
          {"conditioned_oracle_obs", r.conditioned_oracle.to_json()},
          {"delta",
           {{"verb", c.ed_verb - u.ed_verb},
            {"noun", c.ed_noun - u.ed_noun},
            {"action", c.ed_action - u.ed_action},
            {"ooc_verb", c.ooc.verb - u.ooc.verb},
            {"ooc_noun", c.ooc.noun - u.ooc.noun}}},
          {"reference",
           {{"source", "Ego4D LTA end-to-end, N=6; display only, not reproducible "
                       "at desk scale"},
            {"conditioned", {{"verb", 0.741}, {"noun", 0.740}, {"action", 0.930}}},
            {"no_intention", {{"verb", 0.748}, {"noun", 0.753}, {"action", 0.938}}}}}};
}

json RunManifest::to_json() const {
  return {{"command", command},
          {"config_hash", config_hash},
          {"seed", seed},
          {"versions", {{"lta", kVersion}}},
          {"checkpoints", checkpoints},
          {"report", report},
          {"wall_clock_seconds", wall_clock_seconds}};
}

void prepare_output_dir(const fs::path& dir, bool overwrite) {
  if (fs::exists(dir)) {
    require(fs::is_directory(dir), ErrorCode::kOutputExists,
            dir.string() + " exists and is not a directory");
    if (!fs::is_empty(dir)) {
      require(overwrite, ErrorCode::kOutputExists,
              dir.string() + " is not empty; pass --overwrite to replace it");
      for (const auto& entry : fs::directory_iterator(dir)) fs::remove_all(entry.path());
    }
  }
  fs::create_directories(dir);
}

void write_json(const fs::path& path, const json& doc) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::kMissingFile, "cannot write " + path.string());
  out << doc.dump(2) << '\n';
}

}  // namespace lta
