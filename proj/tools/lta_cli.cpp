// lta: synthetic data generation, training, prediction, evaluation and
// ablations for two-stage long-term action anticipation.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "lta/checkpoint.hpp"
#include "lta/error.hpp"
#include "lta/harness.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace lta;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool overwrite = false;
  std::optional<int> n, z, k;
  std::string data;
  std::string h3m;
  std::string icvae;
};

void add_common(CLI::App* cmd, Common& c, bool models, bool single_n = true) {
  cmd->add_option("--config", c.config, "Experiment config JSON");
  cmd->add_option("--seed", c.seed, "Root seed");
  cmd->add_option("--out", c.out, "Output directory")->required();
  cmd->add_flag("--overwrite", c.overwrite, "Replace a non-empty output directory");
  if (single_n) cmd->add_option("--n", c.n, "Observed clips N");
  cmd->add_option("--z", c.z, "Anticipation horizon Z");
  cmd->add_option("--k", c.k, "Candidates per example K");
  cmd->add_option("--data", c.data, "Dataset root with train/ and eval/");
  if (models) {
    cmd->add_option("--h3m", c.h3m, "H3M checkpoint");
    cmd->add_option("--icvae", c.icvae, "I-CVAE checkpoint");
  }
}

ExperimentConfig load_config(const Common& c) {
  ExperimentConfig cfg = c.config.empty() ? ExperimentConfig{} : ExperimentConfig::from_file(c.config);
  if (c.seed) cfg.seed = *c.seed;
  if (c.n) cfg.N = *c.n;
  if (c.z) cfg.Z = *c.z;
  if (c.k) cfg.K = *c.k;
  if (!c.data.empty()) cfg.data_path = c.data;
  if (!c.h3m.empty()) cfg.h3m_checkpoint = c.h3m;
  if (!c.icvae.empty()) cfg.icvae_checkpoint = c.icvae;
  cfg.out_dir = c.out;
  cfg.sync();
  cfg.validate();
  return cfg;
}

class Run {
 public:
  Run(std::string command, const fs::path& out, bool overwrite)
      : out_(out), start_(std::chrono::steady_clock::now()) {
    prepare_output_dir(out, overwrite);
    manifest_.command = std::move(command);
  }

  RunManifest& manifest() { return manifest_; }
  fs::path path(const std::string& name) const { return out_ / name; }

  void finish() {
    manifest_.wall_clock_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    write_json(out_ / kManifestFile, manifest_.to_json());
  }

 private:
  fs::path out_;
  std::chrono::steady_clock::time_point start_;
  RunManifest manifest_;
};

json log_json(const TrainingLog& log) {
  return {{"losses", log.losses}, {"phases", log.phases}};
}

void cmd_synth_gen(const Common& c) {
  GrammarConfig g;
  if (!c.config.empty()) {
    std::ifstream in(c.config);
    if (!in) fail(ErrorCode::kMissingFile, "cannot open config " + c.config);
    try {
      g = GrammarConfig::from_json(json::parse(in));
    } catch (const json::parse_error& e) {
      fail(ErrorCode::kMalformed, c.config + ": " + e.what());
    }
  }
  if (c.seed) g.seed = *c.seed;
  g.validate();
  Run run("synth-gen", c.out, c.overwrite);
  write_synthetic(synth_generate(g), g, c.out);
  run.manifest().config_hash = config_hash(g.to_json());
  run.manifest().seed = g.seed;
  run.finish();
}

void cmd_train_h3m(const Common& c) {
  const ExperimentConfig cfg = load_config(c);
  Run run("train-h3m", c.out, c.overwrite);
  const PreparedData data = prepare_data(cfg);
  TrainingLog log;
  const H3M model = train_h3m_model(cfg, data, &log);
  model.save(run.path("h3m.ckpt"), derive_seed(cfg.seed, "init.h3m"));
  write_json(run.path("training_log.json"), log_json(log));
  run.manifest().config_hash = cfg.hash();
  run.manifest().seed = cfg.seed;
  run.manifest().checkpoints = {"h3m.ckpt"};
  run.finish();
}

void cmd_train_icvae(const Common& c, bool no_intention) {
  ExperimentConfig cfg = load_config(c);
  if (no_intention) cfg.icvae.no_intention = true;
  Run run("train-icvae", c.out, c.overwrite);
  const PreparedData data = prepare_data(cfg);
  TrainingLog log;
  const ICVAE model = train_icvae_model(cfg, data, &log);
  model.save(run.path("icvae.ckpt"), derive_seed(cfg.seed, "init.icvae"));
  write_json(run.path("training_log.json"), log_json(log));
  run.manifest().config_hash = cfg.hash();
  run.manifest().seed = cfg.seed;
  run.manifest().checkpoints = {"icvae.ckpt"};
  run.finish();
}

void cmd_predict(const Common& c, bool oracle_obs) {
  ExperimentConfig cfg = load_config(c);
  if (oracle_obs) cfg.oracle_obs = true;
  require(!cfg.icvae_checkpoint.empty(), ErrorCode::kInvalidArgument,
          "predict needs --icvae");
  require(cfg.oracle_obs || !cfg.h3m_checkpoint.empty(), ErrorCode::kInvalidArgument,
          "predict needs --h3m unless --oracle-obs is given");
  Run run("predict", c.out, c.overwrite);
  const PreparedData data = prepare_data(cfg);
  std::optional<H3M> h3m;
  if (!cfg.oracle_obs) h3m.emplace(H3M::load(cfg.h3m_checkpoint));
  const ICVAE icvae = ICVAE::load(cfg.icvae_checkpoint);
  const auto examples = eval_windows(cfg, data.eval);
  require(!examples.empty(), ErrorCode::kEmptyEvaluation, "empty evaluation set");
  write_predictions(predict(cfg, h3m ? &*h3m : nullptr, icvae, data.eval, examples),
                    run.path("predictions.jsonl"));
  run.manifest().config_hash = cfg.hash();
  run.manifest().seed = cfg.seed;
  run.manifest().checkpoints = {cfg.icvae_checkpoint};
  if (h3m) run.manifest().checkpoints.push_back(cfg.h3m_checkpoint);
  run.finish();
}

// Writes the report to `report_path`; the manifest goes next to it.
void cmd_evaluate(const Common& c, const std::string& pred, const fs::path& report_path) {
  ExperimentConfig cfg = load_config(c);
  require(!cfg.data_path.empty(), ErrorCode::kInvalidArgument,
          "evaluate needs --truth (dataset root)");
  const auto start = std::chrono::steady_clock::now();
  const auto predictions = read_predictions(pred);
  const fs::path dir = report_path.has_parent_path() ? report_path.parent_path() : fs::path(".");
  const fs::path manifest_path = dir / kManifestFile;
  for (const auto& p : {report_path, manifest_path}) {
    require(c.overwrite || !fs::exists(p), ErrorCode::kOutputExists,
            p.string() + " exists; pass --overwrite to replace it");
  }
  fs::create_directories(dir);
  const PreparedData data = prepare_data(cfg);
  MetricsReport report = evaluate_predictions(predictions, data.eval, data.bags);
  report.config = {{"Z", report.z}, {"predictions", pred}, {"truth", cfg.data_path}};
  write_json(report_path, report.to_json());
  RunManifest m;
  m.command = "evaluate";
  m.config_hash = cfg.hash();
  m.seed = cfg.seed;
  m.report = report_path.filename().string();
  m.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_json(manifest_path, m.to_json());
}

void cmd_run(const Common& c, bool oracle_obs) {
  ExperimentConfig cfg = load_config(c);
  if (oracle_obs) cfg.oracle_obs = true;
  Run run("run", c.out, c.overwrite);
  const PipelineResult result = run_pipeline(cfg);
  write_predictions(result.predictions, run.path("predictions.jsonl"));
  write_json(run.path("report.json"), result.report.to_json());
  run.manifest().config_hash = cfg.hash();
  run.manifest().seed = cfg.seed;
  run.manifest().report = "report.json";
  run.finish();
}

void cmd_ablate_n(const Common& c, const std::vector<int>& values) {
  const ExperimentConfig cfg = load_config(c);
  Run run("ablate-n", c.out, c.overwrite);
  write_json(run.path("ablate_n.json"), ablate_n_json(ablate_n(cfg, values)));
  run.manifest().config_hash = cfg.hash();
  run.manifest().seed = cfg.seed;
  run.manifest().report = "ablate_n.json";
  run.finish();
}

void cmd_ablate_intention(const Common& c) {
  const ExperimentConfig cfg = load_config(c);
  Run run("ablate-intention", c.out, c.overwrite);
  write_json(run.path("ablate_intention.json"), ablate_intention_json(ablate_intention(cfg)));
  run.manifest().config_hash = cfg.hash();
  run.manifest().seed = cfg.seed;
  run.manifest().report = "ablate_intention.json";
  run.finish();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Long-term action anticipation toolkit", "lta"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  Common c;
  bool no_intention = false, oracle_obs = false;
  std::string pred, truth, report_path;
  std::vector<int> n_values{1, 2, 4};

  auto* synth = app.add_subcommand("synth-gen", "Write a synthetic intention-grammar dataset");
  synth->add_option("--config", c.config, "Grammar config JSON");
  synth->add_option("--seed", c.seed, "Generation seed");
  synth->add_option("--out", c.out, "Output directory")->required();
  synth->add_flag("--overwrite", c.overwrite, "Replace a non-empty output directory");

  auto* train_h3m = app.add_subcommand("train-h3m", "Train the hierarchical classifier");
  add_common(train_h3m, c, false);

  auto* train_icvae = app.add_subcommand("train-icvae", "Train the anticipation generator");
  add_common(train_icvae, c, false);
  train_icvae->add_flag("--no-intention", no_intention, "Drop intention conditioning");

  auto* pred_cmd = app.add_subcommand("predict", "Generate K candidate futures per window");
  add_common(pred_cmd, c, true);
  pred_cmd->add_flag("--oracle-obs", oracle_obs, "Use ground-truth observed labels");

  auto* eval_cmd = app.add_subcommand("evaluate", "Score predictions against ground truth");
  eval_cmd->add_option("--config", c.config, "Experiment config JSON");
  eval_cmd->add_option("--pred", pred, "predictions.jsonl")->required();
  eval_cmd->add_option("--truth", truth, "Dataset root with train/ and eval/")->required();
  eval_cmd->add_option("--report", report_path, "MetricsReport JSON to write")->required();
  eval_cmd->add_flag("--overwrite", c.overwrite, "Replace an existing report");

  auto* run_cmd = app.add_subcommand("run", "Train both stages, predict and evaluate");
  add_common(run_cmd, c, true);
  run_cmd->add_flag("--oracle-obs", oracle_obs, "Use ground-truth observed labels");

  auto* abl_n = app.add_subcommand("ablate-n", "Sweep the number of observed clips");
  add_common(abl_n, c, false, false);
  abl_n->add_option("--n", n_values, "N values to sweep (comma separated)")->delimiter(',');

  auto* abl_i = app.add_subcommand("ablate-intention", "Conditioned vs unconditioned generator");
  add_common(abl_i, c, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << app.help();
    return 2;
  }

  try {
    if (*synth) cmd_synth_gen(c);
    else if (*train_h3m) cmd_train_h3m(c);
    else if (*train_icvae) cmd_train_icvae(c, no_intention);
    else if (*pred_cmd) cmd_predict(c, oracle_obs);
    else if (*eval_cmd) {
      c.data = truth;
      cmd_evaluate(c, pred, report_path);
    } else if (*run_cmd) cmd_run(c, oracle_obs);
    else if (*abl_n) cmd_ablate_n(c, n_values);
    else if (*abl_i) cmd_ablate_intention(c);
  } catch (const Error& e) {
    std::cerr << "error: " << to_string(e.code()) << ": " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
