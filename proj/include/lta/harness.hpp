#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lta/datagen.hpp"
#include "lta/h3m.hpp"
#include "lta/icvae.hpp"
#include "lta/metrics.hpp"

namespace lta {

// Experiment settings. JSON keys mirror the field names; unknown keys fail.
struct ExperimentConfig {
  // Dataset root holding train/ and eval/ (Ego4D-format or written by
  // synth-gen). When empty, `grammar` is generated in memory.
  std::string data_path;
  GrammarConfig grammar;
  int N = 6;
  int Z = 20;
  int K = 5;
  // Cap on evaluation windows (first ones in dataset order); 0 = all.
  int eval_windows = 500;
  H3MConfig h3m;
  ICVAEConfig icvae;
  std::uint64_t seed = 0;
  std::string out_dir;
  // Feed ground-truth observed labels and intention to the generator.
  bool oracle_obs = false;
  // Pre-trained checkpoints; trained from scratch when empty.
  std::string h3m_checkpoint;
  std::string icvae_checkpoint;

  // Propagates N/Z into the model sections.
  void sync();
  void validate() const;
  nlohmann::json to_json() const;
  static ExperimentConfig from_json(const nlohmann::json& j);
  static ExperimentConfig from_file(const std::filesystem::path& path);
  std::string hash() const;
};

struct PreparedData {
  Vocabulary vocab;
  Dataset train;
  Dataset eval;
  // Built from the training split.
  ContextBags bags;
};

PreparedData prepare_data(const ExperimentConfig& config);

// Non-overlapping evaluation windows (stride N + Z), capped by eval_windows.
std::vector<AnticipationExample> eval_windows(const ExperimentConfig& config,
                                              const Dataset& eval);

struct PredictionRecord {
  std::string example_id;
  int intention = 0;
  std::vector<ActionSequence> candidates;
  std::optional<H3MPrediction> h3m;

  nlohmann::json to_json() const;
  static PredictionRecord from_json(const nlohmann::json& j);
};

H3M train_h3m_model(const ExperimentConfig& config, const PreparedData& data,
                    TrainingLog* log = nullptr);
ICVAE train_icvae_model(const ExperimentConfig& config, const PreparedData& data,
                        TrainingLog* log = nullptr);

// Generation for every example. With h3m == nullptr (or oracle_obs) the
// ground-truth observed labels and intention are used.
std::vector<PredictionRecord> predict(const ExperimentConfig& config, const H3M* h3m,
                                      const ICVAE& icvae, const Dataset& eval,
                                      const std::vector<AnticipationExample>& examples);

// Scores predictions against the ground truth addressed by their example ids.
// The accuracy table is filled when every record carries H3M output.
MetricsReport evaluate_predictions(const std::vector<PredictionRecord>& predictions,
                                   const Dataset& truth, const ContextBags& bags);

void write_predictions(const std::vector<PredictionRecord>& predictions,
                       const std::filesystem::path& path);
std::vector<PredictionRecord> read_predictions(const std::filesystem::path& path);

struct PipelineResult {
  MetricsReport report;
  std::vector<PredictionRecord> predictions;
};

// End to end: H3M labels the observed clips, the generator anticipates Z
// actions, metrics score them. Trains any model without a checkpoint.
PipelineResult run_pipeline(const ExperimentConfig& config);
PipelineResult run_pipeline(const ExperimentConfig& config, const PreparedData& data,
                            const H3M* h3m, const ICVAE& icvae);

struct AblationRow {
  int N = 0;
  MetricsReport report;
};

// One generator per N, evaluated on ground-truth observed labels.
std::vector<AblationRow> ablate_n(const ExperimentConfig& config,
                                  const std::vector<int>& n_values);
nlohmann::json ablate_n_json(const std::vector<AblationRow>& rows);

struct IntentionAblation {
  MetricsReport conditioned;
  MetricsReport unconditioned;
  // Conditioned generator fed ground-truth observed labels and intention.
  MetricsReport conditioned_oracle;
};

// Two generators identical except no_intention, same seed, end to end.
IntentionAblation ablate_intention(const ExperimentConfig& config);
nlohmann::json ablate_intention_json(const IntentionAblation& result);

// Run bookkeeping written next to every command's outputs.
struct RunManifest {
  std::string command;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::vector<std::string> checkpoints;
  std::string report;
  double wall_clock_seconds = 0.0;

  nlohmann::json to_json() const;
};

inline constexpr const char* kVersion = "0.1.0";
inline constexpr const char* kManifestFile = "run_manifest.json";

// Creates `dir`; fails with ErrorCode::kOutputExists when it already holds
// files and `overwrite` is false.
void prepare_output_dir(const std::filesystem::path& dir, bool overwrite);

void write_json(const std::filesystem::path& path, const nlohmann::json& doc);

}  // namespace lta
