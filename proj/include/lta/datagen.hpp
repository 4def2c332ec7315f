#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lta/rng.hpp"
#include "lta/taxonomy.hpp"

namespace lta {

// One annotated clip of a video. Names are kept alongside the resolved ids
// so that a vocabulary can be built from raw records.
struct ClipRecord {
  std::string video_id;
  int clip_index = 0;
  std::string verb_name, noun_name, intention_name;
  ActionLabel label;
  int intention_id = 0;
  std::string feature_file;
};

using FeatureMatrix =
    Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// T x D per-second features; rows at index >= valid_rows are zero.
struct ClipFeature {
  FeatureMatrix matrix;
  int valid_rows = 0;

  int rows() const { return static_cast<int>(matrix.rows()); }
  int cols() const { return static_cast<int>(matrix.cols()); }
};

struct FeatureManifest {
  int T = 0;
  int D = 0;
  std::map<std::string, int> valid_rows;
};

// Records sorted by (video_id, clip_index) with features in the same order.
struct Dataset {
  Vocabulary vocab;
  std::vector<ClipRecord> records;
  std::vector<ClipFeature> features;
  int T = 0;
  int D = 0;
};

// An observation/future window. Observed clips are indices into the owning
// Dataset's records/features.
struct AnticipationExample {
  std::string video_id;
  int start = 0;
  std::vector<std::size_t> observed_clips;
  ActionSequence observed_actions;
  int intention = 0;
  ActionSequence future_actions;

  // "<video_id>#<index of first future clip>"
  std::string id() const;
};

// Parses the annotation JSON. With vocab == nullptr the vocabulary is built
// from the file itself. Output is sorted by (video_id, clip_index).
std::vector<ClipRecord> load_annotations(const std::filesystem::path& path,
                                         const Vocabulary* vocab,
                                         Vocabulary* built = nullptr);

FeatureManifest load_manifest(const std::filesystem::path& path);

ClipFeature load_feature(const std::filesystem::path& file, int T, int D,
                         int valid_rows);

void save_feature(const std::filesystem::path& file, const ClipFeature& feature);

// Loads <dir>/annotations.json, <dir>/manifest.json and the feature files
// under <dir>/features/. The vocabulary is taken from `vocab` when given,
// else from <dir>/vocab.json or <dir>/../vocab.json, else built.
Dataset load_dataset(const std::filesystem::path& dir,
                     const Vocabulary* vocab = nullptr);

void write_dataset(const Dataset& dataset, const std::filesystem::path& dir);

// Sliding windows: for each start i (step `stride`) with i + N + Z <= len.
std::vector<AnticipationExample> make_windows(const Dataset& dataset, int N,
                                              int Z, int stride = 1);

ContextBags build_context_bags(const std::vector<AnticipationExample>& examples,
                               const Vocabulary& vocab);

// Dense matrix view of a clip feature in working precision.
Eigen::MatrixXd to_double(const ClipFeature& feature);

// --- synthetic intention grammar -------------------------------------------

struct GrammarConfig {
  int num_intentions = 8;
  int num_verbs = 12;
  int num_nouns = 40;
  int noun_bag_size = 6;
  int motifs_per_intention = 2;
  int motif_min_length = 3;
  int motif_max_length = 6;
  // Expected number of consecutive actions sharing one noun.
  double noun_persistence = 4.0;
  int video_length_min = 30;
  int video_length_max = 50;
  int T = 14;
  int feature_dim = 64;
  double noise_sigma = 0.05;
  int train_windows = 3000;
  int eval_windows = 500;
  // N + Z used to count windows while generating.
  int window_length = 26;
  std::uint64_t seed = 0;

  // Optional explicit grammar; drawn from the seed when empty.
  std::vector<std::vector<std::vector<int>>> motifs;  // [intention][motif]
  std::vector<std::vector<int>> noun_bags;            // [intention]

  void validate() const;
  nlohmann::json to_json() const;
  static GrammarConfig from_json(const nlohmann::json& j);
};

struct Grammar {
  std::vector<std::vector<std::vector<int>>> motifs;
  std::vector<std::vector<int>> noun_bags;
};

// prototype(v, n) = (verb_part.row(v) + noun_part.row(n)) / sqrt(2); both
// parts are standard normal, so every prototype is unit-variance spherical.
struct PrototypeTable {
  Eigen::MatrixXd verb_part;
  Eigen::MatrixXd noun_part;

  Eigen::RowVectorXd prototype(const ActionLabel& action) const;
  int dim() const { return static_cast<int>(verb_part.cols()); }
};

struct SyntheticData {
  Vocabulary vocab;
  Grammar grammar;
  PrototypeTable prototypes;
  Dataset train;
  Dataset eval;
};

Grammar resolve_grammar(const GrammarConfig& config);

SyntheticData synth_generate(const GrammarConfig& config);

ClipFeature synth_features(const ActionLabel& action,
                           const PrototypeTable& prototypes, int T,
                           double noise_sigma, Rng& rng);

// Writes vocab.json, grammar.json, train/ and eval/.
void write_synthetic(const SyntheticData& data, const GrammarConfig& config,
                     const std::filesystem::path& root);

}  // namespace lta
