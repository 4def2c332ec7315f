#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lta/autograd.hpp"
#include "lta/datagen.hpp"
#include "lta/nn.hpp"
#include "lta/taxonomy.hpp"

namespace lta {

struct VocabSizes {
  int verbs = 0;
  int nouns = 0;
  int intentions = 0;

  static VocabSizes of(const Vocabulary& vocab);
  friend bool operator==(const VocabSizes&, const VocabSizes&) = default;
};

enum class Schedule { kJoint, kTwoPhase };

struct H3MConfig {
  int T = 14;
  int D = 64;
  int N = 6;
  int depth = 2;
  int token_hidden = 0;    // 0 -> 2T
  int channel_hidden = 0;  // 0 -> D/4
  int intention_depth = 2;
  int intention_token_hidden = 0;    // 0 -> 2N
  int intention_channel_hidden = 0;  // 0 -> D/4
  // Average only over valid rows instead of all T (padding included).
  bool masked_pool = false;

  double beta = 0.99;
  double focal_gamma = 0.0;
  double noise_std = 0.05;
  double lambda_intention = 1.0;
  double lambda_action = 1.0;
  Schedule schedule = Schedule::kTwoPhase;
  int phase1_epochs = 6;
  int phase2_epochs = 3;
  double learning_rate = 1e-3;
  int batch_size = 64;

  int resolved_token_hidden() const { return token_hidden > 0 ? token_hidden : 2 * T; }
  int resolved_channel_hidden() const {
    return channel_hidden > 0 ? channel_hidden : std::max(1, D / 4);
  }
  int resolved_intention_token_hidden() const {
    return intention_token_hidden > 0 ? intention_token_hidden : 2 * N;
  }
  int resolved_intention_channel_hidden() const {
    return intention_channel_hidden > 0 ? intention_channel_hidden : std::max(1, D / 4);
  }

  void validate() const;
  nlohmann::json to_json() const;
  // Unknown keys are rejected.
  static H3MConfig from_json(const nlohmann::json& j);
};

// (1 - beta) / (1 - beta^n) per class, 0 for absent classes; no rescaling.
std::vector<double> class_balanced_raw(std::span<const long> counts, double beta);

// Raw class-balanced weights rescaled to mean 1 over present classes.
std::vector<double> class_balanced_weights(std::span<const long> counts, double beta);

struct ClassWeights {
  std::vector<double> verbs, nouns, intentions;
  double beta = 0.0;
};

struct H3MLogits {
  ag::Var verbs;       // N x |verbs|
  ag::Var nouns;       // N x |nouns|
  ag::Var intention;   // 1 x |intentions|
  ag::Var clip_repr;   // N x C
};

struct H3MPrediction {
  ActionSequence actions;
  int intention = 0;
  // Class ids by descending score (ties: lower id first), at most five.
  std::vector<std::vector<int>> verb_top5, noun_top5;
  std::vector<int> intention_top5;
};

struct TrainingLog {
  std::vector<double> losses;  // one per optimizer step
  std::vector<int> phases;     // phase of each step (1 or 2)
};

// Hierarchical multitask mixer: a per-clip action mixer with verb/noun heads,
// and an intention mixer over the N clip representations.
class H3M {
 public:
  H3M(const H3MConfig& config, VocabSizes sizes, std::uint64_t seed);

  const H3MConfig& config() const { return config_; }
  VocabSizes sizes() const { return sizes_; }
  ag::ParameterSet& params() { return params_; }
  const ag::ParameterSet& params() const { return params_; }

  const std::vector<nn::MixerLayer>& action_mixer() const { return action_mixer_; }
  const std::vector<nn::MixerLayer>& intention_mixer() const { return intention_mixer_; }

  // T x D clip -> 1 x D representation (global average pool over T).
  ag::Var action_mixer_forward(ag::Tape& tape, const ag::Matrix& clip,
                               int valid_rows) const;

  // `clips` must hold exactly N matrices of shape T x D.
  H3MLogits forward(ag::Tape& tape, std::span<const ag::Matrix> clips,
                    std::span<const int> valid_rows) const;

  H3MPrediction infer(std::span<const ag::Matrix> clips,
                      std::span<const int> valid_rows) const;

  // Parameters belonging to the intention branch (frozen in phase 2).
  std::vector<bool> intention_branch_mask() const;

  nlohmann::json header(std::uint64_t seed) const;
  void save(const std::filesystem::path& path, std::uint64_t seed) const;
  static H3M load(const std::filesystem::path& path);

 private:
  H3MConfig config_;
  VocabSizes sizes_;
  ag::ParameterSet params_;
  std::vector<nn::MixerLayer> action_mixer_;
  nn::Linear verb_head_, noun_head_;
  std::vector<nn::MixerLayer> intention_mixer_;
  nn::Linear intention_head_;
  std::size_t intention_first_param_ = 0;
};

// Observed clips of an example as working-precision matrices.
std::vector<ag::Matrix> observed_matrices(const Dataset& dataset,
                                          const AnticipationExample& example);
std::vector<int> observed_valid_rows(const Dataset& dataset,
                                     const AnticipationExample& example);

ClassWeights class_weights_for(const std::vector<AnticipationExample>& examples,
                               VocabSizes sizes, double beta);

// Multitask loss of one example; `noise` (may be null) perturbs the inputs.
ag::Var h3m_example_loss(const H3M& model, ag::Tape& tape, const Dataset& dataset,
                         const AnticipationExample& example,
                         const ClassWeights& weights, double lambda_intention,
                         double lambda_action, Rng* noise);

TrainingLog h3m_train(H3M& model, const Dataset& dataset,
                      const std::vector<AnticipationExample>& examples,
                      std::uint64_t seed);

// Index of the largest entry; ties resolve to the lowest index.
int argmax_row(const ag::Matrix& m, Eigen::Index row);
std::vector<int> top_k_row(const ag::Matrix& m, Eigen::Index row, int k);

}  // namespace lta
