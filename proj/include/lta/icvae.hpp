#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "lta/autograd.hpp"
#include "lta/datagen.hpp"
#include "lta/h3m.hpp"
#include "lta/nn.hpp"

namespace lta {

struct ICVAEConfig {
  int d = 32;  // per-component embedding width; the transformer runs at 2d
  int N = 6;
  int Z = 20;
  int encoder_layers = 2;
  int decoder_layers = 2;
  int heads = 4;
  int ff_hidden = 0;  // 0 -> 4 * 2d
  double lambda_rec = 1.0;
  double lambda_ce = 1.0;
  double lambda_kl = 1e-4;
  double beta = 0.99;
  double focal_gamma = 0.0;
  // Every intention lookup uses row 0, removing the conditioning signal.
  bool no_intention = false;
  int epochs = 12;
  double learning_rate = 1e-3;
  int batch_size = 64;

  // d = 128, four encoder and four decoder layers.
  static ICVAEConfig full_profile();

  int width() const { return 2 * d; }
  int resolved_ff_hidden() const { return ff_hidden > 0 ? ff_hidden : 4 * width(); }

  void validate() const;
  nlohmann::json to_json() const;
  static ICVAEConfig from_json(const nlohmann::json& j);
};

struct LatentDistribution {
  ag::Var mean;     // 1 x 2d
  ag::Var log_var;  // 1 x 2d, clamped to [-10, 10]
};

struct ActionLogits {
  ag::Var verbs;  // rows x |verbs|
  ag::Var nouns;  // rows x |nouns|
};

struct LossWeights {
  double rec = 1.0;
  double ce = 1.0;
  double kl = 1e-4;
};

struct ICVAELoss {
  ag::Var total;
  double reconstruction = 0.0;
  double cross_entropy = 0.0;
  double kl = 0.0;
};

inline constexpr double kLogVarMin = -10.0;
inline constexpr double kLogVarMax = 10.0;

// Sinusoidal encoding: (p, 2i) = sin(p / 10000^(2i/W)), (p, 2i+1) = cos(...).
ag::Matrix positional_encoding(int length, int width);

// z = mean + exp(log_var / 2) * noise
ag::Var reparameterize(const LatentDistribution& dist, const ag::Var& noise);

ICVAELoss icvae_loss(const ag::Var& predicted_embeddings,
                     const ag::Var& target_embeddings, const ActionLogits& logits,
                     const ActionSequence& targets, const LatentDistribution& dist,
                     const ClassWeights& weights, const LossWeights& lambdas,
                     double focal_gamma = 0.0);

// Transformer CVAE over (verb, noun) sequences conditioned on an intention.
class ICVAE {
 public:
  ICVAE(const ICVAEConfig& config, VocabSizes sizes, std::uint64_t seed);

  const ICVAEConfig& config() const { return config_; }
  VocabSizes sizes() const { return sizes_; }
  ag::ParameterSet& params() { return params_; }
  const ag::ParameterSet& params() const { return params_; }

  // Row of the intention tables used for `intention` (0 when no_intention).
  int intention_row(int intention) const;

  // L x 2d rows: concat(verb_table[v_t], noun_table[n_t]).
  ag::Var embed_actions(ag::Tape& tape, const ActionSequence& actions) const;

  LatentDistribution encode(ag::Tape& tape, const ag::Var& observed,
                            const ag::Var& future, int intention) const;

  // Decoder memory token z + bias(intention).
  ag::Var memory_token(ag::Tape& tape, const ag::Var& z, int intention) const;

  // Non-autoregressive decode of Z future rows.
  ag::Var decode(ag::Tape& tape, const ag::Var& z, const ag::Var& observed,
                 int intention, int Z) const;

  ActionLogits action_head(ag::Tape& tape, const ag::Var& rows) const;

  // Full training-mode pass on one example with a given noise draw.
  ICVAELoss example_loss(ag::Tape& tape, const ActionSequence& observed,
                         const ActionSequence& future, int intention,
                         const ag::Matrix& noise, const ClassWeights& weights) const;

  // K candidates of length Z from prior samples z ~ N(0, I) seeded by `seed`.
  std::vector<ActionSequence> generate(const ActionSequence& observed, int intention,
                                       int Z, int K, std::uint64_t seed) const;

  nlohmann::json header(std::uint64_t seed) const;
  void save(const std::filesystem::path& path, std::uint64_t seed) const;
  static ICVAE load(const std::filesystem::path& path);

  // Named handles used by tests and tools.
  ag::Parameter& verb_table() { return *verb_table_; }
  ag::Parameter& noun_table() { return *noun_table_; }
  ag::Parameter& mu_tokens() { return *mu_tokens_; }
  ag::Parameter& sigma_tokens() { return *sigma_tokens_; }
  ag::Parameter& latent_bias() { return *latent_bias_; }
  const std::vector<nn::EncoderLayer>& encoder() const { return encoder_; }
  const std::vector<nn::DecoderLayer>& decoder() const { return decoder_; }

 private:
  ICVAEConfig config_;
  VocabSizes sizes_;
  ag::ParameterSet params_;
  ag::Parameter* verb_table_ = nullptr;
  ag::Parameter* noun_table_ = nullptr;
  ag::Parameter* mu_tokens_ = nullptr;
  ag::Parameter* sigma_tokens_ = nullptr;
  ag::Parameter* latent_bias_ = nullptr;
  std::vector<nn::EncoderLayer> encoder_;
  std::vector<nn::DecoderLayer> decoder_;
  nn::Linear verb_head_, noun_head_;
};

// Class-balanced weights from the future labels of the training windows.
ClassWeights future_class_weights(const std::vector<AnticipationExample>& examples,
                                  VocabSizes sizes, double beta);

TrainingLog icvae_train(ICVAE& model, const std::vector<AnticipationExample>& examples,
                        std::uint64_t seed, int max_steps = -1);

}  // namespace lta
