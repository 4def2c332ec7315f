#include "lta/icvae.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lta/checkpoint.hpp"
#include "lta/error.hpp"
#include "lta/optim.hpp"

namespace lta {

using nlohmann::json;

ICVAEConfig ICVAEConfig::full_profile() {
  ICVAEConfig c;
  c.d = 128;
  c.encoder_layers = 4;
  c.decoder_layers = 4;
  c.heads = 4;
  return c;
}

void ICVAEConfig::validate() const {
  auto check = [](bool ok, const std::string& what) {
    require(ok, ErrorCode::kInvalidArgument, "icvae: " + what);
  };
  check(d >= 1, "d must be positive");
  check(N >= 1 && Z >= 1, "N and Z must be >= 1");
  check(encoder_layers >= 0 && decoder_layers >= 0, "layer counts must be >= 0");
  check(heads >= 1 && width() % heads == 0, "2d must be divisible by heads");
  check(lambda_rec >= 0.0 && lambda_ce >= 0.0 && lambda_kl >= 0.0,
        "loss weights must be >= 0");
  check(beta >= 0.0 && beta < 1.0, "beta must lie in [0, 1)");
  check(epochs >= 0 && batch_size >= 1 && learning_rate > 0.0, "invalid optimizer settings");
}

json ICVAEConfig::to_json() const {
  return {{"d", d},
          {"N", N},
          {"Z", Z},
          {"encoder_layers", encoder_layers},
          {"decoder_layers", decoder_layers},
          {"heads", heads},
          {"ff_hidden", ff_hidden},
          {"lambda_rec", lambda_rec},
          {"lambda_ce", lambda_ce},
          {"lambda_kl", lambda_kl},
          {"beta", beta},
          {"focal_gamma", focal_gamma},
          {"no_intention", no_intention},
          {"epochs", epochs},
          {"learning_rate", learning_rate},
          {"batch_size", batch_size}};
}

ICVAEConfig ICVAEConfig::from_json(const json& j) {
  ICVAEConfig c;
  if (!j.is_object()) fail(ErrorCode::kMalformed, "icvae config must be an object");
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "d") c.d = value.get<int>();
      else if (key == "N") c.N = value.get<int>();
      else if (key == "Z") c.Z = value.get<int>();
      else if (key == "encoder_layers") c.encoder_layers = value.get<int>();
      else if (key == "decoder_layers") c.decoder_layers = value.get<int>();
      else if (key == "heads") c.heads = value.get<int>();
      else if (key == "ff_hidden") c.ff_hidden = value.get<int>();
      else if (key == "lambda_rec") c.lambda_rec = value.get<double>();
      else if (key == "lambda_ce") c.lambda_ce = value.get<double>();
      else if (key == "lambda_kl") c.lambda_kl = value.get<double>();
      else if (key == "beta") c.beta = value.get<double>();
      else if (key == "focal_gamma") c.focal_gamma = value.get<double>();
      else if (key == "no_intention") c.no_intention = value.get<bool>();
      else if (key == "epochs") c.epochs = value.get<int>();
      else if (key == "learning_rate") c.learning_rate = value.get<double>();
      else if (key == "batch_size") c.batch_size = value.get<int>();
      else fail(ErrorCode::kInvalidArgument, "icvae: unknown key '" + key + "'");
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::kMalformed, std::string("icvae config: ") + e.what());
  }
  c.validate();
  return c;
}

ag::Matrix positional_encoding(int length, int width) {
  require(width % 2 == 0, ErrorCode::kInvalidArgument,
          "positional encoding width must be even");
  ag::Matrix pe(length, width);
  for (int p = 0; p < length; ++p) {
    for (int i = 0; i < width / 2; ++i) {
      const double angle =
          p / std::pow(10000.0, (2.0 * i) / static_cast<double>(width));
      pe(p, 2 * i) = std::sin(angle);
      pe(p, 2 * i + 1) = std::cos(angle);
    }
  }
  return pe;
}

ag::Var reparameterize(const LatentDistribution& dist, const ag::Var& noise) {
  const ag::Var std_dev = ag::exp(ag::scale(dist.log_var, 0.5));
  return ag::add(dist.mean, ag::mul(std_dev, noise));
}

ICVAELoss icvae_loss(const ag::Var& predicted_embeddings,
                     const ag::Var& target_embeddings, const ActionLogits& logits,
                     const ActionSequence& targets, const LatentDistribution& dist,
                     const ClassWeights& weights, const LossWeights& lambdas,
                     double focal_gamma) {
  std::vector<int> verbs, nouns;
  for (const auto& a : targets) {
    verbs.push_back(a.verb);
    nouns.push_back(a.noun);
  }
  const ag::Var rec = ag::mse(predicted_embeddings, target_embeddings);
  const ag::Var ce = ag::add(
      ag::weighted_cross_entropy(logits.verbs, verbs, weights.verbs, focal_gamma),
      ag::weighted_cross_entropy(logits.nouns, nouns, weights.nouns, focal_gamma));
  const ag::Var kl = ag::kl_standard_normal(dist.mean, dist.log_var);

  ICVAELoss out;
  out.reconstruction = rec.scalar();
  out.cross_entropy = ce.scalar();
  out.kl = kl.scalar();
  out.total = ag::add(ag::add(ag::scale(rec, lambdas.rec), ag::scale(ce, lambdas.ce)),
                      ag::scale(kl, lambdas.kl));
  return out;
}

ICVAE::ICVAE(const ICVAEConfig& config, VocabSizes sizes, std::uint64_t seed)
    : config_(config), sizes_(sizes) {
  config_.validate();
  require(sizes.verbs > 0 && sizes.nouns > 0 && sizes.intentions > 0,
          ErrorCode::kInvalidArgument, "icvae: vocabulary sizes must be positive");
  Rng rng(seed);
  const int d = config_.d;
  const int W = config_.width();
  auto normal_fill = [&rng](ag::Parameter& p) {
    for (Eigen::Index i = 0; i < p.value.size(); ++i) p.value.data()[i] = rng.normal();
  };

  verb_table_ = &params_.add("embed.verb", sizes.verbs, d);
  noun_table_ = &params_.add("embed.noun", sizes.nouns, d);
  normal_fill(*verb_table_);
  normal_fill(*noun_table_);
  mu_tokens_ = &params_.add("intention.mu", sizes.intentions, W);
  sigma_tokens_ = &params_.add("intention.sigma", sizes.intentions, W);
  latent_bias_ = &params_.add("intention.bias", sizes.intentions, W);
  normal_fill(*mu_tokens_);
  normal_fill(*sigma_tokens_);
  normal_fill(*latent_bias_);

  for (int l = 0; l < config_.encoder_layers; ++l) {
    encoder_.push_back(nn::EncoderLayer::create(params_, "encoder." + std::to_string(l),
                                                W, config_.heads,
                                                config_.resolved_ff_hidden(), rng));
  }
  for (int l = 0; l < config_.decoder_layers; ++l) {
    decoder_.push_back(nn::DecoderLayer::create(params_, "decoder." + std::to_string(l),
                                                W, config_.heads,
                                                config_.resolved_ff_hidden(), rng));
  }
  verb_head_ = nn::Linear::create(params_, "action_head.verb", W, sizes.verbs, rng);
  noun_head_ = nn::Linear::create(params_, "action_head.noun", W, sizes.nouns, rng);
}

int ICVAE::intention_row(int intention) const {
  require(intention >= 0 && intention < sizes_.intentions, ErrorCode::kInvalidArgument,
          "invalid intention id " + std::to_string(intention));
  return config_.no_intention ? 0 : intention;
}

ag::Var ICVAE::embed_actions(ag::Tape& tape, const ActionSequence& actions) const {
  std::vector<int> verbs, nouns;
  verbs.reserve(actions.size());
  nouns.reserve(actions.size());
  for (const auto& a : actions) {
    verbs.push_back(a.verb);
    nouns.push_back(a.noun);
  }
  const ag::Var v = ag::gather_rows(tape.param(*verb_table_), verbs);
  const ag::Var n = ag::gather_rows(tape.param(*noun_table_), nouns);
  const ag::Var parts[] = {v, n};
  return ag::concat_cols(parts);
}

LatentDistribution ICVAE::encode(ag::Tape& tape, const ag::Var& observed,
                                 const ag::Var& future, int intention) const {
  const int W = config_.width();
  require(observed.cols() == W && future.cols() == W, ErrorCode::kShapeMismatch,
          "encoder inputs must have width 2d");
  const int row[] = {intention_row(intention)};
  const ag::Var parts[] = {ag::gather_rows(tape.param(*mu_tokens_), row),
                           ag::gather_rows(tape.param(*sigma_tokens_), row), observed,
                           future};
  const ag::Var seq = ag::concat_rows(parts);
  ag::Var x = ag::add(seq, tape.constant(positional_encoding(
                               static_cast<int>(seq.rows()), W)));
  for (const auto& layer : encoder_) x = layer(tape, x);
  return {ag::slice_rows(x, 0, 1),
          ag::clamp(ag::slice_rows(x, 1, 1), kLogVarMin, kLogVarMax)};
}

ag::Var ICVAE::memory_token(ag::Tape& tape, const ag::Var& z, int intention) const {
  const int row[] = {intention_row(intention)};
  return ag::add(z, ag::gather_rows(tape.param(*latent_bias_), row));
}

ag::Var ICVAE::decode(ag::Tape& tape, const ag::Var& z, const ag::Var& observed,
                      int intention, int Z) const {
  const int W = config_.width();
  require(z.rows() == 1 && z.cols() == W, ErrorCode::kShapeMismatch,
          "latent must be 1 x 2d");
  require(observed.cols() == W, ErrorCode::kShapeMismatch, "observed rows must be 2d wide");
  require(Z >= 1, ErrorCode::kInvalidArgument, "Z must be >= 1");
  const ag::Var memory = memory_token(tape, z, intention);
  const Eigen::Index N = observed.rows();
  const ag::Var parts[] = {observed, tape.constant(ag::Matrix::Zero(Z, W))};
  ag::Var x = ag::add(ag::concat_rows(parts),
                      tape.constant(positional_encoding(static_cast<int>(N) + Z, W)));
  for (const auto& layer : decoder_) x = layer(tape, x, memory);
  return ag::slice_rows(x, N, Z);
}

ActionLogits ICVAE::action_head(ag::Tape& tape, const ag::Var& rows) const {
  return {verb_head_(tape, rows), noun_head_(tape, rows)};
}

ICVAELoss ICVAE::example_loss(ag::Tape& tape, const ActionSequence& observed,
                              const ActionSequence& future, int intention,
                              const ag::Matrix& noise, const ClassWeights& weights) const {
  const ag::Var e_obs = embed_actions(tape, observed);
  const ag::Var e_pred = embed_actions(tape, future);
  const LatentDistribution dist = encode(tape, e_obs, e_pred, intention);
  const ag::Var z = reparameterize(dist, tape.constant(noise));
  const ag::Var e_hat = decode(tape, z, e_obs, intention, static_cast<int>(future.size()));
  const ActionLogits logits = action_head(tape, e_hat);
  return icvae_loss(e_hat, e_pred, logits, future, dist, weights,
                    {config_.lambda_rec, config_.lambda_ce, config_.lambda_kl},
                    config_.focal_gamma);
}

std::vector<ActionSequence> ICVAE::generate(const ActionSequence& observed,
                                            int intention, int Z, int K,
                                            std::uint64_t seed) const {
  require(K >= 1, ErrorCode::kInvalidArgument, "K must be >= 1");
  require(Z >= 1, ErrorCode::kInvalidArgument, "Z must be >= 1");
  Rng rng(seed);
  const int W = config_.width();
  std::vector<ActionSequence> out;
  out.reserve(K);
  for (int k = 0; k < K; ++k) {
    ag::Matrix z(1, W);
    for (int c = 0; c < W; ++c) z(0, c) = rng.normal();
    ag::Tape tape(false);
    const ag::Var e_obs = embed_actions(tape, observed);
    const ag::Var e_hat = decode(tape, tape.constant(z), e_obs, intention, Z);
    const ActionLogits logits = action_head(tape, e_hat);
    ActionSequence seq;
    seq.reserve(Z);
    for (int t = 0; t < Z; ++t)
      seq.push_back({argmax_row(logits.verbs.value(), t), argmax_row(logits.nouns.value(), t)});
    out.push_back(std::move(seq));
  }
  return out;
}

json ICVAE::header(std::uint64_t seed) const {
  return {{"model", "icvae"},
          {"d", config_.d},
          {"N", config_.N},
          {"Z", config_.Z},
          {"vocab_sizes", {sizes_.verbs, sizes_.nouns, sizes_.intentions}},
          {"lambda", {{"rec", config_.lambda_rec}, {"ce", config_.lambda_ce},
                      {"kl", config_.lambda_kl}}},
          {"no_intention", config_.no_intention},
          {"seed", seed},
          {"config", config_.to_json()}};
}

void ICVAE::save(const std::filesystem::path& path, std::uint64_t seed) const {
  save_checkpoint(params_, header(seed), path);
}

ICVAE ICVAE::load(const std::filesystem::path& path) {
  Checkpoint ckpt = load_checkpoint(path);
  expect_model(ckpt.header, "icvae");
  try {
    const auto sizes = ckpt.header.at("vocab_sizes").get<std::vector<int>>();
    require(sizes.size() == 3, ErrorCode::kCorruptCheckpoint, "vocab_sizes must have 3 entries");
    const ICVAEConfig config = ICVAEConfig::from_json(ckpt.header.at("config"));
    ICVAE model(config, {sizes[0], sizes[1], sizes[2]}, 0);
    restore_parameters(ckpt.params, model.params_);
    return model;
  } catch (const json::exception& e) {
    fail(ErrorCode::kCorruptCheckpoint, std::string("icvae header: ") + e.what());
  }
}

ClassWeights future_class_weights(const std::vector<AnticipationExample>& examples,
                                  VocabSizes sizes, double beta) {
  std::vector<long> verbs(sizes.verbs, 0), nouns(sizes.nouns, 0),
      intentions(sizes.intentions, 0);
  for (const auto& ex : examples) {
    for (const auto& a : ex.future_actions) {
      ++verbs.at(a.verb);
      ++nouns.at(a.noun);
    }
    ++intentions.at(ex.intention);
  }
  ClassWeights w;
  w.beta = beta;
  w.verbs = class_balanced_weights(verbs, beta);
  w.nouns = class_balanced_weights(nouns, beta);
  w.intentions = class_balanced_weights(intentions, beta);
  return w;
}

TrainingLog icvae_train(ICVAE& model, const std::vector<AnticipationExample>& examples,
                        std::uint64_t seed, int max_steps) {
  require(!examples.empty(), ErrorCode::kEmptyDataset, "empty dataset");
  const ICVAEConfig& cfg = model.config();
  Rng order_rng(derive_seed(seed, "data"));
  Rng noise_rng(derive_seed(seed, "noise"));
  const ClassWeights weights = future_class_weights(examples, model.sizes(), cfg.beta);
  Adam adam(model.params(), {.learning_rate = cfg.learning_rate});
  const int W = cfg.width();

  TrainingLog log;
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[order_rng.uniform_int(0, static_cast<std::int64_t>(i) - 1)]);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      if (max_steps >= 0 && static_cast<int>(log.losses.size()) >= max_steps) return log;
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      ag::Gradients grads = ag::zero_gradients(model.params());
      double batch_loss = 0.0;
      for (std::size_t k = start; k < end; ++k) {
        const auto& ex = examples[order[k]];
        ag::Matrix noise(1, W);
        for (int c = 0; c < W; ++c) noise(0, c) = noise_rng.normal();
        ag::Tape tape;
        const ICVAELoss loss = model.example_loss(tape, ex.observed_actions,
                                                  ex.future_actions, ex.intention,
                                                  noise, weights);
        tape.backward(loss.total, grads);
        batch_loss += loss.total.scalar();
      }
      const double inv = 1.0 / static_cast<double>(end - start);
      for (auto& g : grads) g *= inv;
      adam.step(model.params(), grads);
      log.losses.push_back(batch_loss * inv);
      log.phases.push_back(1);
    }
  }
  return log;
}

}  // namespace lta
