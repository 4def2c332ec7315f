#include "lta/h3m.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lta/checkpoint.hpp"
#include "lta/error.hpp"
#include "lta/optim.hpp"

namespace lta {

using nlohmann::json;

VocabSizes VocabSizes::of(const Vocabulary& vocab) {
  return {static_cast<int>(vocab.num_verbs()), static_cast<int>(vocab.num_nouns()),
          static_cast<int>(vocab.num_intentions())};
}

void H3MConfig::validate() const {
  auto check = [](bool ok, const std::string& what) {
    require(ok, ErrorCode::kInvalidArgument, "h3m: " + what);
  };
  check(T >= 1 && D >= 1 && N >= 1, "T, D and N must be positive");
  check(depth >= 0 && intention_depth >= 0, "depths must be >= 0");
  check(beta >= 0.0 && beta < 1.0, "beta must lie in [0, 1)");
  check(focal_gamma >= 0.0, "focal_gamma must be >= 0");
  check(noise_std >= 0.0, "noise_std must be >= 0");
  check(phase1_epochs >= 0 && phase2_epochs >= 0, "epochs must be >= 0");
  check(learning_rate > 0.0, "learning_rate must be positive");
  check(batch_size >= 1, "batch_size must be >= 1");
}

json H3MConfig::to_json() const {
  return {{"T", T},
          {"D", D},
          {"N", N},
          {"depth", depth},
          {"token_hidden", token_hidden},
          {"channel_hidden", channel_hidden},
          {"intention_depth", intention_depth},
          {"intention_token_hidden", intention_token_hidden},
          {"intention_channel_hidden", intention_channel_hidden},
          {"masked_pool", masked_pool},
          {"beta", beta},
          {"focal_gamma", focal_gamma},
          {"noise_std", noise_std},
          {"lambda_intention", lambda_intention},
          {"lambda_action", lambda_action},
          {"schedule", schedule == Schedule::kJoint ? "joint" : "two-phase"},
          {"phase1_epochs", phase1_epochs},
          {"phase2_epochs", phase2_epochs},
          {"learning_rate", learning_rate},
          {"batch_size", batch_size}};
}

H3MConfig H3MConfig::from_json(const json& j) {
  H3MConfig c;
  if (!j.is_object()) fail(ErrorCode::kMalformed, "h3m config must be an object");
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "T") c.T = value.get<int>();
      else if (key == "D") c.D = value.get<int>();
      else if (key == "N") c.N = value.get<int>();
      else if (key == "depth") c.depth = value.get<int>();
      else if (key == "token_hidden") c.token_hidden = value.get<int>();
      else if (key == "channel_hidden") c.channel_hidden = value.get<int>();
      else if (key == "intention_depth") c.intention_depth = value.get<int>();
      else if (key == "intention_token_hidden") c.intention_token_hidden = value.get<int>();
      else if (key == "intention_channel_hidden") c.intention_channel_hidden = value.get<int>();
      else if (key == "masked_pool") c.masked_pool = value.get<bool>();
      else if (key == "beta") c.beta = value.get<double>();
      else if (key == "focal_gamma") c.focal_gamma = value.get<double>();
      else if (key == "noise_std") c.noise_std = value.get<double>();
      else if (key == "lambda_intention") c.lambda_intention = value.get<double>();
      else if (key == "lambda_action") c.lambda_action = value.get<double>();
      else if (key == "schedule") {
        const auto s = value.get<std::string>();
        if (s == "joint") c.schedule = Schedule::kJoint;
        else if (s == "two-phase") c.schedule = Schedule::kTwoPhase;
        else fail(ErrorCode::kInvalidArgument, "h3m: invalid schedule '" + s + "'");
      } else if (key == "phase1_epochs") c.phase1_epochs = value.get<int>();
      else if (key == "phase2_epochs") c.phase2_epochs = value.get<int>();
      else if (key == "learning_rate") c.learning_rate = value.get<double>();
      else if (key == "batch_size") c.batch_size = value.get<int>();
      else fail(ErrorCode::kInvalidArgument, "h3m: unknown key '" + key + "'");
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::kMalformed, std::string("h3m config: ") + e.what());
  }
  c.validate();
  return c;
}

std::vector<double> class_balanced_raw(std::span<const long> counts, double beta) {
  require(beta >= 0.0 && beta < 1.0, ErrorCode::kInvalidArgument,
          "class-balanced beta must lie in [0, 1)");
  std::vector<double> w(counts.size(), 0.0);
  for (std::size_t c = 0; c < counts.size(); ++c) {
    require(counts[c] >= 0, ErrorCode::kInvalidArgument, "negative class count");
    if (counts[c] == 0) continue;
    // 1 - beta^n computed as -expm1(n log beta) to keep precision near beta=1.
    const double denom = beta == 0.0
                             ? 1.0
                             : -std::expm1(static_cast<double>(counts[c]) * std::log(beta));
    w[c] = (1.0 - beta) / denom;
  }
  return w;
}

std::vector<double> class_balanced_weights(std::span<const long> counts, double beta) {
  std::vector<double> w = class_balanced_raw(counts, beta);
  double sum = 0.0;
  int present = 0;
  for (std::size_t c = 0; c < w.size(); ++c) {
    if (counts[c] > 0) {
      sum += w[c];
      ++present;
    }
  }
  if (present > 0) {
    const double mean = sum / present;
    for (double& x : w) x /= mean;
  }
  return w;
}

H3M::H3M(const H3MConfig& config, VocabSizes sizes, std::uint64_t seed)
    : config_(config), sizes_(sizes) {
  config_.validate();
  require(sizes.verbs > 0 && sizes.nouns > 0 && sizes.intentions > 0,
          ErrorCode::kInvalidArgument, "h3m: vocabulary sizes must be positive");
  Rng rng(seed);
  const int C = config_.D;
  for (int l = 0; l < config_.depth; ++l) {
    action_mixer_.push_back(nn::MixerLayer::create(
        params_, "action_mixer." + std::to_string(l), config_.T, C,
        config_.resolved_token_hidden(), config_.resolved_channel_hidden(), rng));
  }
  verb_head_ = nn::Linear::create(params_, "action_head.verb", C, sizes.verbs, rng);
  noun_head_ = nn::Linear::create(params_, "action_head.noun", C, sizes.nouns, rng);
  intention_first_param_ = params_.size();
  for (int l = 0; l < config_.intention_depth; ++l) {
    intention_mixer_.push_back(nn::MixerLayer::create(
        params_, "intention_mixer." + std::to_string(l), config_.N, C,
        config_.resolved_intention_token_hidden(),
        config_.resolved_intention_channel_hidden(), rng));
  }
  intention_head_ =
      nn::Linear::create(params_, "intention_head", C, sizes.intentions, rng);
}

ag::Var H3M::action_mixer_forward(ag::Tape& tape, const ag::Matrix& clip,
                                  int valid_rows) const {
  require(clip.rows() == config_.T && clip.cols() == config_.D,
          ErrorCode::kShapeMismatch,
          "clip feature must be " + std::to_string(config_.T) + "x" +
              std::to_string(config_.D));
  ag::Var x = tape.constant(clip);
  for (const auto& layer : action_mixer_) x = layer(tape, x);
  if (config_.masked_pool && valid_rows > 0 && valid_rows < config_.T) {
    x = ag::slice_rows(x, 0, valid_rows);
  }
  return ag::mean_rows(x);
}

H3MLogits H3M::forward(ag::Tape& tape, std::span<const ag::Matrix> clips,
                       std::span<const int> valid_rows) const {
  require(static_cast<int>(clips.size()) == config_.N, ErrorCode::kShapeMismatch,
          "h3m expects " + std::to_string(config_.N) + " clips, got " +
              std::to_string(clips.size()));
  require(valid_rows.size() == clips.size(), ErrorCode::kShapeMismatch,
          "valid_rows count differs from clip count");
  std::vector<ag::Var> reps;
  reps.reserve(clips.size());
  for (std::size_t t = 0; t < clips.size(); ++t)
    reps.push_back(action_mixer_forward(tape, clips[t], valid_rows[t]));

  H3MLogits out;
  out.clip_repr = ag::concat_rows(reps);
  out.verbs = verb_head_(tape, out.clip_repr);
  out.nouns = noun_head_(tape, out.clip_repr);
  ag::Var x = out.clip_repr;
  for (const auto& layer : intention_mixer_) x = layer(tape, x);
  out.intention = intention_head_(tape, ag::mean_rows(x));
  return out;
}

int argmax_row(const ag::Matrix& m, Eigen::Index row) {
  int best = 0;
  for (Eigen::Index c = 1; c < m.cols(); ++c)
    if (m(row, c) > m(row, best)) best = static_cast<int>(c);
  return best;
}

std::vector<int> top_k_row(const ag::Matrix& m, Eigen::Index row, int k) {
  std::vector<int> idx(static_cast<std::size_t>(m.cols()));
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](int a, int b) { return m(row, a) > m(row, b); });
  idx.resize(std::min<std::size_t>(idx.size(), static_cast<std::size_t>(k)));
  return idx;
}

H3MPrediction H3M::infer(std::span<const ag::Matrix> clips,
                         std::span<const int> valid_rows) const {
  ag::Tape tape(false);
  const H3MLogits logits = forward(tape, clips, valid_rows);
  H3MPrediction p;
  const auto& V = logits.verbs.value();
  const auto& Nn = logits.nouns.value();
  for (Eigen::Index t = 0; t < V.rows(); ++t) {
    p.actions.push_back({argmax_row(V, t), argmax_row(Nn, t)});
    p.verb_top5.push_back(top_k_row(V, t, 5));
    p.noun_top5.push_back(top_k_row(Nn, t, 5));
  }
  p.intention = argmax_row(logits.intention.value(), 0);
  p.intention_top5 = top_k_row(logits.intention.value(), 0, 5);
  return p;
}

std::vector<bool> H3M::intention_branch_mask() const {
  std::vector<bool> mask(params_.size(), false);
  for (std::size_t i = intention_first_param_; i < params_.size(); ++i) mask[i] = true;
  return mask;
}

json H3M::header(std::uint64_t seed) const {
  const json cfg = config_.to_json();
  return {{"model", "h3m"},
          {"vocab_sizes", {sizes_.verbs, sizes_.nouns, sizes_.intentions}},
          {"T", config_.T},
          {"D", config_.D},
          {"N", config_.N},
          {"config_hash", config_hash(cfg)},
          {"seed", seed},
          {"config", cfg}};
}

void H3M::save(const std::filesystem::path& path, std::uint64_t seed) const {
  save_checkpoint(params_, header(seed), path);
}

H3M H3M::load(const std::filesystem::path& path) {
  Checkpoint ckpt = load_checkpoint(path);
  expect_model(ckpt.header, "h3m");
  try {
    const auto sizes = ckpt.header.at("vocab_sizes").get<std::vector<int>>();
    require(sizes.size() == 3, ErrorCode::kCorruptCheckpoint, "vocab_sizes must have 3 entries");
    const H3MConfig config = H3MConfig::from_json(ckpt.header.at("config"));
    require(config_hash(config.to_json()) == ckpt.header.at("config_hash").get<std::string>(),
            ErrorCode::kCorruptCheckpoint, "config_hash does not match config");
    H3M model(config, {sizes[0], sizes[1], sizes[2]}, 0);
    restore_parameters(ckpt.params, model.params_);
    return model;
  } catch (const json::exception& e) {
    fail(ErrorCode::kCorruptCheckpoint, std::string("h3m header: ") + e.what());
  }
}

std::vector<ag::Matrix> observed_matrices(const Dataset& dataset,
                                          const AnticipationExample& example) {
  std::vector<ag::Matrix> out;
  out.reserve(example.observed_clips.size());
  for (std::size_t idx : example.observed_clips)
    out.push_back(dataset.features.at(idx).matrix.cast<double>());
  return out;
}

std::vector<int> observed_valid_rows(const Dataset& dataset,
                                     const AnticipationExample& example) {
  std::vector<int> out;
  for (std::size_t idx : example.observed_clips)
    out.push_back(dataset.features.at(idx).valid_rows);
  return out;
}

ClassWeights class_weights_for(const std::vector<AnticipationExample>& examples,
                               VocabSizes sizes, double beta) {
  std::vector<long> verbs(sizes.verbs, 0), nouns(sizes.nouns, 0),
      intentions(sizes.intentions, 0);
  for (const auto& ex : examples) {
    for (const auto& a : ex.observed_actions) {
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

ag::Var h3m_example_loss(const H3M& model, ag::Tape& tape, const Dataset& dataset,
                         const AnticipationExample& example,
                         const ClassWeights& weights, double lambda_intention,
                         double lambda_action, Rng* noise) {
  std::vector<ag::Matrix> clips = observed_matrices(dataset, example);
  const std::vector<int> valid = observed_valid_rows(dataset, example);
  const double sigma = model.config().noise_std;
  if (noise != nullptr && sigma > 0.0) {
    for (std::size_t t = 0; t < clips.size(); ++t)
      for (int r = 0; r < valid[t]; ++r)
        for (Eigen::Index c = 0; c < clips[t].cols(); ++c)
          clips[t](r, c) += sigma * noise->normal();
  }
  const H3MLogits logits = model.forward(tape, clips, valid);

  std::vector<int> verb_targets, noun_targets;
  for (const auto& a : example.observed_actions) {
    verb_targets.push_back(a.verb);
    noun_targets.push_back(a.noun);
  }
  const double gamma = model.config().focal_gamma;
  ag::Var action = ag::add(
      ag::weighted_cross_entropy(logits.verbs, verb_targets, weights.verbs, gamma),
      ag::weighted_cross_entropy(logits.nouns, noun_targets, weights.nouns, gamma));
  ag::Var loss = ag::scale(action, lambda_action);
  if (lambda_intention != 0.0) {
    const int target[] = {example.intention};
    loss = ag::add(loss, ag::scale(ag::weighted_cross_entropy(logits.intention, target,
                                                              weights.intentions, gamma),
                                   lambda_intention));
  }
  return loss;
}

TrainingLog h3m_train(H3M& model, const Dataset& dataset,
                      const std::vector<AnticipationExample>& examples,
                      std::uint64_t seed) {
  require(!examples.empty(), ErrorCode::kEmptyDataset, "empty dataset");
  const H3MConfig& cfg = model.config();
  Rng order_rng(derive_seed(seed, "data"));
  Rng noise_rng(derive_seed(seed, "noise"));
  const ClassWeights weights = class_weights_for(examples, model.sizes(), cfg.beta);
  Adam adam(model.params(), {.learning_rate = cfg.learning_rate});

  struct Phase {
    int id;
    int epochs;
    double lambda_intention;
    double lambda_action;
    std::vector<bool> trainable;
  };
  std::vector<Phase> phases;
  if (cfg.schedule == Schedule::kTwoPhase) {
    phases.push_back({1, cfg.phase1_epochs, cfg.lambda_intention, cfg.lambda_action, {}});
    std::vector<bool> action_only = model.intention_branch_mask();
    action_only.flip();
    phases.push_back({2, cfg.phase2_epochs, 0.0, 1.0, action_only});
  } else {
    phases.push_back({1, cfg.phase1_epochs + cfg.phase2_epochs, cfg.lambda_intention,
                      cfg.lambda_action, {}});
  }

  TrainingLog log;
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), 0);
  for (const Phase& phase : phases) {
    for (int epoch = 0; epoch < phase.epochs; ++epoch) {
      for (std::size_t i = order.size(); i > 1; --i)
        std::swap(order[i - 1], order[order_rng.uniform_int(0, static_cast<std::int64_t>(i) - 1)]);
      for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
        const std::size_t end = std::min(order.size(), start + cfg.batch_size);
        ag::Gradients grads = ag::zero_gradients(model.params());
        double batch_loss = 0.0;
        for (std::size_t k = start; k < end; ++k) {
          ag::Tape tape;
          const ag::Var loss =
              h3m_example_loss(model, tape, dataset, examples[order[k]], weights,
                               phase.lambda_intention, phase.lambda_action, &noise_rng);
          tape.backward(loss, grads);
          batch_loss += loss.scalar();
        }
        const double inv = 1.0 / static_cast<double>(end - start);
        for (auto& g : grads) g *= inv;
        adam.step(model.params(), grads, phase.trainable);
        log.losses.push_back(batch_loss * inv);
        log.phases.push_back(phase.id);
      }
    }
  }
  return log;
}

}  // namespace lta
