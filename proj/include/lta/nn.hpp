#pragma once

#include <string>

#include "lta/autograd.hpp"
#include "lta/rng.hpp"

// Layer building blocks shared by the mixer classifier and the transformer
// generator. Layers hold non-owning pointers into a ParameterSet.
namespace lta::nn {

using ag::Parameter;
using ag::ParameterSet;
using ag::Tape;
using ag::Var;

// y = x W + b with W stored in x out.
struct Linear {
  Parameter* weight = nullptr;
  Parameter* bias = nullptr;

  static Linear create(ParameterSet& params, const std::string& name, int in,
                       int out, Rng& rng);
  Var operator()(Tape& tape, const Var& x) const;
};

struct LayerNorm {
  Parameter* gamma = nullptr;
  Parameter* beta = nullptr;

  static LayerNorm create(ParameterSet& params, const std::string& name, int width);
  Var operator()(Tape& tape, const Var& x) const;
};

// Linear -> GELU -> Linear.
struct FeedForward {
  Linear fc1, fc2;

  static FeedForward create(ParameterSet& params, const std::string& name,
                            int width, int hidden, Rng& rng);
  Var operator()(Tape& tape, const Var& x) const;
};

// Pre-norm mixer layer over a tokens x channels matrix:
//   Y = X + (token_mlp(LN(X)^T))^T
//   Z = Y + channel_mlp(LN(Y))
struct MixerLayer {
  LayerNorm token_norm;
  FeedForward token_mlp;
  LayerNorm channel_norm;
  FeedForward channel_mlp;
  int tokens = 0;
  int channels = 0;

  static MixerLayer create(ParameterSet& params, const std::string& name,
                           int tokens, int channels, int token_hidden,
                           int channel_hidden, Rng& rng);
  Var operator()(Tape& tape, const Var& x) const;
};

struct MultiHeadAttention {
  Linear query, key, value, output;
  int heads = 1;

  static MultiHeadAttention create(ParameterSet& params, const std::string& name,
                                   int width, int heads, Rng& rng);
  // Rows of `x` attend over rows of `memory` (no mask).
  Var operator()(Tape& tape, const Var& x, const Var& memory) const;
};

// Pre-norm transformer encoder layer.
struct EncoderLayer {
  LayerNorm attn_norm;
  MultiHeadAttention attn;
  LayerNorm ff_norm;
  FeedForward ff;

  static EncoderLayer create(ParameterSet& params, const std::string& name,
                             int width, int heads, int ff_hidden, Rng& rng);
  Var operator()(Tape& tape, const Var& x) const;
};

// Pre-norm transformer decoder layer: self-attention, cross-attention, FFN.
struct DecoderLayer {
  LayerNorm self_norm;
  MultiHeadAttention self_attn;
  LayerNorm cross_norm;
  MultiHeadAttention cross_attn;
  LayerNorm ff_norm;
  FeedForward ff;

  static DecoderLayer create(ParameterSet& params, const std::string& name,
                             int width, int heads, int ff_hidden, Rng& rng);
  Var operator()(Tape& tape, const Var& x, const Var& memory) const;
};

}  // namespace lta::nn
