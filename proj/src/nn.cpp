#include "lta/nn.hpp"

#include <cmath>
#include <vector>

#include "lta/error.hpp"

namespace lta::nn {

Linear Linear::create(ParameterSet& params, const std::string& name, int in,
                      int out, Rng& rng) {
  Linear l;
  l.weight = &params.add(name + ".weight", in, out);
  l.bias = &params.add(name + ".bias", 1, out);
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  for (Eigen::Index i = 0; i < l.weight->value.size(); ++i)
    l.weight->value.data()[i] = rng.uniform(-bound, bound);
  for (Eigen::Index i = 0; i < l.bias->value.size(); ++i)
    l.bias->value.data()[i] = rng.uniform(-bound, bound);
  return l;
}

Var Linear::operator()(Tape& tape, const Var& x) const {
  return ag::add_row(ag::matmul(x, tape.param(*weight)), tape.param(*bias));
}

LayerNorm LayerNorm::create(ParameterSet& params, const std::string& name,
                            int width) {
  LayerNorm n;
  n.gamma = &params.add(name + ".gamma", 1, width);
  n.beta = &params.add(name + ".beta", 1, width);
  n.gamma->value.setOnes();
  return n;
}

Var LayerNorm::operator()(Tape& tape, const Var& x) const {
  return ag::layer_norm(x, tape.param(*gamma), tape.param(*beta));
}

FeedForward FeedForward::create(ParameterSet& params, const std::string& name,
                                int width, int hidden, Rng& rng) {
  return {Linear::create(params, name + ".fc1", width, hidden, rng),
          Linear::create(params, name + ".fc2", hidden, width, rng)};
}

Var FeedForward::operator()(Tape& tape, const Var& x) const {
  return fc2(tape, ag::gelu(fc1(tape, x)));
}

MixerLayer MixerLayer::create(ParameterSet& params, const std::string& name,
                              int tokens, int channels, int token_hidden,
                              int channel_hidden, Rng& rng) {
  MixerLayer m;
  m.tokens = tokens;
  m.channels = channels;
  m.token_norm = LayerNorm::create(params, name + ".token_norm", channels);
  m.token_mlp = FeedForward::create(params, name + ".token_mlp", tokens, token_hidden, rng);
  m.channel_norm = LayerNorm::create(params, name + ".channel_norm", channels);
  m.channel_mlp =
      FeedForward::create(params, name + ".channel_mlp", channels, channel_hidden, rng);
  return m;
}

Var MixerLayer::operator()(Tape& tape, const Var& x) const {
  require(x.rows() == tokens && x.cols() == channels, ErrorCode::kShapeMismatch,
          "mixer layer expects " + std::to_string(tokens) + "x" +
              std::to_string(channels) + " input");
  const Var mixed_tokens =
      ag::transpose(token_mlp(tape, ag::transpose(token_norm(tape, x))));
  const Var y = ag::add(x, mixed_tokens);
  return ag::add(y, channel_mlp(tape, channel_norm(tape, y)));
}

MultiHeadAttention MultiHeadAttention::create(ParameterSet& params,
                                              const std::string& name, int width,
                                              int heads, Rng& rng) {
  require(heads >= 1 && width % heads == 0, ErrorCode::kInvalidArgument,
          "attention width must be divisible by the head count");
  MultiHeadAttention a;
  a.heads = heads;
  a.query = Linear::create(params, name + ".query", width, width, rng);
  a.key = Linear::create(params, name + ".key", width, width, rng);
  a.value = Linear::create(params, name + ".value", width, width, rng);
  a.output = Linear::create(params, name + ".output", width, width, rng);
  return a;
}

Var MultiHeadAttention::operator()(Tape& tape, const Var& x, const Var& memory) const {
  const Var q = query(tape, x);
  const Var k = key(tape, memory);
  const Var v = value(tape, memory);
  const Eigen::Index head_dim = q.cols() / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(head_dim));
  std::vector<Var> outs;
  outs.reserve(heads);
  for (int h = 0; h < heads; ++h) {
    const Var qh = ag::slice_cols(q, h * head_dim, head_dim);
    const Var kh = ag::slice_cols(k, h * head_dim, head_dim);
    const Var vh = ag::slice_cols(v, h * head_dim, head_dim);
    const Var weights = ag::softmax_rows(ag::scale(ag::matmul_nt(qh, kh), scale));
    outs.push_back(ag::matmul(weights, vh));
  }
  const Var joined = heads == 1 ? outs[0] : ag::concat_cols(outs);
  return output(tape, joined);
}

EncoderLayer EncoderLayer::create(ParameterSet& params, const std::string& name,
                                  int width, int heads, int ff_hidden, Rng& rng) {
  EncoderLayer l;
  l.attn_norm = LayerNorm::create(params, name + ".attn_norm", width);
  l.attn = MultiHeadAttention::create(params, name + ".attn", width, heads, rng);
  l.ff_norm = LayerNorm::create(params, name + ".ff_norm", width);
  l.ff = FeedForward::create(params, name + ".ff", width, ff_hidden, rng);
  return l;
}

Var EncoderLayer::operator()(Tape& tape, const Var& x) const {
  const Var h = attn_norm(tape, x);
  const Var y = ag::add(x, attn(tape, h, h));
  return ag::add(y, ff(tape, ff_norm(tape, y)));
}

DecoderLayer DecoderLayer::create(ParameterSet& params, const std::string& name,
                                  int width, int heads, int ff_hidden, Rng& rng) {
  DecoderLayer l;
  l.self_norm = LayerNorm::create(params, name + ".self_norm", width);
  l.self_attn = MultiHeadAttention::create(params, name + ".self_attn", width, heads, rng);
  l.cross_norm = LayerNorm::create(params, name + ".cross_norm", width);
  l.cross_attn = MultiHeadAttention::create(params, name + ".cross_attn", width, heads, rng);
  l.ff_norm = LayerNorm::create(params, name + ".ff_norm", width);
  l.ff = FeedForward::create(params, name + ".ff", width, ff_hidden, rng);
  return l;
}

Var DecoderLayer::operator()(Tape& tape, const Var& x, const Var& memory) const {
  const Var h = self_norm(tape, x);
  const Var y = ag::add(x, self_attn(tape, h, h));
  const Var c = ag::add(y, cross_attn(tape, cross_norm(tape, y), memory));
  return ag::add(c, ff(tape, ff_norm(tape, c)));
}

}  // namespace lta::nn
