#include "splat/encoder.hpp"

#include <numeric>
#include <stdexcept>

#include "splat/ops.hpp"

namespace splat {

void EncoderConfig::validate() const {
  if (n_layers < 1) throw std::runtime_error("encoder config: n_layers must be >= 1");
  if (d_model < 1 || n_heads < 1 || d_model % n_heads != 0)
    throw std::runtime_error("encoder config: d_model " + std::to_string(d_model) +
                             " must be divisible by n_heads " + std::to_string(n_heads));
  if (window_w < 1) throw std::runtime_error("encoder config: window_w must be >= 1");
  if (max_seq_len < window_w)
    throw std::runtime_error("encoder config: max_seq_len " + std::to_string(max_seq_len) +
                             " < window_w " + std::to_string(window_w));
  if (vocab_size < 1) throw std::runtime_error("encoder config: vocab_size not set");
  if (dropout_rate < 0.0 || dropout_rate >= 1.0)
    throw std::runtime_error("encoder config: dropout_rate must be in [0,1)");
}

namespace {

std::string layer_path(int l, const char* name) {
  return "encoder.layer" + std::to_string(l) + "." + name;
}

}  // namespace

void init_encoder_params(ParamStore& p, const EncoderConfig& cfg) {
  cfg.validate();
  const int d = cfg.d_model;
  p.create("encoder.embed.tok", {cfg.vocab_size, d}, Init::TruncNormal);
  p.create("encoder.embed.pos", {cfg.max_seq_len, d}, Init::TruncNormal);
  for (int l = 0; l < cfg.n_layers; ++l) {
    for (const char* w : {"attn.wq", "attn.wk", "attn.wv", "attn.wo"})
      p.create(layer_path(l, w), {d, d}, Init::TruncNormal);
    for (const char* b : {"attn.bq", "attn.bk", "attn.bv", "attn.bo"})
      p.create(layer_path(l, b), {d}, Init::Zeros);
    p.create(layer_path(l, "attn_ln.gain"), {d}, Init::Ones);
    p.create(layer_path(l, "attn_ln.bias"), {d}, Init::Zeros);
    p.create(layer_path(l, "ffn.w1"), {d, cfg.d_ff}, Init::TruncNormal);
    p.create(layer_path(l, "ffn.b1"), {cfg.d_ff}, Init::Zeros);
    p.create(layer_path(l, "ffn.w2"), {cfg.d_ff, d}, Init::TruncNormal);
    p.create(layer_path(l, "ffn.b2"), {d}, Init::Zeros);
    p.create(layer_path(l, "ffn_ln.gain"), {d}, Init::Ones);
    p.create(layer_path(l, "ffn_ln.bias"), {d}, Init::Zeros);
  }
}

Tensor encode(const std::vector<int>& input_ids, const GlobalMask& global_mask,
              const EncoderConfig& cfg, ParamStore& params, Rng* dropout_rng) {
  cfg.validate();
  const int n = static_cast<int>(input_ids.size());
  if (n == 0) throw std::runtime_error("encode: empty input");
  if (n > cfg.max_seq_len)
    throw std::runtime_error("encode: sequence length " + std::to_string(n) +
                             " exceeds max_seq_len " + std::to_string(cfg.max_seq_len));
  if (static_cast<int>(global_mask.size()) != n)
    throw std::runtime_error("encode: global mask length " + std::to_string(global_mask.size()) +
                             " != sequence length " + std::to_string(n));
  for (int id : input_ids)
    if (id < 0 || id >= cfg.vocab_size)
      throw std::runtime_error("encode: token id " + std::to_string(id) +
                               " outside vocabulary of size " + std::to_string(cfg.vocab_size));

  auto drop = [&](Tensor t) {
    if (dropout_rng && cfg.dropout_rate > 0.0) return dropout(t, cfg.dropout_rate, *dropout_rng);
    return t;
  };

  std::vector<int> positions(static_cast<size_t>(n));
  std::iota(positions.begin(), positions.end(), 0);
  Tensor x = add(gather_rows(params.at("encoder.embed.tok"), input_ids),
                 gather_rows(params.at("encoder.embed.pos"), positions));
  x = drop(x);

  const int half_w = cfg.half_window();
  for (int l = 0; l < cfg.n_layers; ++l) {
    auto P = [&](const char* name) -> Tensor& { return params.at(layer_path(l, name)); };
    Tensor att = windowed_global_attention(affine(x, P("attn.wq"), P("attn.bq")),
                                           affine(x, P("attn.wk"), P("attn.bk")),
                                           affine(x, P("attn.wv"), P("attn.bv")), global_mask,
                                           half_w, cfg.n_heads);
    att = drop(affine(att, P("attn.wo"), P("attn.bo")));
    x = layer_norm(add(x, att), P("attn_ln.gain"), P("attn_ln.bias"));
    Tensor ff = affine(gelu(affine(x, P("ffn.w1"), P("ffn.b1"))), P("ffn.w2"), P("ffn.b2"));
    x = layer_norm(add(x, drop(ff)), P("ffn_ln.gain"), P("ffn_ln.bias"));
  }
  return x;
}

}  // namespace splat
