#pragma once

#include <cstdint>
#include <vector>

#include "splat/attention.hpp"
#include "splat/param_store.hpp"
#include "splat/rng.hpp"

namespace splat {

struct EncoderConfig {
  int n_layers = 2;
  int d_model = 64;
  int n_heads = 4;
  int d_ff = 256;
  // Total attention window in tokens; query i sees keys within
  // +/- window_w/2 (half-window), matching the convention under which the
  // backbone's "window size 512" means 256 on each side.
  int window_w = 512;
  int max_seq_len = 4096;
  int vocab_size = 0;
  double dropout_rate = 0.1;

  int half_window() const { return window_w / 2; }
  int d_head() const { return d_model / n_heads; }
  void validate() const;
};

// Creates token/position embeddings and per-layer attention + FFN parameters
// under "encoder.*".
void init_encoder_params(ParamStore& params, const EncoderConfig& cfg);

// Token + learned absolute position embeddings through n_layers of
// {windowed-global attention, FFN}, each sublayer with residual + LayerNorm.
// Pass dropout_rng only during training; without it the pass is
// deterministic and dropout-free.
Tensor encode(const std::vector<int>& input_ids, const GlobalMask& global_mask,
              const EncoderConfig& cfg, ParamStore& params, Rng* dropout_rng = nullptr);

}  // namespace splat
