// Copyright 2026 The tsinpaint Authors
// SPDX-License-Identifier: Apache-2.0

// Two-stream inpainting generator and the spectral-normalized patch discriminator.
//
// Level indexing: level 1 is the shallowest encoder layer (H/2) and, on the
// decoder side, the full-resolution output. Every per-level vector below is
// indexed by `level - 1`.
//
// Wiring, for levels l = 1..L:
//   X^l  = enc_ms_l(X^{l-1})                      X^0 = [I_in; M]
//   O^l  = GU_l(X^l)
//   S^1  = enc_ss_1([I_in; M]),  S^l = enc_ss_l([S^{l-1}; O^{l-1}])
//   B    = bottleneck(X^L)
//   S'^L = dec_ss_L([up([S^L; O^L]); S^{L-1}]), S'^l = dec_ss_l([up(S'^{l+1}); S^{l-1}])
//   X'^l = AF_l(dec_ms_l([up(X'^{l+1} or B); X^{l-1}]), S'^l)
// with S^0 = X^0 = [I_in; M] as the level-1 skip. RGB heads are 1x1 convs;
// the level-1 heads end in tanh.

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tsinpaint/blocks.hpp"

namespace tsi {

/// Architecture switches mirroring the component ablations.
struct ModelVariant {
  bool ms_only = false;   // main stream alone: no SS, GU or AFBlk
  bool no_gu = false;     // MS features enter SS ungated
  bool no_afblk = false;  // concatenation + 1x1 projection instead of attention fusion

  bool operator==(const ModelVariant&) const = default;
};

struct NetworkConfig {
  int levels = 4;
  int base_channels = 64;
  int max_channels = 512;
  int height = 64;
  int width = 64;
  int bottleneck_blocks = 4;
  int disc_base_channels = 64;
  ModelVariant variant;

  /// Throws ConfigError for an unusable configuration.
  void validate() const;

  /// Channels of X^l and S^l: base * 2^(l-1), capped at max_channels.
  [[nodiscard]] int encoder_channels(int level) const;
  /// Channels of X'^l and S'^l: those of encoder level max(l-1, 1).
  [[nodiscard]] int decoder_channels(int level) const;

  bool operator==(const NetworkConfig&) const = default;
};

struct ForwardOptions {
  /// Test hook: replace every gate map by this constant.
  std::optional<double> gate_override;
};

struct SsEncoding {
  std::vector<Var> features;  // S^1..S^L
  std::vector<Var> gated;     // O^1..O^L
  std::vector<Var> gates;     // G^1..G^L, empty when the GU is ablated
};

struct DecoderOutput {
  std::vector<Var> features;  // X'^l or S'^l, index l - 1
  std::vector<Var> pyramid;   // RGB head outputs, index l - 1
};

struct ForwardResult {
  std::vector<Var> detailed_pyramid;   // h(X'^l), index l - 1, level 1 at full resolution
  std::vector<Var> structure_pyramid;  // h(S'^l), empty in ms_only mode
  Var final_image;                     // == detailed_pyramid[0]
  Var composited;                      // known pixels from the input, holes from final_image
  std::vector<Var> gate_maps;
  std::vector<Var> ms_encoder_features;
  std::vector<Var> ss_encoder_features;
  std::vector<Var> ms_decoder_features;
  std::vector<Var> ss_decoder_features;

  [[nodiscard]] const Var& structure_image() const { return structure_pyramid.front(); }
};

/// Generator: main stream, structure stream, gated units, fusion blocks and RGB heads.
class InpaintingNetwork {
 public:
  InpaintingNetwork(const NetworkConfig& config, std::uint64_t seed);

  [[nodiscard]] const NetworkConfig& config() const { return config_; }
  [[nodiscard]] ParamStore& params() { return store_; }
  [[nodiscard]] const ParamStore& params() const { return store_; }

  /// [image * (1 - mask); mask], the 4-channel input of both streams.
  [[nodiscard]] static Var network_input(const Var& image, const Var& mask);

  [[nodiscard]] std::vector<Var> ms_encode(const Var& image, const Var& mask) const;
  [[nodiscard]] SsEncoding ss_encode(const Var& image, const Var& mask, const std::vector<Var>& ms_features,
                                     const ForwardOptions& options = {}) const;
  [[nodiscard]] Var ms_bottleneck(const Var& deepest) const;
  [[nodiscard]] DecoderOutput ss_decode(const SsEncoding& encoding, const Var& image, const Var& mask) const;
  /// `ss_features` may be null only in ms_only mode.
  [[nodiscard]] DecoderOutput ms_decode(const Var& bottleneck_out, const std::vector<Var>& ms_features,
                                        const Var& image, const Var& mask,
                                        const std::vector<Var>* ss_features) const;

  [[nodiscard]] ForwardResult forward(const Var& image, const Var& mask, const ForwardOptions& options = {}) const;
  [[nodiscard]] ForwardResult forward(const Tensor& image, const Tensor& mask,
                                      const ForwardOptions& options = {}) const;
  /// Composited output without gradient tracking.
  [[nodiscard]] Tensor inpaint(const Tensor& image, const Tensor& mask) const;

  [[nodiscard]] const std::vector<GatedUnitParams>& gated_units() const { return gu_; }
  /// Empty in ms_only and no_afblk mode.
  [[nodiscard]] const std::vector<AdaptiveFusionParams>& fusion_blocks() const { return af_; }
  [[nodiscard]] const std::vector<ResidualBlockParams>& bottleneck_blocks() const { return bottleneck_; }

 private:
  void check_input(const Var& image, const Var& mask) const;

  NetworkConfig config_;
  ParamStore store_;
  std::vector<ConvParams> ms_enc_, ms_dec_, ms_head_;
  std::vector<ConvParams> ss_enc_, ss_dec_, ss_head_;
  std::vector<ResidualBlockParams> bottleneck_;
  std::vector<GatedUnitParams> gu_;
  std::vector<AdaptiveFusionParams> af_;
  std::vector<ConvParams> fuse_;  // no_afblk projections
};

/// Patch discriminator: six spectrally normalized 5x5 stride-2 convolutions,
/// LeakyReLU between them, raw scores out.
class Discriminator {
 public:
  static constexpr int kLayers = 6;

  Discriminator(const NetworkConfig& config, std::uint64_t seed);

  [[nodiscard]] ParamStore& params() { return store_; }
  [[nodiscard]] const ParamStore& params() const { return store_; }

  /// Scores for [image; mask]. Does not touch the power-iteration state.
  [[nodiscard]] Var forward(const Var& image, const Var& mask) const;
  /// Runs `iterations` power-iteration steps on every layer, then scores.
  Var forward_training(const Var& image, const Var& mask, int iterations = 1);

  void power_iterate(int iterations);
  /// Current sigma estimate u^T W v of layer `index`.
  [[nodiscard]] double sigma_estimate(int index) const;
  /// Effective (spectrally normalized) kernel of layer `index`.
  [[nodiscard]] Tensor normalized_kernel(int index) const;

 private:
  struct Layer {
    ConvParams conv;
    Var u;  // (1, 1, 1, C_out), buffer
    Var v;  // (1, 1, 1, C_in * k * k), buffer
  };

  ParamStore store_;
  std::vector<Layer> layers_;
};

}  // namespace tsi
