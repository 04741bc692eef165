// Copyright 2026 The tsinpaint Authors
// SPDX-License-Identifier: Apache-2.0

// Joint single-stage training of both streams against the patch discriminator.
//
// Randomness is counter-based: the batch order of epoch e comes from
// derive_seed(seed, kBatchStream, e), and the mask and flip of batch slot s at
// step t from derive_seed(seed, t, s). The RNG state of a run is therefore
// (seed, step), and resuming from a checkpoint replays the exact stream.
//
// Config files hold one `key = value` pair per line; `#` starts a comment.
// Keys (defaults in TrainConfig):
//   levels base_channels max_channels height width bottleneck_blocks
//   disc_base_channels ms_only no_gu no_afblk
//   learning_rate beta1 beta2 epsilon grad_clip (0 = off)
//   batch_size max_steps seed checkpoint_every (0 = final only)
//   mask_min_ratio mask_max_ratio flip
//   weight_pyramid weight_perceptual weight_style weight_adversarial
//   extractor (random | identity | path to a VGG16 container)
//   dataset masks output

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "tsinpaint/data.hpp"
#include "tsinpaint/losses.hpp"
#include "tsinpaint/network.hpp"

namespace tsi {

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct TrainConfig {
  NetworkConfig network;
  AdamConfig adam;
  LossWeights weights;
  int batch_size = 4;
  long max_steps = 1000;
  std::uint64_t seed = 0;
  long checkpoint_every = 0;
  double grad_clip = 0.0;
  MaskBin mask_bin{0.1, 0.5};
  bool flip = true;
  double divergence_limit = 1e6;  // bound on |loss term| and |parameter|
  std::string extractor = "random";
  std::string dataset;
  std::string masks;
  std::string output = "run";

  /// ConfigError on any unusable field.
  void validate() const;

  /// Sets one field from its textual form; ConfigError for unknown keys or bad values.
  void set(const std::string& key, const std::string& value);
  /// Every key with its current value, in schema order.
  [[nodiscard]] std::vector<std::pair<std::string, std::string>> entries() const;
  /// entries() rendered as a config file.
  [[nodiscard]] std::string to_text() const;

  static TrainConfig parse(const std::string& text);
  static TrainConfig load(const std::filesystem::path& path);
};

/// Frozen perceptual extractor described by `TrainConfig::extractor`.
FeatureExtractor make_extractor(const std::string& spec);

/// Adam moments of one parameter store, aligned with its trainable entries.
struct AdamMoments {
  std::vector<Tensor> m;
  std::vector<Tensor> v;

  static AdamMoments zeros_like(const ParamStore& store);
};

/// One bias-corrected Adam update with step number `t` (1-based). Returns the
/// global gradient norm before clipping; `clip` > 0 rescales to that norm.
double adam_update(ParamStore& store, AdamMoments& moments, const AdamConfig& config, long t, double clip = 0.0);

struct TrainState {
  TrainConfig config;
  long step = 0;
  InpaintingNetwork generator;
  Discriminator discriminator;
  FeatureExtractor extractor;
  AdamMoments g_moments;
  AdamMoments d_moments;
  std::optional<double> best_total_g;
  long best_step = 0;

  /// Fresh state: generator and discriminator seeded from config.seed.
  static TrainState initialize(const TrainConfig& config);
};

/// One discriminator update followed by one generator update on `batch`.
/// TrainingError names the first non-finite or diverging loss term or updated
/// parameter; the state is unusable afterwards.
LossReport train_step(TrainState& state, const ImageSample& batch);

/// The batch for step `step` (0-based): epoch-shuffled images, per-slot
/// masks from `masks` (or generated in config.mask_bin) and optional flips.
ImageSample make_batch(const TrainConfig& config, const ImageDataset& dataset, const std::vector<Tensor>& masks,
                       long step);

void save_checkpoint(const TrainState& state, const std::filesystem::path& path);
/// IoError on unreadable, corrupt or incompatible files; the returned state is complete or nothing.
TrainState load_checkpoint(const std::filesystem::path& path);

struct LoopOptions {
  /// Receives one JSON object per line and step.
  std::ostream* log = nullptr;
  /// Directory for `step_<n>.ckpt` and `latest.ckpt`; none when empty.
  std::filesystem::path checkpoint_dir;
  std::function<void(const TrainState&, const LossReport&)> on_step;
};

/// JSON record of one step: step, each loss term and wall time in seconds.
std::string log_record(long step, const LossReport& report, double wall_seconds);

/// Trains `state` until state.step == state.config.max_steps.
void train_loop(TrainState& state, const ImageDataset& dataset, const std::vector<Tensor>& masks,
                const LoopOptions& options = {});

}  // namespace tsi
