// Copyright 2026 The tsinpaint Authors
// SPDX-License-Identifier: Apache-2.0

// tsinpaint command-line tool.
//
// Exit codes: 0 success, 1 unexpected internal failure, 2 bad configuration
// or input (unknown key, size mismatch, empty dataset, unreadable file),
// 3 training aborted on a non-finite or diverging loss.

#include <CLI11.hpp>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "tsinpaint/data.hpp"
#include "tsinpaint/diagnostics.hpp"
#include "tsinpaint/error.hpp"
#include "tsinpaint/metrics.hpp"
#include "tsinpaint/network.hpp"
#include "tsinpaint/training.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInternal = 1;
constexpr int kExitBadInput = 2;
constexpr int kExitTrainingAbort = 3;

void log_entries(const std::string& command, const std::vector<std::pair<std::string, std::string>>& entries) {
  std::cerr << "[tsinpaint " << command << "] resolved config:\n";
  for (const auto& [key, value] : entries) std::cerr << "  " << key << " = " << value << '\n';
}

int guarded(const std::function<void()>& body) {
  try {
    body();
    return kExitOk;
  } catch (const tsi::TrainingError& e) {
    std::cerr << "error: training aborted: " << e.what() << '\n';
    return kExitTrainingAbort;
  } catch (const tsi::ConfigError& e) {
    std::cerr << "error: bad configuration: " << e.what() << '\n';
    return kExitBadInput;
  } catch (const tsi::InputError& e) {
    std::cerr << "error: bad input: " << e.what() << '\n';
    return kExitBadInput;
  } catch (const tsi::IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitBadInput;
  } catch (const tsi::GenerationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitBadInput;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return kExitInternal;
  }
}

// --- shared inference inputs -------------------------------------------------------------

struct InferenceArgs {
  std::string checkpoint;
  std::string image;
  std::string mask;
  std::string out_dir;
  bool resize = false;
};

void add_inference_options(CLI::App* cmd, InferenceArgs& args) {
  cmd->add_option("--checkpoint", args.checkpoint, "Training checkpoint")->required();
  cmd->add_option("--image", args.image, "Input image")->required();
  cmd->add_option("--mask", args.mask, "Mask image, nonzero = hole")->required();
  cmd->add_option("--out-dir", args.out_dir, "Output directory")->required();
  cmd->add_flag("--resize", args.resize, "Crop and resize inputs to the model size instead of rejecting them");
}

struct LoadedInputs {
  tsi::TrainState state;
  tsi::Tensor image;
  tsi::Tensor mask;
};

LoadedInputs load_inference_inputs(const std::string& command, const InferenceArgs& args) {
  tsi::TrainState state = tsi::load_checkpoint(args.checkpoint);
  const tsi::NetworkConfig& net = state.config.network;
  auto entries = state.config.entries();
  entries.emplace_back("checkpoint", args.checkpoint);
  entries.emplace_back("checkpoint_step", std::to_string(state.step));
  entries.emplace_back("image", args.image);
  entries.emplace_back("mask", args.mask);
  entries.emplace_back("out_dir", args.out_dir);
  entries.emplace_back("resize", args.resize ? "true" : "false");
  log_entries(command, entries);
  if (!args.resize) {
    for (const std::string& path : {args.image, args.mask}) {
      const tsi::ImageSize size = tsi::image_size(path);
      if (size.height != net.height || size.width != net.width) {
        throw tsi::InputError(path + " is " + std::to_string(size.height) + "x" + std::to_string(size.width) +
                              ", the checkpoint model expects " + std::to_string(net.height) + "x" +
                              std::to_string(net.width) + " (pass --resize to fit it)");
      }
    }
  }
  tsi::Tensor image = tsi::load_image(args.image, net.height, net.width);
  tsi::Tensor mask = tsi::load_mask(args.mask, net.height, net.width);
  return {std::move(state), std::move(image), std::move(mask)};
}

tsi::ForwardResult run_forward(const LoadedInputs& in) {
  tsi::NoGradGuard no_grad;
  return in.state.generator.forward(in.image, in.mask);
}

// --- train ---------------------------------------------------------------------------------

struct TrainArgs {
  std::string config;
  std::vector<std::string> sets;
  std::vector<std::string> ablations;
  std::string dataset;
  std::string structures;
  std::string masks;
  std::string output;
  std::string resume;
  long max_steps = 0;
  std::uint64_t seed = 0;
  int batch_size = 0;
  double learning_rate = 0.0;
  long checkpoint_every = 0;
};

int cmd_train(const TrainArgs& args, const CLI::App& cmd) {
  return guarded([&] {
    tsi::TrainConfig config = args.config.empty() ? tsi::TrainConfig{} : tsi::TrainConfig::load(args.config);
    for (const std::string& kv : args.sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw tsi::ConfigError("--set expects KEY=VALUE, got '" + kv + "'");
      config.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    for (const std::string& a : args.ablations) {
      if (a == "ms_only" || a == "no_gu" || a == "no_afblk") {
        config.set(a, "true");
      } else if (a != "none") {
        throw tsi::ConfigError("unknown ablation '" + a + "' (none, ms_only, no_gu, no_afblk)");
      }
    }
    if (cmd.count("--dataset") != 0) config.dataset = args.dataset;
    if (cmd.count("--masks") != 0) config.masks = args.masks;
    if (cmd.count("--output") != 0) config.output = args.output;
    if (cmd.count("--max-steps") != 0) config.max_steps = args.max_steps;
    if (cmd.count("--seed") != 0) config.seed = args.seed;
    if (cmd.count("--batch-size") != 0) config.batch_size = args.batch_size;
    if (cmd.count("--learning-rate") != 0) config.adam.learning_rate = args.learning_rate;
    if (cmd.count("--checkpoint-every") != 0) config.checkpoint_every = args.checkpoint_every;

    std::optional<tsi::TrainState> resumed;
    if (!args.resume.empty()) {
      resumed = tsi::load_checkpoint(args.resume);
      // The stored model and schedule win; only run length and outputs may change.
      tsi::TrainConfig merged = resumed->config;
      merged.max_steps = config.max_steps;
      merged.checkpoint_every = config.checkpoint_every;
      merged.output = config.output;
      merged.dataset = config.dataset;
      merged.masks = config.masks;
      config = merged;
      resumed->config = config;
    }
    config.validate();
    auto entries = config.entries();
    entries.emplace_back("resume", args.resume.empty() ? "none" : args.resume);
    log_entries("train", entries);
    if (config.dataset.empty()) throw tsi::ConfigError("dataset is not set (--dataset or 'dataset = ...')");

    const tsi::ImageDataset dataset = tsi::ImageDataset::from_directory(
        config.dataset, config.network.height, config.network.width,
        args.structures.empty() ? std::nullopt : std::optional<fs::path>(args.structures));
    const std::vector<tsi::Tensor> masks =
        config.masks.empty() ? std::vector<tsi::Tensor>{}
                             : tsi::load_mask_directory(config.masks, config.network.height, config.network.width);

    const fs::path out(config.output);
    fs::create_directories(out);
    { std::ofstream(out / "config.txt") << config.to_text(); }
    std::ofstream log(out / "train_log.jsonl", resumed ? std::ios::app : std::ios::trunc);
    if (!log) throw tsi::IoError("cannot write " + (out / "train_log.jsonl").string());

    tsi::TrainState state = resumed ? std::move(*resumed) : tsi::TrainState::initialize(config);
    tsi::LoopOptions options;
    options.log = &log;
    options.checkpoint_dir = out / "checkpoints";
    options.on_step = [](const tsi::TrainState& s, const tsi::LossReport& r) {
      if (s.step == 1 || s.step % 50 == 0 || s.step == s.config.max_steps) {
        std::fprintf(stderr, "step %ld  total_g %.5f  l_py %.5f  l_adv_d %.5f\n", s.step, r.total_g, r.l_py,
                     r.l_adv_d);
      }
    };
    tsi::train_loop(state, dataset, masks, options);
    std::cout << "trained to step " << state.step << "; checkpoint " << (out / "checkpoints" / "latest.ckpt").string()
              << '\n';
  });
}

// --- inference subcommands -----------------------------------------------------------------

int cmd_inpaint(const InferenceArgs& args) {
  return guarded([&] {
    const LoadedInputs in = load_inference_inputs("inpaint", args);
    const tsi::ForwardResult out = run_forward(in);
    const fs::path dir(args.out_dir);
    tsi::save_image(out.composited.value(), dir / "result.png");
    tsi::save_image(out.final_image.value(), dir / "raw.png");
    if (!out.structure_pyramid.empty()) {
      tsi::save_image(out.structure_image().value(), dir / "structure.png");
    } else {
      std::cerr << "note: main-stream-only model, no structure.png\n";
    }
    std::cout << "wrote " << dir.string() << '\n';
  });
}

int cmd_viz_gates(const InferenceArgs& args) {
  return guarded([&] {
    const LoadedInputs in = load_inference_inputs("viz-gates", args);
    const tsi::ForwardResult out = run_forward(in);
    if (out.gate_maps.empty()) throw tsi::ConfigError("this model has no gated units (ms_only or no_gu)");
    const auto images = tsi::gate_images(out);
    for (std::size_t l = 0; l < images.size(); ++l) {
      tsi::save_gray(images[l], fs::path(args.out_dir) / ("gate_level" + std::to_string(l + 1) + ".png"));
    }
    std::cout << "wrote " << images.size() << " gate maps to " << args.out_dir << '\n';
  });
}

int cmd_viz_pyramid(const InferenceArgs& args) {
  return guarded([&] {
    const LoadedInputs in = load_inference_inputs("viz-pyramid", args);
    const tsi::ForwardResult out = run_forward(in);
    std::size_t written = 0;
    auto emit = [&](const char* stream, const std::vector<tsi::Var>& heads) {
      const auto images = tsi::pyramid_images(heads);
      for (std::size_t l = 0; l < images.size(); ++l) {
        tsi::save_image(images[l], fs::path(args.out_dir) / (std::string(stream) + "_level" + std::to_string(l + 1) + ".png"));
        ++written;
      }
    };
    emit("ms", out.detailed_pyramid);
    emit("ss", out.structure_pyramid);
    std::cout << "wrote " << written << " pyramid images to " << args.out_dir << '\n';
    std::cout << "laplacian energy level 1: ms " << tsi::laplacian_energy(out.detailed_pyramid.front().value());
    if (!out.structure_pyramid.empty()) {
      std::cout << ", ss " << tsi::laplacian_energy(out.structure_pyramid.front().value());
    }
    std::cout << '\n';
  });
}

// --- eval ----------------------------------------------------------------------------------

struct EvalArgs {
  std::string checkpoint;
  std::string dataset;
  std::string masks;
  std::string report;
  std::uint64_t seed = 0;
};

int cmd_eval(const EvalArgs& args) {
  return guarded([&] {
    tsi::TrainState state = tsi::load_checkpoint(args.checkpoint);
    const tsi::NetworkConfig& net = state.config.network;
    auto entries = state.config.entries();
    entries.emplace_back("checkpoint", args.checkpoint);
    entries.emplace_back("eval_dataset", args.dataset);
    entries.emplace_back("eval_masks", args.masks.empty() ? "generated" : args.masks);
    entries.emplace_back("eval_seed", std::to_string(args.seed));
    entries.emplace_back("report", args.report.empty() ? "none" : args.report);
    log_entries("eval", entries);

    const tsi::ImageDataset dataset = tsi::ImageDataset::from_directory(args.dataset, net.height, net.width);
    std::vector<tsi::EvalCase> cases;
    if (!args.masks.empty()) {
      const auto masks = tsi::load_mask_directory(args.masks, net.height, net.width);
      if (masks.empty()) throw tsi::InputError("mask directory " + args.masks + " holds no masks");
      for (std::size_t i = 0; i < dataset.size(); ++i) cases.push_back({dataset[i].image, masks[i % masks.size()]});
    } else {
      const auto bins = tsi::default_mask_bins();
      for (std::size_t i = 0; i < dataset.size(); ++i) {
        for (std::size_t b = 0; b < bins.size(); ++b) {
          tsi::Rng rng(tsi::derive_seed(args.seed, i, b));
          cases.push_back({dataset[i].image, tsi::generate_irregular_mask(rng, net.height, net.width, bins[b])});
        }
      }
    }
    const tsi::InpaintFn model = [&](const tsi::Tensor& image, const tsi::Tensor& mask) {
      return state.generator.inpaint(image, mask);
    };
    const tsi::EvalReport report = tsi::evaluate(model, cases);
    std::cout << report.table();
    if (!args.report.empty()) {
      std::ofstream f(args.report);
      if (!(f << report.key_values())) throw tsi::IoError("cannot write " + args.report);
    }
  });
}

// --- make-masks ----------------------------------------------------------------------------

struct MaskArgs {
  std::string out_dir;
  int count = 100;
  int height = 256;
  int width = 256;
  std::uint64_t seed = 0;
  double min_ratio = -1.0;
  double max_ratio = -1.0;
};

std::string bin_dir_name(const tsi::MaskBin& bin) {
  std::string label = bin.label();
  if (!label.empty() && label.back() == '%') label.pop_back();
  return label;
}

int cmd_make_masks(const MaskArgs& args) {
  return guarded([&] {
    std::vector<tsi::MaskBin> bins = tsi::default_mask_bins();
    if (args.min_ratio >= 0.0 || args.max_ratio >= 0.0) {
      const tsi::MaskBin custom{args.min_ratio, args.max_ratio};
      try {
        custom.validate();
      } catch (const tsi::InputError& e) {
        throw tsi::ConfigError(std::string("--min-ratio/--max-ratio: ") + e.what());
      }
      bins = {custom};
    }
    if (args.count < 1) throw tsi::ConfigError("--count must be at least 1");
    if (args.height < 1 || args.width < 1) throw tsi::ConfigError("--height and --width must be positive");
    log_entries("make-masks", {{"out_dir", args.out_dir},
                               {"count", std::to_string(args.count)},
                               {"height", std::to_string(args.height)},
                               {"width", std::to_string(args.width)},
                               {"seed", std::to_string(args.seed)},
                               {"bins", std::to_string(bins.size())}});
    for (std::size_t b = 0; b < bins.size(); ++b) {
      const fs::path dir = fs::path(args.out_dir) / bin_dir_name(bins[b]);
      for (int i = 0; i < args.count; ++i) {
        tsi::Rng rng(tsi::derive_seed(args.seed, b, static_cast<std::uint64_t>(i)));
        char name[32];
        std::snprintf(name, sizeof(name), "mask_%05d.png", i);
        tsi::save_mask(tsi::generate_irregular_mask(rng, args.height, args.width, bins[b]), dir / name);
      }
      std::cout << bins[b].label() << ": " << args.count << " masks in " << dir.string() << '\n';
    }
  });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tsinpaint: two-stream image inpainting with structure guidance"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);

  const tsi::TrainConfig defaults;
  TrainArgs train;
  train.max_steps = defaults.max_steps;
  train.seed = defaults.seed;
  train.batch_size = defaults.batch_size;
  train.learning_rate = defaults.adam.learning_rate;
  train.checkpoint_every = defaults.checkpoint_every;
  train.output = defaults.output;
  CLI::App* train_cmd = app.add_subcommand("train", "Train both streams and the discriminator");
  train_cmd->add_option("--config", train.config, "Config file of key = value lines");
  train_cmd->add_option("--set", train.sets, "Override one config key (KEY=VALUE, repeatable)");
  train_cmd->add_option("--ablation", train.ablations, "none, ms_only, no_gu or no_afblk (repeatable)")
      ->default_str("none");
  train_cmd->add_option("--dataset", train.dataset, "Training image directory");
  train_cmd->add_option("--structures", train.structures, "Precomputed structure images (default: dataset/structures or computed)");
  train_cmd->add_option("--masks", train.masks, "Mask directory (default: generated per step)");
  train_cmd->add_option("--output", train.output, "Run directory for config, log and checkpoints");
  train_cmd->add_option("--resume", train.resume, "Continue from a checkpoint");
  train_cmd->add_option("--max-steps", train.max_steps, "Total optimizer steps");
  train_cmd->add_option("--seed", train.seed, "Seed for initialization, batches, masks and flips");
  train_cmd->add_option("--batch-size", train.batch_size, "Images per step");
  train_cmd->add_option("--learning-rate", train.learning_rate, "Adam learning rate");
  train_cmd->add_option("--checkpoint-every", train.checkpoint_every, "Steps between checkpoints (0 = final only)");

  InferenceArgs inpaint, gates, pyramid;
  CLI::App* inpaint_cmd = app.add_subcommand("inpaint", "Fill the holes of one image");
  add_inference_options(inpaint_cmd, inpaint);
  CLI::App* gates_cmd = app.add_subcommand("viz-gates", "Write the gate map of every level");
  add_inference_options(gates_cmd, gates);
  CLI::App* pyramid_cmd = app.add_subcommand("viz-pyramid", "Write the RGB head output of every scale and stream");
  add_inference_options(pyramid_cmd, pyramid);

  EvalArgs eval;
  CLI::App* eval_cmd = app.add_subcommand("eval", "Score a checkpoint per hole-ratio bin");
  eval_cmd->add_option("--checkpoint", eval.checkpoint, "Training checkpoint")->required();
  eval_cmd->add_option("--dataset", eval.dataset, "Evaluation image directory")->required();
  eval_cmd->add_option("--masks", eval.masks, "Mask directory (default: one generated mask per bin and image)");
  eval_cmd->add_option("--report", eval.report, "Also write key=value metrics to this file");
  eval_cmd->add_option("--seed", eval.seed, "Seed of generated masks");

  MaskArgs masks;
  CLI::App* masks_cmd = app.add_subcommand("make-masks", "Generate irregular masks per hole-ratio bin");
  masks_cmd->add_option("--out-dir", masks.out_dir, "Output directory, one subdirectory per bin")->required();
  masks_cmd->add_option("--count", masks.count, "Masks per bin");
  masks_cmd->add_option("--height", masks.height, "Mask height");
  masks_cmd->add_option("--width", masks.width, "Mask width");
  masks_cmd->add_option("--seed", masks.seed, "Generator seed");
  masks_cmd->add_option("--min-ratio", masks.min_ratio, "Lower hole ratio of a single custom bin (-1 = default bins)");
  masks_cmd->add_option("--max-ratio", masks.max_ratio, "Upper hole ratio of a single custom bin (-1 = default bins)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitBadInput;
  }

  if (train_cmd->parsed()) return cmd_train(train, *train_cmd);
  if (inpaint_cmd->parsed()) return cmd_inpaint(inpaint);
  if (gates_cmd->parsed()) return cmd_viz_gates(gates);
  if (pyramid_cmd->parsed()) return cmd_viz_pyramid(pyramid);
  if (eval_cmd->parsed()) return cmd_eval(eval);
  if (masks_cmd->parsed()) return cmd_make_masks(masks);
  return kExitInternal;
}
