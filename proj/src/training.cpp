// Copyright 2026 The tsinpaint Authors
// SPDX-License-Identifier: Apache-2.0

#include "tsinpaint/training.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <numeric>
#include <ostream>
#include <sstream>

#include "tsinpaint/container.hpp"
#include "tsinpaint/error.hpp"
#include "tsinpaint/ops.hpp"

namespace tsi {
namespace {

constexpr std::uint64_t kBatchStream = ~0ULL;
constexpr std::uint64_t kModelStream = ~0ULL - 1;
constexpr const char* kStateFormat = "tsinpaint.train_state";

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const char* end = text.data() + text.size();
  const auto res = std::from_chars(text.data(), end, value);
  if (res.ec != std::errc() || res.ptr != end) {
    throw ConfigError("invalid value '" + text + "' for " + key);
  }
  return value;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
  if (text == "false" || text == "0" || text == "no" || text == "off") return false;
  throw ConfigError("invalid boolean '" + text + "' for " + key);
}

// Binds every config key to its field once, for set() and entries() alike.
template <typename Config, typename Visitor>
void visit_fields(Config& c, Visitor&& v) {
  v("levels", c.network.levels);
  v("base_channels", c.network.base_channels);
  v("max_channels", c.network.max_channels);
  v("height", c.network.height);
  v("width", c.network.width);
  v("bottleneck_blocks", c.network.bottleneck_blocks);
  v("disc_base_channels", c.network.disc_base_channels);
  v("ms_only", c.network.variant.ms_only);
  v("no_gu", c.network.variant.no_gu);
  v("no_afblk", c.network.variant.no_afblk);
  v("learning_rate", c.adam.learning_rate);
  v("beta1", c.adam.beta1);
  v("beta2", c.adam.beta2);
  v("epsilon", c.adam.epsilon);
  v("grad_clip", c.grad_clip);
  v("batch_size", c.batch_size);
  v("max_steps", c.max_steps);
  v("seed", c.seed);
  v("checkpoint_every", c.checkpoint_every);
  v("mask_min_ratio", c.mask_bin.lower);
  v("mask_max_ratio", c.mask_bin.upper);
  v("flip", c.flip);
  v("divergence_limit", c.divergence_limit);
  v("weight_pyramid", c.weights.pyramid);
  v("weight_perceptual", c.weights.perceptual);
  v("weight_style", c.weights.style);
  v("weight_adversarial", c.weights.adversarial);
  v("extractor", c.extractor);
  v("dataset", c.dataset);
  v("masks", c.masks);
  v("output", c.output);
}

template <typename T>
std::string to_text_value(const T& field) {
  if constexpr (std::is_same_v<T, bool>) {
    return field ? "true" : "false";
  } else if constexpr (std::is_same_v<T, double>) {
    return format_double(field);
  } else if constexpr (std::is_same_v<T, std::string>) {
    return field;
  } else {
    return std::to_string(field);
  }
}

template <typename T>
void from_text_value(const std::string& key, const std::string& text, T& field) {
  if constexpr (std::is_same_v<T, bool>) {
    field = parse_bool(key, text);
  } else if constexpr (std::is_same_v<T, std::string>) {
    field = text;
  } else {
    field = parse_number<T>(key, text);
  }
}

void check_loss(const char* name, double value, double limit) {
  if (!std::isfinite(value)) throw TrainingError(std::string("non-finite loss term ") + name);
  if (std::abs(value) > limit) {
    throw TrainingError(std::string("loss term ") + name + " diverged (" + format_double(value) + ")");
  }
}

void check_params(const char* network, const ParamStore& store, double limit) {
  for (const ParamEntry& e : store.entries()) {
    for (double v : e.var.value().values()) {
      if (!std::isfinite(v)) throw TrainingError(std::string("non-finite ") + network + " parameter " + e.name);
      if (std::abs(v) > limit) {
        throw TrainingError(std::string(network) + " parameter " + e.name + " diverged (" + format_double(v) + ")");
      }
    }
  }
}

}  // namespace

// --- config -------------------------------------------------------------------------

void TrainConfig::validate() const {
  network.validate();
  if (!(adam.learning_rate > 0.0) || !std::isfinite(adam.learning_rate)) {
    throw ConfigError("learning_rate must be a finite positive number");
  }
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0) || !(adam.beta2 >= 0.0 && adam.beta2 < 1.0)) {
    throw ConfigError("Adam betas must lie in [0, 1)");
  }
  if (!(adam.epsilon > 0.0)) throw ConfigError("epsilon must be positive");
  if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (max_steps < 0) throw ConfigError("max_steps must be non-negative");
  if (checkpoint_every < 0) throw ConfigError("checkpoint_every must be non-negative");
  if (!(grad_clip >= 0.0)) throw ConfigError("grad_clip must be non-negative");
  if (!(divergence_limit > 0.0)) throw ConfigError("divergence_limit must be positive");
  for (double w : {weights.pyramid, weights.perceptual, weights.style, weights.adversarial}) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw ConfigError("loss weights must be finite and non-negative");
  }
  try {
    mask_bin.validate();
  } catch (const InputError& e) {
    throw ConfigError(std::string("mask_min_ratio/mask_max_ratio: ") + e.what());
  }
  if (extractor.empty()) throw ConfigError("extractor must be 'random', 'identity' or a weight file path");
}

void TrainConfig::set(const std::string& key, const std::string& value) {
  bool found = false;
  visit_fields(*this, [&](const char* name, auto& field) {
    if (key == name) {
      from_text_value(key, value, field);
      found = true;
    }
  });
  if (!found) throw ConfigError("unknown config key '" + key + "'");
}

std::vector<std::pair<std::string, std::string>> TrainConfig::entries() const {
  std::vector<std::pair<std::string, std::string>> out;
  visit_fields(*this, [&](const char* name, const auto& field) { out.emplace_back(name, to_text_value(field)); });
  return out;
}

std::string TrainConfig::to_text() const {
  std::string out;
  for (const auto& [k, v] : entries()) out += k + " = " + v + "\n";
  return out;
}

TrainConfig TrainConfig::parse(const std::string& text) {
  TrainConfig config;
  std::istringstream in(text);
  int line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    config.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return config;
}

TrainConfig TrainConfig::load(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse(ss.str());
}

FeatureExtractor make_extractor(const std::string& spec) {
  if (spec == "random") return FeatureExtractor::random_pyramid();
  if (spec == "identity") return FeatureExtractor::identity();
  return FeatureExtractor::from_vgg16(TensorContainer::load(spec));
}

// --- optimizer ----------------------------------------------------------------------

AdamMoments AdamMoments::zeros_like(const ParamStore& store) {
  AdamMoments out;
  for (const ParamEntry& e : store.entries()) {
    if (e.kind != ParamKind::kTrainable) continue;
    out.m.emplace_back(e.var.shape(), 0.0);
    out.v.emplace_back(e.var.shape(), 0.0);
  }
  return out;
}

double adam_update(ParamStore& store, AdamMoments& moments, const AdamConfig& config, long t, double clip) {
  std::vector<Var*> params;
  for (ParamEntry& e : store.entries()) {
    if (e.kind == ParamKind::kTrainable) params.push_back(&e.var);
  }
  if (params.size() != moments.m.size() || params.size() != moments.v.size()) {
    throw InternalError("Adam moments do not match the parameter store");
  }
  double sq = 0.0;
  for (Var* p : params) {
    if (!p->has_grad()) continue;
    for (double g : p->node()->grad.values()) sq += g * g;
  }
  const double norm = std::sqrt(sq);
  const double gscale = clip > 0.0 && norm > clip ? clip / norm : 1.0;
  const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(t));
  for (std::size_t k = 0; k < params.size(); ++k) {
    Var& p = *params[k];
    const bool has_grad = p.has_grad();
    std::span<double> value = p.mutable_value().values();
    std::span<double> m = moments.m[k].values();
    std::span<double> v = moments.v[k].values();
    const double* grad = has_grad ? p.node()->grad.data() : nullptr;
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double g = has_grad ? grad[i] * gscale : 0.0;
      m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g;
      v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g * g;
      value[i] -= config.learning_rate * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + config.epsilon);
    }
  }
  return norm;
}

// --- state and steps --------------------------------------------------------------------

TrainState TrainState::initialize(const TrainConfig& config) {
  config.validate();
  InpaintingNetwork generator(config.network, derive_seed(config.seed, kModelStream, 1));
  Discriminator discriminator(config.network, derive_seed(config.seed, kModelStream, 2));
  AdamMoments g = AdamMoments::zeros_like(generator.params());
  AdamMoments d = AdamMoments::zeros_like(discriminator.params());
  return TrainState{config,
                    0,
                    std::move(generator),
                    std::move(discriminator),
                    make_extractor(config.extractor),
                    std::move(g),
                    std::move(d),
                    std::nullopt,
                    0};
}

LossReport train_step(TrainState& state, const ImageSample& batch) {
  const TrainConfig& config = state.config;
  InpaintingNetwork& generator = state.generator;
  Discriminator& discriminator = state.discriminator;
  const long t = state.step + 1;

  generator.params().zero_grad();
  discriminator.params().zero_grad();
  discriminator.params().set_trainable(true);
  const ForwardResult out = generator.forward(batch.image, batch.mask);
  const Var real = Var::constant(batch.image);
  const Var mask = Var::constant(batch.mask);

  const Var d_real = discriminator.forward_training(real, mask, 1);
  const Var d_fake = discriminator.forward(out.composited.detach(), mask);
  const AdversarialLosses d_losses = adversarial_losses(d_real, d_fake);
  const double l_adv_d = d_losses.discriminator.value().item();
  check_loss("l_adv_d", l_adv_d, config.divergence_limit);
  backward(d_losses.discriminator);
  adam_update(discriminator.params(), state.d_moments, config.adam, t, config.grad_clip);
  check_params("discriminator", discriminator.params(), config.divergence_limit);

  discriminator.params().set_trainable(false);
  LossComponents c;
  Objective objective;
  try {
    const AdversarialLosses g_losses =
        adversarial_losses(discriminator.forward(real, mask), discriminator.forward(out.composited, mask));
    c.adversarial_g = g_losses.generator;
    c.pyramid = pyramid_loss(out.detailed_pyramid, out.structure_pyramid, batch.image_pyramid,
                             batch.structure_pyramid);
    const std::vector<Var> pred_features = state.extractor(out.final_image);
    const std::vector<Tensor> gt_features = frozen_features(state.extractor, batch.image);
    c.perceptual_ms = perceptual_loss(pred_features, gt_features);
    c.style = style_loss(pred_features, gt_features);
    if (!config.network.variant.ms_only) {
      c.perceptual_ss = perceptual_loss(state.extractor, out.structure_image(), batch.structure);
    }
    objective = total_losses(config.weights, c);
  } catch (...) {
    discriminator.params().set_trainable(true);
    throw;
  }
  discriminator.params().set_trainable(true);

  LossReport report = objective.report;
  report.l_adv_d = l_adv_d;
  report.total_d = l_adv_d;
  check_loss("l_py", report.l_py, config.divergence_limit);
  check_loss("l_per_ms", report.l_per_ms, config.divergence_limit);
  check_loss("l_per_ss", report.l_per_ss, config.divergence_limit);
  check_loss("l_sty", report.l_sty, config.divergence_limit);
  check_loss("l_adv_g", report.l_adv_g, config.divergence_limit);
  check_loss("total_g", report.total_g, config.divergence_limit);

  backward(objective.generator_total);
  adam_update(generator.params(), state.g_moments, config.adam, t, config.grad_clip);
  check_params("generator", generator.params(), config.divergence_limit);
  generator.params().zero_grad();
  discriminator.params().zero_grad();

  state.step = t;
  if (!state.best_total_g || report.total_g < *state.best_total_g) {
    state.best_total_g = report.total_g;
    state.best_step = t;
  }
  return report;
}

ImageSample make_batch(const TrainConfig& config, const ImageDataset& dataset, const std::vector<Tensor>& masks,
                       long step) {
  if (dataset.empty()) throw InputError("training dataset is empty");
  const std::size_t n = dataset.size();
  std::vector<ImageSample> samples;
  std::vector<std::size_t> order;
  std::uint64_t order_epoch = ~0ULL;
  for (int slot = 0; slot < config.batch_size; ++slot) {
    const std::uint64_t k = static_cast<std::uint64_t>(step) * config.batch_size + slot;
    const std::uint64_t epoch = k / n;
    if (epoch != order_epoch) {
      order.resize(n);
      std::iota(order.begin(), order.end(), std::size_t{0});
      Rng shuffle(derive_seed(config.seed, kBatchStream, epoch));
      for (std::size_t i = n - 1; i > 0; --i) {
        std::swap(order[i], order[static_cast<std::size_t>(shuffle.uniform_int(0, static_cast<int>(i)))]);
      }
      order_epoch = epoch;
    }
    const ImageDataset::Entry& entry = dataset[order[k % n]];
    Rng rng(derive_seed(config.seed, static_cast<std::uint64_t>(step), static_cast<std::uint64_t>(slot)));
    const Shape s = entry.image.shape();
    Tensor mask = masks.empty() ? generate_irregular_mask(rng, s.h, s.w, config.mask_bin)
                                : masks[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(masks.size()) - 1))];
    ImageSample sample = make_sample(entry.image, entry.structure, mask, config.network.levels);
    samples.push_back(config.flip ? augment(rng, sample) : std::move(sample));
  }
  return collate(samples);
}

// --- checkpoints --------------------------------------------------------------------

void save_checkpoint(const TrainState& state, const std::filesystem::path& path) {
  TensorContainer c;
  c.set_meta("format", kStateFormat);
  c.set_meta("step", std::to_string(state.step));
  c.set_meta("best_total_g", state.best_total_g ? format_double(*state.best_total_g) : "none");
  c.set_meta("best_step", std::to_string(state.best_step));
  for (const auto& [k, v] : state.config.entries()) c.set_meta("config." + k, v);

  auto put_store = [&](const std::string& prefix, const ParamStore& store, const AdamMoments& moments) {
    std::size_t k = 0;
    for (const ParamEntry& e : store.entries()) {
      c.put(prefix + "/" + e.name, e.var.value());
      if (e.kind != ParamKind::kTrainable) continue;
      c.put("adam.m." + prefix + "/" + e.name, moments.m.at(k));
      c.put("adam.v." + prefix + "/" + e.name, moments.v.at(k));
      ++k;
    }
  };
  put_store("generator", state.generator.params(), state.g_moments);
  put_store("discriminator", state.discriminator.params(), state.d_moments);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  c.save(path);
}

TrainState load_checkpoint(const std::filesystem::path& path) {
  const TensorContainer c = TensorContainer::load(path);
  auto fail = [&](const std::string& why) { return IoError(path.string() + ": " + why); };
  if (!c.has_meta("format") || c.meta("format") != kStateFormat) throw fail("not a training checkpoint");

  TrainConfig config;
  for (const auto& [key, value] : c.metadata()) {
    if (key.rfind("config.", 0) != 0) continue;
    try {
      config.set(key.substr(7), value);
    } catch (const ConfigError& e) {
      throw fail(e.what());
    }
  }
  TrainState state = [&] {
    try {
      return TrainState::initialize(config);
    } catch (const ConfigError& e) {
      throw fail(std::string("stored config is invalid: ") + e.what());
    }
  }();
  try {
    state.step = parse_number<long>("step", c.meta("step"));
    state.best_step = parse_number<long>("best_step", c.meta("best_step"));
    const std::string& best = c.meta("best_total_g");
    if (best != "none") state.best_total_g = parse_number<double>("best_total_g", best);
  } catch (const ConfigError& e) {
    throw fail(e.what());
  }

  std::size_t expected = 0;
  auto take = [&](const std::string& name, Tensor& dst) {
    const Tensor& src = c.get(name);
    if (!(src.shape() == dst.shape())) {
      throw fail("tensor " + name + " has shape " + src.shape().str() + ", model expects " + dst.shape().str());
    }
    dst = src;
    ++expected;
  };
  auto load_store = [&](const std::string& prefix, ParamStore& store, AdamMoments& moments) {
    std::size_t k = 0;
    for (ParamEntry& e : store.entries()) {
      take(prefix + "/" + e.name, e.var.mutable_value());
      if (e.kind != ParamKind::kTrainable) continue;
      take("adam.m." + prefix + "/" + e.name, moments.m.at(k));
      take("adam.v." + prefix + "/" + e.name, moments.v.at(k));
      ++k;
    }
  };
  load_store("generator", state.generator.params(), state.g_moments);
  load_store("discriminator", state.discriminator.params(), state.d_moments);
  if (expected != c.tensors().size()) {
    throw fail("checkpoint holds " + std::to_string(c.tensors().size()) + " tensors, model expects " +
               std::to_string(expected));
  }
  return state;
}

// --- loop -------------------------------------------------------------------------------

std::string log_record(long step, const LossReport& r, double wall_seconds) {
  nlohmann::json j;
  j["step"] = step;
  j["l_py"] = r.l_py;
  j["l_per_ms"] = r.l_per_ms;
  j["l_per_ss"] = r.l_per_ss;
  j["l_sty"] = r.l_sty;
  j["l_adv_g"] = r.l_adv_g;
  j["l_adv_d"] = r.l_adv_d;
  j["total_g"] = r.total_g;
  j["total_d"] = r.total_d;
  j["wall_time"] = wall_seconds;
  return j.dump();
}

void train_loop(TrainState& state, const ImageDataset& dataset, const std::vector<Tensor>& masks,
                const LoopOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  while (state.step < state.config.max_steps) {
    const ImageSample batch = make_batch(state.config, dataset, masks, state.step);
    const LossReport report = train_step(state, batch);
    if (options.log != nullptr) {
      const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      *options.log << log_record(state.step, report, wall) << '\n' << std::flush;
    }
    if (options.on_step) options.on_step(state, report);
    if (!options.checkpoint_dir.empty() && state.config.checkpoint_every > 0 &&
        state.step % state.config.checkpoint_every == 0) {
      save_checkpoint(state, options.checkpoint_dir / ("step_" + std::to_string(state.step) + ".ckpt"));
    }
  }
  if (!options.checkpoint_dir.empty()) save_checkpoint(state, options.checkpoint_dir / "latest.ckpt");
}

}  // namespace tsi
