// Copyright 2026 The regionmim Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include "regionmim/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <numbers>
#include <sstream>

#include "regionmim/errors.hpp"
#include "regionmim/rng.hpp"

namespace regionmim {
namespace {

// Stream tags for derive_seed.
constexpr std::uint64_t kShuffleTag = 0x73687566;
constexpr std::uint64_t kPlanTag = 0x706c616e;
constexpr std::uint64_t kSubsetTag = 0x73756273;
constexpr std::uint64_t kFinetuneShuffleTag = 0x66747368;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::vector<std::size_t> shuffled_order(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(order));
  return order;
}

std::vector<NamedParameter> concat(std::vector<NamedParameter> a,
                                   std::vector<NamedParameter> b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

void check_image_fits(const ImageGrid& image, const EncoderConfig& enc,
                      std::size_t index) {
  if (image.channels != enc.channels) {
    throw DimensionError("sample " + std::to_string(index) + " has " +
                         std::to_string(image.channels) +
                         " channels, encoder expects " +
                         std::to_string(enc.channels));
  }
}

// Mean cross-entropy and argmax of one logits row.
struct RowScore {
  double loss;
  int predicted;
};

RowScore score_row(std::span<const double> logits, int label) {
  const double top = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (double z : logits) total += std::exp(z - top);
  const double log_norm = top + std::log(total);
  return {log_norm - logits[static_cast<std::size_t>(label)], argmax(logits)};
}

}  // namespace

std::string_view to_string(LrSchedule schedule) {
  return schedule == LrSchedule::kCosine ? "cosine" : "constant";
}

LrSchedule parse_lr_schedule(std::string_view text) {
  if (text == "constant") return LrSchedule::kConstant;
  if (text == "cosine") return LrSchedule::kCosine;
  throw ConfigError("unknown learning-rate schedule '" + std::string(text) +
                    "' (expected constant or cosine)");
}

void RunConfig::validate() const {
  if (epochs == 0) throw ConfigError("epochs must be positive");
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (!(base_lr > 0.0) || !std::isfinite(base_lr)) {
    throw ConfigError("base learning rate must be positive");
  }
  if (!(weight_decay >= 0.0)) {
    throw ConfigError("weight_decay must be non-negative");
  }
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("betas must lie in [0, 1)");
  }
  if (!(adam_eps > 0.0)) throw ConfigError("adam eps must be positive");
  if (!(sigma > 0.0 && sigma < 1.0)) {
    throw ConfigError("masking ratio must lie strictly between 0 and 1");
  }
  if (!(overlap_threshold >= 0.0 && overlap_threshold < 1.0)) {
    throw ConfigError("overlap threshold must lie in [0, 1)");
  }
  if (warmup_epochs > epochs) {
    throw ConfigError("warmup_epochs exceeds epochs");
  }
}

double RunConfig::learning_rate(double progress) const {
  const double peak =
      base_lr * static_cast<double>(batch_size) / 256.0;
  const double warmup = static_cast<double>(warmup_epochs);
  if (warmup > 0.0 && progress < warmup) return peak * progress / warmup;
  if (schedule == LrSchedule::kConstant) return peak;
  const double span = static_cast<double>(epochs) - warmup;
  if (span <= 0.0) return peak;
  const double t = std::clamp((progress - warmup) / span, 0.0, 1.0);
  return peak * 0.5 * (1.0 + std::cos(std::numbers::pi * t));
}

void write_metrics_csv(std::ostream& out, const MetricsRecord& metrics,
                       bool include_seconds) {
  out << kMetricsHeader << '\n';
  std::ostringstream line;
  line << std::setprecision(10);
  for (const EpochMetrics& e : metrics.epochs) {
    line.str("");
    line << e.epoch << ',' << e.split << ',' << e.loss << ',';
    if (e.accuracy) line << *e.accuracy;
    line << ',';
    if (include_seconds) line << std::fixed << std::setprecision(3) << e.seconds
                              << std::defaultfloat << std::setprecision(10);
    line << ',' << e.clamped_plans;
    out << line.str() << '\n';
  }
}

// ---- pretraining ----------------------------------------------------------

PretrainResult pretrain(const std::vector<UnlabeledSample>& data,
                        const ModelConfig& model, const RunConfig& run,
                        const EpochCallback& on_epoch) {
  model.validate();
  run.validate();
  if (data.empty()) throw TrainingError("pretraining set is empty");

  const std::size_t patch = model.encoder.patch_size;
  std::vector<PatchGrid> grids;
  std::vector<std::vector<std::size_t>> valid;
  grids.reserve(data.size());
  valid.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    check_image_fits(data[i].image, model.encoder, i);
    grids.push_back(split_into_patches(data[i].image, patch));
    valid.push_back(compute_valid_set(data[i].image, data[i].mask, patch,
                                      run.overlap_threshold));
    if (run.strategy == MaskStrategy::kRegionGuided && valid.back().empty()) {
      throw StrategyError("sample " + std::to_string(i) +
                          " has no patch overlapping its region mask; "
                          "region-guided masking needs at least one");
    }
    if (grids.back().count() > model.encoder.max_tokens) {
      throw CapacityError("sample " + std::to_string(i) + " yields " +
                          std::to_string(grids.back().count()) +
                          " patches, positional table holds " +
                          std::to_string(model.encoder.max_tokens));
    }
  }

  ModelParams init = init_parameters(model, run.seed);
  PretrainResult result;
  result.encoder = std::move(init.encoder);
  result.decoder = std::move(init.decoder);
  std::vector<NamedParameter> params =
      concat(result.encoder.parameters(), result.decoder.parameters());
  result.optimizer = make_adamw_state(params, run.beta1, run.beta2,
                                      run.adam_eps, run.weight_decay);

  const std::size_t steps_per_epoch =
      (data.size() + run.batch_size - 1) / run.batch_size;
  for (std::size_t epoch = 0; epoch < run.epochs; ++epoch) {
    const auto start = Clock::now();
    const std::vector<std::size_t> order =
        shuffled_order(data.size(), derive_seed(run.seed, {kShuffleTag, epoch}));
    double loss_sum = 0.0;
    std::size_t clamped = 0;
    for (std::size_t step = 0; step < steps_per_epoch; ++step) {
      const std::size_t begin = step * run.batch_size;
      const std::size_t end = std::min(begin + run.batch_size, data.size());
      const double inv_batch = 1.0 / static_cast<double>(end - begin);
      zero_grads(params);
      for (std::size_t k = begin; k < end; ++k) {
        const std::size_t i = order[k];
        const MaskingPlan plan = build_masking_plan(
            grids[i].count(), valid[i], run.sigma, run.strategy,
            derive_seed(run.seed, {kPlanTag, epoch, i}));
        if (plan.clamped) ++clamped;
        Tape tape;
        Var loss = pretraining_loss(tape, grids[i], plan, result.encoder,
                                    result.decoder);
        loss_sum += loss.value()[0];
        tape.backward(scale(loss, inv_batch));
      }
      const double progress =
          static_cast<double>(epoch) +
          static_cast<double>(step) / static_cast<double>(steps_per_epoch);
      adamw_step(params, result.optimizer, run.learning_rate(progress));
    }
    EpochMetrics m;
    m.epoch = epoch + 1;
    m.split = "pretrain";
    m.loss = loss_sum / static_cast<double>(data.size());
    m.clamped_plans = clamped;
    m.seconds = seconds_since(start);
    if (!std::isfinite(m.loss)) {
      throw TrainingError("pretraining loss diverged in epoch " +
                          std::to_string(m.epoch));
    }
    result.metrics.epochs.push_back(m);
    if (on_epoch) on_epoch(m);
  }
  return result;
}

double mean_reconstruction_loss(const std::vector<UnlabeledSample>& data,
                                EncoderParams& enc, DecoderParams& dec,
                                double sigma, MaskStrategy strategy,
                                std::uint64_t seed, double overlap_threshold) {
  if (data.empty()) throw ContractError("no samples to score");
  const std::size_t patch = enc.config.patch_size;
  double total = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const PatchGrid grid = split_into_patches(data[i].image, patch);
    const MaskingPlan plan = build_masking_plan(
        grid.count(),
        compute_valid_set(data[i].image, data[i].mask, patch,
                          overlap_threshold),
        sigma, strategy, derive_seed(seed, {kPlanTag, i}));
    Tape tape(false);
    total += pretraining_loss(tape, grid, plan, enc, dec).value()[0];
  }
  return total / static_cast<double>(data.size());
}

// ---- fine-tuning ----------------------------------------------------------

std::vector<std::size_t> stratified_subset(std::span<const int> labels,
                                           std::size_t num_classes,
                                           double fraction,
                                           std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw ConfigError("label fraction must lie in (0, 1]");
  }
  std::vector<std::vector<std::size_t>> by_class(num_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int y = labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= num_classes) {
      throw LabelError("sample " + std::to_string(i) + " has label " +
                       std::to_string(y) + " outside [0, " +
                       std::to_string(num_classes) + ")");
    }
    by_class[static_cast<std::size_t>(y)].push_back(i);
  }
  std::vector<std::size_t> chosen;
  for (std::size_t c = 0; c < num_classes; ++c) {
    std::vector<std::size_t>& pool = by_class[c];
    if (pool.empty()) {
      throw StratificationError("class " + std::to_string(c) +
                                " has no training samples");
    }
    // The slack keeps products like 0.1 * 80 from rounding up to 9.
    const double want = std::ceil(fraction * static_cast<double>(pool.size()) -
                                  1e-9);
    const std::size_t take = std::clamp<std::size_t>(
        static_cast<std::size_t>(want), 1, pool.size());
    Rng rng(derive_seed(seed, {kSubsetTag, c}));
    rng.shuffle(std::span<std::size_t>(pool));
    chosen.insert(chosen.end(), pool.begin(), pool.begin() + take);
  }
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

FinetuneResult finetune(const std::vector<LabeledSample>& data,
                        const EncoderParams* pretrained,
                        const ModelConfig& model, const RunConfig& run,
                        const FinetuneOptions& options,
                        const EpochCallback& on_epoch) {
  model.validate();
  run.validate();
  if (data.empty()) throw TrainingError("fine-tuning set is empty");
  if (pretrained != nullptr && !(pretrained->config == model.encoder)) {
    throw ConfigError(
        "pretrained encoder configuration differs from the model config");
  }

  std::vector<int> labels;
  labels.reserve(data.size());
  for (const LabeledSample& s : data) labels.push_back(s.label);

  FinetuneResult result;
  result.subset = stratified_subset(labels, model.num_classes,
                                    options.label_fraction, run.seed);

  ModelParams init = init_parameters(model, run.seed);
  result.encoder = pretrained ? *pretrained : std::move(init.encoder);
  result.head = std::move(init.head);

  const std::size_t patch = model.encoder.patch_size;
  const std::size_t n = result.subset.size();
  std::vector<PatchGrid> grids;
  grids.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t i = result.subset[k];
    check_image_fits(data[i].image, model.encoder, i);
    grids.push_back(split_into_patches(data[i].image, patch));
  }

  // A frozen encoder is a constant map, so its pooled features are computed
  // once and only the head is trained.
  std::vector<Tensor> features;
  if (options.freeze_encoder) {
    features.reserve(n);
    std::vector<std::size_t> all;
    for (const PatchGrid& g : grids) {
      all.resize(g.count());
      std::iota(all.begin(), all.end(), std::size_t{0});
      Tape tape(false);
      features.push_back(
          encoder_forward(embed_patches(tape, g, all, result.encoder),
                          result.encoder)
              .pooled.value());
    }
  }

  std::vector<NamedParameter> params =
      options.freeze_encoder
          ? result.head.parameters()
          : concat(result.encoder.parameters(), result.head.parameters());
  result.optimizer = make_adamw_state(params, run.beta1, run.beta2,
                                      run.adam_eps, run.weight_decay);

  const std::size_t steps_per_epoch = (n + run.batch_size - 1) / run.batch_size;
  for (std::size_t epoch = 0; epoch < run.epochs; ++epoch) {
    const auto start = Clock::now();
    const std::vector<std::size_t> order =
        shuffled_order(n, derive_seed(run.seed, {kFinetuneShuffleTag, epoch}));
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t step = 0; step < steps_per_epoch; ++step) {
      const std::size_t begin = step * run.batch_size;
      const std::size_t end = std::min(begin + run.batch_size, n);
      zero_grads(params);
      Tape tape;
      std::vector<Var> rows;
      std::vector<int> batch_labels;
      for (std::size_t k = begin; k < end; ++k) {
        const std::size_t j = order[k];
        batch_labels.push_back(labels[result.subset[j]]);
        if (options.freeze_encoder) {
          Var logits = matmul(tape.constant(features[j]),
                              tape.param(result.head.weight));
          rows.push_back(add_row_bias(logits, tape.param(result.head.bias)));
        } else {
          rows.push_back(
              classifier_forward(tape, grids[j], result.encoder, result.head));
        }
      }
      Var logits = concat_rows(rows);
      Var loss = cross_entropy(logits, batch_labels);
      const std::size_t b = end - begin;
      loss_sum += loss.value()[0] * static_cast<double>(b);
      const Tensor& z = logits.value();
      for (std::size_t r = 0; r < b; ++r) {
        std::span<const double> row(z.data() + r * z.cols(), z.cols());
        if (argmax(row) == batch_labels[r]) ++correct;
      }
      tape.backward(loss);
      const double progress =
          static_cast<double>(epoch) +
          static_cast<double>(step) / static_cast<double>(steps_per_epoch);
      adamw_step(params, result.optimizer, run.learning_rate(progress));
    }
    EpochMetrics m;
    m.epoch = epoch + 1;
    m.split = "train";
    m.loss = loss_sum / static_cast<double>(n);
    m.accuracy = static_cast<double>(correct) / static_cast<double>(n);
    m.seconds = seconds_since(start);
    if (!std::isfinite(m.loss)) {
      throw TrainingError("fine-tuning loss diverged in epoch " +
                          std::to_string(m.epoch));
    }
    result.metrics.epochs.push_back(m);
    if (on_epoch) on_epoch(m);
    if (options.eval_set != nullptr) {
      const auto eval_start = Clock::now();
      const EvalResult ev =
          evaluate(*options.eval_set, result.encoder, result.head);
      EpochMetrics t;
      t.epoch = epoch + 1;
      t.split = "test";
      t.loss = ev.loss;
      t.accuracy = ev.accuracy;
      t.seconds = seconds_since(eval_start);
      result.metrics.epochs.push_back(t);
      if (on_epoch) on_epoch(t);
    }
  }
  return result;
}

// ---- evaluation -----------------------------------------------------------

int argmax(std::span<const double> values) {
  if (values.empty()) throw ContractError("argmax of an empty row");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return static_cast<int>(best);
}

EvalResult evaluate_predictions(std::span<const int> labels,
                                std::span<const int> predictions,
                                std::size_t num_classes) {
  if (labels.size() != predictions.size()) {
    throw DimensionError(std::to_string(labels.size()) + " labels but " +
                         std::to_string(predictions.size()) + " predictions");
  }
  if (labels.empty()) throw ContractError("no predictions to evaluate");
  EvalResult r;
  r.count = labels.size();
  r.confusion.assign(num_classes, std::vector<std::size_t>(num_classes, 0));
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    for (int v : {labels[i], predictions[i]}) {
      if (v < 0 || static_cast<std::size_t>(v) >= num_classes) {
        throw LabelError("entry " + std::to_string(i) + " has class " +
                         std::to_string(v) + " outside [0, " +
                         std::to_string(num_classes) + ")");
      }
    }
    ++r.confusion[static_cast<std::size_t>(labels[i])]
                 [static_cast<std::size_t>(predictions[i])];
    if (labels[i] == predictions[i]) ++correct;
  }
  r.accuracy = static_cast<double>(correct) / static_cast<double>(r.count);
  return r;
}

EvalResult evaluate(const std::vector<LabeledSample>& data, EncoderParams& enc,
                    ClassifierHead& head) {
  if (data.empty()) throw ContractError("evaluation set is empty");
  std::vector<int> labels;
  std::vector<int> predictions;
  double loss = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const int y = data[i].label;
    if (y < 0 || static_cast<std::size_t>(y) >= head.num_classes) {
      throw LabelError("evaluation sample " + std::to_string(i) +
                       " has label " + std::to_string(y) + " outside [0, " +
                       std::to_string(head.num_classes) + ")");
    }
    check_image_fits(data[i].image, enc.config, i);
    Tape tape(false);
    const Tensor z = classifier_forward(tape, data[i].image, enc, head).value();
    const RowScore s = score_row(z.values(), y);
    loss += s.loss;
    labels.push_back(y);
    predictions.push_back(s.predicted);
  }
  EvalResult r = evaluate_predictions(labels, predictions, head.num_classes);
  r.loss = loss / static_cast<double>(data.size());
  return r;
}

void write_confusion_csv(std::ostream& out, const EvalResult& result) {
  out << "true\\predicted";
  for (std::size_t c = 0; c < result.confusion.size(); ++c) out << ',' << c;
  out << '\n';
  for (std::size_t r = 0; r < result.confusion.size(); ++r) {
    out << r;
    for (std::size_t v : result.confusion[r]) out << ',' << v;
    out << '\n';
  }
}

// ---- masking-ratio sweep --------------------------------------------------

std::vector<SweepRow> sweep_masking_ratio(
    const std::vector<LabeledSample>& train,
    const std::vector<LabeledSample>& test, const ModelConfig& model,
    const RunConfig& pretraining, const RunConfig& finetuning,
    const SweepOptions& options,
    const std::function<void(const SweepRow&)>& on_row) {
  if (options.ratios.empty() || options.strategies.empty()) {
    throw ConfigError("sweep needs at least one ratio and one strategy");
  }
  const std::vector<UnlabeledSample> unlabeled = drop_labels(train);
  FinetuneOptions ft;
  ft.label_fraction = options.label_fraction;
  std::vector<SweepRow> rows;
  for (MaskStrategy strategy : options.strategies) {
    for (double sigma : options.ratios) {
      RunConfig pre = pretraining;
      pre.sigma = sigma;
      pre.strategy = strategy;
      PretrainResult p = pretrain(unlabeled, model, pre);
      FinetuneResult f = finetune(train, &p.encoder, model, finetuning, ft);
      const EvalResult ev = evaluate(test, f.encoder, f.head);
      rows.push_back({strategy, sigma, ev.accuracy});
      if (on_row) on_row(rows.back());
    }
  }
  return rows;
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
  out << kSweepHeader << '\n';
  std::ostringstream line;
  line << std::setprecision(10);
  for (const SweepRow& r : rows) {
    line.str("");
    line << to_string(r.strategy) << ',' << r.sigma << ',' << r.accuracy;
    out << line.str() << '\n';
  }
}

}  // namespace regionmim
