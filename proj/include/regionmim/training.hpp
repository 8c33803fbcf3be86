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

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "regionmim/adamw.hpp"
#include "regionmim/dataset.hpp"
#include "regionmim/model.hpp"
#include "regionmim/patching.hpp"

namespace regionmim {

enum class LrSchedule { kConstant, kCosine };

std::string_view to_string(LrSchedule schedule);
LrSchedule parse_lr_schedule(std::string_view text);

// Hyperparameters for one training phase. The defaults are the full-scale
// pretraining settings; finetuning_defaults() differs only in epoch count.
struct RunConfig {
  std::size_t epochs = 40;
  std::size_t batch_size = 256;
  double base_lr = 1.5e-4;
  double weight_decay = 0.05;
  double beta1 = 0.9;
  double beta2 = 0.95;
  double adam_eps = 1e-8;
  double sigma = 0.75;
  MaskStrategy strategy = MaskStrategy::kRegionGuided;
  double overlap_threshold = 0.0;
  std::uint64_t seed = 0;
  LrSchedule schedule = LrSchedule::kConstant;
  std::size_t warmup_epochs = 0;

  static RunConfig pretraining_defaults() { return RunConfig{}; }
  static RunConfig finetuning_defaults() {
    RunConfig r;
    r.epochs = 30;
    return r;
  }
  void validate() const;
  // base_lr * batch_size / 256, optionally shaped by warmup and cosine decay.
  // `progress` is the fractional epoch in [0, epochs).
  double learning_rate(double progress) const;
};

struct EpochMetrics {
  std::size_t epoch = 0;  // 1-based
  std::string split;      // "pretrain", "train" or "test"
  double loss = 0.0;
  std::optional<double> accuracy;
  double seconds = 0.0;
  std::size_t clamped_plans = 0;
};

struct MetricsRecord {
  std::vector<EpochMetrics> epochs;
};

inline constexpr const char* kMetricsHeader =
    "epoch,split,loss,accuracy,seconds,clamped_plans";

// Line-oriented CSV. Wall-clock seconds vary between runs, so the column is
// left empty unless include_seconds is set.
void write_metrics_csv(std::ostream& out, const MetricsRecord& metrics,
                       bool include_seconds = false);

using EpochCallback = std::function<void(const EpochMetrics&)>;

struct PretrainResult {
  EncoderParams encoder;
  DecoderParams decoder;
  AdamWState optimizer;
  MetricsRecord metrics;
};

// Self-supervised masked-patch reconstruction. Labels are not part of the
// input type. Every epoch reshuffles the data and draws a fresh masking plan
// per sample.
PretrainResult pretrain(const std::vector<UnlabeledSample>& data,
                        const ModelConfig& model, const RunConfig& run,
                        const EpochCallback& on_epoch = {});

// Mean reconstruction loss over `data` with one plan per sample drawn from
// `seed`; no parameters change.
double mean_reconstruction_loss(const std::vector<UnlabeledSample>& data,
                                EncoderParams& enc, DecoderParams& dec,
                                double sigma, MaskStrategy strategy,
                                std::uint64_t seed,
                                double overlap_threshold = 0.0);

// Per class c, ceil(fraction * n_c) sample indices drawn by seeded shuffle,
// returned in ascending order. Throws StratificationError when a class in
// [0, num_classes) has no samples.
std::vector<std::size_t> stratified_subset(std::span<const int> labels,
                                           std::size_t num_classes,
                                           double fraction,
                                           std::uint64_t seed);

struct FinetuneOptions {
  double label_fraction = 1.0;
  bool freeze_encoder = false;
  // When set, test loss and accuracy are recorded after every epoch.
  const std::vector<LabeledSample>* eval_set = nullptr;
};

struct FinetuneResult {
  EncoderParams encoder;
  ClassifierHead head;
  AdamWState optimizer;
  MetricsRecord metrics;
  std::vector<std::size_t> subset;  // indices into the training data
};

// Supervised training of encoder + fresh linear head with cross-entropy.
// `pretrained` null means training from scratch with an encoder initialized
// from run.seed (the same draw pretraining starts from).
FinetuneResult finetune(const std::vector<LabeledSample>& data,
                        const EncoderParams* pretrained,
                        const ModelConfig& model, const RunConfig& run,
                        const FinetuneOptions& options = {},
                        const EpochCallback& on_epoch = {});

struct EvalResult {
  double accuracy = 0.0;
  double loss = 0.0;  // mean cross-entropy, 0 when computed from predictions
  std::size_t count = 0;
  // confusion[true][predicted]
  std::vector<std::vector<std::size_t>> confusion;
};

// Index of the largest value; ties go to the lowest index.
int argmax(std::span<const double> values);

EvalResult evaluate_predictions(std::span<const int> labels,
                                std::span<const int> predictions,
                                std::size_t num_classes);

EvalResult evaluate(const std::vector<LabeledSample>& data, EncoderParams& enc,
                    ClassifierHead& head);

void write_confusion_csv(std::ostream& out, const EvalResult& result);

struct SweepRow {
  MaskStrategy strategy;
  double sigma;
  double accuracy;
};

struct SweepOptions {
  std::vector<double> ratios = {0.15, 0.30, 0.45, 0.60, 0.75, 0.90};
  std::vector<MaskStrategy> strategies = {MaskStrategy::kRegionGuided,
                                          MaskStrategy::kRandom};
  double label_fraction = 1.0;
};

// pretrain -> finetune -> evaluate for every (strategy, ratio) cell with the
// seeds in `pretraining` and `finetuning`. Rows are strategy-major.
std::vector<SweepRow> sweep_masking_ratio(
    const std::vector<LabeledSample>& train,
    const std::vector<LabeledSample>& test, const ModelConfig& model,
    const RunConfig& pretraining, const RunConfig& finetuning,
    const SweepOptions& options,
    const std::function<void(const SweepRow&)>& on_row = {});

inline constexpr const char* kSweepHeader = "strategy,sigma,accuracy";
void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows);

}  // namespace regionmim
