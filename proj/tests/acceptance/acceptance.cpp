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


// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// non-zero when any criterion fails that was not declared a known failure
// with --known-failure N.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "regionmim/checkpoint.hpp"
#include "regionmim/cli.hpp"
#include "regionmim/dataset.hpp"
#include "regionmim/errors.hpp"
#include "regionmim/model.hpp"
#include "regionmim/patching.hpp"
#include "regionmim/synthetic.hpp"
#include "regionmim/training.hpp"
#include "regionmim/verification.hpp"
#include "../test_util.hpp"

namespace regionmim {
namespace {

namespace fs = std::filesystem;
using testing::read_file;
using testing::ScratchDir;
using testing::write_file;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok && pass) {
      pass = false;
      detail << "[failed: " << what << "] ";
    }
  }
};

double seconds_since(Clock::time_point t) {
  return std::chrono::duration<double>(Clock::now() - t).count();
}

std::size_t scalar_count(std::vector<NamedParameter> params) {
  std::size_t n = 0;
  for (const NamedParameter& p : params) n += p.param->value.size();
  return n;
}

// ---- 1 --------------------------------------------------------------------

void gradient_oracle(Outcome& o) {
  const auto start = Clock::now();
  const ModelConfig cfg = tiny_model_config();
  ModelParams shapes = init_parameters(cfg, 0);
  std::vector<NamedParameter> pre = shapes.encoder.parameters();
  for (auto& p : shapes.decoder.parameters()) pre.push_back(p);
  std::vector<NamedParameter> fine = shapes.encoder.parameters();
  for (auto& p : shapes.head.parameters()) fine.push_back(p);

  o.require(cfg.encoder.width == 8 && cfg.encoder.heads == 2 &&
                cfg.encoder.depth == 2 && cfg.decoder.depth == 1 &&
                cfg.decoder.width == 8 && cfg.encoder.patch_size == 4 &&
                cfg.encoder.max_tokens == 16,
            "tiny config");
  double worst = 0.0;
  std::string where;
  for (std::uint64_t seed : {1, 2, 3}) {
    const ModelGradCheck r = check_model_gradients(seed, 1e-5, 0.75);
    o.require(r.pretraining.scalars_checked == scalar_count(pre),
              "every pretraining scalar checked");
    o.require(r.finetuning.scalars_checked == scalar_count(fine),
              "every fine-tuning scalar checked");
    for (const GradCheckReport* g : {&r.pretraining, &r.finetuning}) {
      if (g->max_relative_error >= worst) {
        worst = g->max_relative_error;
        where = g->worst_parameter;
      }
    }
  }
  const double secs = seconds_since(start);
  o.require(worst < 1e-4, "max relative error < 1e-4");
  o.require(secs < 120.0, "runtime < 2 min");
  o.detail << "max rel err " << worst << " (" << where << "), "
           << scalar_count(pre) << " + " << scalar_count(fine)
           << " scalars x 3 seeds, " << std::fixed << std::setprecision(1)
           << secs << " s";
}

// ---- 2 --------------------------------------------------------------------

std::vector<std::size_t> valid_oracle(const MaskImage& mask, std::size_t t,
                                      double tau) {
  std::vector<std::size_t> out;
  const std::size_t gr = mask.height / t, gc = mask.width / t;
  for (std::size_t i = 0; i < gr * gc; ++i) {
    std::size_t set = 0;
    for (std::size_t y = (i / gc) * t; y < (i / gc + 1) * t; ++y) {
      for (std::size_t x = (i % gc) * t; x < (i % gc + 1) * t; ++x) {
        set += mask.at(y, x);
      }
    }
    // Strict comparison, done in integers: set / t^2 > tau.
    if (static_cast<double>(set) > tau * static_cast<double>(t * t)) {
      out.push_back(i);
    }
  }
  return out;
}

void masking_invariants(Outcome& o) {
  Rng rng(20260);
  std::size_t cases = 0, clamped = 0, empty = 0, region = 0;
  for (; cases < 12000; ++cases) {
    const std::size_t t = 1 + rng.uniform_index(16);
    const std::size_t h = t * (1 + rng.uniform_index(64 / t));
    const std::size_t w = t * (1 + rng.uniform_index(64 / t));
    MaskImage mask(h, w);
    const int kind = static_cast<int>(rng.uniform_index(4));
    const double density = rng.uniform();
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        bool bit = false;
        if (kind == 1) bit = rng.uniform() < density;
        if (kind == 2) bit = rng.uniform() < density * 0.02;
        if (kind == 3) bit = true;
        mask.at(y, x) = bit;
      }
    }
    if (kind == 0 && rng.uniform() < 0.8) {
      const std::size_t y0 = rng.uniform_index(h), x0 = rng.uniform_index(w);
      const std::size_t y1 = y0 + 1 + rng.uniform_index(h - y0);
      const std::size_t x1 = x0 + 1 + rng.uniform_index(w - x0);
      for (std::size_t y = y0; y < y1; ++y)
        for (std::size_t x = x0; x < x1; ++x) mask.at(y, x) = 1;
    }
    const double tau = rng.uniform() < 0.5 ? 0.0 : rng.uniform(0.0, 0.99);
    const std::vector<std::size_t> valid = compute_valid_set(mask, t, tau);
    if (valid != valid_oracle(mask, t, tau)) {
      o.require(false, "valid set equals pixel-loop oracle");
      break;
    }

    const std::size_t n = (h / t) * (w / t);
    // sigma = k / 1000 so floor(n * sigma) has an exact integer oracle.
    const std::uint64_t k = 1 + rng.uniform_index(999);
    const double sigma = static_cast<double>(k) / 1000.0;
    const std::size_t m = static_cast<std::size_t>(n * k / 1000);
    const MaskStrategy strategy =
        rng.uniform() < 0.7 ? MaskStrategy::kRegionGuided : MaskStrategy::kRandom;
    const std::uint64_t seed = rng.next_u64();

    if (strategy == MaskStrategy::kRegionGuided && valid.empty()) {
      bool threw = false;
      try {
        build_masking_plan(n, valid, sigma, strategy, seed);
      } catch (const StrategyError&) {
        threw = true;
      }
      o.require(threw, "empty valid set raises a strategy error");
      ++empty;
      continue;
    }
    const MaskingPlan plan = build_masking_plan(n, valid, sigma, strategy, seed);
    o.require(plan == build_masking_plan(n, valid, sigma, strategy, seed),
              "plan deterministic in seed");

    std::vector<int> seen(n, 0);
    for (std::size_t i : plan.masked) o.require(i < n && ++seen[i] == 1, "masked indices distinct");
    for (std::size_t i : plan.unmasked) o.require(i < n && ++seen[i] == 1, "partition is disjoint");
    o.require(std::all_of(seen.begin(), seen.end(), [](int s) { return s == 1; }),
              "masked and unmasked cover 0..n-1");
    o.require(std::is_sorted(plan.masked.begin(), plan.masked.end()) &&
                  std::is_sorted(plan.unmasked.begin(), plan.unmasked.end()),
              "ascending order");

    if (strategy == MaskStrategy::kRandom) {
      o.require(plan.m() == m, "m = floor(n sigma) (random)");
      o.require(!plan.clamped, "random never clamps");
      continue;
    }
    ++region;
    if (valid.size() >= m) {
      o.require(plan.m() == m, "m = floor(n sigma)");
      o.require(!plan.clamped, "no clamp when |valid| >= m");
      o.require(std::includes(valid.begin(), valid.end(), plan.masked.begin(),
                              plan.masked.end()),
                "masked subset of valid");
    } else {
      ++clamped;
      o.require(plan.clamped, "clamp flagged");
      o.require(plan.masked == valid, "clamped plan masks exactly the valid set");
    }
    if (!o.pass) break;
  }
  o.detail << cases << " cases (" << region << " region-guided, " << clamped
           << " clamped, " << empty << " empty-valid errors)";
  o.require(cases >= 10000, "at least 10^4 cases");
}

// ---- 3 --------------------------------------------------------------------

void loss_identities(Outcome& o) {
  Rng rng(33);
  double worst_oracle = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t m = 1 + rng.uniform_index(12);
    const std::size_t d = 1 + rng.uniform_index(48);
    Tensor x({m, d}), y({m, d}), x1({m, d});
    for (std::size_t i = 0; i < x.size(); ++i) {
      // Dyadic values keep x + 1 exact.
      x[i] = static_cast<double>(rng.uniform_index(256)) / 256.0;
      x1[i] = x[i] + 1.0;
      y[i] = rng.uniform(-3.0, 3.0);
    }
    Tape tape(false);
    const double same =
        reconstruction_loss(tape.constant(x), tape.constant(x)).value()[0];
    const double shifted =
        reconstruction_loss(tape.constant(x1), tape.constant(x)).value()[0];
    const double random =
        reconstruction_loss(tape.constant(y), tape.constant(x)).value()[0];
    double oracle = 0.0;
    for (std::size_t r = 0; r < m; ++r) {
      for (std::size_t c = 0; c < d; ++c) {
        const double diff = y.at(r, c) - x.at(r, c);
        oracle += diff * diff;
      }
    }
    oracle /= static_cast<double>(m * d);
    worst_oracle = std::max(worst_oracle, std::abs(random - oracle));
    o.require(same == 0.0, "L(X, X) = 0");
    o.require(shifted == 1.0, "L(X + 1, X) = 1 exactly");
  }
  o.require(worst_oracle <= 1e-12, "matches loop oracle within 1e-12");
  o.detail << "200 random shapes; max |loss - oracle| = " << worst_oracle;
}

// ---- 4 --------------------------------------------------------------------

void round_trips(Outcome& o) {
  Rng rng(44);
  std::size_t triples = 0;
  for (std::size_t h = 1; h <= 64 && o.pass; ++h) {
    for (std::size_t w = 1; w <= 64 && o.pass; ++w) {
      for (std::size_t t = 1; t <= std::min(h, w); ++t) {
        if (h % t || w % t) continue;
        const std::size_t c = (triples % 7 == 0) ? 3 : 1;
        ImageGrid img(h, w, c);
        for (double& v : img.pixels) v = rng.uniform();
        const ImageGrid back = reassemble_image(split_into_patches(img, t));
        if (back.height != h || back.width != w ||
            std::memcmp(back.pixels.data(), img.pixels.data(),
                        img.pixels.size() * sizeof(double)) != 0) {
          o.require(false, "split/reassemble identity");
          break;
        }
        ++triples;
      }
    }
  }

  ScratchDir dir("acceptance_ckpt");
  ModelParams p = init_parameters(tiny_model_config(), 4);
  auto params = p.parameters();
  // Stress the encoding with awkward values.
  params[0].param->value[0] = -0.0;
  params[0].param->value[1] = 4.9e-324;
  params[0].param->value[2] = 1.7976931348623157e308;
  params[0].param->value[3] = 0.1;
  Checkpoint c;
  store_model_config(c, tiny_model_config());
  store_parameters(c, params);
  save_checkpoint(dir / "a.ckpt", c);
  ModelParams q = init_parameters(tiny_model_config(), 5);
  restore_parameters(load_checkpoint(dir / "a.ckpt"), q.parameters());
  auto qa = q.parameters();
  std::size_t scalars = 0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Tensor& a = params[i].param->value;
    const Tensor& b = qa[i].param->value;
    o.require(a.shape() == b.shape() &&
                  std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0,
              "checkpoint bit-exact");
    scalars += a.size();
  }
  save_checkpoint(dir / "b.ckpt", load_checkpoint(dir / "a.ckpt"));
  o.require(read_file(dir / "a.ckpt") == read_file(dir / "b.ckpt"),
            "save-load-save byte identical");
  o.detail << triples << " (H, W, T) triples bitwise; checkpoint of " << scalars
           << " scalars bit-exact";
}

// ---- 5 --------------------------------------------------------------------

std::vector<LabeledSample> synthetic_set(std::size_t size, std::size_t per_class,
                                         std::uint64_t seed) {
  SyntheticSpec spec;
  spec.size = size;
  spec.patch_size = 4;
  std::vector<LabeledSample> out;
  for (int k = 0; k < 4; ++k) {
    for (std::size_t i = 0; i < per_class; ++i) {
      SyntheticSample s = synthesize_sample(
          spec, k, derive_seed(seed, {static_cast<std::uint64_t>(k), i}));
      out.push_back({std::move(s.image), std::move(s.mask), k});
    }
  }
  return out;
}

void overfit_smoke(Outcome& o) {
  const auto start = Clock::now();
  const auto data = drop_labels(synthetic_set(16, 2, 1));
  const ModelConfig model = tiny_model_config();
  RunConfig run;
  run.epochs = 300;  // 8 images, batch 8: one step per epoch
  run.batch_size = 8;
  run.base_lr = 3e-2 * 256 / 8;
  run.weight_decay = 0.0;
  run.sigma = 0.75;
  run.seed = 3;
  ModelParams init = init_parameters(model, run.seed);
  const double before = mean_reconstruction_loss(
      data, init.encoder, init.decoder, run.sigma, run.strategy, 77);
  PretrainResult r = pretrain(data, model, run);
  const double after = mean_reconstruction_loss(
      data, r.encoder, r.decoder, run.sigma, run.strategy, 77);
  const double secs = seconds_since(start);
  bool finite = true;
  for (const auto& e : r.metrics.epochs) finite = finite && std::isfinite(e.loss);
  o.require(r.optimizer.step == 300, "300 steps");
  o.require(finite, "finite epoch losses");
  o.require(after <= 0.1 * before, "final loss <= 10% of initial");
  o.require(secs < 300.0, "runtime < 5 min");
  o.detail << "loss " << before << " -> " << after << " (ratio "
           << after / before << "); epoch-mean " << r.metrics.epochs.front().loss
           << " -> " << r.metrics.epochs.back().loss << ", " << std::fixed
           << std::setprecision(1) << secs << " s";
}

// ---- 6 --------------------------------------------------------------------

struct Stats {
  double mean;
  double se;
};

Stats mean_se(const std::vector<double>& v) {
  const double n = static_cast<double>(v.size());
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / (n - 1.0) / n)};
}

void scarce_label_analogue(Outcome& o) {
  const auto start = Clock::now();
  ScratchDir dir("acceptance_corpus");
  SyntheticSpec spec;  // 32 x 32, 100 per class, 80/20 split
  spec.seed = 1;
  spec.patch_size = 8;
  const DatasetManifest m = generate_synthetic(spec, dir.path());
  const auto train = load_samples(m.split("train"), 32, 32);
  const auto test = load_samples(m.split("test"), 32, 32);
  const auto unlabeled = drop_labels(train);

  ModelConfig model;
  model.encoder.depth = 2;
  model.encoder.width = 32;
  model.encoder.heads = 4;
  model.encoder.mlp_dim = 128;
  model.encoder.patch_size = 8;
  model.encoder.max_tokens = 16;
  model.decoder.depth = 1;
  model.decoder.width = 16;
  model.decoder.heads = 2;
  model.decoder.mlp_dim = 64;

  RunConfig pre;  // sigma 0.75, wd 0.05, betas 0.9 / 0.95 as defaults
  pre.epochs = 150;
  pre.batch_size = 32;
  pre.base_lr = 3e-3 * 256 / 32;
  pre.schedule = LrSchedule::kCosine;
  pre.warmup_epochs = 3;
  RunConfig fine;
  fine.epochs = 30;
  fine.batch_size = 16;
  fine.base_lr = 1e-3 * 256 / 16;
  fine.schedule = LrSchedule::kCosine;

  const std::vector<double> fractions = {0.05, 0.10};
  const int seeds = 5;
  // acc[fraction][arm] over seeds; arms: region, random, scratch.
  std::vector<std::vector<std::vector<double>>> acc(
      fractions.size(), std::vector<std::vector<double>>(3));
  std::size_t clamped = 0, plans = 0;
  for (int s = 0; s < seeds; ++s) {
    pre.seed = fine.seed = 100 + static_cast<std::uint64_t>(s);
    pre.strategy = MaskStrategy::kRegionGuided;
    PretrainResult region = pretrain(unlabeled, model, pre);
    pre.strategy = MaskStrategy::kRandom;
    PretrainResult random = pretrain(unlabeled, model, pre);
    for (const auto& e : region.metrics.epochs) clamped += e.clamped_plans;
    plans += pre.epochs * unlabeled.size();
    for (std::size_t f = 0; f < fractions.size(); ++f) {
      FinetuneOptions opt;
      opt.label_fraction = fractions[f];
      const EncoderParams* encoders[] = {&region.encoder, &random.encoder, nullptr};
      for (int arm = 0; arm < 3; ++arm) {
        FinetuneResult r = finetune(train, encoders[arm], model, fine, opt);
        acc[f][arm].push_back(evaluate(test, r.encoder, r.head).accuracy);
      }
    }
  }
  const double secs = seconds_since(start);
  o.detail << std::setprecision(3);
  for (std::size_t f = 0; f < fractions.size(); ++f) {
    const Stats reg = mean_se(acc[f][0]), rnd = mean_se(acc[f][1]),
                scr = mean_se(acc[f][2]);
    o.detail << "f=" << fractions[f] << ": region " << reg.mean << " random "
             << rnd.mean << " scratch " << scr.mean;
    // Margins are judged on paired per-seed differences.
    for (int other : {2, 1}) {
      std::vector<double> diff;
      for (int s = 0; s < seeds; ++s) diff.push_back(acc[f][0][s] - acc[f][other][s]);
      const Stats d = mean_se(diff);
      const char* name = other == 2 ? "scratch" : "random";
      o.detail << " | region-" << name << " " << d.mean << " (SE " << d.se << ")";
      o.require(d.mean > d.se, std::string("region beats ") + name + " by > 1 SE");
    }
    o.detail << "; ";
  }
  o.require(secs < 1800.0, "runtime < 30 min");
  o.detail << seeds << " seeds, region plans clamped " << clamped << "/" << plans
           << ", " << std::fixed << std::setprecision(0) << secs << " s";
}

// ---- 7 / 8 / 9: through the command-line surface ---------------------------

int cli(std::vector<std::string> args, std::string* out = nullptr) {
  args.insert(args.begin(), "regionmim");
  std::ostringstream o, e;
  const int code = run_cli(args, o, e);
  if (out) *out = o.str();
  return code;
}

constexpr const char* kSmallConfig =
    "image_size = 16\npatch_size = 4\nsynthetic.size = 16\n"
    "synthetic.samples_per_class = 5\n"
    "encoder.depth = 2\nencoder.width = 8\nencoder.heads = 2\nencoder.mlp_dim = 32\n"
    "decoder.depth = 1\ndecoder.width = 8\ndecoder.heads = 2\ndecoder.mlp_dim = 32\n"
    "pretrain.epochs = 3\npretrain.batch = 4\npretrain.lr = 0.2\n"
    "finetune.epochs = 3\nfinetune.batch = 4\nfinetune.lr = 0.2\n";

void sweep_harness(Outcome& o) {
  ScratchDir dir("acceptance_sweep");
  write_file(dir / "small.cfg", kSmallConfig);
  const std::string cfg = (dir / "small.cfg").string();
  const std::string data = (dir / "data").string();
  o.require(cli({"gen-data", "--config", cfg, "--out", data}) == 0, "gen-data");
  std::string csv[2];
  for (int run = 0; run < 2; ++run) {
    const std::string out = (dir / ("sweep" + std::to_string(run))).string();
    o.require(cli({"sweep", "--config", cfg, "--manifest", data + "/manifest.csv",
                   "--out", out}) == 0,
              "sweep exits 0");
    csv[run] = read_file(fs::path(out) / "sweep.csv");
  }
  o.require(csv[0] == csv[1], "deterministic CSV");
  std::istringstream in(csv[0]);
  std::string line;
  std::getline(in, line);
  o.require(line == "strategy,sigma,accuracy", "header");
  const std::vector<std::string> ratios = {"0.15", "0.3", "0.45", "0.6", "0.75", "0.9"};
  std::size_t rows = 0;
  for (const char* strategy : {"region", "random"}) {
    for (const std::string& r : ratios) {
      if (!std::getline(in, line)) break;
      ++rows;
      const std::string prefix = std::string(strategy) + "," + r + ",";
      o.require(line.rfind(prefix, 0) == 0, "row " + prefix);
      const double a = std::stod(line.substr(prefix.size()));
      o.require(a >= 0.0 && a <= 1.0, "accuracy in [0, 1]");
    }
  }
  o.require(rows == 12 && !std::getline(in, line), "2 x 6 grid");
  o.detail << rows << " rows (2 strategies x 6 ratios), identical on rerun";
}

// Text with every occurrence of the run root replaced, so paths echoed into
// logs, manifests and resolved configs compare equal across roots.
std::string relative_text(const fs::path& file, const fs::path& root) {
  std::string text = read_file(file);
  const std::string needle = root.string();
  for (std::size_t at = text.find(needle); at != std::string::npos;
       at = text.find(needle, at)) {
    text.replace(at, needle.size(), "<root>");
  }
  return text;
}

// Every file under a and b must match byte for byte once the roots are
// factored out.
bool same_outputs(const fs::path& a, const fs::path& b, std::size_t& files,
                  std::string& first_diff) {
  std::set<std::string> names_a, names_b;
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (e.is_regular_file()) names_a.insert(fs::relative(e.path(), a).string());
  }
  for (const auto& e : fs::recursive_directory_iterator(b)) {
    if (e.is_regular_file()) names_b.insert(fs::relative(e.path(), b).string());
  }
  if (names_a != names_b) {
    first_diff = "file sets differ";
    return false;
  }
  for (const std::string& n : names_a) {
    if (relative_text(a / n, a) != relative_text(b / n, b)) {
      first_diff = n;
      return false;
    }
    ++files;
  }
  return true;
}

void determinism(Outcome& o) {
  ScratchDir dir("acceptance_det");
  write_file(dir / "small.cfg", kSmallConfig);
  const std::string cfg = (dir / "small.cfg").string();
  std::size_t files = 0;
  std::vector<std::string> commands;
  for (int run = 0; run < 2; ++run) {
    const fs::path root = dir / ("run" + std::to_string(run));
    const std::string manifest = (root / "data" / "manifest.csv").string();
    auto go = [&](std::vector<std::string> args, const std::string& out) {
      args.insert(args.end(), {"--config", cfg, "--seed", "11", "--out",
                               (root / out).string()});
      if (args[0] != "gen-data" && args[0] != "grad-check") {
        args.insert(args.end(), {"--manifest", manifest});
      }
      std::string stdout_text;
      o.require(cli(args, &stdout_text) == 0, args[0] + " exits 0");
      write_file(root / out / "stdout.txt", stdout_text);
      if (run == 0) commands.push_back(args[0]);
    };
    go({"gen-data"}, "data");
    go({"pretrain"}, "pre");
    go({"finetune", "--checkpoint", (root / "pre" / "pretrain.ckpt").string(),
        "--label-fraction", "0.5"}, "ft");
    go({"finetune", "--freeze-encoder"}, "probe");
    go({"eval", "--checkpoint", (root / "ft" / "finetune.ckpt").string()}, "ev");
    go({"mask-viz", "--index", "2"}, "viz");
    go({"sweep", "--set", "sweep.ratios=0.5,0.75"}, "sweep");
    go({"grad-check"}, "grad");
  }
  std::string first_diff;
  o.require(same_outputs(dir / "run0", dir / "run1", files, first_diff),
            "byte-identical outputs " + first_diff);
  o.detail << commands.size() << " commands twice; " << files
           << " output files byte-identical (metrics CSVs, checkpoints, PGMs)";
}

void defaults_audit(Outcome& o) {
  std::string text;
  std::map<std::string, std::string> resolved;
  for (const char* cmd : {"pretrain", "finetune"}) {
    o.require(cli({cmd, "--print-config"}, &text) == 0, "print-config");
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
      const auto eq = line.find(" = ");
      if (eq != std::string::npos) resolved[line.substr(0, eq)] = line.substr(eq + 3);
    }
  }
  const std::map<std::string, std::string> table = {
      {"pretrain.epochs", "40"},      {"finetune.epochs", "30"},
      {"pretrain.batch", "256"},      {"finetune.batch", "256"},
      {"pretrain.lr", "1.5e-4"},      {"finetune.lr", "1.5e-4"},
      {"pretrain.weight_decay", "0.05"}, {"finetune.weight_decay", "0.05"},
      {"pretrain.beta1", "0.9"},      {"pretrain.beta2", "0.95"},
      {"finetune.beta1", "0.9"},      {"finetune.beta2", "0.95"},
      {"patch_size", "16"},           {"mask_ratio", "0.75"},
  };
  std::size_t checked = 0;
  for (const auto& [key, value] : table) {
    o.require(resolved[key] == value, key + " = " + value);
    ++checked;
  }
  const RunConfig pre = RunConfig::pretraining_defaults();
  const RunConfig fine = RunConfig::finetuning_defaults();
  o.require(pre.epochs == 40 && fine.epochs == 30 && pre.batch_size == 256 &&
                pre.base_lr == 1.5e-4 && pre.weight_decay == 0.05 &&
                pre.beta1 == 0.9 && pre.beta2 == 0.95 && pre.sigma == 0.75 &&
                EncoderConfig{}.patch_size == 16,
            "library defaults");
  o.detail << checked << " resolved keys and the library defaults match";
}

}  // namespace
}  // namespace regionmim

int main(int argc, char** argv) {
  using namespace regionmim;
  std::set<int> known_failures, only;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--known-failure" && i + 1 < argc) {
      known_failures.insert(std::stoi(argv[++i]));
    } else if (a == "--only" && i + 1 < argc) {
      only.insert(std::stoi(argv[++i]));
    } else {
      std::cerr << "usage: acceptance [--only N]... [--known-failure N]...\n";
      return 2;
    }
  }
  const std::vector<std::pair<std::string, std::function<void(Outcome&)>>> criteria = {
      {"gradient oracle", gradient_oracle},
      {"masking invariants", masking_invariants},
      {"loss identities", loss_identities},
      {"round trips", round_trips},
      {"overfit smoke", overfit_smoke},
      {"scarce-label directional analogue", scarce_label_analogue},
      {"sweep harness", sweep_harness},
      {"determinism", determinism},
      {"defaults audit", defaults_audit},
  };
  int unexpected = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i + 1);
    if (!only.empty() && !only.count(id)) continue;
    Outcome o;
    try {
      criteria[i].second(o);
    } catch (const std::exception& e) {
      o.require(false, std::string("exception: ") + e.what());
    }
    const bool known = known_failures.count(id) > 0;
    std::cout << (o.pass ? "PASS" : "FAIL") << ' ' << id << ' '
              << criteria[i].first << ": " << o.detail.str();
    if (!o.pass && known) std::cout << " (known failure, see README)";
    std::cout << std::endl;
    if (!o.pass && !known) ++unexpected;
  }
  return unexpected == 0 ? 0 : 1;
}
