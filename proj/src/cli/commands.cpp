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


#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "regionmim/checkpoint.hpp"
#include "regionmim/cli.hpp"
#include "regionmim/dataset.hpp"
#include "regionmim/errors.hpp"
#include "regionmim/pgm.hpp"
#include "regionmim/synthetic.hpp"
#include "regionmim/verification.hpp"

namespace regionmim {
namespace {

namespace fs = std::filesystem;

constexpr double kGradCheckTolerance = 1e-4;

struct Flags {
  std::optional<std::string> config, manifest, out, checkpoint, strategy;
  std::optional<std::uint64_t> seed;
  // Reals are kept as typed so the resolved config echoes them verbatim.
  std::optional<std::string> mask_ratio, lr, label_fraction;
  std::optional<std::size_t> patch_size, epochs, batch, image_size, index;
  std::vector<std::string> sets;
  bool freeze_encoder = false;
  bool timing = false;
  bool print_config = false;
};

void add_common_flags(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config, "key = value config file");
  cmd->add_option("--manifest", f.manifest, "dataset manifest CSV");
  cmd->add_option("--out", f.out, "output directory");
  cmd->add_option("--seed", f.seed, "base random seed");
  cmd->add_option("--mask-strategy", f.strategy, "region | random");
  cmd->add_option("--mask-ratio", f.mask_ratio, "masking ratio sigma")
      ->type_name("FLOAT");
  cmd->add_option("--patch-size", f.patch_size, "patch side T");
  cmd->add_option("--epochs", f.epochs, "epochs for this command's phase");
  cmd->add_option("--batch", f.batch, "batch size for this command's phase");
  cmd->add_option("--lr", f.lr, "base learning rate for this command's phase")
      ->type_name("FLOAT");
  cmd->add_option("--label-fraction", f.label_fraction,
                  "fraction of labeled samples per class")
      ->type_name("FLOAT");
  cmd->add_flag("--freeze-encoder", f.freeze_encoder,
                "fine-tune only the linear head");
  cmd->add_option("--checkpoint", f.checkpoint, "input checkpoint");
  cmd->add_option("--image-size", f.image_size, "square resize target");
  cmd->add_option("--index", f.index, "manifest record for mask-viz");
  cmd->add_option("--set", f.sets, "extra key=value override (repeatable)");
  cmd->add_flag("--timing", f.timing, "record wall-clock seconds in metrics");
  cmd->add_flag("--print-config", f.print_config,
                "print the resolved configuration and exit");
}

Settings resolve(const std::string& command, const Flags& f) {
  Settings s;
  if (f.config) s.load_file(*f.config);
  for (const std::string& kv : f.sets) {
    const std::size_t eq = kv.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("--set expects key=value, got '" + kv + "'");
    }
    auto trim = [](std::string t) {
      t.erase(0, t.find_first_not_of(" \t"));
      t.erase(t.find_last_not_of(" \t") + 1);
      return t;
    };
    s.set(trim(kv.substr(0, eq)), trim(kv.substr(eq + 1)), "--set");
  }
  std::vector<std::string> phases;
  if (command == "pretrain") {
    phases = {"pretrain"};
  } else if (command == "finetune") {
    phases = {"finetune"};
  } else {
    phases = {"pretrain", "finetune"};
  }
  if (f.manifest) s.set("manifest", *f.manifest, "--manifest");
  if (f.out) s.set("out", *f.out, "--out");
  if (f.checkpoint) s.set("checkpoint", *f.checkpoint, "--checkpoint");
  if (f.seed) s.set("seed", std::to_string(*f.seed), "--seed");
  if (f.strategy) s.set("mask_strategy", *f.strategy, "--mask-strategy");
  if (f.mask_ratio) s.set("mask_ratio", *f.mask_ratio, "--mask-ratio");
  if (f.patch_size) s.set("patch_size", std::to_string(*f.patch_size), "--patch-size");
  if (f.image_size) s.set("image_size", std::to_string(*f.image_size), "--image-size");
  if (f.index) s.set("viz.index", std::to_string(*f.index), "--index");
  if (f.label_fraction) {
    s.set("label_fraction", *f.label_fraction, "--label-fraction");
  }
  if (f.freeze_encoder) s.set("freeze_encoder", "true");
  if (f.timing) s.set("timing", "true");
  for (const std::string& p : phases) {
    if (f.epochs) s.set(p + ".epochs", std::to_string(*f.epochs), "--epochs");
    if (f.batch) s.set(p + ".batch", std::to_string(*f.batch), "--batch");
    if (f.lr) s.set(p + ".lr", *f.lr, "--lr");
  }
  return s;
}

struct Context {
  std::string command;
  Settings settings;
  std::ostream& out;
  std::ostream& err;
};

void write_text(const fs::path& path, const std::string& text) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw IngestionError(tmp.string() + ": cannot open for writing");
    f << text;
    f.flush();
    if (!f) throw IngestionError(tmp.string() + ": write failed");
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IngestionError(path.string() + ": " + ec.message());
}

// Creates the output directory and records the resolved configuration in it.
fs::path prepare_out(const Context& ctx, bool required = true) {
  const std::string& dir = ctx.settings.text("out");
  if (dir.empty()) {
    if (required) throw ConfigError(ctx.command + " needs --out");
    return {};
  }
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IngestionError(dir + ": " + ec.message());
  write_text(fs::path(dir) / "resolved-config.txt",
             "# regionmim " + ctx.command + "\n" + ctx.settings.render());
  return dir;
}

DatasetManifest manifest_of(const Context& ctx) {
  const std::string& path = ctx.settings.text("manifest");
  if (path.empty()) throw ConfigError(ctx.command + " needs --manifest");
  return load_manifest(path);
}

std::vector<LabeledSample> load_split(const Context& ctx,
                                      const DatasetManifest& m,
                                      const std::string& split) {
  const std::size_t side = ctx.settings.size_value("image_size");
  return load_samples(m.split(split), side, side);
}

void write_image(const fs::path& path, const ImageGrid& img) {
  std::vector<std::uint8_t> px(img.height * img.width);
  for (std::size_t i = 0; i < px.size(); ++i) {
    const double v = std::clamp(img.pixels[i * img.channels], 0.0, 1.0);
    px[i] = static_cast<std::uint8_t>(std::lround(v * 255.0));
  }
  write_pgm(path, img.width, img.height, px);
}

std::string metrics_text(const MetricsRecord& m, bool timing) {
  std::ostringstream s;
  write_metrics_csv(s, m, timing);
  return s.str();
}

EpochCallback progress(const Context& ctx, std::size_t epochs) {
  return [&ctx, epochs](const EpochMetrics& e) {
    ctx.err << ctx.command << ": epoch " << e.epoch << '/' << epochs << ' '
            << e.split << " loss " << e.loss;
    if (e.accuracy) ctx.err << " accuracy " << *e.accuracy;
    if (e.split == "pretrain") ctx.err << " clamped " << e.clamped_plans;
    ctx.err << '\n';
  };
}

// Settings that define the run (paths and timing excluded) go into every
// checkpoint so two identical runs write identical bytes.
void store_settings(Checkpoint& ckpt, const Settings& s, const std::string& kind) {
  for (const SettingSpec& spec : setting_specs()) {
    if (spec.key == "manifest" || spec.key == "out" ||
        spec.key == "checkpoint" || spec.key == "timing") {
      continue;
    }
    ckpt.config["settings." + spec.key] = s.text(spec.key);
  }
  ckpt.config["run.kind"] = kind;
}

void store_optimizer(Checkpoint& ckpt, const std::vector<NamedParameter>& params,
                     const AdamWState& state) {
  ckpt.config["optimizer.step"] = std::to_string(state.step);
  for (std::size_t i = 0; i < params.size(); ++i) {
    ckpt.put("optimizer.first_moment/" + params[i].name, state.first_moment[i]);
    ckpt.put("optimizer.second_moment/" + params[i].name, state.second_moment[i]);
  }
}

Checkpoint load_checked(const Context& ctx, const ModelConfig& expected,
                        const std::string& kind) {
  const std::string& path = ctx.settings.text("checkpoint");
  if (path.empty()) throw ConfigError(ctx.command + " needs --checkpoint");
  Checkpoint ckpt = load_checkpoint(path);
  const ModelConfig stored = read_model_config(ckpt);
  if (!(stored.encoder == expected.encoder)) {
    throw ConfigError(path + ": checkpoint encoder (width " +
                      std::to_string(stored.encoder.width) + ", depth " +
                      std::to_string(stored.encoder.depth) + ", T " +
                      std::to_string(stored.encoder.patch_size) +
                      ") does not match the resolved configuration (width " +
                      std::to_string(expected.encoder.width) + ", depth " +
                      std::to_string(expected.encoder.depth) + ", T " +
                      std::to_string(expected.encoder.patch_size) + ")");
  }
  auto it = ckpt.config.find("run.kind");
  if (!kind.empty() && (it == ckpt.config.end() || it->second != kind)) {
    throw ConfigError(path + ": expected a " + kind + " checkpoint");
  }
  return ckpt;
}

EncoderParams encoder_from(const Checkpoint& ckpt, const EncoderConfig& cfg) {
  Rng rng(0);
  EncoderParams enc = init_encoder(cfg, rng);
  restore_parameters(ckpt, enc.parameters());
  return enc;
}

// ---- subcommands ----------------------------------------------------------

int cmd_gen_data(Context& ctx) {
  const fs::path dir = prepare_out(ctx);
  SyntheticSpec spec;
  spec.size = ctx.settings.size_value("synthetic.size");
  spec.samples_per_class = ctx.settings.size_value("synthetic.samples_per_class");
  spec.train_fraction = ctx.settings.real("synthetic.train_fraction");
  spec.patch_size = ctx.settings.size_value("patch_size");
  spec.seed = ctx.settings.unsigned_value("seed");
  try {
    spec.validate();
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  const DatasetManifest m = generate_synthetic(spec, dir);
  ctx.out << "wrote " << m.records.size() << " samples and "
          << (dir / "manifest.csv").string() << '\n';
  return 0;
}

int cmd_pretrain(Context& ctx) {
  const DatasetManifest manifest = manifest_of(ctx);
  const ModelConfig model = ctx.settings.model_config(manifest.num_classes);
  const RunConfig run = ctx.settings.run_config("pretrain");
  const fs::path dir = prepare_out(ctx);
  const std::vector<UnlabeledSample> data =
      drop_labels(load_split(ctx, manifest, "train"));
  PretrainResult r = pretrain(data, model, run, progress(ctx, run.epochs));

  Checkpoint ckpt;
  store_model_config(ckpt, model);
  store_settings(ckpt, ctx.settings, "pretrain");
  std::vector<NamedParameter> params = r.encoder.parameters();
  for (const NamedParameter& p : r.decoder.parameters()) params.push_back(p);
  store_parameters(ckpt, params);
  store_optimizer(ckpt, params, r.optimizer);
  save_checkpoint(dir / "pretrain.ckpt", ckpt);
  write_text(dir / "metrics.csv",
             metrics_text(r.metrics, ctx.settings.flag("timing")));
  ctx.out << "final pretraining loss " << r.metrics.epochs.back().loss << '\n';
  return 0;
}

int cmd_finetune(Context& ctx) {
  const DatasetManifest manifest = manifest_of(ctx);
  const ModelConfig model = ctx.settings.model_config(manifest.num_classes);
  const RunConfig run = ctx.settings.run_config("finetune");
  std::optional<EncoderParams> pretrained;
  if (!ctx.settings.text("checkpoint").empty()) {
    pretrained = encoder_from(load_checked(ctx, model, "pretrain"), model.encoder);
  }
  const fs::path dir = prepare_out(ctx);
  const std::vector<LabeledSample> train = load_split(ctx, manifest, "train");
  const std::vector<LabeledSample> test = load_split(ctx, manifest, "test");
  FinetuneOptions options;
  options.label_fraction = ctx.settings.real("label_fraction");
  options.freeze_encoder = ctx.settings.flag("freeze_encoder");
  if (!test.empty()) options.eval_set = &test;
  FinetuneResult r = finetune(train, pretrained ? &*pretrained : nullptr, model,
                              run, options, progress(ctx, run.epochs));

  Checkpoint ckpt;
  store_model_config(ckpt, model);
  store_settings(ckpt, ctx.settings, "finetune");
  std::vector<NamedParameter> params = r.encoder.parameters();
  for (const NamedParameter& p : r.head.parameters()) params.push_back(p);
  store_parameters(ckpt, params);
  std::vector<NamedParameter> trained =
      options.freeze_encoder ? r.head.parameters() : params;
  store_optimizer(ckpt, trained, r.optimizer);
  save_checkpoint(dir / "finetune.ckpt", ckpt);
  write_text(dir / "metrics.csv",
             metrics_text(r.metrics, ctx.settings.flag("timing")));
  ctx.out << "trained on " << r.subset.size() << " labeled samples; final "
          << "train accuracy " << *r.metrics.epochs[r.metrics.epochs.size() -
                                                    (test.empty() ? 1 : 2)]
                                        .accuracy
          << '\n';
  return 0;
}

int cmd_eval(Context& ctx) {
  const DatasetManifest manifest = manifest_of(ctx);
  const ModelConfig model = ctx.settings.model_config(manifest.num_classes);
  const Checkpoint ckpt = load_checked(ctx, model, "finetune");
  const ModelConfig stored = read_model_config(ckpt);
  if (stored.num_classes != manifest.num_classes) {
    throw ConfigError("checkpoint has " + std::to_string(stored.num_classes) +
                      " classes, manifest has " +
                      std::to_string(manifest.num_classes));
  }
  EncoderParams enc = encoder_from(ckpt, model.encoder);
  Rng rng(0);
  ClassifierHead head = init_classifier(model.encoder.width, model.num_classes, rng);
  restore_parameters(ckpt, head.parameters());
  const fs::path dir = prepare_out(ctx, false);
  const std::vector<LabeledSample> test = load_split(ctx, manifest, "test");
  const EvalResult r = evaluate(test, enc, head);
  std::ostringstream summary;
  summary << std::setprecision(10) << "split,count,accuracy,loss\n"
          << "test," << r.count << ',' << r.accuracy << ',' << r.loss << '\n';
  std::ostringstream confusion;
  write_confusion_csv(confusion, r);
  if (!dir.empty()) {
    write_text(dir / "eval.csv", summary.str());
    write_text(dir / "confusion.csv", confusion.str());
  }
  ctx.out << "accuracy " << r.accuracy << " on " << r.count << " test samples\n"
          << confusion.str();
  return 0;
}

int cmd_mask_viz(Context& ctx) {
  const DatasetManifest manifest = manifest_of(ctx);
  const std::size_t index = ctx.settings.size_value("viz.index");
  if (index >= manifest.records.size()) {
    throw ConfigError("viz.index " + std::to_string(index) + " is past the " +
                      std::to_string(manifest.records.size()) + " records");
  }
  const fs::path dir = prepare_out(ctx);
  const std::size_t side = ctx.settings.size_value("image_size");
  const std::size_t patch = ctx.settings.size_value("patch_size");
  const LabeledSample s = load_sample(manifest.records[index], side, side);
  const PatchGrid grid = split_into_patches(s.image, patch);
  const std::vector<std::size_t> valid = compute_valid_set(
      s.image, s.mask, patch, ctx.settings.real("overlap_threshold"));
  const MaskingPlan plan = build_masking_plan(
      grid.count(), valid, ctx.settings.real("mask_ratio"),
      parse_mask_strategy(ctx.settings.text("mask_strategy")),
      derive_seed(ctx.settings.unsigned_value("seed"), {index}));

  ImageGrid mask_img(side, side);
  for (std::size_t i = 0; i < s.mask.bits.size(); ++i) mask_img.pixels[i] = s.mask.bits[i];

  // Patches outside the valid set are dimmed; masked patches are blanked.
  std::map<std::size_t, std::vector<double>> dimmed, blanked;
  std::vector<bool> is_valid(grid.count(), false);
  for (std::size_t i : valid) is_valid[i] = true;
  for (std::size_t i = 0; i < grid.count(); ++i) {
    if (is_valid[i]) continue;
    std::vector<double> row(grid.patches.data() + i * grid.patch_dim(),
                            grid.patches.data() + (i + 1) * grid.patch_dim());
    for (double& v : row) v *= 0.3;
    dimmed[i] = std::move(row);
  }
  for (std::size_t i : plan.masked) {
    blanked[i] = std::vector<double>(grid.patch_dim(), 0.0);
  }
  write_image(dir / "image.pgm", s.image);
  write_image(dir / "organ_mask.pgm", mask_img);
  write_image(dir / "valid_patches.pgm", reassemble_image(grid, dimmed));
  write_image(dir / "masked.pgm", reassemble_image(grid, blanked));

  std::ostringstream text;
  auto list = [&](const std::vector<std::size_t>& v) {
    for (std::size_t k = 0; k < v.size(); ++k) text << (k ? " " : "") << v[k];
    text << '\n';
  };
  text << "record " << index << '\n'
       << "strategy " << to_string(plan.strategy) << '\n'
       << "n " << plan.n << "\nm " << plan.m() << "\nu " << plan.u() << '\n'
       << "clamped " << (plan.clamped ? "true" : "false") << '\n'
       << "valid ";
  list(plan.valid);
  text << "masked ";
  list(plan.masked);
  text << "unmasked ";
  list(plan.unmasked);
  write_text(dir / "plan.txt", text.str());
  ctx.out << text.str();
  return 0;
}

int cmd_sweep(Context& ctx) {
  const DatasetManifest manifest = manifest_of(ctx);
  const ModelConfig model = ctx.settings.model_config(manifest.num_classes);
  const RunConfig pre = ctx.settings.run_config("pretrain");
  const RunConfig fine = ctx.settings.run_config("finetune");
  SweepOptions options;
  options.ratios = ctx.settings.ratios("sweep.ratios");
  options.strategies = ctx.settings.strategies("sweep.strategies");
  options.label_fraction = ctx.settings.real("label_fraction");
  const fs::path dir = prepare_out(ctx);
  const std::vector<LabeledSample> train = load_split(ctx, manifest, "train");
  const std::vector<LabeledSample> test = load_split(ctx, manifest, "test");
  const auto rows = sweep_masking_ratio(
      train, test, model, pre, fine, options, [&](const SweepRow& row) {
        ctx.err << "sweep: " << to_string(row.strategy) << " sigma "
                << row.sigma << " accuracy " << row.accuracy << '\n';
      });
  std::ostringstream csv;
  write_sweep_csv(csv, rows);
  write_text(dir / "sweep.csv", csv.str());
  ctx.out << csv.str();
  return 0;
}

int cmd_grad_check(Context& ctx) {
  const fs::path dir = prepare_out(ctx, false);
  const ModelGradCheck r = check_model_gradients(
      ctx.settings.unsigned_value("seed"), ctx.settings.real("gradcheck.h"),
      ctx.settings.real("mask_ratio"));
  std::ostringstream text;
  text << std::setprecision(6);
  auto line = [&](const char* name, const GradCheckReport& g) {
    text << name << " max relative error " << g.max_relative_error << " over "
         << g.scalars_checked << " scalars (worst " << g.worst_parameter << '['
         << g.worst_index << "])\n";
  };
  line("pretraining", r.pretraining);
  line("fine-tuning", r.finetuning);
  const double worst = r.max_relative_error();
  const bool pass = worst < kGradCheckTolerance;
  text << "max relative error " << worst << (pass ? " < " : " >= ")
       << kGradCheckTolerance << '\n';
  if (!dir.empty()) write_text(dir / "gradcheck.txt", text.str());
  ctx.out << text.str();
  return pass ? 0 : 2;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err) {
  CLI::App app("Region-guided masked image modeling on grayscale images",
               args.empty() ? "regionmim" : args[0]);
  app.require_subcommand(1);
  Flags flags;
  using Handler = int (*)(Context&);
  const std::vector<std::tuple<std::string, std::string, Handler>> commands = {
      {"gen-data", "write the synthetic four-class corpus", cmd_gen_data},
      {"pretrain", "self-supervised masked-patch pretraining", cmd_pretrain},
      {"finetune", "train encoder and linear head on labels", cmd_finetune},
      {"eval", "test accuracy and confusion matrix", cmd_eval},
      {"mask-viz", "render patches, valid set and a masking plan", cmd_mask_viz},
      {"sweep", "masking-ratio sweep over strategies", cmd_sweep},
      {"grad-check", "finite-difference check on a tiny model", cmd_grad_check},
  };
  std::vector<CLI::App*> subs;
  for (const auto& [name, help, handler] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    add_common_flags(sub, flags);
    subs.push_back(sub);
  }

  std::vector<const char*> argv;
  for (const std::string& a : args) argv.push_back(a.c_str());
  if (argv.empty()) argv.push_back("regionmim");
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? 0 : 1;
  }

  for (std::size_t i = 0; i < subs.size(); ++i) {
    if (!subs[i]->parsed()) continue;
    const std::string& name = std::get<0>(commands[i]);
    try {
      Context ctx{name, resolve(name, flags), out, err};
      if (flags.print_config) {
        out << ctx.settings.render();
        return 0;
      }
      return std::get<2>(commands[i])(ctx);
    } catch (const ConfigError& e) {
      err << "error: " << e.what() << '\n';
      return 1;
    } catch (const std::exception& e) {
      err << "error: " << e.what() << '\n';
      return 2;
    }
  }
  return 1;
}

}  // namespace regionmim
