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


#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "regionmim/cli.hpp"
#include "regionmim/errors.hpp"

namespace regionmim {
namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = text.find(',', start);
    out.push_back(trim(std::string_view(text).substr(
        start, comma == std::string::npos ? std::string::npos : comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

bool parse_unsigned(const std::string& s, std::uint64_t& out) {
  if (s.empty()) return false;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

bool parse_real(const std::string& s, double& out) {
  if (s.empty()) return false;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size() &&
         std::isfinite(out);
}

bool parse_bool(const std::string& s, bool& out) {
  if (s == "true" || s == "1" || s == "yes") {
    out = true;
    return true;
  }
  if (s == "false" || s == "0" || s == "no") {
    out = false;
    return true;
  }
  return false;
}

// Returns an empty string when `value` is acceptable for `type`.
std::string check_value(SettingType type, const std::string& value) {
  std::uint64_t u;
  double d;
  bool b;
  switch (type) {
    case SettingType::kUnsigned:
      return parse_unsigned(value, u) ? "" : "expected a non-negative integer";
    case SettingType::kReal:
      return parse_real(value, d) ? "" : "expected a real number";
    case SettingType::kText:
      return "";
    case SettingType::kBool:
      return parse_bool(value, b) ? "" : "expected true or false";
    case SettingType::kStrategy:
      parse_mask_strategy(value);
      return "";
    case SettingType::kSchedule:
      parse_lr_schedule(value);
      return "";
    case SettingType::kRatioList:
      for (const std::string& item : split_list(value)) {
        if (!parse_real(item, d) || !(d > 0.0 && d < 1.0)) {
          return "expected comma-separated ratios in (0, 1)";
        }
      }
      return "";
    case SettingType::kStrategyList:
      for (const std::string& item : split_list(value)) parse_mask_strategy(item);
      return "";
  }
  return "";
}

std::vector<SettingSpec> build_specs() {
  using T = SettingType;
  std::vector<SettingSpec> s = {
      {"seed", "0", T::kUnsigned, "base seed for every random stream"},
      {"manifest", "", T::kText, "dataset manifest CSV"},
      {"out", "", T::kText, "output directory"},
      {"checkpoint", "", T::kText, "input checkpoint"},
      {"image_size", "224", T::kUnsigned, "images are resized to this square"},
      {"patch_size", "16", T::kUnsigned, "patch side T"},
      {"mask_strategy", "region", T::kStrategy, "region or random"},
      {"mask_ratio", "0.75", T::kReal, "masking ratio sigma"},
      {"overlap_threshold", "0", T::kReal,
       "patch is valid when its mask fraction exceeds this"},
      {"encoder.depth", "12", T::kUnsigned, "encoder blocks"},
      {"encoder.width", "768", T::kUnsigned, "encoder width D"},
      {"encoder.heads", "12", T::kUnsigned, "encoder attention heads"},
      {"encoder.mlp_dim", "3072", T::kUnsigned, "encoder MLP hidden width"},
      {"encoder.ln_eps", "1e-6", T::kReal, "layer norm epsilon"},
      {"decoder.depth", "8", T::kUnsigned, "decoder blocks"},
      {"decoder.width", "512", T::kUnsigned, "decoder width"},
      {"decoder.heads", "16", T::kUnsigned, "decoder attention heads"},
      {"decoder.mlp_dim", "2048", T::kUnsigned, "decoder MLP hidden width"},
      {"label_fraction", "1", T::kReal, "fraction of labels per class"},
      {"freeze_encoder", "false", T::kBool, "train only the linear head"},
      {"timing", "false", T::kBool, "fill the seconds column of metrics"},
      {"synthetic.size", "32", T::kUnsigned, "generated image side"},
      {"synthetic.samples_per_class", "100", T::kUnsigned, "images per class"},
      {"synthetic.train_fraction", "0.8", T::kReal, "train share per class"},
      {"sweep.ratios", "0.15,0.30,0.45,0.60,0.75,0.90", T::kRatioList,
       "masking ratios to sweep"},
      {"sweep.strategies", "region,random", T::kStrategyList,
       "strategies to sweep"},
      {"viz.index", "0", T::kUnsigned, "manifest record to render"},
      {"gradcheck.h", "1e-5", T::kReal, "finite-difference step"},
  };
  for (const char* phase : {"pretrain", "finetune"}) {
    const std::string p = phase;
    const bool pre = p == "pretrain";
    s.push_back({p + ".epochs", pre ? "40" : "30", T::kUnsigned, "epochs"});
    s.push_back({p + ".batch", "256", T::kUnsigned, "batch size"});
    s.push_back({p + ".lr", "1.5e-4", T::kReal,
                 "base learning rate, scaled by batch/256"});
    s.push_back({p + ".weight_decay", "0.05", T::kReal, "decoupled decay"});
    s.push_back({p + ".beta1", "0.9", T::kReal, "AdamW beta1"});
    s.push_back({p + ".beta2", "0.95", T::kReal, "AdamW beta2"});
    s.push_back({p + ".eps", "1e-8", T::kReal, "AdamW epsilon"});
    s.push_back({p + ".schedule", "constant", T::kSchedule, "constant or cosine"});
    s.push_back({p + ".warmup_epochs", "0", T::kUnsigned, "linear warmup"});
  }
  return s;
}

}  // namespace

const std::vector<SettingSpec>& setting_specs() {
  static const std::vector<SettingSpec> specs = build_specs();
  return specs;
}

Settings::Settings() {
  for (const SettingSpec& s : setting_specs()) values_[s.key] = s.default_value;
}

const SettingSpec& Settings::spec(const std::string& key) const {
  for (const SettingSpec& s : setting_specs()) {
    if (s.key == key) return s;
  }
  throw ConfigError("unknown config key '" + key + "'");
}

void Settings::set(const std::string& key, const std::string& value,
                   const std::string& origin) {
  const std::string prefix = origin.empty() ? "" : origin + ": ";
  const SettingSpec* found = nullptr;
  for (const SettingSpec& s : setting_specs()) {
    if (s.key == key) found = &s;
  }
  if (found == nullptr) {
    throw ConfigError(prefix + "unknown config key '" + key + "'");
  }
  std::string problem;
  try {
    problem = check_value(found->type, value);
  } catch (const ConfigError& e) {
    problem = e.what();
  }
  if (!problem.empty()) {
    throw ConfigError(prefix + "bad value '" + value + "' for " + key + ": " +
                      problem);
  }
  values_[key] = value;
}

void Settings::load_text(const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  std::size_t number = 0;
  std::map<std::string, std::size_t> seen;
  while (std::getline(in, line)) {
    ++number;
    const std::string where = origin + ":" + std::to_string(number);
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const std::size_t eq = body.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(where + ": expected 'key = value'");
    }
    const std::string key = trim(std::string_view(body).substr(0, eq));
    const std::string value = trim(std::string_view(body).substr(eq + 1));
    if (key.empty()) throw ConfigError(where + ": missing key");
    if (auto it = seen.find(key); it != seen.end()) {
      throw ConfigError(where + ": key '" + key + "' already set on line " +
                        std::to_string(it->second));
    }
    seen[key] = number;
    set(key, value, where);
  }
}

void Settings::load_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string() + ": cannot open config file");
  std::ostringstream text;
  text << in.rdbuf();
  load_text(text.str(), path.string());
}

const std::string& Settings::text(const std::string& key) const {
  spec(key);
  return values_.at(key);
}

std::uint64_t Settings::unsigned_value(const std::string& key) const {
  std::uint64_t v = 0;
  parse_unsigned(text(key), v);
  return v;
}

std::size_t Settings::size_value(const std::string& key) const {
  return static_cast<std::size_t>(unsigned_value(key));
}

double Settings::real(const std::string& key) const {
  double v = 0.0;
  parse_real(text(key), v);
  return v;
}

bool Settings::flag(const std::string& key) const {
  bool v = false;
  parse_bool(text(key), v);
  return v;
}

std::vector<double> Settings::ratios(const std::string& key) const {
  std::vector<double> out;
  for (const std::string& item : split_list(text(key))) {
    double v = 0.0;
    parse_real(item, v);
    out.push_back(v);
  }
  return out;
}

std::vector<MaskStrategy> Settings::strategies(const std::string& key) const {
  std::vector<MaskStrategy> out;
  for (const std::string& item : split_list(text(key))) {
    out.push_back(parse_mask_strategy(item));
  }
  return out;
}

std::string Settings::render() const {
  std::ostringstream out;
  for (const auto& [key, value] : values_) out << key << " = " << value << '\n';
  return out.str();
}

ModelConfig Settings::model_config(std::size_t num_classes) const {
  ModelConfig m;
  const std::size_t image = size_value("image_size");
  const std::size_t patch = size_value("patch_size");
  if (patch == 0 || image % patch != 0) {
    throw ConfigError("image_size " + std::to_string(image) +
                      " is not divisible by patch_size " +
                      std::to_string(patch));
  }
  m.encoder.depth = size_value("encoder.depth");
  m.encoder.width = size_value("encoder.width");
  m.encoder.heads = size_value("encoder.heads");
  m.encoder.mlp_dim = size_value("encoder.mlp_dim");
  m.encoder.ln_eps = real("encoder.ln_eps");
  m.encoder.patch_size = patch;
  m.encoder.channels = 1;
  m.encoder.max_tokens = (image / patch) * (image / patch);
  m.decoder.depth = size_value("decoder.depth");
  m.decoder.width = size_value("decoder.width");
  m.decoder.heads = size_value("decoder.heads");
  m.decoder.mlp_dim = size_value("decoder.mlp_dim");
  m.num_classes = num_classes;
  try {
    m.validate();
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  return m;
}

RunConfig Settings::run_config(const std::string& phase) const {
  RunConfig r;
  r.epochs = size_value(phase + ".epochs");
  r.batch_size = size_value(phase + ".batch");
  r.base_lr = real(phase + ".lr");
  r.weight_decay = real(phase + ".weight_decay");
  r.beta1 = real(phase + ".beta1");
  r.beta2 = real(phase + ".beta2");
  r.adam_eps = real(phase + ".eps");
  r.schedule = parse_lr_schedule(text(phase + ".schedule"));
  r.warmup_epochs = size_value(phase + ".warmup_epochs");
  r.sigma = real("mask_ratio");
  r.strategy = parse_mask_strategy(text("mask_strategy"));
  r.overlap_threshold = real("overlap_threshold");
  r.seed = unsigned_value("seed");
  r.validate();
  return r;
}

}  // namespace regionmim
