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

#include <cstdint>
#include <filesystem>
#include <map>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "regionmim/model.hpp"
#include "regionmim/patching.hpp"
#include "regionmim/training.hpp"

namespace regionmim {

enum class SettingType {
  kUnsigned,
  kReal,
  kText,
  kBool,
  kStrategy,
  kSchedule,
  kRatioList,
  kStrategyList,
};

struct SettingSpec {
  std::string key;
  std::string default_value;
  SettingType type;
  std::string help;
};

// Every key the config file accepts, with its default.
const std::vector<SettingSpec>& setting_specs();

// Resolved command-line configuration: defaults, then a config file, then
// flags, each later source overriding the earlier ones. Values are kept as
// the validated text they were given in, so rendering and re-reading a
// resolved config reproduces every number exactly.
class Settings {
 public:
  Settings();

  // Throws ConfigError for an unknown key or a value that does not parse as
  // the key's type. `origin` is prefixed to the message.
  void set(const std::string& key, const std::string& value,
           const std::string& origin = "");

  // Line-oriented `key = value`; `#` starts a comment; blank lines are
  // ignored. Unknown keys, malformed lines and repeated keys are errors.
  void load_file(const std::filesystem::path& path);
  void load_text(const std::string& text, const std::string& origin);

  const std::string& text(const std::string& key) const;
  std::uint64_t unsigned_value(const std::string& key) const;
  std::size_t size_value(const std::string& key) const;
  double real(const std::string& key) const;
  bool flag(const std::string& key) const;
  std::vector<double> ratios(const std::string& key) const;
  std::vector<MaskStrategy> strategies(const std::string& key) const;

  // Sorted `key = value` lines.
  std::string render() const;

  ModelConfig model_config(std::size_t num_classes) const;
  // phase is "pretrain" or "finetune".
  RunConfig run_config(const std::string& phase) const;

 private:
  const SettingSpec& spec(const std::string& key) const;
  std::map<std::string, std::string> values_;
};

// Entry point shared by the executable and the tests. args[0] is the
// program name. Returns 0 on success, 1 for usage or configuration errors,
// 2 for runtime failures.
int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err);

}  // namespace regionmim
