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
#include <optional>
#include <string>
#include <vector>

#include "regionmim/model.hpp"
#include "regionmim/tensor.hpp"

namespace regionmim {

// On-disk layout (all integers little-endian):
//   "RGMM" | u32 version | u32 config length | config text
//   | u32 array count | per array: u32 name length, name, u32 rank,
//     u64 extents[rank] | payload: every array's f64 values in table order
//   | u64 FNV-1a checksum of all preceding bytes
struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;

  // Text configuration, one key=value per entry, sorted by key.
  std::map<std::string, std::string> config;
  std::vector<std::pair<std::string, Tensor>> arrays;

  const Tensor* find(const std::string& name) const;
  void put(const std::string& name, const Tensor& value);
};

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(const std::vector<std::uint8_t>& bytes);

// Writes to a sibling temporary file and renames it into place.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

std::uint64_t fnv1a64(const std::uint8_t* data, std::size_t size);

// Model <-> checkpoint helpers.
void store_model_config(Checkpoint& ckpt, const ModelConfig& config);
ModelConfig read_model_config(const Checkpoint& ckpt);
void store_parameters(Checkpoint& ckpt, std::vector<NamedParameter> params);
// Copies every named array into `params`. A missing array raises
// CheckpointError and a shape mismatch DimensionError, both naming the array.
void restore_parameters(const Checkpoint& ckpt,
                        std::vector<NamedParameter> params);

}  // namespace regionmim
