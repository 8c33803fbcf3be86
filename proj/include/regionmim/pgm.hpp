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
#include <filesystem>
#include <vector>

namespace regionmim {

// Single-channel image as stored in a PGM file.
struct GrayImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::uint32_t maxval = 255;
  std::vector<std::uint16_t> samples;  // row-major
};

// Reads binary PGM (P5) with maxval up to 65535. Other PNM variants are
// rejected as non-grayscale or unsupported.
GrayImage read_pgm(const std::filesystem::path& path);

// Writes an 8-bit P5 file.
void write_pgm(const std::filesystem::path& path, std::size_t width,
               std::size_t height, const std::vector<std::uint8_t>& samples);

}  // namespace regionmim
