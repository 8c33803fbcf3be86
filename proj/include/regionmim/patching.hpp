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
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "regionmim/tensor.hpp"

namespace regionmim {

// H x W x C image, channel-last row-major, pixel values in [0, 1].
struct ImageGrid {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 1;
  std::vector<double> pixels;

  ImageGrid() = default;
  ImageGrid(std::size_t h, std::size_t w, std::size_t c = 1, double fill = 0.0)
      : height(h), width(w), channels(c), pixels(h * w * c, fill) {}

  double& at(std::size_t y, std::size_t x, std::size_t ch = 0) {
    return pixels[(y * width + x) * channels + ch];
  }
  double at(std::size_t y, std::size_t x, std::size_t ch = 0) const {
    return pixels[(y * width + x) * channels + ch];
  }
  friend bool operator==(const ImageGrid&, const ImageGrid&) = default;
};

// Binary organ-region mask; 1 marks pixels inside the region.
struct MaskImage {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> bits;

  MaskImage() = default;
  MaskImage(std::size_t h, std::size_t w, std::uint8_t fill = 0)
      : height(h), width(w), bits(h * w, fill) {}

  std::uint8_t& at(std::size_t y, std::size_t x) { return bits[y * width + x]; }
  std::uint8_t at(std::size_t y, std::size_t x) const {
    return bits[y * width + x];
  }
  friend bool operator==(const MaskImage&, const MaskImage&) = default;
};

// Non-overlapping T x T tiles of an image in raster order. Row i of
// `patches` holds patch i flattened row-major over pixels, channel-last.
struct PatchGrid {
  std::size_t patch_size = 0;
  std::size_t channels = 1;
  std::size_t grid_rows = 0;
  std::size_t grid_cols = 0;
  Tensor patches;  // [n x (T*T*C)]

  std::size_t count() const { return grid_rows * grid_cols; }
  std::size_t patch_dim() const { return patch_size * patch_size * channels; }
  std::size_t row_of(std::size_t index) const { return index / grid_cols; }
  std::size_t col_of(std::size_t index) const { return index % grid_cols; }
};

PatchGrid split_into_patches(const ImageGrid& image, std::size_t patch_size);

// Inverse of split_into_patches. Each override replaces one patch's values
// (length T*T*C) before reassembly.
ImageGrid reassemble_image(
    const PatchGrid& grid,
    const std::map<std::size_t, std::vector<double>>& overrides = {});

// Indices (ascending) of patches whose footprint has a fraction of set mask
// bits strictly greater than overlap_threshold.
std::vector<std::size_t> compute_valid_set(const MaskImage& mask,
                                           std::size_t patch_size,
                                           double overlap_threshold = 0.0);
// Same, after checking the mask pairs with `image`.
std::vector<std::size_t> compute_valid_set(const ImageGrid& image,
                                           const MaskImage& mask,
                                           std::size_t patch_size,
                                           double overlap_threshold = 0.0);

enum class MaskStrategy { kRegionGuided, kRandom };

std::string_view to_string(MaskStrategy strategy);
// Accepts "region" / "region-guided" and "random".
MaskStrategy parse_mask_strategy(std::string_view text);

struct MaskingPlan {
  std::size_t n = 0;
  double sigma = 0.0;
  MaskStrategy strategy = MaskStrategy::kRegionGuided;
  std::uint64_t seed = 0;
  std::vector<std::size_t> valid;     // ascending
  std::vector<std::size_t> masked;    // ascending, |masked| = m
  std::vector<std::size_t> unmasked;  // ascending, complement of masked
  bool clamped = false;

  std::size_t m() const { return masked.size(); }
  std::size_t u() const { return unmasked.size(); }
  friend bool operator==(const MaskingPlan&, const MaskingPlan&) = default;
};

// m = floor(n * sigma) indices are masked. Region-guided draws them without
// replacement from `valid`; when fewer than m patches are valid, all valid
// patches are masked and the plan is flagged as clamped. Random draws from
// all n patches and ignores `valid` except to record it.
MaskingPlan build_masking_plan(std::size_t n,
                               const std::vector<std::size_t>& valid,
                               double sigma, MaskStrategy strategy,
                               std::uint64_t seed);

}  // namespace regionmim
