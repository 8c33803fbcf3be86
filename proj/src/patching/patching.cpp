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

#include "regionmim/patching.hpp"

#include <algorithm>
#include <cmath>

#include "regionmim/errors.hpp"
#include "regionmim/rng.hpp"

namespace regionmim {

namespace {

void check_geometry(std::size_t height, std::size_t width,
                    std::size_t patch_size) {
  if (patch_size == 0 || height == 0 || width == 0 || height % patch_size != 0 ||
      width % patch_size != 0) {
    throw GeometryError("patch size T=" + std::to_string(patch_size) +
                        " must divide image H=" + std::to_string(height) +
                        " and W=" + std::to_string(width));
  }
}

}  // namespace

PatchGrid split_into_patches(const ImageGrid& image, std::size_t patch_size) {
  check_geometry(image.height, image.width, patch_size);
  if (image.channels == 0 ||
      image.pixels.size() != image.height * image.width * image.channels) {
    throw GeometryError("image buffer does not match its H x W x C");
  }
  PatchGrid grid;
  grid.patch_size = patch_size;
  grid.channels = image.channels;
  grid.grid_rows = image.height / patch_size;
  grid.grid_cols = image.width / patch_size;
  const std::size_t row_len = patch_size * image.channels;
  grid.patches = Tensor({grid.count(), grid.patch_dim()});
  for (std::size_t p = 0; p < grid.count(); ++p) {
    const std::size_t y0 = grid.row_of(p) * patch_size;
    const std::size_t x0 = grid.col_of(p) * patch_size;
    double* dst = grid.patches.data() + p * grid.patch_dim();
    for (std::size_t dy = 0; dy < patch_size; ++dy) {
      const double* src =
          image.pixels.data() + ((y0 + dy) * image.width + x0) * image.channels;
      std::copy_n(src, row_len, dst + dy * row_len);
    }
  }
  return grid;
}

ImageGrid reassemble_image(
    const PatchGrid& grid,
    const std::map<std::size_t, std::vector<double>>& overrides) {
  const std::size_t t = grid.patch_size;
  ImageGrid image(grid.grid_rows * t, grid.grid_cols * t, grid.channels);
  const std::size_t row_len = t * grid.channels;
  for (const auto& [index, values] : overrides) {
    if (index >= grid.count()) {
      throw GeometryError("override index " + std::to_string(index) +
                          " out of range for " + std::to_string(grid.count()) +
                          " patches");
    }
    if (values.size() != grid.patch_dim()) {
      throw DimensionError("override for patch " + std::to_string(index) +
                           " has " + std::to_string(values.size()) +
                           " values, expected " +
                           std::to_string(grid.patch_dim()));
    }
  }
  for (std::size_t p = 0; p < grid.count(); ++p) {
    const auto it = overrides.find(p);
    const double* src = it != overrides.end()
                            ? it->second.data()
                            : grid.patches.data() + p * grid.patch_dim();
    const std::size_t y0 = grid.row_of(p) * t;
    const std::size_t x0 = grid.col_of(p) * t;
    for (std::size_t dy = 0; dy < t; ++dy) {
      double* dst =
          image.pixels.data() + ((y0 + dy) * image.width + x0) * grid.channels;
      std::copy_n(src + dy * row_len, row_len, dst);
    }
  }
  return image;
}

std::vector<std::size_t> compute_valid_set(const MaskImage& mask,
                                           std::size_t patch_size,
                                           double overlap_threshold) {
  check_geometry(mask.height, mask.width, patch_size);
  if (!(overlap_threshold >= 0.0 && overlap_threshold < 1.0)) {
    throw ContractError("overlap threshold must lie in [0, 1)");
  }
  const std::size_t cols = mask.width / patch_size;
  const std::size_t rows = mask.height / patch_size;
  // Per-patch counts from a single pass over the mask.
  std::vector<std::size_t> counts(rows * cols, 0);
  for (std::size_t y = 0; y < mask.height; ++y) {
    const std::size_t prow = y / patch_size;
    for (std::size_t x = 0; x < mask.width; ++x) {
      if (mask.bits[y * mask.width + x] != 0) {
        ++counts[prow * cols + x / patch_size];
      }
    }
  }
  const double area = static_cast<double>(patch_size * patch_size);
  std::vector<std::size_t> valid;
  for (std::size_t p = 0; p < counts.size(); ++p) {
    if (static_cast<double>(counts[p]) / area > overlap_threshold) {
      valid.push_back(p);
    }
  }
  return valid;
}

std::vector<std::size_t> compute_valid_set(const ImageGrid& image,
                                           const MaskImage& mask,
                                           std::size_t patch_size,
                                           double overlap_threshold) {
  if (image.height != mask.height || image.width != mask.width) {
    throw GeometryError("mask " + std::to_string(mask.height) + "x" +
                        std::to_string(mask.width) + " does not match image " +
                        std::to_string(image.height) + "x" +
                        std::to_string(image.width));
  }
  return compute_valid_set(mask, patch_size, overlap_threshold);
}

std::string_view to_string(MaskStrategy strategy) {
  return strategy == MaskStrategy::kRegionGuided ? "region" : "random";
}

MaskStrategy parse_mask_strategy(std::string_view text) {
  if (text == "region" || text == "region-guided") {
    return MaskStrategy::kRegionGuided;
  }
  if (text == "random") return MaskStrategy::kRandom;
  throw ConfigError("unknown mask strategy '" + std::string(text) +
                    "' (expected region or random)");
}

MaskingPlan build_masking_plan(std::size_t n,
                               const std::vector<std::size_t>& valid,
                               double sigma, MaskStrategy strategy,
                               std::uint64_t seed) {
  if (n == 0) throw ContractError("masking plan needs at least one patch");
  if (!(sigma > 0.0 && sigma < 1.0)) {
    throw ContractError("masking ratio must lie in (0, 1), got " +
                        std::to_string(sigma));
  }
  MaskingPlan plan;
  plan.n = n;
  plan.sigma = sigma;
  plan.strategy = strategy;
  plan.seed = seed;
  plan.valid = valid;
  std::sort(plan.valid.begin(), plan.valid.end());
  plan.valid.erase(std::unique(plan.valid.begin(), plan.valid.end()),
                   plan.valid.end());
  if (!plan.valid.empty() && plan.valid.back() >= n) {
    throw ContractError("valid index " + std::to_string(plan.valid.back()) +
                        " out of range for n=" + std::to_string(n));
  }

  // The small slack absorbs representation error such as 100 * 0.29.
  std::size_t m = static_cast<std::size_t>(
      std::floor(static_cast<double>(n) * sigma + 1e-9));
  m = std::min(m, n);

  std::vector<std::size_t> pool;
  if (strategy == MaskStrategy::kRegionGuided) {
    if (plan.valid.empty()) {
      throw StrategyError(
          "region-guided masking needs at least one valid patch");
    }
    pool = plan.valid;
    if (pool.size() < m) {
      m = pool.size();
      plan.clamped = true;
    }
  } else {
    pool.resize(n);
    for (std::size_t i = 0; i < n; ++i) pool[i] = i;
  }

  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(pool));
  plan.masked.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(m));
  std::sort(plan.masked.begin(), plan.masked.end());

  std::vector<char> is_masked(n, 0);
  for (std::size_t i : plan.masked) is_masked[i] = 1;
  for (std::size_t i = 0; i < n; ++i) {
    if (!is_masked[i]) plan.unmasked.push_back(i);
  }
  return plan;
}

}  // namespace regionmim
